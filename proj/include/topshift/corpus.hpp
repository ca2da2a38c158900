#pragma once

// Dataset ingestion (TOP-style files), synthetic corpus generation, SPIS
// low-resource sampling and corpus statistics.

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "topshift/transitions.hpp"
#include "topshift/tree.hpp"

namespace topshift {

struct DataError : Error {
  DataError(const std::string& msg, int line_number = -1) : Error(msg), line(line_number) {}
  int line;
};

enum class DatasetFormat {
  Lines,  // one serialized tree per line; utterance = leaves
  Tsv3,   // raw utterance \t tokenized utterance \t tree
};

std::optional<DatasetFormat> format_from_name(const std::string& name);

struct Dataset {
  struct Example {
    TopTree tree;
    std::string provenance;  // split/source tag, preserved by concatenation
  };
  std::vector<Example> examples;
  LabelVocab label_vocab;  // union of labels present
  std::string split_tag;

  size_t size() const { return examples.size(); }
  void add(TopTree tree, std::string provenance = "");
  void append(const Dataset& other);  // keeps other's provenance tags
};

// Throws DataError with the offending line number: ParseErrorAt /
// LeafMismatchAt / EmptyFile conditions all map here.
Dataset load_dataset(const std::string& path, DatasetFormat format);
void save_dataset(const Dataset& dataset, const std::string& path, DatasetFormat format);

// Seeded random grammar over intent/slot labels. Utterances are generated so
// that the token sequence determines the tree: each constituent opens with
// an anchor token derived from its label (intent anchors also encode the
// child count, token-slot anchors the filler count), nested intents hang
// under the slot label paired with them, and filler tokens come from
// `filler_tokens`.
struct GrammarSpec {
  std::vector<std::string> intent_names;
  std::vector<std::string> slot_names;
  int max_depth = 5;     // constituent levels; >= 1
  int max_children = 4;  // children per intent, including the anchor token
  std::vector<std::string> filler_tokens;
  double compositional_prob = 0.0;  // chance a slot nests an intent
  std::uint64_t seed = 42;

  static GrammarSpec load(const std::string& path);  // flat key=value file
};

struct GenReport {
  double compositional_fraction = 0.0;
  int resampled = 0;  // examples regenerated to cover missing labels
};

struct InfeasibleSpecError : Error {
  using Error::Error;
};

// Deterministic under spec.seed; every generated tree is valid; every label
// in the spec appears at least once (rejection-resampled).
Dataset gen_synthetic(const GrammarSpec& spec, int count, GenReport* report = nullptr);

struct SpisReport {
  size_t selected = 0;
  std::vector<Label> under_supported;  // total support below the requested spis
};

// Shuffle with `seed`, then keep the shortest prefix in which every label of
// `dataset` reaches support >= min(spis, its total support). Monotone in
// spis under a fixed seed.
Dataset spis_sample(const Dataset& dataset, int spis, std::uint64_t seed,
                    SpisReport* report = nullptr);

struct DatasetStats {
  size_t example_count = 0;
  int intent_labels = 0;
  int slot_labels = 0;
  double compositional_fraction = 0.0;  // depth > 2
  double mean_utterance_length = 0.0;
  double mean_tree_depth = 0.0;
  int max_tree_depth = 0;
  std::string str() const;
};

DatasetStats dataset_stats(const Dataset& dataset);  // throws DataError on empty

// Support counter used by SPIS: number of examples containing `label`.
int count_label_support(const Dataset& dataset, const Label& label);

}  // namespace topshift
