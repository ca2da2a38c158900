#include "topshift/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <deque>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "topshift/kvfile.hpp"

namespace topshift {

std::optional<DatasetFormat> format_from_name(const std::string& name) {
  if (name == "lines") return DatasetFormat::Lines;
  if (name == "tsv3") return DatasetFormat::Tsv3;
  return std::nullopt;
}

namespace {

void collect_labels(const NodePtr& node, LabelVocab& vocab) {
  if (node->is_token()) return;
  vocab.add(node->label());
  for (const auto& c : node->children()) collect_labels(c, vocab);
}

void collect_label_set(const NodePtr& node, std::set<std::pair<int, std::string>>& out) {
  if (node->is_token()) return;
  out.insert({node->label().kind == LabelKind::Intent ? 0 : 1, node->label().name});
  for (const auto& c : node->children()) collect_label_set(c, out);
}

}  // namespace

void Dataset::add(TopTree tree, std::string provenance) {
  collect_labels(tree.root(), label_vocab);
  examples.push_back({std::move(tree), std::move(provenance)});
}

void Dataset::append(const Dataset& other) {
  for (const auto& ex : other.examples) {
    examples.push_back(ex);
    collect_labels(ex.tree.root(), label_vocab);
  }
}

Dataset load_dataset(const std::string& path, DatasetFormat format) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset file '" + path + "'");
  Dataset dataset;
  dataset.split_tag = path;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::string tree_text = line;
    std::string tokenized;
    if (format == DatasetFormat::Tsv3) {
      size_t t1 = line.find('\t');
      size_t t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
      if (t2 == std::string::npos) {
        throw DataError("line " + std::to_string(line_no) + ": expected 3 tab-separated columns",
                        line_no);
      }
      tokenized = line.substr(t1 + 1, t2 - t1 - 1);
      tree_text = line.substr(t2 + 1);
    }
    try {
      TopTree tree = parse_tree(tree_text);
      if (format == DatasetFormat::Tsv3 &&
          tree.utterance() != Utterance::tokenize(tokenized)) {
        throw DataError("line " + std::to_string(line_no) +
                            ": tree leaves do not match the tokenized utterance",
                        line_no);
      }
      dataset.add(std::move(tree), path);
    } catch (const TreeError& e) {
      throw DataError("line " + std::to_string(line_no) + ": " + e.what(), line_no);
    }
  }
  if (dataset.examples.empty()) {
    throw DataError("dataset file '" + path + "' contains no examples");
  }
  return dataset;
}

void save_dataset(const Dataset& dataset, const std::string& path, DatasetFormat format) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write dataset file '" + path + "'");
  for (const auto& ex : dataset.examples) {
    if (format == DatasetFormat::Tsv3) {
      out << ex.tree.utterance().str() << '\t' << ex.tree.utterance().str() << '\t';
    }
    out << serialize_tree(ex.tree) << '\n';
  }
}

GrammarSpec GrammarSpec::load(const std::string& path) {
  auto kv = parse_kv_file(path);
  GrammarSpec spec;
  auto get = [&](const char* key) -> std::optional<std::string> {
    auto it = kv.find(key);
    if (it == kv.end()) return std::nullopt;
    return it->second;
  };
  if (auto v = get("intents")) spec.intent_names = split_csv(*v);
  if (auto v = get("slots")) spec.slot_names = split_csv(*v);
  if (auto v = get("tokens")) spec.filler_tokens = split_csv(*v);
  if (auto v = get("max_depth")) spec.max_depth = std::stoi(*v);
  if (auto v = get("max_children")) spec.max_children = std::stoi(*v);
  if (auto v = get("compositional_prob")) spec.compositional_prob = std::stod(*v);
  if (auto v = get("seed")) spec.seed = std::stoull(*v);
  return spec;
}

namespace {

std::string lower(const std::string& s) {
  std::string out = s;
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

// Labels still missing from the corpus; generation prefers them at each
// label choice point so coverage resampling converges quickly.
struct CoverageBias {
  std::deque<std::string> intents;
  std::deque<std::string> slots;

  std::optional<std::string> take(LabelKind kind) {
    auto& q = kind == LabelKind::Intent ? intents : slots;
    if (q.empty()) return std::nullopt;
    std::string name = q.front();
    q.pop_front();
    return name;
  }
};

class Generator {
 public:
  Generator(const GrammarSpec& spec, std::mt19937_64& rng) : spec_(spec), rng_(rng) {}

  TopTree generate(CoverageBias* bias) {
    bias_ = bias;
    int next_pos = 1;
    NodePtr root = gen_intent(1, next_pos);
    std::vector<std::string> tokens;
    collect_words(root, tokens);
    return TopTree(root, Utterance(std::move(tokens)));
  }

 private:
  const GrammarSpec& spec_;
  std::mt19937_64& rng_;
  CoverageBias* bias_ = nullptr;

  int uniform(int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng_);
  }
  bool coin(double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_) < p; }

  std::string pick_name(const std::vector<std::string>& names, LabelKind kind) {
    if (bias_) {
      if (auto forced = bias_->take(kind)) return *forced;
    }
    return names[static_cast<size_t>(uniform(0, static_cast<int>(names.size()) - 1))];
  }

  static void collect_words(const NodePtr& node, std::vector<std::string>& out) {
    if (node->is_token()) {
      out.push_back(node->word());
      return;
    }
    for (const auto& c : node->children()) collect_words(c, out);
  }

  bool can_nest(int depth) const {
    return depth + 2 <= spec_.max_depth && !spec_.slot_names.empty();
  }
  bool can_token_slot(int depth) const {
    return depth + 1 <= spec_.max_depth && !spec_.slot_names.empty() &&
           !spec_.filler_tokens.empty();
  }

  NodePtr gen_intent(int depth, int& next_pos) {
    std::string name = pick_name(spec_.intent_names, LabelKind::Intent);
    int extra = uniform(0, spec_.max_children - 1);
    std::vector<NodePtr> children;
    // Anchor token identifies the intent label and its child count, so the
    // token sequence determines the tree.
    children.push_back(Node::token(next_pos++, "i" + lower(name) + std::to_string(extra)));
    for (int i = 0; i < extra; ++i) {
      if (can_nest(depth) && coin(spec_.compositional_prob)) {
        NodePtr inner = gen_intent(depth + 2, next_pos);
        children.push_back(Node::constituent(Label::slot(paired_slot(inner->label().name)),
                                             {inner}));
      } else if (can_token_slot(depth) && coin(0.6)) {
        children.push_back(gen_token_slot(next_pos));
      } else if (!spec_.filler_tokens.empty()) {
        children.push_back(gen_filler(next_pos));
      } else if (can_token_slot(depth)) {
        children.push_back(gen_token_slot(next_pos));
      }
      // otherwise: nothing can be generated here; drop the child slot
    }
    return Node::constituent(Label::intent(name), std::move(children));
  }

  NodePtr gen_token_slot(int& next_pos) {
    std::string name = pick_name(spec_.slot_names, LabelKind::Slot);
    int fillers = uniform(1, std::min<int>(2, static_cast<int>(spec_.filler_tokens.size())));
    std::vector<NodePtr> children;
    children.push_back(Node::token(next_pos++, "s" + lower(name) + std::to_string(fillers)));
    for (int i = 0; i < fillers; ++i) children.push_back(gen_filler(next_pos));
    return Node::constituent(Label::slot(name), std::move(children));
  }

  NodePtr gen_filler(int& next_pos) {
    const auto& v = spec_.filler_tokens;
    return Node::token(next_pos++,
                       v[static_cast<size_t>(uniform(0, static_cast<int>(v.size()) - 1))]);
  }

  // Intent label -> the slot label that wraps it when nested.
  std::string paired_slot(const std::string& intent_name) const {
    size_t idx = 0;
    for (size_t i = 0; i < spec_.intent_names.size(); ++i) {
      if (spec_.intent_names[i] == intent_name) {
        idx = i;
        break;
      }
    }
    return spec_.slot_names[idx % spec_.slot_names.size()];
  }
};

void validate_spec(const GrammarSpec& spec) {
  if (spec.intent_names.empty()) throw InfeasibleSpecError("grammar needs >= 1 intent label");
  if (spec.max_depth < 1) throw InfeasibleSpecError("max_depth must be >= 1");
  if (spec.max_children < 1) throw InfeasibleSpecError("max_children must be >= 1");
  for (const auto& n : spec.intent_names) {
    if (!Label::is_valid_name(n)) throw InfeasibleSpecError("bad intent name '" + n + "'");
  }
  for (const auto& n : spec.slot_names) {
    if (!Label::is_valid_name(n)) throw InfeasibleSpecError("bad slot name '" + n + "'");
  }
  if (!spec.slot_names.empty()) {
    bool token_slots_possible = spec.max_depth >= 2 && !spec.filler_tokens.empty();
    bool nested_slots_possible = spec.max_depth >= 3 && spec.compositional_prob > 0.0;
    if (!token_slots_possible && !nested_slots_possible) {
      throw InfeasibleSpecError("slot labels declared but no slot can ever be generated "
                                "(depth/token limits)");
    }
    if (spec.max_children < 2) {
      throw InfeasibleSpecError("slot labels declared but intents admit no non-anchor children");
    }
  }
}

std::set<std::pair<int, std::string>> spec_label_set(const GrammarSpec& spec) {
  std::set<std::pair<int, std::string>> want;
  for (const auto& n : spec.intent_names) want.insert({0, n});
  for (const auto& n : spec.slot_names) want.insert({1, n});
  return want;
}

}  // namespace

Dataset gen_synthetic(const GrammarSpec& spec, int count, GenReport* report) {
  if (count < 1) throw InfeasibleSpecError("count must be >= 1");
  validate_spec(spec);
  std::mt19937_64 rng(spec.seed);
  Generator gen(spec, rng);

  std::vector<TopTree> trees;
  trees.reserve(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) trees.push_back(gen.generate(nullptr));

  // Coverage: every declared label must appear at least once.
  int resampled = 0;
  const auto want = spec_label_set(spec);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    std::set<std::pair<int, std::string>> seen;
    for (const auto& t : trees) collect_label_set(t.root(), seen);
    CoverageBias bias;
    for (const auto& [kind, name] : want) {
      if (seen.count({kind, name})) continue;
      (kind == 0 ? bias.intents : bias.slots).push_back(name);
    }
    if (bias.intents.empty() && bias.slots.empty()) break;
    if (attempt == 999) {
      throw InfeasibleSpecError("could not cover all labels after 1000 resampling rounds");
    }
    trees[static_cast<size_t>(resampled % count)] = gen.generate(&bias);
    ++resampled;
  }

  Dataset dataset;
  dataset.split_tag = "synthetic";
  int compositional = 0;
  for (auto& t : trees) {
    if (tree_stats(t).is_compositional) ++compositional;
    dataset.add(std::move(t), "synthetic");
  }
  if (report) {
    report->compositional_fraction = static_cast<double>(compositional) / count;
    report->resampled = resampled;
  }
  return dataset;
}

int count_label_support(const Dataset& dataset, const Label& label) {
  int support = 0;
  for (const auto& ex : dataset.examples) {
    std::set<std::pair<int, std::string>> seen;
    collect_label_set(ex.tree.root(), seen);
    if (seen.count({label.kind == LabelKind::Intent ? 0 : 1, label.name})) ++support;
  }
  return support;
}

Dataset spis_sample(const Dataset& dataset, int spis, std::uint64_t seed, SpisReport* report) {
  std::vector<size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<Label> all_labels;
  for (const auto& l : dataset.label_vocab.intents) all_labels.push_back(l);
  for (const auto& l : dataset.label_vocab.slots) all_labels.push_back(l);

  std::map<std::string, int> targets;  // label str -> min(spis, total support)
  std::vector<Label> under;
  for (const auto& l : all_labels) {
    int total = count_label_support(dataset, l);
    targets[l.str()] = std::min(spis, total);
    if (total < spis) under.push_back(l);
  }

  std::map<std::string, int> counts;
  Dataset sample;
  sample.split_tag = dataset.split_tag + ":spis" + std::to_string(spis);
  auto satisfied = [&]() {
    for (const auto& [label, target] : targets) {
      auto it = counts.find(label);
      if ((it == counts.end() ? 0 : it->second) < target) return false;
    }
    return true;
  };
  for (size_t idx : order) {
    if (satisfied()) break;
    const auto& ex = dataset.examples[idx];
    std::set<std::pair<int, std::string>> seen;
    collect_label_set(ex.tree.root(), seen);
    for (const auto& [kind, name] : seen) {
      counts[(kind == 0 ? "IN:" : "SL:") + name] += 1;
    }
    sample.add(ex.tree, ex.provenance);
  }
  if (report) {
    report->selected = sample.size();
    report->under_supported = under;
  }
  return sample;
}

DatasetStats dataset_stats(const Dataset& dataset) {
  if (dataset.examples.empty()) throw DataError("dataset is empty");
  DatasetStats stats;
  stats.example_count = dataset.size();
  stats.intent_labels = static_cast<int>(dataset.label_vocab.intents.size());
  stats.slot_labels = static_cast<int>(dataset.label_vocab.slots.size());
  double depth_sum = 0.0, length_sum = 0.0;
  int compositional = 0;
  for (const auto& ex : dataset.examples) {
    auto ts = tree_stats(ex.tree);
    depth_sum += ts.depth;
    length_sum += ex.tree.utterance().size();
    stats.max_tree_depth = std::max(stats.max_tree_depth, ts.depth);
    if (ts.is_compositional) ++compositional;
  }
  stats.compositional_fraction = static_cast<double>(compositional) / dataset.size();
  stats.mean_utterance_length = length_sum / static_cast<double>(dataset.size());
  stats.mean_tree_depth = depth_sum / static_cast<double>(dataset.size());
  return stats;
}

std::string DatasetStats::str() const {
  std::ostringstream out;
  out << "examples\t" << example_count << '\n'
      << "intent_labels\t" << intent_labels << '\n'
      << "slot_labels\t" << slot_labels << '\n'
      << "compositional\t" << compositional_fraction * 100.0 << "%\n"
      << "mean_utterance_length\t" << mean_utterance_length << '\n'
      << "mean_tree_depth\t" << mean_tree_depth << '\n'
      << "max_tree_depth\t" << max_tree_depth << '\n';
  return out.str();
}

}  // namespace topshift
