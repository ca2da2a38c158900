// topshift: shift-reduce task-oriented semantic parsing toolkit.
//
// Subcommands: validate, stats, oracle, gen, spis, train, parse, eval.
// Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "topshift/corpus.hpp"
#include "topshift/kvfile.hpp"
#include "topshift/masks.hpp"
#include "topshift/metrics.hpp"
#include "topshift/nn/scorer.hpp"
#include "topshift/nn/train.hpp"
#include "topshift/oracle.hpp"
#include "topshift/search.hpp"

using namespace topshift;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::uint64_t default_seed(std::uint64_t fallback) {
  if (const char* env = std::getenv("TOPSHIFT_SEED")) {
    return std::strtoull(env, nullptr, 10);
  }
  return fallback;
}

DatasetFormat parse_format(const std::string& name) {
  auto fmt = format_from_name(name);
  if (!fmt) throw UsageError("unknown dataset format '" + name + "'");
  return *fmt;
}

SystemKind parse_system(const std::string& name) {
  auto system = system_from_name(name);
  if (!system) throw UsageError("unknown transition system '" + name + "'");
  return *system;
}

int cmd_validate(const std::string& path, const std::string& format) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  const bool tsv = parse_format(format) == DatasetFormat::Tsv3;
  std::string line;
  int line_no = 0, bad = 0, total = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ++total;
    std::string tree_text = line;
    std::string tokenized;
    if (tsv) {
      size_t t1 = line.find('\t');
      size_t t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
      if (t2 == std::string::npos) {
        std::cout << "line " << line_no << ": expected 3 tab-separated columns\n";
        ++bad;
        continue;
      }
      tokenized = line.substr(t1 + 1, t2 - t1 - 1);
      tree_text = line.substr(t2 + 1);
    }
    try {
      TopTree tree = parse_tree(tree_text);
      if (tsv && tree.utterance() != Utterance::tokenize(tokenized)) {
        std::cout << "line " << line_no << ": tree leaves do not match column 2\n";
        ++bad;
      }
    } catch (const TreeError& e) {
      std::cout << "line " << line_no << ": " << e.what() << "\n";
      ++bad;
    }
  }
  std::cout << (total - bad) << "/" << total << " lines valid\n";
  return bad == 0 ? 0 : 2;
}

int cmd_stats(const std::string& path, const std::string& format) {
  Dataset dataset = load_dataset(path, parse_format(format));
  std::cout << dataset_stats(dataset).str();
  return 0;
}

int cmd_oracle(const std::string& path, const std::string& format, const std::string& system_name,
               bool dump_masks) {
  Dataset dataset = load_dataset(path, parse_format(format));
  const SystemKind system = parse_system(system_name);
  for (const auto& ex : dataset.examples) {
    auto actions = oracle_actions(ex.tree, system);
    std::cout << format_action_sequence(actions) << "\n";
    if (dump_masks) {
      Configuration config = init_config(ex.tree.utterance(), system);
      MaskPair masks = initial_masks(ex.tree.utterance().size());
      std::cout << format_mask_step(0, masks) << "\n";
      for (size_t t = 0; t < actions.size(); ++t) {
        masks = update_masks(masks, actions[t], config);
        config = apply_action(config, actions[t]);
        std::cout << format_mask_step(static_cast<int>(t) + 1, masks) << "\n";
      }
    }
  }
  return 0;
}

int cmd_gen(const std::string& spec_path, int count, std::uint64_t seed, bool seed_given,
            const std::string& out_path, const std::string& format) {
  GrammarSpec spec = GrammarSpec::load(spec_path);
  if (seed_given) {
    spec.seed = seed;
  } else {
    spec.seed = default_seed(spec.seed);
  }
  GenReport report;
  Dataset dataset = gen_synthetic(spec, count, &report);
  save_dataset(dataset, out_path, parse_format(format));
  std::cout << "generated " << dataset.size() << " examples, "
            << report.compositional_fraction * 100.0 << "% compositional";
  if (report.resampled) std::cout << ", " << report.resampled << " resampled for coverage";
  std::cout << "\n";
  return 0;
}

int cmd_spis(const std::string& path, const std::string& format, int n, std::uint64_t seed,
             const std::string& out_path) {
  Dataset dataset = load_dataset(path, parse_format(format));
  SpisReport report;
  Dataset sample = spis_sample(dataset, n, seed, &report);
  save_dataset(sample, out_path, parse_format(format));
  std::cout << "selected " << report.selected << " of " << dataset.size() << " examples\n";
  for (const auto& label : report.under_supported) {
    std::cout << "under-supported: " << label.str() << " (total support below " << n << ")\n";
  }
  return 0;
}

int cmd_train(const std::string& train_path, const std::string& valid_path,
              const std::string& format, const std::string& system_name,
              const std::string& config_path, const std::string& model_out) {
  Dataset train_set = load_dataset(train_path, parse_format(format));
  Dataset valid_set = load_dataset(valid_path, parse_format(format));
  nn::ModelConfig mc;
  nn::TrainConfig tc = nn::TrainConfig::desk();
  tc.seed = default_seed(tc.seed);
  if (!config_path.empty()) {
    nn::TrainConfig::apply(parse_kv_file(config_path), mc, tc);
  }
  auto result = nn::train(train_set, valid_set, parse_system(system_name), mc, tc, &std::cerr);
  result.params.save(model_out);
  std::cout << "best_val_em " << result.best_val_em << "\n";
  std::cout << "saved " << model_out << "\n";
  return 0;
}

Eigen::MatrixXd load_embedding_file(const std::string& path, int n, int d) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open embeddings file '" + path + "'");
  Eigen::MatrixXd e(n, d);
  std::string line;
  int row = 0;
  while (std::getline(in, line) && row < n) {
    std::istringstream is(line);
    for (int j = 0; j < d; ++j) {
      if (!(is >> e(row, j))) {
        throw DataError("embeddings line " + std::to_string(row + 1) + ": expected " +
                        std::to_string(d) + " floats");
      }
    }
    ++row;
  }
  if (row != n) {
    throw DataError("embeddings file has " + std::to_string(row) + " rows, utterance has " +
                    std::to_string(n) + " tokens");
  }
  return e;
}

int cmd_parse(const std::string& model_path, const std::string& input_path, int beam,
              bool with_trace, const std::string& embeddings_path) {
  nn::ModelParams params = nn::ModelParams::load(model_path);
  std::ifstream file;
  std::istream* in = &std::cin;
  if (!input_path.empty() && input_path != "-") {
    file.open(input_path);
    if (!file) throw DataError("cannot open input '" + input_path + "'");
    in = &file;
  }
  std::string line;
  while (std::getline(*in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Utterance utterance = Utterance::tokenize(line);
    try {
      ParseHypothesis hyp = [&] {
        if (!embeddings_path.empty()) {
          auto frozen = load_embedding_file(embeddings_path, utterance.size(),
                                            params.config.d_model);
          nn::NeuralScorer scorer(params, frozen);
          if (beam <= 1) {
            return greedy_parse(utterance, scorer, params.system, params.label_vocab);
          }
          return beam_parse(utterance, scorer, params.system, params.label_vocab, beam)[0];
        }
        if (beam <= 1) return nn::greedy_parse(utterance, params);
        return nn::beam_parse(utterance, params, beam)[0];
      }();
      std::cout << utterance.str() << '\t' << serialize_tree(hyp.tree) << '\t'
                << hyp.log_prob;
      if (with_trace) std::cout << '\t' << format_action_sequence(hyp.trace);
      std::cout << "\n";
    } catch (const StepLimitError& e) {
      std::cout << utterance.str() << "\tPARSE_FAILED\t" << e.what() << "\n";
    }
  }
  return 0;
}

int cmd_eval(const std::string& pred_path, const std::string& gold_path,
             const std::string& format, const std::string& breakdown) {
  Dataset pred = load_dataset(pred_path, parse_format(format));
  Dataset gold = load_dataset(gold_path, parse_format(format));
  std::vector<TopTree> p, g;
  for (const auto& ex : pred.examples) p.push_back(ex.tree);
  for (const auto& ex : gold.examples) g.push_back(ex.tree);
  const double em = exact_match(p, g);
  const auto f1 = labeled_bracketing_f1(p, g);
  const auto tf1 = tree_labeled_f1(p, g);
  std::cout << std::fixed << std::setprecision(2) << "EM=" << em * 100.0
            << " F1=" << f1.f1 * 100.0 << " TF1=" << tf1.f1 * 100.0 << "\n";
  if (!breakdown.empty()) {
    std::vector<BreakdownAxis> axes;
    for (const auto& name : split_csv(breakdown)) axes.push_back(axis_from_name(name));
    std::cout << breakdown_report(p, g, axes).tsv();
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"shift-reduce task-oriented semantic parsing"};
  app.require_subcommand(1);

  std::string path, format = "lines", system_name = "inorder";
  std::string out_path, spec_path, config_path, model_path;
  std::string train_path, valid_path, pred_path, gold_path, breakdown, embeddings_path;
  std::string input_path;
  int count = 1000, spis_n = 25, beam = 1;
  std::uint64_t seed = 42;
  bool dump_masks = false, with_trace = false;

  auto* validate = app.add_subcommand("validate", "check dataset well-formedness");
  validate->add_option("file", path)->required();
  validate->add_option("--format", format, "lines|tsv3");

  auto* stats = app.add_subcommand("stats", "dataset statistics");
  stats->add_option("file", path)->required();
  stats->add_option("--format", format);

  auto* oracle = app.add_subcommand("oracle", "emit gold action sequences");
  oracle->add_option("file", path)->required();
  oracle->add_option("--format", format);
  oracle->add_option("--system", system_name, "topdown|bottomup|inorder")->required();
  oracle->add_flag("--dump-masks", dump_masks, "print attention-mask updates per step");

  auto* gen = app.add_subcommand("gen", "generate a synthetic dataset");
  gen->add_option("--spec", spec_path, "grammar spec (key=value)")->required();
  gen->add_option("--count", count)->required();
  auto* gen_seed = gen->add_option("--seed", seed);
  gen->add_option("-o,--out", out_path)->required();
  gen->add_option("--format", format);

  auto* spis = app.add_subcommand("spis", "SPIS low-resource sampling");
  spis->add_option("file", path)->required();
  spis->add_option("--format", format);
  spis->add_option("--n", spis_n, "samples per intent and slot")->required();
  spis->add_option("--seed", seed);
  spis->add_option("-o,--out", out_path)->required();

  auto* train = app.add_subcommand("train", "train a parser");
  train->add_option("--train", train_path)->required();
  train->add_option("--valid", valid_path)->required();
  train->add_option("--format", format);
  train->add_option("--system", system_name)->required();
  train->add_option("--config", config_path, "key=value hyperparameters");
  train->add_option("--model", model_path, "checkpoint output path")->required();

  auto* parse = app.add_subcommand("parse", "parse utterances (one per line)");
  parse->add_option("--model", model_path)->required();
  parse->add_option("--beam", beam, "beam size (1 = greedy)");
  parse->add_flag("--trace", with_trace, "append the action trace column");
  parse->add_option("--embeddings", embeddings_path,
                    "frozen per-position embedding file for a single utterance");
  parse->add_option("input", input_path, "input file ('-' = stdin)");

  auto* eval = app.add_subcommand("eval", "score predictions against gold");
  eval->add_option("--pred", pred_path)->required();
  eval->add_option("--gold", gold_path)->required();
  eval->add_option("--format", format);
  eval->add_option("--breakdown", breakdown,
                   "axes: utterance_length_bins,intents_per_utterance,span_length_bins,"
                   "nonterminal_label");

  CLI11_PARSE(app, argc, argv);

  try {
    if (validate->parsed()) return cmd_validate(path, format);
    if (stats->parsed()) return cmd_stats(path, format);
    if (oracle->parsed()) return cmd_oracle(path, format, system_name, dump_masks);
    if (gen->parsed()) {
      return cmd_gen(spec_path, count, seed, gen_seed->count() > 0, out_path, format);
    }
    if (spis->parsed()) {
      if (!spis->get_option("--seed")->count()) seed = default_seed(seed);
      return cmd_spis(path, format, spis_n, seed, out_path);
    }
    if (train->parsed()) {
      return cmd_train(train_path, valid_path, format, system_name, config_path, model_path);
    }
    if (parse->parsed()) {
      return cmd_parse(model_path, input_path, beam, with_trace, embeddings_path);
    }
    if (eval->parsed()) return cmd_eval(pred_path, gold_path, format, breakdown);
    std::cerr << "no subcommand\n";
    return 1;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const TreeError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  }
}
