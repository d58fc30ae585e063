// infograph: train, embed, evaluate and reproduce graph representation runs.
//
// Exit codes: 0 ok, 1 unexpected error, 2 configuration error, 3 data error,
// 4 numeric failure.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "infograph/infograph.hpp"

namespace fs = std::filesystem;
using namespace infograph;

namespace {

#ifndef INFOGRAPH_DATA_DIR
#define INFOGRAPH_DATA_DIR "data"
#endif

enum Exit { kOk = 0, kUnexpected = 1, kConfig = 2, kData = 3, kNumeric = 4 };

// Options shared by every command that resolves a configuration.
struct ConfigArgs {
  std::string config_file;
  std::vector<std::string> sets;
  std::string mode, seed, epochs, lr;

  void attach(CLI::App* cmd, bool with_seed = true) {
    cmd->add_option("--config", config_file, "key = value configuration file");
    cmd->add_option("--set", sets, "override one key, e.g. --set layers=4 (repeatable)");
    cmd->add_option("--mode", mode, "unsup, semi-combined, semi-star or supervised");
    if (with_seed) cmd->add_option("--seed", seed, "root seed for every random stream");
    cmd->add_option("--epochs", epochs, "training epochs");
    cmd->add_option("--lr", lr, "Adam learning rate");
  }

  // defaults < config file < --set < named flags
  void resolve(TrainConfig& t, EvalOptions& e) const {
    if (!config_file.empty()) apply_config_file(t, e, config_file);
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
      apply_config_key(t, e, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (!mode.empty()) apply_config_key(t, e, "mode", mode);
    if (!seed.empty()) apply_config_key(t, e, "seed", seed);
    if (!epochs.empty()) apply_config_key(t, e, "epochs", epochs);
    if (!lr.empty()) apply_config_key(t, e, "lr", lr);
    t.validate();
    e.validate();
  }
};

// A TU directory (name taken from the directory) or a dataset cache file.
Dataset load_data(fs::path path, const TrainConfig& t) {
  path = path.lexically_normal();
  if (path.filename().empty()) path = path.parent_path();
  Dataset raw;
  if (fs::is_directory(path)) raw = parse_tu_dataset(path, path.filename().string());
  else if (fs::is_regular_file(path)) raw = load_dataset_cache(path);
  else throw IoError("data path not found: " + path.string());
  return build_features(std::move(raw), t.featurization, t.degree_cap);
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

void reset_metrics(const std::string& path) {
  fs::remove(path);
  fs::remove(path + ".timing");
}

std::string json_line(const nlohmann::ordered_json& j) { return j.dump() + "\n"; }

// "1..5" or "1,2,7".
std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> out;
  auto num = [&](const std::string& s) {
    TrainConfig t;
    EvalOptions e;
    apply_config_key(t, e, "seed", s);
    return t.seed;
  };
  if (const auto dots = text.find(".."); dots != std::string::npos) {
    const auto lo = num(text.substr(0, dots)), hi = num(text.substr(dots + 2));
    if (hi < lo) throw ConfigError("seed range '" + text + "' is empty");
    for (auto s = lo; s <= hi; ++s) out.push_back(s);
  } else {
    std::istringstream is(text);
    std::string tok;
    while (std::getline(is, tok, ',')) out.push_back(num(tok));
  }
  if (out.empty()) throw ConfigError("no seeds given");
  return out;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  ConfigArgs cfg;
  std::string data, out = "runs/train", resume;
};

int cmd_train(const TrainArgs& a) {
  TrainConfig t;
  EvalOptions e;
  a.cfg.resolve(t, e);
  const fs::path out(a.out);
  if (t.checkpoint_path.empty()) t.checkpoint_path = (out / "checkpoint.txt").string();
  if (t.metrics_path.empty()) t.metrics_path = (out / "metrics.ndjson").string();
  const Dataset data = load_data(a.data, t);
  fs::create_directories(out);
  write_text(out / "config.txt", config_to_text(t, e));
  if (a.resume.empty()) reset_metrics(t.metrics_path);

  if (t.mode == TrainMode::Unsupervised) {
    const auto r = train_unsupervised(data, t, a.resume);
    std::cout << "trained " << t.epochs << " epochs on " << data.name << " (" << data.size() << " graphs)";
    if (!r.metrics.empty()) std::cout << ", final loss " << r.metrics.back().total;
    std::cout << "\ncheckpoint: " << t.checkpoint_path << "\nmetrics: " << t.metrics_path << '\n';
    return kOk;
  }
  if (data.target_dim < 1) throw ArgumentError("dataset '" + data.name + "' has no regression targets");
  const SemiSplit split = split_semi(data, e);
  // The supervised baseline ignores the unlabeled pool but keeps the same step schedule.
  const auto r = train_semisupervised(split.labeled, split.unlabeled, split.valid, t, a.resume);
  const double test = mae(predict_dataset(r.model, split.test, e.embed_batch_size), targets_matrix(split.test)).mean();
  nlohmann::ordered_json j;
  j["mode"] = to_string(t.mode);
  j["best_epoch"] = r.best_epoch;
  j["best_valid_mae"] = r.best_valid_mae;
  j["test_mae"] = test;
  if (!data.target_std.empty()) j["test_mae_original_units"] = test * data.target_std[0];
  write_text(out / "result.json", json_line(j));
  std::cout << "trained " << t.epochs << " epochs (" << to_string(t.mode) << "), best epoch " << r.best_epoch
            << ", valid MAE " << r.best_valid_mae << ", test MAE " << test << "\ncheckpoint: " << t.checkpoint_path
            << "\nmetrics: " << t.metrics_path << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------

struct EmbedArgs {
  ConfigArgs cfg;
  std::string data, checkpoint, out = "embeddings.txt";
  bool random = false;
};

int cmd_embed(const EmbedArgs& a) {
  TrainConfig t;
  EvalOptions e;
  ConfigArgs cfg = a.cfg;
  // A run directory carries its resolved config next to the checkpoint.
  if (cfg.config_file.empty() && !a.checkpoint.empty()) {
    const auto beside = fs::path(a.checkpoint).parent_path() / "config.txt";
    if (fs::exists(beside)) cfg.config_file = beside.string();
  }
  cfg.resolve(t, e);
  if (a.checkpoint.empty() && !a.random) throw ConfigError("embed needs --checkpoint or --random");
  const Dataset data = load_data(a.data, t);
  Encoder enc;
  if (a.random) {
    TrainConfig init = t;
    init.mode = TrainMode::Unsupervised;
    enc = UnsupervisedTrainer(data, init).encoder();
  } else {
    enc = encoder_from_checkpoint(read_checkpoint(a.checkpoint));
  }
  const auto emb = embed_dataset(enc, data, e.embed_batch_size);
  write_embeddings(emb, a.out);
  std::cout << "wrote " << emb.values.rows() << " x " << emb.values.cols() << " embeddings to " << a.out << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  ConfigArgs cfg;
  std::string data, embeddings, baseline, checkpoint, method = "InfoGraph", out;
};

int cmd_eval(const EvalArgs& a) {
  TrainConfig t;
  EvalOptions e;
  ConfigArgs cfg = a.cfg;
  if (cfg.config_file.empty() && !a.checkpoint.empty()) {
    const auto beside = fs::path(a.checkpoint).parent_path() / "config.txt";
    if (fs::exists(beside)) cfg.config_file = beside.string();
  }
  cfg.resolve(t, e);
  const Dataset data = load_data(a.data, t);
  Report rep;
  if (!a.checkpoint.empty()) {
    const Checkpoint c = read_checkpoint(a.checkpoint);
    const SemiModel model = semi_model_from_checkpoint(c, t);
    const SemiSplit split = split_semi(data, e);
    const double test = mae(predict_dataset(model, split.test, e.embed_batch_size), targets_matrix(split.test)).mean();
    std::optional<double> units;
    if (!data.target_std.empty()) units = test * data.target_std[0];
    rep = regression_report({{a.method, data.name, test, units, std::nullopt}});
  } else {
    if (a.embeddings.empty()) throw ConfigError("eval needs --embeddings or --checkpoint");
    const auto labels = data.labels();
    auto classify = [&](const std::string& path) {
      const auto emb = read_embeddings(path);
      if (emb.values.rows() != static_cast<Eigen::Index>(labels.size())) {
        throw FormatError(path + ": " + std::to_string(emb.values.rows()) + " rows for " +
                          std::to_string(labels.size()) + " graphs");
      }
      return logistic_cv(emb.values, labels, e.folds, t.seed, e.c_grid, e.classifier_iterations);
    };
    std::vector<ClassificationRow> rows;
    const auto main = classify(a.embeddings);
    rows.push_back({a.method, data.name, main.mean_accuracy, main.std_accuracy, 1});
    if (!a.baseline.empty()) {
      const auto base = classify(a.baseline);
      rows.push_back({"random encoder", data.name, base.mean_accuracy, base.std_accuracy, 1});
    }
    rows.push_back({"majority class", data.name, majority_rate(labels), 0.0, 1});
    rep = classification_report(rows);
  }
  std::cout << rep.text;
  if (!a.out.empty()) {
    fs::create_directories(a.out);
    write_report(rep, fs::path(a.out) / "report.txt", fs::path(a.out) / "report.ndjson");
  }
  return kOk;
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string kind = "classification", out;
  int n = 50, min_nodes = 5, max_nodes = 9;
  std::uint64_t seed = 0;
};

int cmd_synth(const SynthArgs& a) {
  Dataset d;
  if (a.kind == "classification") d = synth_classification(a.n, {a.min_nodes, a.max_nodes}, a.seed);
  else if (a.kind == "regression") d = synth_regression(a.n, {a.min_nodes, a.max_nodes}, a.seed);
  else throw ConfigError("synth --kind must be classification or regression, got '" + a.kind + "'");
  fs::path out = fs::path(a.out).lexically_normal();
  if (out.filename().empty()) out = out.parent_path();
  d.name = out.filename().string();
  write_tu_dataset(d, out);
  std::cout << "wrote " << d.size() << " graphs to " << out.string() << " (name " << d.name
            << "; train with --set features=attributes)\n";
  return kOk;
}

// ---------------------------------------------------------------------------

struct ReproArgs {
  ConfigArgs cfg;
  std::string recipe, seeds = "1..5", data, out;
};

fs::path seed_dir(const fs::path& out, std::uint64_t s) { return out / ("seed-" + std::to_string(s)); }

TrainConfig for_seed(TrainConfig t, const fs::path& dir, std::uint64_t s, const std::string& tag = "") {
  t.seed = s;
  t.checkpoint_path = (dir / (tag + "checkpoint.txt")).string();
  t.metrics_path = (dir / (tag + "metrics.ndjson")).string();
  reset_metrics(t.metrics_path);
  return t;
}

int repro_unsup(const Recipe& r, const Dataset& data, const std::vector<std::uint64_t>& seeds, const fs::path& out) {
  std::vector<double> trained, random;
  for (auto s : seeds) {
    const auto dir = seed_dir(out, s);
    const TrainConfig t = for_seed(r.train, dir, s);
    write_text(dir / "config.txt", config_to_text(t, r.eval));
    const auto run = run_unsupervised_eval(data, t, r.eval);
    write_embeddings(run.embeddings, dir / "embeddings.txt");
    write_embeddings(run.random_embeddings, dir / "random_embeddings.txt");
    trained.push_back(run.trained.mean_accuracy);
    random.push_back(run.random.mean_accuracy);
    std::cout << "seed " << s << ": accuracy " << format_fixed(100 * run.trained.mean_accuracy) << ", random encoder "
              << format_fixed(100 * run.random.mean_accuracy) << std::endl;
  }
  const int n = static_cast<int>(seeds.size());
  const auto rep = classification_report({{"InfoGraph", data.name, mean_of(trained), std_of(trained), n},
                                          {"random encoder", data.name, mean_of(random), std_of(random), n},
                                          {"majority class", data.name, majority_rate(data.labels()), 0.0, n}});
  write_report(rep, out / "summary.txt", out / "summary.ndjson");
  std::cout << rep.text;
  return kOk;
}

int repro_semi(const Recipe& r, const Dataset& data, const std::vector<std::uint64_t>& seeds, const fs::path& out) {
  const SemiSplit split = split_semi(data, r.eval);
  std::vector<double> sup, star, ratios;
  for (auto s : seeds) {
    const auto dir = seed_dir(out, s);
    TrainConfig base = r.train;
    base.mode = TrainMode::Supervised;
    const TrainConfig ts = for_seed(base, dir, s, "supervised-");
    const TrainConfig tx = for_seed(r.train, dir, s, to_string(r.train.mode) + "-");
    write_text(dir / "config.txt", config_to_text(tx, r.eval));
    const auto a = run_semi_arm(split, ts, r.eval);
    const auto b = run_semi_arm(split, tx, r.eval);
    sup.push_back(a.test_mae);
    star.push_back(b.test_mae);
    ratios.push_back(b.test_mae / a.test_mae);
    std::cout << "seed " << s << ": supervised " << format_fixed(a.test_mae, 4) << ", " << to_string(tx.mode) << ' '
              << format_fixed(b.test_mae, 4) << ", ratio " << format_fixed(ratios.back(), 3) << std::endl;
  }
  const double sd = data.target_std.empty() ? 1.0 : data.target_std[0];
  const std::string method = r.train.mode == TrainMode::SemiStar ? "InfoGraph*" : "InfoGraph";
  // Error ratio column: median over seeds of the per-seed ratio.
  const auto rep = regression_report({{"supervised", "triangles", mean_of(sup), mean_of(sup) * sd, 1.0},
                                      {method, "triangles", mean_of(star), mean_of(star) * sd, median(ratios)}});
  write_report(rep, out / "summary.txt", out / "summary.ndjson");
  std::cout << rep.text;
  return kOk;
}

int cmd_repro(const ReproArgs& a) {
  Recipe r = recipe_defaults(a.recipe);
  ConfigArgs cfg = a.cfg;
  cfg.seed.clear();
  cfg.resolve(r.train, r.eval);
  const auto seeds = parse_seeds(a.seeds);
  const fs::path out = a.out.empty() ? fs::path("runs") / a.recipe : fs::path(a.out);
  fs::create_directories(out);
  if (a.recipe == "mutag-unsup") {
    const fs::path dir = a.data.empty() ? fs::path(INFOGRAPH_DATA_DIR) / "MUTAG" : fs::path(a.data);
    return repro_unsup(r, load_data(dir, r.train), seeds, out);
  }
  if (a.recipe == "synth-cls-unsup") {
    return repro_unsup(r, build_features(synth_cls_recipe_data(), r.train.featurization, r.train.degree_cap), seeds, out);
  }
  return repro_semi(r, build_features(synth_semi_recipe_data(), r.train.featurization, r.train.degree_cap), seeds, out);
}

int fail(int code, const std::string& kind, const std::string& msg) {
  std::cerr << "infograph: " << kind << ": " << msg << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"InfoGraph graph representation learning"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* c_train = app.add_subcommand("train", "train a model and write checkpoint, metrics and config");
  c_train->add_option("--data", train.data, "TU dataset directory or dataset cache file")->required();
  c_train->add_option("--out", train.out, "output directory");
  c_train->add_option("--resume", train.resume, "continue from a checkpoint");
  train.cfg.attach(c_train);

  EmbedArgs embed;
  auto* c_embed = app.add_subcommand("embed", "write graph embeddings of a trained or random encoder");
  c_embed->add_option("--data", embed.data, "TU dataset directory or dataset cache file")->required();
  c_embed->add_option("--checkpoint", embed.checkpoint, "checkpoint of a train run");
  c_embed->add_flag("--random", embed.random, "use the untrained encoder for the configured seed");
  c_embed->add_option("--out", embed.out, "embedding file");
  embed.cfg.attach(c_embed);

  EvalArgs eval;
  auto* c_eval = app.add_subcommand("eval", "k-fold classification of embeddings, or test MAE of a semi checkpoint");
  c_eval->add_option("--data", eval.data, "dataset the embeddings were computed on")->required();
  c_eval->add_option("--embeddings", eval.embeddings, "embedding file");
  c_eval->add_option("--baseline", eval.baseline, "random-encoder embeddings, reported as a baseline row");
  c_eval->add_option("--checkpoint", eval.checkpoint, "semi-supervised checkpoint to score on the test split");
  c_eval->add_option("--method", eval.method, "method name in the report");
  c_eval->add_option("--out", eval.out, "directory for report.txt and report.ndjson");
  eval.cfg.attach(c_eval);

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "generate a synthetic dataset in TU format");
  c_synth->add_option("--kind", synth.kind, "classification (cycles vs stars) or regression (triangle counts)");
  c_synth->add_option("--n", synth.n, "graphs per class (classification) or in total (regression)");
  c_synth->add_option("--min-nodes", synth.min_nodes);
  c_synth->add_option("--max-nodes", synth.max_nodes);
  c_synth->add_option("--seed", synth.seed);
  c_synth->add_option("--out", synth.out, "output directory; its name becomes the dataset name")->required();

  ReproArgs repro;
  auto* c_repro = app.add_subcommand("repro", "run a named experiment over several seeds");
  c_repro->add_option("recipe", repro.recipe, "mutag-unsup, synth-cls-unsup or synth-semi-star")->required();
  c_repro->add_option("--seeds", repro.seeds, "seed range a..b or list a,b,c");
  c_repro->add_option("--data", repro.data, "dataset directory for mutag-unsup");
  c_repro->add_option("--out", repro.out, "output directory");
  repro.cfg.attach(c_repro, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(kConfig, "usage error", e.what());
  }

  try {
    if (c_train->parsed()) return cmd_train(train);
    if (c_embed->parsed()) return cmd_embed(embed);
    if (c_eval->parsed()) return cmd_eval(eval);
    if (c_synth->parsed()) return cmd_synth(synth);
    if (c_repro->parsed()) return cmd_repro(repro);
  } catch (const ConfigError& e) {
    return fail(kConfig, "config error", e.what());
  } catch (const IoError& e) {
    return fail(kData, "data error", e.what());
  } catch (const FormatError& e) {
    return fail(kData, "data error", e.what());
  } catch (const ArgumentError& e) {
    return fail(kData, "data error", e.what());
  } catch (const NumericError& e) {
    return fail(kNumeric, "numeric failure", e.what());
  } catch (const std::exception& e) {
    return fail(kUnexpected, "error", e.what());
  }
  return kUnexpected;
}
