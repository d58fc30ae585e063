#pragma once

// Run configuration: training hyperparameters, evaluation options, and the
// line-oriented key=value file format shared by the CLI and the resolved
// config snapshots written next to every output.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "infograph/error.hpp"
#include "infograph/graph.hpp"
#include "infograph/rng.hpp"
#include "infograph/semisup.hpp"

namespace infograph {

enum class TrainMode { Unsupervised, SemiCombined, SemiStar, Supervised };

inline std::string to_string(TrainMode m) {
  switch (m) {
    case TrainMode::Unsupervised: return "unsup";
    case TrainMode::SemiCombined: return "semi-combined";
    case TrainMode::SemiStar: return "semi-star";
    case TrainMode::Supervised: return "supervised";
  }
  return "?";
}

inline TrainMode parse_train_mode(const std::string& s) {
  if (s == "unsup") return TrainMode::Unsupervised;
  if (s == "semi-combined") return TrainMode::SemiCombined;
  if (s == "semi-star") return TrainMode::SemiStar;
  if (s == "supervised") return TrainMode::Supervised;
  throw ConfigError("unknown mode '" + s + "' (expected unsup, semi-combined, semi-star or supervised)");
}

inline bool is_semi(TrainMode m) { return m == TrainMode::SemiCombined || m == TrainMode::SemiStar; }

struct TrainConfig {
  TrainMode mode = TrainMode::Unsupervised;
  int num_layers = 3;
  int hidden = 32;
  double lr = 1e-3;
  int epochs = 100;
  int batch_size = 128;
  double lambda = 1e-3;
  Featurization featurization = Featurization::NodeLabels;
  int degree_cap = 10;
  std::uint64_t seed = 0;
  bool size_weighted_transfer = true;
  TransferLayers transfer_layers = TransferLayers::Random;
  std::string checkpoint_path;
  std::string metrics_path;

  void validate() const {
    if (num_layers < 1) throw ConfigError("layers must be >= 1");
    if (hidden < 1) throw ConfigError("hidden must be >= 1");
    if (!(lr > 0)) throw ConfigError("lr must be > 0");
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(lambda >= 0)) throw ConfigError("lambda must be >= 0");
    if (degree_cap < 0) throw ConfigError("degree_cap must be >= 0");
  }

  SemiOptions semi_options() const { return {lambda, size_weighted_transfer, transfer_layers}; }
};

// Canonical text of the fields that determine a training trajectory.
// Epoch count and output paths are excluded so a run can be resumed and
// extended from its checkpoint.
inline std::string trajectory_fields(const TrainConfig& c) {
  std::ostringstream os;
  os << std::hexfloat;
  os << "mode=" << to_string(c.mode) << ";layers=" << c.num_layers << ";hidden=" << c.hidden << ";lr=" << c.lr
     << ";batch_size=" << c.batch_size << ";lambda=" << c.lambda << ";features=" << to_string(c.featurization)
     << ";degree_cap=" << c.degree_cap << ";seed=" << c.seed << ";size_weighted=" << c.size_weighted_transfer
     << ";transfer_layers=" << (c.transfer_layers == TransferLayers::All ? "all" : "random");
  return os.str();
}

inline std::uint64_t config_hash(const TrainConfig& c) { return fnv1a64(trajectory_fields(c)); }

inline std::string hex_hash(std::uint64_t h) {
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

struct EvalOptions {
  int folds = 10;
  int embed_batch_size = 128;
  std::vector<double> c_grid = {1e-3, 1e-2, 1e-1, 1, 1e1, 1e2, 1e3};
  int classifier_iterations = 500;
  // Semi-supervised split of a regression dataset; the remainder is unlabeled.
  double labeled_fraction = 0.1;
  double valid_fraction = 0.1;
  double test_fraction = 0.2;
  std::uint64_t split_seed = 0;

  void validate() const {
    if (folds < 2) throw ConfigError("folds must be >= 2");
    if (embed_batch_size < 1) throw ConfigError("embed_batch_size must be >= 1");
    if (classifier_iterations < 1) throw ConfigError("classifier_iterations must be >= 1");
    for (double f : {labeled_fraction, valid_fraction, test_fraction}) {
      if (!(f > 0 && f < 1)) throw ConfigError("split fractions must lie in (0, 1)");
    }
    if (labeled_fraction + valid_fraction + test_fraction > 1) throw ConfigError("split fractions sum above 1");
  }
};

// ---------------------------------------------------------------------------
// key=value parsing

namespace detail {

inline std::string cfg_trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline int cfg_int(const std::string& key, const std::string& v) {
  int out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError("key '" + key + "': expected integer, got '" + v + "'");
  }
  return out;
}

inline std::uint64_t cfg_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError("key '" + key + "': expected unsigned integer, got '" + v + "'");
  }
  return out;
}

inline double cfg_double(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const double out = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size()) throw ConfigError("key '" + key + "': expected number, got '" + v + "'");
  return out;
}

inline bool cfg_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("key '" + key + "': expected true/false, got '" + v + "'");
}

}  // namespace detail

// Applies one key to the config pair. Unknown keys are an error.
inline void apply_config_key(TrainConfig& t, EvalOptions& e, const std::string& key, const std::string& value) {
  using namespace detail;
  if (key == "mode") t.mode = parse_train_mode(value);
  else if (key == "layers") t.num_layers = cfg_int(key, value);
  else if (key == "hidden") t.hidden = cfg_int(key, value);
  else if (key == "lr") t.lr = cfg_double(key, value);
  else if (key == "epochs") t.epochs = cfg_int(key, value);
  else if (key == "batch_size") t.batch_size = cfg_int(key, value);
  else if (key == "lambda") t.lambda = cfg_double(key, value);
  else if (key == "features") t.featurization = parse_featurization(value);
  else if (key == "degree_cap") t.degree_cap = cfg_int(key, value);
  else if (key == "seed") t.seed = cfg_u64(key, value);
  else if (key == "size_weighted_transfer") t.size_weighted_transfer = cfg_bool(key, value);
  else if (key == "transfer_layers") {
    if (value == "random") t.transfer_layers = TransferLayers::Random;
    else if (value == "all") t.transfer_layers = TransferLayers::All;
    else throw ConfigError("key 'transfer_layers': expected random or all, got '" + value + "'");
  }
  else if (key == "checkpoint") t.checkpoint_path = value;
  else if (key == "metrics") t.metrics_path = value;
  else if (key == "folds") e.folds = cfg_int(key, value);
  else if (key == "embed_batch_size") e.embed_batch_size = cfg_int(key, value);
  else if (key == "classifier_iterations") e.classifier_iterations = cfg_int(key, value);
  else if (key == "labeled_fraction") e.labeled_fraction = cfg_double(key, value);
  else if (key == "valid_fraction") e.valid_fraction = cfg_double(key, value);
  else if (key == "test_fraction") e.test_fraction = cfg_double(key, value);
  else if (key == "split_seed") e.split_seed = cfg_u64(key, value);
  else if (key == "c_grid") {
    e.c_grid.clear();
    std::istringstream is(value);
    std::string tok;
    while (std::getline(is, tok, ',')) e.c_grid.push_back(cfg_double(key, cfg_trim(tok)));
    if (e.c_grid.empty()) throw ConfigError("key 'c_grid': empty list");
  }
  else throw ConfigError("unknown config key '" + key + "'");
}

// Reads "key = value" lines; '#' starts a comment.
inline std::vector<std::pair<std::string, std::string>> read_config_lines(std::istream& in, const std::string& source) {
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  int no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::cfg_trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(source + ":" + std::to_string(no) + ": expected key=value, got '" + line + "'");
    }
    out.emplace_back(detail::cfg_trim(line.substr(0, eq)), detail::cfg_trim(line.substr(eq + 1)));
  }
  return out;
}

inline void apply_config_file(TrainConfig& t, EvalOptions& e, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  for (const auto& [k, v] : read_config_lines(in, path.filename().string())) apply_config_key(t, e, k, v);
}

// Resolved configuration in the same key=value format it is read from.
inline std::string config_to_text(const TrainConfig& t, const EvalOptions& e) {
  auto num = [](double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
  };
  std::ostringstream os;
  os << "# resolved configuration, hash " << hex_hash(config_hash(t)) << '\n';
  os << "mode = " << to_string(t.mode) << '\n';
  os << "layers = " << t.num_layers << '\n';
  os << "hidden = " << t.hidden << '\n';
  os << "lr = " << num(t.lr) << '\n';
  os << "epochs = " << t.epochs << '\n';
  os << "batch_size = " << t.batch_size << '\n';
  os << "lambda = " << num(t.lambda) << '\n';
  os << "features = " << to_string(t.featurization) << '\n';
  os << "degree_cap = " << t.degree_cap << '\n';
  os << "seed = " << t.seed << '\n';
  os << "size_weighted_transfer = " << (t.size_weighted_transfer ? "true" : "false") << '\n';
  os << "transfer_layers = " << (t.transfer_layers == TransferLayers::All ? "all" : "random") << '\n';
  if (!t.checkpoint_path.empty()) os << "checkpoint = " << t.checkpoint_path << '\n';
  if (!t.metrics_path.empty()) os << "metrics = " << t.metrics_path << '\n';
  os << "folds = " << e.folds << '\n';
  os << "embed_batch_size = " << e.embed_batch_size << '\n';
  os << "classifier_iterations = " << e.classifier_iterations << '\n';
  os << "labeled_fraction = " << num(e.labeled_fraction) << '\n';
  os << "valid_fraction = " << num(e.valid_fraction) << '\n';
  os << "test_fraction = " << num(e.test_fraction) << '\n';
  os << "split_seed = " << e.split_seed << '\n';
  os << "c_grid = ";
  for (std::size_t i = 0; i < e.c_grid.size(); ++i) os << (i ? "," : "") << num(e.c_grid[i]);
  os << '\n';
  return os.str();
}

}  // namespace infograph
