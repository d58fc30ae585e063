#pragma once

// Versioned text checkpoints. Values are hex floats so parameters, optimizer
// moments and generator states round-trip bit for bit.
//
//   infograph-checkpoint 1
//   kind <unsup|semi>
//   config_hash <hex>
//   arch <input_dim> <layers> <hidden> <target_dim>
//   epoch <completed epochs>
//   rng <name> <state...>                       (one line per stream)
//   adam <t> <slots>
//   param <name> <rows> <cols> <values...>      (stable enumeration order)
//   m <rows> <cols> <values...>                 (one per parameter)
//   v <rows> <cols> <values...>
//   best <count> <metric> <epoch>               then <count> "b" matrix lines
//   end

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "infograph/error.hpp"
#include "infograph/tensor.hpp"

namespace infograph {

inline constexpr int kCheckpointVersion = 1;

struct Architecture {
  int input_dim = 0;
  int num_layers = 0;
  int hidden = 0;
  int target_dim = 0;
  bool operator==(const Architecture&) const = default;
};

struct Checkpoint {
  std::string kind;
  std::uint64_t config_hash = 0;
  Architecture arch;
  int epoch = 0;
  std::map<std::string, std::string> rng_states;
  std::vector<std::string> names;
  std::vector<Matrix> params;
  AdamState adam;
  std::vector<Matrix> best_params;
  double best_metric = 0.0;
  int best_epoch = -1;
};

namespace detail {

inline void write_matrix(std::ostream& out, const Matrix& m) {
  out << m.rows() << ' ' << m.cols();
  for (Eigen::Index i = 0; i < m.size(); ++i) out << ' ' << m.data()[i];
}

inline Matrix read_matrix(std::istream& in, const std::string& where) {
  Eigen::Index rows = 0, cols = 0;
  if (!(in >> rows >> cols) || rows < 0 || cols < 0) throw FormatError(where + ": bad matrix shape");
  Matrix m(rows, cols);
  std::string tok;
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    if (!(in >> tok)) throw FormatError(where + ": truncated matrix");
    char* end = nullptr;
    m.data()[i] = std::strtod(tok.c_str(), &end);
    if (end != tok.c_str() + tok.size()) throw FormatError(where + ": bad value '" + tok + "'");
  }
  return m;
}

inline std::istringstream expect_line(std::istream& in, const std::string& keyword, const std::string& source) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError(source + ": unexpected end, expected '" + keyword + "'");
  std::istringstream is(line);
  std::string head;
  is >> head;
  if (head != keyword) throw FormatError(source + ": expected '" + keyword + "', got '" + head + "'");
  return is;
}

}  // namespace detail

inline void write_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out << std::hexfloat;
  out << "infograph-checkpoint " << kCheckpointVersion << '\n';
  out << "kind " << c.kind << '\n';
  out << "config_hash " << std::hex << c.config_hash << std::dec << '\n';
  out << "arch " << c.arch.input_dim << ' ' << c.arch.num_layers << ' ' << c.arch.hidden << ' ' << c.arch.target_dim << '\n';
  out << "epoch " << c.epoch << '\n';
  out << "rngs " << c.rng_states.size() << '\n';
  for (const auto& [name, state] : c.rng_states) out << "rng " << name << ' ' << state << '\n';
  out << "adam " << c.adam.t << ' ' << c.adam.m.size() << '\n';
  out << "params " << c.params.size() << '\n';
  for (std::size_t i = 0; i < c.params.size(); ++i) {
    out << "param " << c.names[i] << ' ';
    detail::write_matrix(out, c.params[i]);
    out << '\n';
  }
  for (const auto& m : c.adam.m) {
    out << "m ";
    detail::write_matrix(out, m);
    out << '\n';
  }
  for (const auto& v : c.adam.v) {
    out << "v ";
    detail::write_matrix(out, v);
    out << '\n';
  }
  out << "best " << c.best_params.size() << ' ' << c.best_metric << ' ' << c.best_epoch << '\n';
  for (const auto& b : c.best_params) {
    out << "b ";
    detail::write_matrix(out, b);
    out << '\n';
  }
  out << "end\n";
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

inline Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  const std::string src = path.filename().string();
  Checkpoint c;
  {
    auto is = detail::expect_line(in, "infograph-checkpoint", src);
    int version = 0;
    is >> version;
    if (version != kCheckpointVersion) throw FormatError(src + ": unsupported checkpoint version " + std::to_string(version));
  }
  detail::expect_line(in, "kind", src) >> c.kind;
  detail::expect_line(in, "config_hash", src) >> std::hex >> c.config_hash;
  {
    auto is = detail::expect_line(in, "arch", src);
    is >> c.arch.input_dim >> c.arch.num_layers >> c.arch.hidden >> c.arch.target_dim;
  }
  detail::expect_line(in, "epoch", src) >> c.epoch;
  std::size_t rngs = 0;
  detail::expect_line(in, "rngs", src) >> rngs;
  for (std::size_t i = 0; i < rngs; ++i) {
    auto is = detail::expect_line(in, "rng", src);
    std::string name;
    is >> name;
    std::string state;
    std::getline(is >> std::ws, state);
    c.rng_states[name] = state;
  }
  std::size_t slots = 0;
  {
    auto is = detail::expect_line(in, "adam", src);
    is >> c.adam.t >> slots;
  }
  std::size_t count = 0;
  detail::expect_line(in, "params", src) >> count;
  for (std::size_t i = 0; i < count; ++i) {
    auto is = detail::expect_line(in, "param", src);
    std::string name;
    is >> name;
    c.names.push_back(name);
    c.params.push_back(detail::read_matrix(is, src + " param " + name));
  }
  for (std::size_t i = 0; i < slots; ++i) {
    auto is = detail::expect_line(in, "m", src);
    c.adam.m.push_back(detail::read_matrix(is, src + " adam m"));
  }
  for (std::size_t i = 0; i < slots; ++i) {
    auto is = detail::expect_line(in, "v", src);
    c.adam.v.push_back(detail::read_matrix(is, src + " adam v"));
  }
  std::size_t best = 0;
  {
    auto is = detail::expect_line(in, "best", src);
    std::string metric;
    is >> best >> metric >> c.best_epoch;
    c.best_metric = std::strtod(metric.c_str(), nullptr);
  }
  for (std::size_t i = 0; i < best; ++i) {
    auto is = detail::expect_line(in, "b", src);
    c.best_params.push_back(detail::read_matrix(is, src + " best"));
  }
  detail::expect_line(in, "end", src);
  return c;
}

}  // namespace infograph
