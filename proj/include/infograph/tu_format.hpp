#pragma once

// TU benchmark text format (comma-separated, 1-indexed) and the library's own
// line-oriented dataset cache.
//
// TU files read from <dir>:
//   <name>_A.txt                 "u, v" node pairs, one per line (mandatory)
//   <name>_graph_indicator.txt   graph id per node line (mandatory)
//   <name>_graph_labels.txt      class per graph line (mandatory)
//   <name>_node_labels.txt       categorical label per node (optional)
//   <name>_node_attributes.txt   comma-separated floats per node (optional)
//   <name>_edge_labels.txt       label per _A line (optional)
//   <name>_edge_attributes.txt   comma-separated floats per _A line (optional)
//   <name>_graph_attributes.txt  comma-separated regression targets per graph (optional)
//   <name>_target_scaling.txt    "mean,std" per target dimension (optional, written by synth)

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "infograph/error.hpp"
#include "infograph/graph.hpp"

namespace infograph {

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? s.npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::string where(const std::filesystem::path& file, std::size_t line) {
  return file.filename().string() + ":" + std::to_string(line);
}

inline long parse_long(std::string_view tok, const std::filesystem::path& file, std::size_t line) {
  long v = 0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (tok.empty() || ec != std::errc() || p != tok.data() + tok.size()) {
    throw FormatError(where(file, line) + ": expected integer, got '" + std::string(tok) + "'");
  }
  return v;
}

inline double parse_double(std::string_view tok, const std::filesystem::path& file, std::size_t line) {
  std::string s(tok);
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) {
    throw FormatError(where(file, line) + ": expected number, got '" + s + "'");
  }
  return v;
}

// Non-blank lines with their 1-based line numbers.
inline std::vector<std::pair<std::size_t, std::string>> read_lines(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot open " + file.string());
  std::vector<std::pair<std::size_t, std::string>> lines;
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (!trim(line).empty()) lines.emplace_back(no, line);
  }
  return lines;
}

inline std::vector<long> read_int_column(const std::filesystem::path& file) {
  std::vector<long> out;
  for (const auto& [no, line] : read_lines(file)) out.push_back(parse_long(trim(line), file, no));
  return out;
}

inline std::vector<std::vector<double>> read_float_rows(const std::filesystem::path& file) {
  std::vector<std::vector<double>> out;
  for (const auto& [no, line] : read_lines(file)) {
    std::vector<double> row;
    for (auto tok : split(line, ',')) row.push_back(parse_double(tok, file, no));
    out.push_back(std::move(row));
  }
  return out;
}

inline void check_count(const std::filesystem::path& file, std::size_t got, std::size_t expected,
                        const char* what) {
  if (got != expected) {
    throw FormatError(file.filename().string() + ": " + std::to_string(got) + " lines but " +
                      std::to_string(expected) + " " + what);
  }
}

inline std::string exact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

inline Dataset parse_tu_dataset(const std::filesystem::path& dir, const std::string& name) {
  namespace fs = std::filesystem;
  auto file = [&](const char* suffix) { return dir / (name + suffix); };
  for (const char* mandatory : {"_A.txt", "_graph_indicator.txt", "_graph_labels.txt"}) {
    if (!fs::exists(file(mandatory))) throw IoError("missing TU file " + file(mandatory).string());
  }

  const auto indicator_path = file("_graph_indicator.txt");
  const auto indicator = detail::read_int_column(indicator_path);
  const auto raw_labels = detail::read_int_column(file("_graph_labels.txt"));
  const std::size_t num_graphs = raw_labels.size();
  const std::size_t num_nodes = indicator.size();

  // Global node -> (graph, local index).
  std::vector<int> graph_of(num_nodes);
  std::vector<int> local_of(num_nodes);
  std::vector<int> counts(num_graphs, 0);
  for (std::size_t i = 0; i < num_nodes; ++i) {
    const long gid = indicator[i];
    if (gid < 1 || static_cast<std::size_t>(gid) > num_graphs) {
      throw FormatError(detail::where(indicator_path, i + 1) + ": graph id " + std::to_string(gid) +
                        " outside [1, " + std::to_string(num_graphs) + "]");
    }
    graph_of[i] = static_cast<int>(gid - 1);
    local_of[i] = counts[static_cast<std::size_t>(gid - 1)]++;
  }

  Dataset data;
  data.name = name;
  data.graphs.resize(num_graphs);
  for (std::size_t g = 0; g < num_graphs; ++g) {
    data.graphs[g].num_nodes = counts[g];
    data.graphs[g].node_features = Matrix(counts[g], 0);
  }

  std::set<long> label_values(raw_labels.begin(), raw_labels.end());
  std::map<long, int> label_index;
  for (long l : label_values) label_index.emplace(l, static_cast<int>(label_index.size()));
  data.num_classes = static_cast<int>(label_index.size());
  for (std::size_t g = 0; g < num_graphs; ++g) data.graphs[g].label = label_index.at(raw_labels[g]);

  // Optional per-edge data, aligned to the lines of _A.
  const auto a_path = file("_A.txt");
  const auto a_lines = detail::read_lines(a_path);
  std::vector<std::vector<double>> edge_extra(a_lines.size());
  if (fs::exists(file("_edge_labels.txt"))) {
    const auto labels = detail::read_int_column(file("_edge_labels.txt"));
    detail::check_count(file("_edge_labels.txt"), labels.size(), a_lines.size(), "edges in _A");
    for (std::size_t e = 0; e < labels.size(); ++e) edge_extra[e].push_back(static_cast<double>(labels[e]));
  }
  if (fs::exists(file("_edge_attributes.txt"))) {
    const auto attrs = detail::read_float_rows(file("_edge_attributes.txt"));
    detail::check_count(file("_edge_attributes.txt"), attrs.size(), a_lines.size(), "edges in _A");
    for (std::size_t e = 0; e < attrs.size(); ++e) {
      edge_extra[e].insert(edge_extra[e].end(), attrs[e].begin(), attrs[e].end());
    }
  }
  const bool has_edge_features = fs::exists(file("_edge_labels.txt")) || fs::exists(file("_edge_attributes.txt"));

  std::vector<std::set<std::pair<int, int>>> seen(num_graphs);
  for (std::size_t e = 0; e < a_lines.size(); ++e) {
    const auto& [no, line] = a_lines[e];
    const auto toks = detail::split(line, ',');
    if (toks.size() != 2) {
      throw FormatError(detail::where(a_path, no) + ": expected 'u, v', got '" + line + "'");
    }
    const long u = detail::parse_long(toks[0], a_path, no);
    const long v = detail::parse_long(toks[1], a_path, no);
    for (long x : {u, v}) {
      if (x < 1 || static_cast<std::size_t>(x) > num_nodes) {
        throw FormatError(detail::where(a_path, no) + ": node " + std::to_string(x) + " outside [1, " +
                          std::to_string(num_nodes) + "]");
      }
    }
    const int gu = graph_of[static_cast<std::size_t>(u - 1)];
    const int gv = graph_of[static_cast<std::size_t>(v - 1)];
    if (gu != gv) {
      throw FormatError(detail::where(a_path, no) + ": edge (" + std::to_string(u) + "," + std::to_string(v) +
                        ") joins graphs " + std::to_string(gu + 1) + " and " + std::to_string(gv + 1));
    }
    int lu = local_of[static_cast<std::size_t>(u - 1)];
    int lv = local_of[static_cast<std::size_t>(v - 1)];
    if (lu > lv) std::swap(lu, lv);
    auto& graph = data.graphs[static_cast<std::size_t>(gu)];
    if (seen[static_cast<std::size_t>(gu)].insert({lu, lv}).second) {
      graph.edges.emplace_back(lu, lv);
      if (has_edge_features) graph.edge_features.push_back(edge_extra[e]);
    }
  }

  if (fs::exists(file("_node_labels.txt"))) {
    const auto labels = detail::read_int_column(file("_node_labels.txt"));
    detail::check_count(file("_node_labels.txt"), labels.size(), num_nodes, "nodes in graph indicator");
    for (std::size_t i = 0; i < num_nodes; ++i) {
      data.graphs[static_cast<std::size_t>(graph_of[i])].node_labels.push_back(static_cast<int>(labels[i]));
    }
  }

  if (fs::exists(file("_node_attributes.txt"))) {
    const auto attrs = detail::read_float_rows(file("_node_attributes.txt"));
    detail::check_count(file("_node_attributes.txt"), attrs.size(), num_nodes, "nodes in graph indicator");
    const auto width = attrs.empty() ? 0 : attrs.front().size();
    data.feature_dim = static_cast<int>(width);
    for (auto& g : data.graphs) g.node_features = Matrix::Zero(g.num_nodes, static_cast<Eigen::Index>(width));
    for (std::size_t i = 0; i < num_nodes; ++i) {
      if (attrs[i].size() != width) {
        throw FormatError(detail::where(file("_node_attributes.txt"), i + 1) + ": ragged attribute row");
      }
      auto& g = data.graphs[static_cast<std::size_t>(graph_of[i])];
      for (std::size_t c = 0; c < width; ++c) g.node_features(local_of[i], static_cast<Eigen::Index>(c)) = attrs[i][c];
    }
  }

  if (fs::exists(file("_graph_attributes.txt"))) {
    const auto targets = detail::read_float_rows(file("_graph_attributes.txt"));
    detail::check_count(file("_graph_attributes.txt"), targets.size(), num_graphs, "graphs");
    data.target_dim = targets.empty() ? 0 : static_cast<int>(targets.front().size());
    for (std::size_t g = 0; g < num_graphs; ++g) {
      if (static_cast<int>(targets[g].size()) != data.target_dim) {
        throw FormatError(detail::where(file("_graph_attributes.txt"), g + 1) + ": ragged target row");
      }
      data.graphs[g].targets = targets[g];
    }
  }

  if (fs::exists(file("_target_scaling.txt"))) {
    for (const auto& row : detail::read_float_rows(file("_target_scaling.txt"))) {
      if (row.size() != 2) throw FormatError(file("_target_scaling.txt").string() + ": expected 'mean,std'");
      data.target_mean.push_back(row[0]);
      data.target_std.push_back(row[1]);
    }
  }

  data.validate();
  return data;
}

// Writes `data` in TU format under dir/<name>_*.txt. Node features go to
// _node_attributes, edge features to _edge_attributes; both are re-read
// exactly by parse_tu_dataset.
inline void write_tu_dataset(const Dataset& data, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  auto open = [&](const char* suffix) {
    std::ofstream out(dir / (data.name + suffix));
    if (!out) throw IoError("cannot write " + (dir / (data.name + suffix)).string());
    return out;
  };
  const bool node_labels = !data.graphs.empty() && std::all_of(data.graphs.begin(), data.graphs.end(), [](const Graph& g) {
    return static_cast<int>(g.node_labels.size()) == g.num_nodes;
  });
  const bool edge_features = std::any_of(data.graphs.begin(), data.graphs.end(),
                                         [](const Graph& g) { return !g.edge_features.empty(); });

  auto a = open("_A.txt");
  auto indicator = open("_graph_indicator.txt");
  auto glabels = open("_graph_labels.txt");
  std::ofstream nlabels, nattrs, eattrs, gattrs;
  if (node_labels) nlabels = open("_node_labels.txt");
  if (data.feature_dim > 0) nattrs = open("_node_attributes.txt");
  if (edge_features) eattrs = open("_edge_attributes.txt");
  if (data.target_dim > 0) gattrs = open("_graph_attributes.txt");

  auto join = [](const std::vector<double>& values) {
    std::string s;
    for (std::size_t i = 0; i < values.size(); ++i) s += (i ? ", " : "") + detail::exact(values[i]);
    return s;
  };

  long offset = 1;
  for (std::size_t gi = 0; gi < data.graphs.size(); ++gi) {
    const Graph& g = data.graphs[gi];
    glabels << g.label.value_or(0) << '\n';
    if (data.target_dim > 0) gattrs << join(g.targets) << '\n';
    for (int v = 0; v < g.num_nodes; ++v) {
      indicator << gi + 1 << '\n';
      if (node_labels) nlabels << g.node_labels[static_cast<std::size_t>(v)] << '\n';
      if (data.feature_dim > 0) {
        std::vector<double> row(g.node_features.row(v).begin(), g.node_features.row(v).end());
        nattrs << join(row) << '\n';
      }
    }
    for (std::size_t e = 0; e < g.edges.size(); ++e) {
      auto [u, v] = g.edges[e];
      a << offset + u << ", " << offset + v << '\n';
      if (edge_features) eattrs << join(g.edge_features.empty() ? std::vector<double>{} : g.edge_features[e]) << '\n';
      if (u != v) {
        a << offset + v << ", " << offset + u << '\n';
        if (edge_features) eattrs << join(g.edge_features.empty() ? std::vector<double>{} : g.edge_features[e]) << '\n';
      }
    }
    offset += g.num_nodes;
  }
  if (!data.target_mean.empty()) {
    auto scaling = open("_target_scaling.txt");
    for (std::size_t t = 0; t < data.target_mean.size(); ++t) {
      scaling << detail::exact(data.target_mean[t]) << ", " << detail::exact(data.target_std[t]) << '\n';
    }
  }
}

// ---------------------------------------------------------------------------
// Dataset cache. Line-oriented text, hex-float values, exact round trip:
//
//   infograph-dataset 1
//   name <name>
//   counts <graphs> <feature_dim> <num_classes> <target_dim>
//   scaling <k> <mean_1> <std_1> ... <mean_k> <std_k>
//   graph <nodes> <edges> <label|-> <has_node_labels 0|1> <edge_feature_width>
//   t <targets...>                  (only when target_dim > 0)
//   l <node labels...>              (only when has_node_labels)
//   x <feature row>                 (one per node)
//   e <u> <v> <edge features...>    (one per edge)
//   end

inline constexpr int kDatasetCacheVersion = 1;

namespace detail {

inline std::string hex(double v) {
  std::ostringstream os;
  os << std::hexfloat << v;
  return os.str();
}

class TokenReader {
 public:
  TokenReader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

  // Reads the next line and checks its leading keyword.
  std::istringstream line(const std::string& keyword) {
    std::string text;
    if (!std::getline(in_, text)) fail("unexpected end of file, expected '" + keyword + "'");
    ++line_;
    std::istringstream is(text);
    std::string head;
    is >> head;
    if (head != keyword) fail("expected '" + keyword + "', got '" + head + "'");
    return is;
  }

  double number(std::istringstream& is) {
    std::string tok;
    if (!(is >> tok)) fail("missing value");
    char* end = nullptr;
    double v = std::strtod(tok.c_str(), &end);
    if (end != tok.c_str() + tok.size()) fail("bad number '" + tok + "'");
    return v;
  }

  long integer(std::istringstream& is) {
    std::string tok;
    if (!(is >> tok)) fail("missing integer");
    return parse_long(tok, source_, line_);
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw FormatError(source_ + ":" + std::to_string(line_) + ": " + msg);
  }

 private:
  std::istream& in_;
  std::string source_;
  std::size_t line_ = 0;
};

}  // namespace detail

inline void write_dataset_cache(const Dataset& data, std::ostream& out) {
  out << "infograph-dataset " << kDatasetCacheVersion << '\n';
  out << "name " << data.name << '\n';
  out << "counts " << data.graphs.size() << ' ' << data.feature_dim << ' ' << data.num_classes << ' '
      << data.target_dim << '\n';
  out << "scaling " << data.target_mean.size();
  for (std::size_t t = 0; t < data.target_mean.size(); ++t) {
    out << ' ' << detail::hex(data.target_mean[t]) << ' ' << detail::hex(data.target_std[t]);
  }
  out << '\n';
  for (const auto& g : data.graphs) {
    const bool labels = !g.node_labels.empty();
    const std::size_t ew = g.edge_features.empty() ? 0 : g.edge_features.front().size();
    out << "graph " << g.num_nodes << ' ' << g.edges.size() << ' '
        << (g.label ? std::to_string(*g.label) : std::string("-")) << ' ' << (labels ? 1 : 0) << ' '
        << (g.edge_features.empty() ? -1 : static_cast<long>(ew)) << '\n';
    if (data.target_dim > 0) {
      out << 't';
      for (double t : g.targets) out << ' ' << detail::hex(t);
      out << '\n';
    }
    if (labels) {
      out << 'l';
      for (int l : g.node_labels) out << ' ' << l;
      out << '\n';
    }
    for (int v = 0; v < g.num_nodes; ++v) {
      out << 'x';
      for (Eigen::Index c = 0; c < g.node_features.cols(); ++c) out << ' ' << detail::hex(g.node_features(v, c));
      out << '\n';
    }
    for (std::size_t e = 0; e < g.edges.size(); ++e) {
      out << "e " << g.edges[e].first << ' ' << g.edges[e].second;
      if (!g.edge_features.empty()) {
        for (double f : g.edge_features[e]) out << ' ' << detail::hex(f);
      }
      out << '\n';
    }
  }
  out << "end\n";
}

inline Dataset read_dataset_cache(std::istream& in, const std::string& source = "<cache>") {
  detail::TokenReader r(in, source);
  Dataset data;
  {
    auto is = r.line("infograph-dataset");
    const long version = r.integer(is);
    if (version != kDatasetCacheVersion) r.fail("unsupported cache version " + std::to_string(version));
  }
  {
    auto is = r.line("name");
    std::getline(is >> std::ws, data.name);
  }
  std::size_t count = 0;
  {
    auto is = r.line("counts");
    count = static_cast<std::size_t>(r.integer(is));
    data.feature_dim = static_cast<int>(r.integer(is));
    data.num_classes = static_cast<int>(r.integer(is));
    data.target_dim = static_cast<int>(r.integer(is));
  }
  {
    auto is = r.line("scaling");
    const long k = r.integer(is);
    for (long t = 0; t < k; ++t) {
      data.target_mean.push_back(r.number(is));
      data.target_std.push_back(r.number(is));
    }
  }
  data.graphs.resize(count);
  for (auto& g : data.graphs) {
    auto head = r.line("graph");
    g.num_nodes = static_cast<int>(r.integer(head));
    const long edges = r.integer(head);
    std::string label;
    head >> label;
    if (label != "-") g.label = static_cast<int>(detail::parse_long(label, source, 0));
    const bool labels = r.integer(head) != 0;
    const long ew = r.integer(head);
    if (data.target_dim > 0) {
      auto is = r.line("t");
      for (int t = 0; t < data.target_dim; ++t) g.targets.push_back(r.number(is));
    }
    if (labels) {
      auto is = r.line("l");
      for (int v = 0; v < g.num_nodes; ++v) g.node_labels.push_back(static_cast<int>(r.integer(is)));
    }
    g.node_features.resize(g.num_nodes, data.feature_dim);
    for (int v = 0; v < g.num_nodes; ++v) {
      auto is = r.line("x");
      for (int c = 0; c < data.feature_dim; ++c) g.node_features(v, c) = r.number(is);
    }
    for (long e = 0; e < edges; ++e) {
      auto is = r.line("e");
      const int u = static_cast<int>(r.integer(is));
      const int v = static_cast<int>(r.integer(is));
      g.edges.emplace_back(u, v);
      if (ew >= 0) {
        std::vector<double> f;
        for (long c = 0; c < ew; ++c) f.push_back(r.number(is));
        g.edge_features.push_back(std::move(f));
      }
    }
  }
  r.line("end");
  data.validate();
  return data;
}

inline void save_dataset_cache(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  write_dataset_cache(data, out);
}

inline Dataset load_dataset_cache(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return read_dataset_cache(in, path.filename().string());
}

}  // namespace infograph
