#pragma once

// Text formats for graphs, ratings, labels and whole generated instances.
//
//   edge list   one "i j" pair per line, 0-based, '#' starts a comment;
//               node count in "<path>.json" as {"num_nodes": N} or passed in
//   ratings     CSV "user,item,value" with raw alphabet values
//   labels      one integer per line

#include <charconv>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "mc2g/core.hpp"
#include "mc2g/genmodel.hpp"

namespace mc2g {

namespace detail {

inline std::string_view strip_comment(std::string_view line) {
  if (auto pos = line.find('#'); pos != std::string_view::npos) line = line.substr(0, pos);
  while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) line.remove_suffix(1);
  while (!line.empty() && (line.front() == ' ' || line.front() == '\t')) line.remove_prefix(1);
  return line;
}

inline std::vector<std::string_view> split(std::string_view line, bool comma) {
  std::vector<std::string_view> out;
  if (comma) {
    std::size_t start = 0;
    while (true) {
      const auto next = line.find(',', start);
      out.push_back(strip_comment(line.substr(start, next == std::string_view::npos ? std::string_view::npos : next - start)));
      if (next == std::string_view::npos) break;
      start = next + 1;
    }
    return out;
  }
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

template <typename T>
T parse_number(std::string_view token, const std::string& where) {
  T value{};
  const auto* end = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(token.data(), end, value);
  if (ec != std::errc() || ptr != end || token.empty()) {
    throw Error(where + ": cannot parse '" + std::string(token) + "'");
  }
  return value;
}

inline std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return in;
}

inline std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

inline std::string where(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line);
}

}  // namespace detail

inline std::filesystem::path sidecar_path(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".json");
}

inline SimpleGraph load_edge_list(const std::filesystem::path& path, std::optional<std::size_t> n_nodes = std::nullopt) {
  if (!n_nodes) {
    auto side = sidecar_path(path);
    if (!std::filesystem::exists(side)) {
      throw Error("load_edge_list: node count not given and no sidecar " + side.string());
    }
    auto in = detail::open_in(side);
    const auto j = nlohmann::json::parse(in);
    n_nodes = j.at("num_nodes").get<std::size_t>();
  }
  auto in = detail::open_in(path);
  std::vector<Edge> edges;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto body = detail::strip_comment(line);
    if (body.empty()) continue;
    const auto tokens = detail::split(body, false);
    const auto at = detail::where(path, lineno);
    if (tokens.size() != 2) throw Error(at + ": expected two node indices");
    const auto u = detail::parse_number<std::uint32_t>(tokens[0], at);
    const auto v = detail::parse_number<std::uint32_t>(tokens[1], at);
    if (u >= *n_nodes || v >= *n_nodes) throw Error(at + ": node index out of range");
    if (u == v) throw Error(at + ": self-loop at node " + std::to_string(u));
    edges.emplace_back(u, v);
  }
  return SimpleGraph(*n_nodes, std::move(edges));
}

inline void save_edge_list(const std::filesystem::path& path, const SimpleGraph& g) {
  {
    auto out = detail::open_out(path);
    for (const auto& [u, v] : g.edges()) out << u << ' ' << v << '\n';
  }
  auto side = detail::open_out(sidecar_path(path));
  side << nlohmann::json{{"num_nodes", g.num_nodes()}}.dump() << '\n';
}

inline RatingObservation load_ratings_csv(const std::filesystem::path& path, const RatingAlphabet& alphabet,
                                          std::size_t n_users, std::size_t n_items) {
  auto in = detail::open_in(path);
  std::vector<Rating> triplets;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto body = detail::strip_comment(line);
    if (body.empty()) continue;
    if (lineno == 1 && body == "user,item,value") continue;
    const auto tokens = detail::split(body, true);
    const auto at = detail::where(path, lineno);
    if (tokens.size() != 3) throw Error(at + ": expected user,item,value");
    const auto u = detail::parse_number<std::uint32_t>(tokens[0], at);
    const auto i = detail::parse_number<std::uint32_t>(tokens[1], at);
    const auto value = detail::parse_number<int>(tokens[2], at);
    if (u >= n_users || i >= n_items) throw Error(at + ": index out of range");
    Symbol s = 0;
    try {
      s = alphabet.index_of(value);
    } catch (const Error&) {
      throw Error(at + ": value " + std::to_string(value) + " not in alphabet");
    }
    triplets.push_back({u, i, s});
  }
  return RatingObservation(n_users, n_items, std::move(triplets), alphabet.size());
}

inline void save_ratings_csv(const std::filesystem::path& path, const RatingObservation& obs, const RatingAlphabet& alphabet) {
  auto out = detail::open_out(path);
  out << "user,item,value\n";
  for (const auto& r : obs.triplets()) out << r.user << ',' << r.item << ',' << alphabet.value(r.symbol) << '\n';
}

// k defaults to max label + 1.
inline ClusterLabels load_labels(const std::filesystem::path& path, std::optional<int> k = std::nullopt) {
  auto in = detail::open_in(path);
  std::vector<int> labels;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto body = detail::strip_comment(line);
    if (body.empty()) continue;
    const auto at = detail::where(path, lineno);
    const int a = detail::parse_number<int>(body, at);
    if (a < 0 || (k && a >= *k)) throw Error(at + ": label out of range");
    labels.push_back(a);
  }
  int kk = k.value_or(0);
  if (!k) {
    for (int a : labels) kk = std::max(kk, a + 1);
  }
  return ClusterLabels(std::move(labels), std::max(kk, 1));
}

inline void save_labels(const std::filesystem::path& path, const ClusterLabels& labels) {
  auto out = detail::open_out(path);
  for (int a : labels.assignments()) out << a << '\n';
}

// ---------------------------------------------------------------------------
// JSON helpers shared with the harness.

inline nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  auto j = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    auto row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    j.push_back(std::move(row));
  }
  return j;
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.empty()) throw Error("expected a nonempty matrix");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j.at(0).size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j.at(static_cast<std::size_t>(r));
    if (static_cast<Eigen::Index>(row.size()) != cols) throw Error("ragged matrix");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
  }
  return m;
}

// Nominal block table as raw alphabet values.
inline nlohmann::json blocks_to_json(std::span<const Symbol> blocks, int k1, int k2, const RatingAlphabet& alphabet) {
  auto j = nlohmann::json::array();
  for (int a = 0; a < k1; ++a) {
    auto row = nlohmann::json::array();
    for (int b = 0; b < k2; ++b) row.push_back(alphabet.value(blocks[static_cast<std::size_t>(a * k2 + b)]));
    j.push_back(std::move(row));
  }
  return j;
}

inline std::vector<Symbol> blocks_from_json(const nlohmann::json& j, int k1, int k2, const RatingAlphabet& alphabet) {
  if (j.size() != static_cast<std::size_t>(k1)) throw Error("nominal table must have k1 rows");
  std::vector<Symbol> blocks;
  for (const auto& row : j) {
    if (row.size() != static_cast<std::size_t>(k2)) throw Error("nominal table must have k2 columns");
    for (const auto& v : row) blocks.push_back(alphabet.index_of(v.get<int>()));
  }
  return blocks;
}

/// Nominal matrix file: {"alphabet": [...], "blocks": [[raw values]]};
/// labels live in separate label files.
inline void save_nominal(const std::filesystem::path& path, const NominalMatrix& nm, const RatingAlphabet& alphabet) {
  auto out = detail::open_out(path);
  nlohmann::json j{{"alphabet", alphabet.values()}, {"blocks", blocks_to_json(nm.blocks(), nm.k1(), nm.k2(), alphabet)}};
  out << j.dump(2) << '\n';
}

struct NominalFile {
  RatingAlphabet alphabet;
  std::vector<Symbol> blocks;
  int k1 = 0;
  int k2 = 0;
};

inline NominalFile load_nominal(const std::filesystem::path& path) {
  auto in = detail::open_in(path);
  const auto j = nlohmann::json::parse(in);
  NominalFile f;
  f.alphabet = RatingAlphabet(j.at("alphabet").get<std::vector<int>>());
  const auto& blocks = j.at("blocks");
  f.k1 = static_cast<int>(blocks.size());
  f.k2 = f.k1 > 0 ? static_cast<int>(blocks.at(0).size()) : 0;
  f.blocks = blocks_from_json(blocks, f.k1, f.k2, f.alphabet);
  return f;
}

// ---------------------------------------------------------------------------
// Instance directories.

inline nlohmann::json spec_to_json(const ModelSpec& s) {
  return {{"n_users", s.n_users},
          {"n_items", s.n_items},
          {"k1", s.k1},
          {"k2", s.k2},
          {"alphabet", s.alphabet.values()},
          {"nominal", blocks_to_json(s.nominal_blocks, s.k1, s.k2, s.alphabet)},
          {"personalization", matrix_to_json(s.personalization.matrix())},
          {"user_conn", matrix_to_json(s.user_conn.matrix())},
          {"item_conn", matrix_to_json(s.item_conn.matrix())}};
}

inline ModelSpec spec_from_json(const nlohmann::json& j) {
  ModelSpec s;
  s.n_users = j.at("n_users").get<std::size_t>();
  s.n_items = j.at("n_items").get<std::size_t>();
  s.k1 = j.at("k1").get<int>();
  s.k2 = j.at("k2").get<int>();
  s.alphabet = RatingAlphabet(j.at("alphabet").get<std::vector<int>>());
  s.nominal_blocks = blocks_from_json(j.at("nominal"), s.k1, s.k2, s.alphabet);
  s.personalization = PersonalizationModel(matrix_from_json(j.at("personalization")));
  s.user_conn = ConnectivityMatrix(matrix_from_json(j.at("user_conn")));
  s.item_conn = ConnectivityMatrix(matrix_from_json(j.at("item_conn")));
  return s;
}

/// Writes instance.json, user_graph.txt, item_graph.txt, ratings.csv,
/// user_labels.txt, item_labels.txt and nominal.json into `dir`.
inline void save_instance(const std::filesystem::path& dir, const GeneratedInstance& inst) {
  std::filesystem::create_directories(dir);
  {
    auto out = detail::open_out(dir / "instance.json");
    nlohmann::json j{{"spec", spec_to_json(inst.spec)}, {"p", inst.p}, {"seed", inst.seed}};
    out << j.dump(2) << '\n';
  }
  save_edge_list(dir / "user_graph.txt", inst.user_graph);
  save_edge_list(dir / "item_graph.txt", inst.item_graph);
  save_ratings_csv(dir / "ratings.csv", inst.observation, inst.spec.alphabet);
  save_labels(dir / "user_labels.txt", inst.user_labels);
  save_labels(dir / "item_labels.txt", inst.item_labels);
  save_nominal(dir / "nominal.json", inst.nominal, inst.spec.alphabet);
}

inline GeneratedInstance load_instance(const std::filesystem::path& dir) {
  GeneratedInstance inst;
  {
    auto in = detail::open_in(dir / "instance.json");
    const auto j = nlohmann::json::parse(in);
    inst.spec = spec_from_json(j.at("spec"));
    inst.p = j.at("p").get<double>();
    inst.seed = j.at("seed").get<std::uint64_t>();
  }
  const auto& s = inst.spec;
  inst.user_graph = load_edge_list(dir / "user_graph.txt", s.n_users);
  inst.item_graph = load_edge_list(dir / "item_graph.txt", s.n_items);
  inst.observation = load_ratings_csv(dir / "ratings.csv", s.alphabet, s.n_users, s.n_items);
  inst.user_labels = load_labels(dir / "user_labels.txt", s.k1);
  inst.item_labels = load_labels(dir / "item_labels.txt", s.k2);
  if (inst.user_labels.size() != s.n_users || inst.item_labels.size() != s.n_items) {
    throw Error("load_instance: label files do not match instance dimensions");
  }
  inst.nominal = NominalMatrix(s.nominal_blocks, inst.user_labels, inst.item_labels, s.alphabet.size());
  return inst;
}

}  // namespace mc2g
