#include "recgeo/graph.hpp"

#include "recgeo/error.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <tuple>
#include <utility>

namespace recgeo {

namespace {

void check_node(ItemId node, Index num_nodes) {
  if (node < 0 || node >= num_nodes) {
    throw ValidationError("node " + std::to_string(node) + " outside [0, " +
                          std::to_string(num_nodes) + ")");
  }
}

}  // namespace

CooccurrenceGraph::CooccurrenceGraph(Index num_nodes)
    : adjacency_(static_cast<std::size_t>(num_nodes)), degrees_(Vector::Zero(num_nodes)) {}

CooccurrenceGraph CooccurrenceGraph::from_edges(Index num_nodes, std::span<const Edge> edges) {
  std::map<std::pair<ItemId, ItemId>, double> merged;
  for (const auto& e : edges) {
    check_node(e.u, num_nodes);
    check_node(e.v, num_nodes);
    if (e.u == e.v) throw ValidationError("self-loop on node " + std::to_string(e.u));
    if (!(e.weight >= 0.0) || !std::isfinite(e.weight)) {
      throw ValidationError("edge weight must be finite and non-negative");
    }
    merged[std::minmax(e.u, e.v)] += e.weight;
  }

  CooccurrenceGraph g(num_nodes);
  for (const auto& [key, w] : merged) {
    g.adjacency_[static_cast<std::size_t>(key.first)].push_back({key.second, w});
  }
  for (const auto& [key, w] : merged) {
    g.adjacency_[static_cast<std::size_t>(key.second)].push_back({key.first, w});
  }
  for (auto& list : g.adjacency_) {
    std::sort(list.begin(), list.end(),
              [](const Neighbor& a, const Neighbor& b) { return a.id < b.id; });
  }
  for (Index i = 0; i < num_nodes; ++i) {
    double d = 0.0;
    for (const auto& n : g.adjacency_[static_cast<std::size_t>(i)]) d += n.weight;
    g.degrees_(i) = d;
  }
  g.num_edges_ = merged.size();
  return g;
}

const std::vector<Neighbor>& CooccurrenceGraph::neighbors(ItemId node) const {
  check_node(node, num_nodes());
  return adjacency_[static_cast<std::size_t>(node)];
}

double CooccurrenceGraph::weight(ItemId a, ItemId b) const {
  const auto& list = neighbors(a);
  check_node(b, num_nodes());
  const auto it = std::lower_bound(list.begin(), list.end(), b,
                                   [](const Neighbor& n, ItemId id) { return n.id < id; });
  return it != list.end() && it->id == b ? it->weight : 0.0;
}

std::vector<Edge> CooccurrenceGraph::edges() const {
  std::vector<Edge> out;
  out.reserve(num_edges_);
  for (Index u = 0; u < num_nodes(); ++u) {
    for (const auto& n : adjacency_[static_cast<std::size_t>(u)]) {
      if (n.id > u) out.push_back({u, n.id, n.weight});
    }
  }
  return out;
}

double CooccurrenceGraph::total_weight() const {
  double total = 0.0;
  for (const auto& e : edges()) total += e.weight;
  return total;
}

CooccurrenceGraph build_cooccurrence(const InteractionLog& log) {
  log.validate();
  std::vector<Edge> edges;
  for (const auto& seq : log.sequences) {
    for (std::size_t t = 0; t + 1 < seq.items.size(); ++t) {
      if (seq.items[t] != seq.items[t + 1]) edges.push_back({seq.items[t], seq.items[t + 1], 1.0});
    }
  }
  return CooccurrenceGraph::from_edges(log.num_items, edges);
}

CooccurrenceGraph sparsify_topk(const CooccurrenceGraph& graph, Index k) {
  if (k < 1) throw ValidationError("top-K sparsification needs K >= 1");
  std::vector<Edge> kept;
  std::vector<Neighbor> ranked;
  for (Index u = 0; u < graph.num_nodes(); ++u) {
    ranked = graph.neighbors(u);
    std::stable_sort(ranked.begin(), ranked.end(), [](const Neighbor& a, const Neighbor& b) {
      return a.weight > b.weight;  // input is id-sorted, so ties stay id-ascending
    });
    const auto take = std::min<std::size_t>(static_cast<std::size_t>(k), ranked.size());
    for (std::size_t r = 0; r < take; ++r) kept.push_back({u, ranked[r].id, ranked[r].weight});
  }
  // An edge nominated from both ends appears twice; collapse before merging weights.
  for (auto& e : kept) {
    if (e.u > e.v) std::swap(e.u, e.v);
  }
  std::sort(kept.begin(), kept.end(), [](const Edge& a, const Edge& b) {
    return std::tie(a.u, a.v) < std::tie(b.u, b.v);
  });
  kept.erase(std::unique(kept.begin(), kept.end(),
                         [](const Edge& a, const Edge& b) { return a.u == b.u && a.v == b.v; }),
             kept.end());
  return CooccurrenceGraph::from_edges(graph.num_nodes(), kept);
}

Laplacian::Laplacian(const CooccurrenceGraph& graph) {
  const Index n = graph.num_nodes();
  const Vector& deg = graph.degrees();
  isolated_.assign(static_cast<std::size_t>(n), false);
  Vector inv_sqrt = Vector::Zero(n);
  for (Index i = 0; i < n; ++i) {
    if (deg(i) > 0.0) {
      inv_sqrt(i) = 1.0 / std::sqrt(deg(i));
    } else {
      isolated_[static_cast<std::size_t>(i)] = true;
    }
  }

  std::vector<Eigen::Triplet<double>> lap;
  std::vector<Eigen::Triplet<double>> shift;
  for (Index i = 0; i < n; ++i) {
    if (isolated_[static_cast<std::size_t>(i)]) {
      shift.emplace_back(i, i, 1.0);
      continue;
    }
    lap.emplace_back(i, i, 1.0);
    for (const auto& nb : graph.neighbors(i)) {
      const double a = nb.weight * inv_sqrt(i) * inv_sqrt(nb.id);
      lap.emplace_back(i, nb.id, -a);
      shift.emplace_back(i, nb.id, a);
    }
  }
  laplacian_.resize(n, n);
  laplacian_.setFromTriplets(lap.begin(), lap.end());
  shifted_.resize(n, n);
  shifted_.setFromTriplets(shift.begin(), shift.end());
}

Matrix Laplacian::apply(const Matrix& x) const {
  if (x.rows() != num_nodes()) throw DimensionError("Laplacian apply: row count mismatch");
  return laplacian_ * x;
}

Matrix Laplacian::apply_shifted(const Matrix& x) const {
  if (x.rows() != num_nodes()) throw DimensionError("Laplacian apply: row count mismatch");
  return shifted_ * x;
}

Matrix Laplacian::dense() const { return Matrix(laplacian_); }

double total_variation(const Matrix& signals, const Laplacian& lap) {
  if (signals.rows() != lap.num_nodes()) {
    throw DimensionError("total_variation: signal has " + std::to_string(signals.rows()) +
                         " rows, graph has " + std::to_string(lap.num_nodes()) + " nodes");
  }
  double tv = 0.0;
  for (Index c = 0; c < signals.cols(); ++c) {
    const Vector col = signals.col(c);
    tv += col.dot(lap.matrix() * col);
  }
  return tv;
}

double total_variation(const EmbeddingMatrix& signals, const Laplacian& lap) {
  return total_variation(signals.values(), lap);
}

void write_graph(const CooccurrenceGraph& graph, std::ostream& out) {
  out << "#nodes=" << graph.num_nodes() << '\n';
  std::array<char, 32> buf{};
  for (const auto& e : graph.edges()) {
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), e.weight);
    out << e.u << '\t' << e.v << '\t';
    out.write(buf.data(), res.ptr - buf.data());
    out << '\n';
  }
}

CooccurrenceGraph read_graph(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  Index num_nodes = -1;
  std::vector<Edge> edges;
  std::map<std::pair<ItemId, ItemId>, std::size_t> seen;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (num_nodes < 0) {
      constexpr std::string_view kHeader = "#nodes=";
      if (line.rfind(kHeader, 0) != 0) throw ParseError("missing '#nodes=N' header", line_no);
      const char* first = line.data() + kHeader.size();
      const char* last = line.data() + line.size();
      const auto [ptr, ec] = std::from_chars(first, last, num_nodes);
      if (ec != std::errc{} || ptr != last || num_nodes < 0) {
        throw ParseError("bad node count in header", line_no);
      }
      continue;
    }
    if (line.front() == '#') continue;
    Edge e;
    const char* p = line.data();
    const char* end = line.data() + line.size();
    auto field = [&](auto& value) {
      const auto [ptr, ec] = std::from_chars(p, end, value);
      if (ec != std::errc{}) throw ParseError("bad edge line '" + line + "'", line_no);
      p = ptr;
    };
    field(e.u);
    if (p == end || *p++ != '\t') throw ParseError("expected i<TAB>j<TAB>weight", line_no);
    field(e.v);
    if (p == end || *p++ != '\t') throw ParseError("expected i<TAB>j<TAB>weight", line_no);
    field(e.weight);
    if (p != end) throw ParseError("trailing characters on edge line", line_no);
    if (e.u >= e.v) throw ParseError("edge endpoints must satisfy i < j", line_no);
    if (e.v >= num_nodes || e.u < 0) throw ParseError("edge endpoint outside node range", line_no);
    if (!seen.emplace(std::make_pair(e.u, e.v), line_no).second) {
      throw ParseError("duplicate edge " + std::to_string(e.u) + "-" + std::to_string(e.v),
                       line_no);
    }
    edges.push_back(e);
  }
  if (num_nodes < 0) throw ParseError("empty graph file", 0);
  try {
    return CooccurrenceGraph::from_edges(num_nodes, edges);
  } catch (const ValidationError& e) {
    throw ParseError(e.what(), 0);
  }
}

void save_graph(const CooccurrenceGraph& graph, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  write_graph(graph, out);
  if (!out) throw Error("write failed for " + path.string());
}

CooccurrenceGraph load_graph(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open graph file " + path.string());
  try {
    return read_graph(in);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), 0);
  }
}

}  // namespace recgeo
