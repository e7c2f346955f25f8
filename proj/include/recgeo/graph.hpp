#pragma once

#include "recgeo/embedding_matrix.hpp"
#include "recgeo/ingest.hpp"

#include <Eigen/SparseCore>

#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

namespace recgeo {

struct Edge {
  ItemId u = 0;
  ItemId v = 0;
  double weight = 0.0;

  friend bool operator==(const Edge&, const Edge&) = default;
};

struct Neighbor {
  ItemId id = 0;
  double weight = 0.0;
};

/// Weighted undirected item graph without self-loops. Immutable once built.
class CooccurrenceGraph {
 public:
  CooccurrenceGraph() = default;
  explicit CooccurrenceGraph(Index num_nodes);

  /// Parallel edges are summed. Throws ValidationError on self-loops,
  /// out-of-range endpoints or negative weights.
  static CooccurrenceGraph from_edges(Index num_nodes, std::span<const Edge> edges);

  Index num_nodes() const noexcept { return static_cast<Index>(adjacency_.size()); }
  std::size_t num_edges() const noexcept { return num_edges_; }

  /// Neighbors sorted by id.
  const std::vector<Neighbor>& neighbors(ItemId node) const;
  double weight(ItemId a, ItemId b) const;
  const Vector& degrees() const noexcept { return degrees_; }

  /// Each undirected edge once, with u < v, sorted by (u, v).
  std::vector<Edge> edges() const;
  double total_weight() const;

 private:
  std::vector<std::vector<Neighbor>> adjacency_;
  Vector degrees_;
  std::size_t num_edges_ = 0;
};

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Symmetric normalized Laplacian I - D^{-1/2} A D^{-1/2}. Rows and columns
/// of degree-zero nodes are zero, so I - L is the identity on them.
class Laplacian {
 public:
  Laplacian() = default;
  explicit Laplacian(const CooccurrenceGraph& graph);

  Index num_nodes() const noexcept { return laplacian_.rows(); }
  const SparseMatrix& matrix() const noexcept { return laplacian_; }
  /// I - L, stored separately so it can be applied without cancellation.
  const SparseMatrix& shifted() const noexcept { return shifted_; }
  const std::vector<bool>& isolated_mask() const noexcept { return isolated_; }

  Matrix apply(const Matrix& x) const;
  Matrix apply_shifted(const Matrix& x) const;
  Matrix dense() const;

 private:
  SparseMatrix laplacian_;
  SparseMatrix shifted_;
  std::vector<bool> isolated_;
};

/// Adds 1 to weight(q_t, q_{t+1}) for every adjacent pair of distinct items.
CooccurrenceGraph build_cooccurrence(const InteractionLog& log);

/// Keeps an edge iff one of its endpoints ranks it among its `k` heaviest
/// edges (ties go to the smaller neighbor id). Weights are kept as-is.
CooccurrenceGraph sparsify_topk(const CooccurrenceGraph& graph, Index k);

inline Laplacian normalized_laplacian(const CooccurrenceGraph& graph) { return Laplacian(graph); }

/// tr(S^T L S), accumulated one column at a time.
double total_variation(const Matrix& signals, const Laplacian& lap);
double total_variation(const EmbeddingMatrix& signals, const Laplacian& lap);

/// Edge list TSV: a `#nodes=N` header, then `i<TAB>j<TAB>weight` with i < j.
void write_graph(const CooccurrenceGraph& graph, std::ostream& out);
CooccurrenceGraph read_graph(std::istream& in);
void save_graph(const CooccurrenceGraph& graph, const std::filesystem::path& path);
CooccurrenceGraph load_graph(const std::filesystem::path& path);

}  // namespace recgeo
