#pragma once

#include "recgeo/embedding_matrix.hpp"
#include "recgeo/graph.hpp"

#include <json.hpp>

#include <filesystem>
#include <string_view>

namespace recgeo {

enum class TransformMode { exact, chebyshev1, chebyshev2 };

std::string_view to_string(TransformMode mode);
/// Accepts "exact", "cheb1"/"chebyshev1", "cheb2"/"chebyshev2".
TransformMode parse_transform_mode(std::string_view text);

/// Largest graph for which the exact square root (dense eigendecomposition
/// of L) is attempted.
inline constexpr Index kExactSqrtMaxNodes = 2000;

struct RecPcaConfig {
  double alpha = 0.3;  // must lie in [0, 0.5] so that I - alpha L stays PSD
  Index out_dim = 64;
  TransformMode mode = TransformMode::exact;
  bool center = false;

  void validate(Index input_dim) const;
};

struct EigenPairs {
  Matrix vectors;  // orthonormal columns
  Vector values;   // descending
};

/// S = X^T (I - alpha L) X, explicitly symmetrized.
Matrix objective_matrix(const Matrix& x, const Laplacian& lap, double alpha);

/// Top-d eigenpairs of a symmetric matrix. Each column is signed so that its
/// entry of largest magnitude (first one on ties) is positive.
EigenPairs top_eigenvectors(const Matrix& s, Index d);

/// (I - alpha L)^{1/2} X through a full eigendecomposition of L; eigenvalues
/// of the factor are sqrt(max(0, 1 - alpha*lambda)).
Matrix sqrt_apply_exact(const Laplacian& lap, double alpha, const Matrix& x);

/// Low-order expansion of (I - alpha L)^{1/2} in the shifted operator I - L,
/// using sparse products only. `order` is 1 or 2.
Matrix sqrt_apply_chebyshev(const Laplacian& lap, double alpha, int order, const Matrix& x);

Matrix sqrt_apply(const Laplacian& lap, double alpha, TransformMode mode, const Matrix& x);

struct RecPcaModel {
  Matrix projection;  // input_dim x out_dim
  Vector eigenvalues;
  RecPcaConfig config;
  Vector mean;  // column means removed before fitting; empty unless config.center
};

struct RecPcaResult {
  RecPcaModel model;
  EmbeddingMatrix embeddings;
};

/// Fits the projection on X and returns E = (I - alpha L)^{1/2} X P.
RecPcaResult fit_transform(const EmbeddingMatrix& x, const Laplacian& lap, const RecPcaConfig& cfg);

/// Applies an already fitted projection to (possibly different) signals on the same graph.
EmbeddingMatrix transform(const RecPcaModel& model, const EmbeddingMatrix& x, const Laplacian& lap);

nlohmann::json model_sidecar(const RecPcaModel& model);

}  // namespace recgeo
