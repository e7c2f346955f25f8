#pragma once

#include "recgeo/embedding_matrix.hpp"

#include <json.hpp>

#include <optional>
#include <vector>

namespace recgeo {

/// Stable softmax (max-subtracted).
Vector softmax(const Vector& logits);

/// Log-sum-exp of the logits, computed with max subtraction.
double log_sum_exp(const Vector& logits);

/// Curvature of the cross-entropy loss in logit space: Diag(p) - p p^T.
Matrix hessian_logits(const Vector& p);

/// The positive item followed by the hardest negatives.
struct EffectiveSubspace {
  std::vector<ItemId> indices;

  Index m() const noexcept { return static_cast<Index>(indices.size()); }
};

/// {y} followed by the m-1 highest-scoring other items, ties to the smaller id.
EffectiveSubspace effective_subspace(const Vector& logits, ItemId y, Index m);

/// Rows of `embeddings` selected by the subspace, in subspace order.
Matrix restrict_rows(const Matrix& embeddings, const EffectiveSubspace& subspace);

/// Principal submatrix of a logit-space Hessian on the subspace.
Matrix restrict_hessian(const Matrix& hessian, const EffectiveSubspace& subspace);

/// Largest absolute cosine between two distinct rows. Needs >= 2 rows, none zero.
double effective_coherence(const Matrix& rows);

/// Relative eigenvalue floor below which a condition number is reported infinite.
inline constexpr double kSingularThreshold = 1e-10;

struct ConditionNumber {
  double value = 1.0;  // +inf when the matrix is numerically singular
  double lambda_min = 0.0;
  double lambda_max = 0.0;

  bool finite() const noexcept;
};

/// lambda_max / lambda_min of a symmetric PSD matrix. Throws ValidationError
/// for non-symmetric input or lambda_max <= 0.
ConditionNumber condition_number(const Matrix& m);

/// Same, but over the `rank` largest eigenvalues only, i.e. on the range of a
/// Gram matrix whose rank is known a priori.
ConditionNumber condition_number(const Matrix& m, Index rank);

/// H_h restricted to the subspace: E_U^T H_sU E_U.
Matrix hessian_repr(const Matrix& e_u, const Matrix& h_su);

/// (1 + (m-1) rho) / (1 - (m-1) rho) when (m-1) rho < 1.
std::optional<double> coherence_bound(Index m, double rho);

/// Relative slack used when judging whether a bound holds.
inline constexpr double kBoundSlack = 1e-8;

struct BoundCheck {
  std::optional<double> bound;  // nullopt: not applicable
  std::optional<bool> holds;
};

/// Loss-geometry diagnostics of one effective subspace.
///
/// Gram-type condition numbers (cosine, Gram, and the representation Hessian)
/// are taken over the min(m, d) leading eigenvalues: for m != d one of
/// E_U E_U^T and E_U^T E_U is singular by shape, and the two share their
/// non-zero spectrum.
struct ConditioningReport {
  Index m = 0;
  Index dim = 0;
  Index rank = 0;
  std::optional<double> rho;
  std::optional<double> r_max;
  std::optional<double> r_min;
  std::optional<ConditionNumber> kappa_cos;
  std::optional<ConditionNumber> kappa_gram;
  std::optional<ConditionNumber> kappa_hh;
  double alpha_ns = 0.0;  // 0 when H_sU is not positive definite
  double beta_ns = 0.0;
  bool hessian_positive_definite = false;
  BoundCheck norm_disparity_upper;  // (beta/alpha) (r_max/r_min)^2 kappa_cos >= kappa_hh
  BoundCheck gram_lower;            // (alpha/beta) kappa_gram <= kappa_hh
  BoundCheck coherence_upper;       // coherence_bound(m, rho) >= kappa_cos

  /// True when every applicable bound holds.
  bool all_hold() const noexcept;
};

/// Never throws on degenerate data; inapplicable fields are left empty.
/// Throws DimensionError when shapes do not conform.
ConditioningReport bound_report(const Matrix& e_u, const Matrix& h_su);

/// Full pipeline for one example: softmax of `logits`, effective subspace of
/// size m around `target`, restriction of embeddings and Hessian, report.
ConditioningReport analyze_example(const Matrix& embeddings, const Vector& logits, ItemId target,
                                   Index m);

nlohmann::json to_json(const ConditionNumber& k);
nlohmann::json to_json(const ConditioningReport& report);

}  // namespace recgeo
