#include "recgeo/conditioning.hpp"

#include "recgeo/error.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace recgeo {

namespace {

constexpr double kInfinity = std::numeric_limits<double>::infinity();

void check_symmetric(const Matrix& m, const char* where) {
  if (m.rows() != m.cols()) throw DimensionError(std::string(where) + ": matrix is not square");
  if (m.size() == 0) throw DimensionError(std::string(where) + ": empty matrix");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale) {
    throw ValidationError(std::string(where) + ": matrix is not symmetric");
  }
}

Vector symmetric_eigenvalues(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(m, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw Error("eigenvalue computation did not converge");
  return solver.eigenvalues();  // ascending
}

Matrix normalize_rows(const Matrix& rows) {
  Matrix out = rows;
  for (Index i = 0; i < out.rows(); ++i) {
    const double n = out.row(i).norm();
    if (!(n > 0.0)) throw ValidationError("row " + std::to_string(i) + " has zero norm");
    out.row(i) /= n;
  }
  return out;
}

std::optional<ConditionNumber> try_condition(const Matrix& m, Index rank) {
  try {
    return condition_number(m, rank);
  } catch (const ValidationError&) {
    return std::nullopt;
  }
}

nlohmann::json optional_number(const std::optional<double>& v) {
  if (!v) return "not-applicable";
  if (std::isinf(*v)) return "infinite";
  return *v;
}

nlohmann::json to_json(const BoundCheck& check) {
  nlohmann::json j;
  j["bound"] = optional_number(check.bound);
  j["holds"] = check.holds ? nlohmann::json(*check.holds) : nlohmann::json("not-applicable");
  return j;
}

}  // namespace

Vector softmax(const Vector& logits) {
  if (logits.size() == 0) return logits;
  const double shift = logits.maxCoeff();
  Vector p = (logits.array() - shift).exp().matrix();
  return p / p.sum();
}

double log_sum_exp(const Vector& logits) {
  const double shift = logits.maxCoeff();
  return shift + std::log((logits.array() - shift).exp().sum());
}

Matrix hessian_logits(const Vector& p) {
  Matrix h = -p * p.transpose();
  h.diagonal() += p;
  return h;
}

EffectiveSubspace effective_subspace(const Vector& logits, ItemId y, Index m) {
  if (m < 1) throw ValidationError("effective subspace size must be at least 1");
  if (m > logits.size()) {
    throw ValidationError("effective subspace size " + std::to_string(m) + " exceeds " +
                          std::to_string(logits.size()) + " items");
  }
  if (y < 0 || y >= logits.size()) throw ValidationError("target item outside the logit vector");

  std::vector<ItemId> others;
  others.reserve(static_cast<std::size_t>(logits.size() - 1));
  for (ItemId i = 0; i < logits.size(); ++i) {
    if (i != y) others.push_back(i);
  }
  const auto take = static_cast<std::size_t>(m - 1);
  std::partial_sort(others.begin(), others.begin() + static_cast<std::ptrdiff_t>(take), others.end(),
                    [&](ItemId a, ItemId b) {
                      return logits(a) > logits(b) || (logits(a) == logits(b) && a < b);
                    });
  EffectiveSubspace out;
  out.indices.reserve(take + 1);
  out.indices.push_back(y);
  out.indices.insert(out.indices.end(), others.begin(),
                     others.begin() + static_cast<std::ptrdiff_t>(take));
  return out;
}

Matrix restrict_rows(const Matrix& embeddings, const EffectiveSubspace& subspace) {
  Matrix out(subspace.m(), embeddings.cols());
  for (Index k = 0; k < subspace.m(); ++k) {
    const ItemId i = subspace.indices[static_cast<std::size_t>(k)];
    if (i < 0 || i >= embeddings.rows()) throw DimensionError("subspace index outside embeddings");
    out.row(k) = embeddings.row(i);
  }
  return out;
}

Matrix restrict_hessian(const Matrix& hessian, const EffectiveSubspace& subspace) {
  const Index m = subspace.m();
  Matrix out(m, m);
  for (Index a = 0; a < m; ++a) {
    for (Index b = 0; b < m; ++b) {
      out(a, b) = hessian(subspace.indices[static_cast<std::size_t>(a)],
                          subspace.indices[static_cast<std::size_t>(b)]);
    }
  }
  return out;
}

double effective_coherence(const Matrix& rows) {
  if (rows.rows() < 2) throw ValidationError("effective coherence needs at least two rows");
  const Matrix unit = normalize_rows(rows);
  const Matrix cos = unit * unit.transpose();
  double rho = 0.0;
  for (Index i = 0; i < cos.rows(); ++i) {
    for (Index j = i + 1; j < cos.cols(); ++j) rho = std::max(rho, std::abs(cos(i, j)));
  }
  return std::min(rho, 1.0);
}

bool ConditionNumber::finite() const noexcept { return std::isfinite(value); }

ConditionNumber condition_number(const Matrix& m) { return condition_number(m, m.rows()); }

ConditionNumber condition_number(const Matrix& m, Index rank) {
  check_symmetric(m, "condition_number");
  if (rank < 1 || rank > m.rows()) throw DimensionError("condition_number: rank out of range");
  const Vector eig = symmetric_eigenvalues(m);
  ConditionNumber k;
  k.lambda_max = eig(eig.size() - 1);
  k.lambda_min = eig(eig.size() - rank);
  if (!(k.lambda_max > 0.0)) {
    throw ValidationError("condition_number: largest eigenvalue is not positive");
  }
  k.value = k.lambda_min < kSingularThreshold * k.lambda_max ? kInfinity
                                                             : k.lambda_max / k.lambda_min;
  return k;
}

Matrix hessian_repr(const Matrix& e_u, const Matrix& h_su) {
  if (h_su.rows() != h_su.cols() || h_su.rows() != e_u.rows()) {
    throw DimensionError("hessian_repr: E_U has " + std::to_string(e_u.rows()) +
                         " rows but H_sU is " + std::to_string(h_su.rows()) + "x" +
                         std::to_string(h_su.cols()));
  }
  const Matrix h = e_u.transpose() * h_su * e_u;
  return 0.5 * (h + h.transpose());
}

std::optional<double> coherence_bound(Index m, double rho) {
  const double spread = static_cast<double>(m - 1) * rho;
  if (!(spread < 1.0)) return std::nullopt;
  return (1.0 + spread) / (1.0 - spread);
}

bool ConditioningReport::all_hold() const noexcept {
  for (const auto* check : {&norm_disparity_upper, &gram_lower, &coherence_upper}) {
    if (check->holds && !*check->holds) return false;
  }
  return true;
}

ConditioningReport bound_report(const Matrix& e_u, const Matrix& h_su) {
  if (h_su.rows() != h_su.cols() || h_su.rows() != e_u.rows()) {
    throw DimensionError("bound_report: E_U and H_sU do not conform");
  }
  ConditioningReport r;
  r.m = e_u.rows();
  r.dim = e_u.cols();
  r.rank = std::min(r.m, r.dim);
  if (r.m == 0 || r.dim == 0) return r;

  const Vector norms = e_u.rowwise().norm();
  const bool nonzero_rows = (norms.array() > 0.0).all();
  if (nonzero_rows) {
    r.r_max = norms.maxCoeff();
    r.r_min = norms.minCoeff();
    if (r.m >= 2) r.rho = effective_coherence(e_u);
    const Matrix unit = normalize_rows(e_u);
    r.kappa_cos = try_condition(unit * unit.transpose(), r.rank);
  }
  r.kappa_gram = try_condition(e_u * e_u.transpose(), r.rank);

  const Vector hs_eig = symmetric_eigenvalues(0.5 * (h_su + h_su.transpose()));
  r.beta_ns = hs_eig(hs_eig.size() - 1);
  r.hessian_positive_definite = r.beta_ns > 0.0 && hs_eig(0) > kSingularThreshold * r.beta_ns;
  r.alpha_ns = r.hessian_positive_definite ? hs_eig(0) : 0.0;
  r.kappa_hh = try_condition(hessian_repr(e_u, h_su), r.rank);

  if (r.hessian_positive_definite && r.kappa_hh) {
    const double ratio = r.beta_ns / r.alpha_ns;
    const double lhs = r.kappa_hh->value;
    if (r.kappa_cos && r.r_min) {
      const double disparity = *r.r_max / *r.r_min;
      const double bound = ratio * disparity * disparity * r.kappa_cos->value;
      r.norm_disparity_upper.bound = bound;
      r.norm_disparity_upper.holds = std::isinf(bound) || lhs <= bound * (1.0 + kBoundSlack);
    }
    if (r.kappa_gram) {
      const double bound = r.kappa_gram->value / ratio;
      r.gram_lower.bound = bound;
      r.gram_lower.holds = std::isinf(lhs) || lhs >= bound * (1.0 - kBoundSlack);
    }
  }
  if (r.rho && r.kappa_cos) {
    if (const auto bound = coherence_bound(r.m, *r.rho)) {
      r.coherence_upper.bound = *bound;
      r.coherence_upper.holds = r.kappa_cos->value <= *bound * (1.0 + kBoundSlack);
    }
  }
  return r;
}

ConditioningReport analyze_example(const Matrix& embeddings, const Vector& logits, ItemId target,
                                   Index m) {
  if (embeddings.rows() != logits.size()) {
    throw DimensionError("analyze_example: logits and embeddings disagree on item count");
  }
  const auto subspace = effective_subspace(logits, target, m);
  const Matrix h_su = restrict_hessian(hessian_logits(softmax(logits)), subspace);
  return bound_report(restrict_rows(embeddings, subspace), h_su);
}

nlohmann::json to_json(const ConditionNumber& k) {
  nlohmann::json j;
  j["value"] = k.finite() ? nlohmann::json(k.value) : nlohmann::json("infinite");
  j["lambda_min"] = k.lambda_min;
  j["lambda_max"] = k.lambda_max;
  return j;
}

nlohmann::json to_json(const ConditioningReport& r) {
  auto kappa = [](const std::optional<ConditionNumber>& k) {
    return k ? to_json(*k) : nlohmann::json("not-applicable");
  };
  nlohmann::json j;
  j["m"] = r.m;
  j["dim"] = r.dim;
  j["rank"] = r.rank;
  j["rho"] = optional_number(r.rho);
  j["r_max"] = optional_number(r.r_max);
  j["r_min"] = optional_number(r.r_min);
  j["kappa_cos"] = kappa(r.kappa_cos);
  j["kappa_gram"] = kappa(r.kappa_gram);
  j["kappa_hh"] = kappa(r.kappa_hh);
  j["alpha_ns"] = r.alpha_ns;
  j["beta_ns"] = r.beta_ns;
  j["hessian_positive_definite"] = r.hessian_positive_definite;
  j["bounds"] = {{"norm_disparity_upper", to_json(r.norm_disparity_upper)},
                 {"gram_lower", to_json(r.gram_lower)},
                 {"coherence_upper", to_json(r.coherence_upper)}};
  j["all_hold"] = r.all_hold();
  return j;
}

}  // namespace recgeo
