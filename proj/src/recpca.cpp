#include "recgeo/recpca.hpp"

#include "recgeo/error.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <string>

namespace recgeo {

namespace {

void check_alpha(double alpha) {
  if (!(alpha >= 0.0 && alpha <= 0.5)) {
    throw ValidationError("alpha must lie in [0, 0.5] for (I - alpha L)^{1/2} to be defined, got " +
                          std::to_string(alpha));
  }
}

void check_rows(const Matrix& x, const Laplacian& lap, const char* where) {
  if (x.rows() != lap.num_nodes()) {
    throw DimensionError(std::string(where) + ": matrix has " + std::to_string(x.rows()) +
                         " rows but the graph has " + std::to_string(lap.num_nodes()) + " nodes");
  }
}

}  // namespace

std::string_view to_string(TransformMode mode) {
  switch (mode) {
    case TransformMode::exact:
      return "exact";
    case TransformMode::chebyshev1:
      return "cheb1";
    case TransformMode::chebyshev2:
      return "cheb2";
  }
  return "exact";
}

TransformMode parse_transform_mode(std::string_view text) {
  if (text == "exact") return TransformMode::exact;
  if (text == "cheb1" || text == "chebyshev1") return TransformMode::chebyshev1;
  if (text == "cheb2" || text == "chebyshev2") return TransformMode::chebyshev2;
  throw ValidationError("unknown transform mode '" + std::string(text) +
                        "' (expected exact, cheb1 or cheb2)");
}

void RecPcaConfig::validate(Index input_dim) const {
  check_alpha(alpha);
  if (out_dim < 1 || out_dim > input_dim) {
    throw ValidationError("output dimension " + std::to_string(out_dim) + " must lie in [1, " +
                          std::to_string(input_dim) + "]");
  }
}

Matrix objective_matrix(const Matrix& x, const Laplacian& lap, double alpha) {
  check_alpha(alpha);
  check_rows(x, lap, "objective_matrix");
  const Matrix damped = x - alpha * lap.apply(x);
  Matrix s = x.transpose() * damped;
  return 0.5 * (s + s.transpose());
}

EigenPairs top_eigenvectors(const Matrix& s, Index d) {
  if (s.rows() != s.cols()) throw DimensionError("top_eigenvectors: matrix is not square");
  if (d < 0 || d > s.rows()) {
    throw DimensionError("top_eigenvectors: requested " + std::to_string(d) + " of " +
                         std::to_string(s.rows()) + " eigenpairs");
  }
  const double scale = std::max(1.0, s.cwiseAbs().maxCoeff());
  if ((s - s.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale) {
    throw ValidationError("top_eigenvectors: matrix is not symmetric");
  }

  Eigen::SelfAdjointEigenSolver<Matrix> solver(s);
  if (solver.info() != Eigen::Success) throw Error("eigendecomposition did not converge");

  const Index n = s.rows();
  EigenPairs out{Matrix(n, d), Vector(d)};
  for (Index k = 0; k < d; ++k) {
    const Index src = n - 1 - k;
    out.values(k) = solver.eigenvalues()(src);
    Vector v = solver.eigenvectors().col(src);
    Index pivot = 0;
    for (Index i = 1; i < n; ++i) {
      if (std::abs(v(i)) > std::abs(v(pivot))) pivot = i;
    }
    if (v(pivot) < 0.0) v = -v;
    out.vectors.col(k) = v;
  }
  return out;
}

Matrix sqrt_apply_exact(const Laplacian& lap, double alpha, const Matrix& x) {
  check_alpha(alpha);
  check_rows(x, lap, "sqrt_apply_exact");
  if (alpha == 0.0 || lap.matrix().nonZeros() == 0) return x;
  if (lap.num_nodes() > kExactSqrtMaxNodes) {
    throw ValidationError("exact square root limited to " + std::to_string(kExactSqrtMaxNodes) +
                          " nodes (graph has " + std::to_string(lap.num_nodes()) +
                          "); use a Chebyshev transform mode instead");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> solver(lap.dense());
  if (solver.info() != Eigen::Success) throw Error("Laplacian eigendecomposition failed");
  const Vector factor = (1.0 - alpha * solver.eigenvalues().array()).max(0.0).sqrt().matrix();
  const Matrix& u = solver.eigenvectors();
  return u * (factor.asDiagonal() * (u.transpose() * x));
}

Matrix sqrt_apply_chebyshev(const Laplacian& lap, double alpha, int order, const Matrix& x) {
  check_alpha(alpha);
  check_rows(x, lap, "sqrt_apply_chebyshev");
  if (order != 1 && order != 2) throw ValidationError("expansion order must be 1 or 2");
  const double root = std::sqrt(1.0 - alpha);
  const double c1 = alpha / (2.0 * root);
  const Matrix shifted = lap.apply_shifted(x);
  Matrix out = root * x + c1 * shifted;
  if (order == 2) {
    const double c2 = alpha * alpha / (8.0 * root * root * root);
    out -= c2 * lap.apply_shifted(shifted);
  }
  return out;
}

Matrix sqrt_apply(const Laplacian& lap, double alpha, TransformMode mode, const Matrix& x) {
  switch (mode) {
    case TransformMode::exact:
      return sqrt_apply_exact(lap, alpha, x);
    case TransformMode::chebyshev1:
      return sqrt_apply_chebyshev(lap, alpha, 1, x);
    case TransformMode::chebyshev2:
      return sqrt_apply_chebyshev(lap, alpha, 2, x);
  }
  throw ValidationError("unknown transform mode");
}

RecPcaResult fit_transform(const EmbeddingMatrix& x, const Laplacian& lap, const RecPcaConfig& cfg) {
  cfg.validate(x.cols());
  check_rows(x.values(), lap, "fit_transform");

  RecPcaModel model;
  model.config = cfg;
  Matrix data = x.values();
  if (cfg.center) {
    model.mean = data.colwise().mean().transpose();
    data.rowwise() -= model.mean.transpose();
  }
  auto pairs = top_eigenvectors(objective_matrix(data, lap, cfg.alpha), cfg.out_dim);
  model.projection = std::move(pairs.vectors);
  model.eigenvalues = std::move(pairs.values);

  Matrix reduced = sqrt_apply(lap, cfg.alpha, cfg.mode, data) * model.projection;
  return {std::move(model), EmbeddingMatrix(std::move(reduced))};
}

EmbeddingMatrix transform(const RecPcaModel& model, const EmbeddingMatrix& x, const Laplacian& lap) {
  if (x.cols() != model.projection.rows()) {
    throw DimensionError("transform: embedding width " + std::to_string(x.cols()) +
                         " does not match projection input " +
                         std::to_string(model.projection.rows()));
  }
  Matrix data = x.values();
  if (model.mean.size() == data.cols()) data.rowwise() -= model.mean.transpose();
  return EmbeddingMatrix(sqrt_apply(lap, model.config.alpha, model.config.mode, data) *
                         model.projection);
}

nlohmann::json model_sidecar(const RecPcaModel& model) {
  nlohmann::json j;
  j["alpha"] = model.config.alpha;
  j["d"] = model.config.out_dim;
  j["mode"] = std::string(to_string(model.config.mode));
  j["centered"] = model.config.center;
  j["eigenvalues"] = std::vector<double>(model.eigenvalues.data(),
                                         model.eigenvalues.data() + model.eigenvalues.size());
  return j;
}

}  // namespace recgeo
