#include "recgeo/error.hpp"
#include "recgeo/recpca.hpp"

#include "support.hpp"

#include <doctest.h>

#include <numbers>

using namespace recgeo;
using testsupport::Gen;

namespace {

struct Instance {
  Index n = 0;
  std::vector<Edge> edges;
  Matrix x;
};

Instance random_instance(Gen& gen, Index max_nodes = 50, Index max_dim = 12) {
  Instance inst;
  inst.n = gen.index(4, max_nodes);
  inst.edges = gen.edges(inst.n, gen.uniform(0.05, 0.4));
  inst.x = gen.gaussian(inst.n, gen.index(2, max_dim));
  // Uneven row scales, as in real embedding tables.
  for (Index i = 0; i < inst.n; ++i) inst.x.row(i) *= std::exp(gen.normal());
  return inst;
}

Laplacian lap_of(const Instance& inst) {
  return Laplacian(CooccurrenceGraph::from_edges(inst.n, inst.edges));
}

RecPcaResult fit(const Instance& inst, double alpha, Index d, TransformMode mode = TransformMode::exact) {
  RecPcaConfig cfg;
  cfg.alpha = alpha;
  cfg.out_dim = d;
  cfg.mode = mode;
  return fit_transform(EmbeddingMatrix(inst.x), lap_of(inst), cfg);
}

// f(mu) = sqrt(1 - alpha + alpha mu): the scalar symbol of (I - alpha L)^{1/2}
// in terms of an eigenvalue mu of I - L.
double symbol(double alpha, double mu) { return std::sqrt(std::max(0.0, 1.0 - alpha + alpha * mu)); }

// Chebyshev coefficients a_k = (2/pi) int_0^pi f(cos t) cos(k t) dt by
// Gauss-Chebyshev quadrature (a_0 halved so that f = sum a_k T_k).
std::vector<double> chebyshev_coefficients(double alpha, int count, int nodes = 4000) {
  std::vector<double> a(static_cast<std::size_t>(count), 0.0);
  for (int j = 0; j < nodes; ++j) {
    const double t = std::numbers::pi * (j + 0.5) / nodes;
    const double f = symbol(alpha, std::cos(t));
    for (int k = 0; k < count; ++k) a[static_cast<std::size_t>(k)] += f * std::cos(k * t);
  }
  for (auto& v : a) v *= 2.0 / nodes;
  a[0] *= 0.5;
  return a;
}

double chebyshev_eval(const std::vector<double>& a, double mu) {
  double t0 = 1.0, t1 = mu, sum = a[0];
  if (a.size() > 1) sum += a[1] * mu;
  for (std::size_t k = 2; k < a.size(); ++k) {
    const double t2 = 2.0 * mu * t1 - t0;
    sum += a[k] * t2;
    t0 = t1;
    t1 = t2;
  }
  return sum;
}

// The library's scalar polynomial, read off by applying it to an edgeless
// graph (I - L = I) is not enough to see the mu-dependence, so use a 2-node
// graph whose I - L has eigenvalues +1 and -1 and a 1x1 signal basis.
double library_symbol(double alpha, int order, double mu) {
  // Single edge: I - L = [[0,1],[1,0]]; eigenvectors (1,1)/sqrt2 -> mu=1, (1,-1)/sqrt2 -> mu=-1.
  const Laplacian lap(CooccurrenceGraph::from_edges(2, std::vector<Edge>{{0, 1, 1.0}}));
  Matrix v(2, 1);
  if (mu > 0) {
    v << 1, 1;
  } else {
    v << 1, -1;
  }
  const Matrix out = sqrt_apply_chebyshev(lap, alpha, order, v);
  return out(0, 0) / v(0, 0);
}

}  // namespace

TEST_CASE("transform mode names") {
  CHECK(parse_transform_mode("exact") == TransformMode::exact);
  CHECK(parse_transform_mode("cheb1") == TransformMode::chebyshev1);
  CHECK(parse_transform_mode("chebyshev2") == TransformMode::chebyshev2);
  CHECK(to_string(TransformMode::chebyshev2) == "cheb2");
  CHECK_THROWS_AS(parse_transform_mode("taylor"), ValidationError);
}

TEST_CASE("config validation") {
  RecPcaConfig cfg;
  cfg.out_dim = 3;
  cfg.alpha = 0.51;
  CHECK_THROWS_AS(cfg.validate(5), ValidationError);
  cfg.alpha = -0.1;
  CHECK_THROWS_AS(cfg.validate(5), ValidationError);
  cfg.alpha = 0.5;
  CHECK_NOTHROW(cfg.validate(5));
  CHECK_THROWS_AS(cfg.validate(2), ValidationError);
  cfg.out_dim = 0;
  CHECK_THROWS_AS(cfg.validate(5), ValidationError);
}

TEST_CASE("top eigenvectors agree with a Jacobi solve") {
  Gen gen(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Index p = gen.index(2, 15);
    const Matrix b = gen.gaussian(p, p);
    const Matrix s = b * b.transpose();
    const Index d = gen.index(1, p);
    const auto pairs = top_eigenvectors(s, d);
    const auto oracle = testsupport::jacobi(s);
    for (Index k = 0; k < d; ++k) {
      CHECK(testsupport::rel_err(pairs.values(k), oracle.values(p - 1 - k), 1e-12) < 1e-9);
      // Same eigenvector up to sign, and the sign convention holds.
      const double overlap = std::abs(pairs.vectors.col(k).dot(oracle.vectors.col(p - 1 - k)));
      CHECK(overlap == doctest::Approx(1.0).epsilon(1e-8));
      Index big = 0;
      pairs.vectors.col(k).cwiseAbs().maxCoeff(&big);
      CHECK(pairs.vectors(big, k) > 0.0);
    }
  }
  Matrix asym = Matrix::Identity(3, 3);
  asym(0, 1) = 1.0;
  CHECK_THROWS_AS(top_eigenvectors(asym, 1), ValidationError);
}

TEST_CASE("alpha = 0 exact mode is uncentered PCA") {
  Gen gen(7);
  for (int trial = 0; trial < 20; ++trial) {
    const auto inst = random_instance(gen);
    const Index d = gen.index(1, inst.x.cols());
    const auto res = fit(inst, 0.0, d);
    const auto eig = testsupport::jacobi(inst.x.transpose() * inst.x);
    const Index p = inst.x.cols();
    Matrix oracle(p, d);
    for (Index k = 0; k < d; ++k) oracle.col(k) = eig.vectors.col(p - 1 - k);
    oracle = testsupport::sign_fix(oracle);
    const Matrix expected = inst.x * oracle;
    CHECK((res.embeddings.values() - expected).norm() <= 1e-8 * std::max(1.0, expected.norm()));
  }
}

TEST_CASE("reduced embeddings have diagonal covariance in exact mode") {
  Gen gen(8);
  for (int trial = 0; trial < 20; ++trial) {
    const auto inst = random_instance(gen);
    const double alpha = gen.uniform(0.0, 0.5);
    const auto res = fit(inst, alpha, gen.index(1, inst.x.cols()));
    const Matrix c = res.embeddings.values().transpose() * res.embeddings.values();
    const double max_diag = c.diagonal().maxCoeff();
    for (Index i = 0; i < c.rows(); ++i) {
      for (Index j = 0; j < c.cols(); ++j) {
        if (i != j) CHECK(std::abs(c(i, j)) <= 1e-8 * max_diag);
      }
      if (i > 0) CHECK(c(i, i) <= c(i - 1, i - 1) * (1.0 + 1e-9));
      // The diagonal is the spectrum of S.
      CHECK(testsupport::rel_err(c(i, i), res.model.eigenvalues(i), 1e-12) < 1e-8);
    }
  }
}

TEST_CASE("full pipeline matches the dense brute-force oracle") {
  Gen gen(12);
  for (int trial = 0; trial < 20; ++trial) {
    const auto inst = random_instance(gen, 50, 8);
    const double alpha = gen.uniform(0.0, 0.5);
    // Beyond rank(S) the eigenvectors of the zero eigenvalue are not unique.
    const Index d = gen.index(1, std::min(inst.n, inst.x.cols()));
    const auto res = fit(inst, alpha, d);
    const auto [proj, emb] =
        testsupport::brute_force_recpca(inst.x, testsupport::dense_laplacian(inst.n, inst.edges), alpha, d);
    CHECK((res.model.projection - proj).norm() <= 1e-7);
    CHECK((res.embeddings.values() - emb).norm() <= 1e-7 * std::max(1.0, emb.norm()));
  }
}

TEST_CASE("Ky Fan optimality against random orthonormal projections") {
  Gen gen(13);
  for (int trial = 0; trial < 10; ++trial) {
    const auto inst = random_instance(gen, 40, 10);
    const double alpha = gen.uniform(0.0, 0.5);
    const Index d = gen.index(1, inst.x.cols());
    const auto res = fit(inst, alpha, d);
    const Matrix s = objective_matrix(inst.x, lap_of(inst), alpha);
    const double best = (res.model.projection.transpose() * s * res.model.projection).trace();
    CHECK(best == doctest::Approx(res.model.eigenvalues.sum()).epsilon(1e-10));
    for (int k = 0; k < 100; ++k) {
      const Matrix q = gen.orthonormal(inst.x.cols(), d);
      CHECK((q.transpose() * s * q).trace() <= best * (1.0 + 1e-10) + 1e-10);
    }
  }
}

TEST_CASE("objective matrix is PSD for alpha in [0, 0.5]") {
  Gen gen(14);
  for (int trial = 0; trial < 20; ++trial) {
    const auto inst = random_instance(gen, 30, 8);
    for (double alpha : {0.0, 0.25, 0.5}) {
      const Matrix s = objective_matrix(inst.x, lap_of(inst), alpha);
      CHECK((s - s.transpose()).norm() == 0.0);
      const auto eig = testsupport::jacobi(s);
      CHECK(eig.values(0) >= -1e-9 * std::max(1.0, eig.values.cwiseAbs().maxCoeff()));
    }
  }
}

TEST_CASE("exact square root") {
  Gen gen(15);
  const Matrix x = gen.gaussian(2, 3);
  const Laplacian pair(CooccurrenceGraph::from_edges(2, std::vector<Edge>{{0, 1, 1.0}}));

  CHECK(sqrt_apply_exact(pair, 0.0, x) == x);
  const Laplacian none(CooccurrenceGraph::from_edges(2, std::vector<Edge>{}));
  CHECK(sqrt_apply_exact(none, 0.5, x) == x);

  // Squaring oracle: the factor applied twice is I - alpha L.
  const Matrix factor = sqrt_apply_exact(pair, 0.5, Matrix::Identity(2, 2));
  const Matrix target = Matrix::Identity(2, 2) - 0.5 * pair.dense();
  CHECK((factor * factor - target).norm() < 1e-10);
  const auto spec = testsupport::jacobi(factor);
  CHECK(std::abs(spec.values(0)) < 1e-7);
  CHECK(spec.values(1) == doctest::Approx(1.0).epsilon(1e-12));

  for (int trial = 0; trial < 10; ++trial) {
    const auto inst = random_instance(gen, 30);
    const Laplacian lap = lap_of(inst);
    const double alpha = gen.uniform(0.0, 0.5);
    const Matrix f = sqrt_apply_exact(lap, alpha, Matrix::Identity(inst.n, inst.n));
    const Matrix g = Matrix::Identity(inst.n, inst.n) - alpha * lap.dense();
    CHECK((f * f - g).norm() < 1e-10);
    CHECK((f - f.transpose()).norm() < 1e-10);
  }
}

TEST_CASE("exact square root refuses graphs beyond the size guard") {
  const Index n = kExactSqrtMaxNodes + 1;
  const Laplacian lap(CooccurrenceGraph::from_edges(n, std::vector<Edge>{{0, 1, 1.0}}));
  CHECK_THROWS_AS(sqrt_apply_exact(lap, 0.3, Matrix::Ones(n, 1)), ValidationError);
  CHECK_NOTHROW(sqrt_apply_chebyshev(lap, 0.3, 2, Matrix::Ones(n, 1)));
}

TEST_CASE("low-order square root formulas") {
  Gen gen(16);
  const Matrix x = gen.gaussian(5, 3);
  const Laplacian none(CooccurrenceGraph::from_edges(5, std::vector<Edge>{}));
  const Laplacian some(CooccurrenceGraph::from_edges(5, gen.edges(5, 0.7)));
  for (int order : {1, 2}) {
    CHECK((sqrt_apply_chebyshev(some, 0.0, order, x) - x).norm() < 1e-15);
  }
  // Edgeless graph at alpha 0.5: scalar evaluation at mu = 1.
  const double c1 = std::sqrt(0.5) + 0.5 / (2.0 * std::sqrt(0.5));
  CHECK(c1 == doctest::Approx(1.06066).epsilon(1e-5));
  CHECK((sqrt_apply_chebyshev(none, 0.5, 1, x) - c1 * x).norm() < 1e-14);
  const double c2 = c1 - 0.25 / (8.0 * std::pow(0.5, 1.5));
  CHECK((sqrt_apply_chebyshev(none, 0.5, 2, x) - c2 * x).norm() < 1e-14);
  CHECK_THROWS_AS(sqrt_apply_chebyshev(none, 0.3, 3, x), ValidationError);
}

TEST_CASE("implemented expansion is the Taylor series at mu = 0; quadrature measures the gap") {
  for (double alpha : {0.1, 0.3, 0.5}) {
    // Taylor coefficients by central finite differences of the symbol.
    const double h = 1e-4;
    const double f0 = symbol(alpha, 0.0);
    const double f1 = (symbol(alpha, h) - symbol(alpha, -h)) / (2 * h);
    const double f2 = (symbol(alpha, h) - 2 * f0 + symbol(alpha, -h)) / (h * h);
    for (double mu : {-1.0, 1.0}) {
      CHECK(library_symbol(alpha, 1, mu) == doctest::Approx(f0 + f1 * mu).epsilon(1e-7));
      CHECK(library_symbol(alpha, 2, mu) == doctest::Approx(f0 + f1 * mu + 0.5 * f2 * mu * mu).epsilon(1e-6));
    }

    // True truncated Chebyshev series from quadrature.
    const auto a = chebyshev_coefficients(alpha, 3);
    double cheb_err = 0.0, taylor_err = 0.0, coef_gap = 0.0;
    coef_gap = std::abs(a[0] - (f0 + 0.25 * f2));  // T_2 = 2mu^2 - 1 shifts the constant
    for (int j = 0; j <= 200; ++j) {
      const double mu = -1.0 + j / 100.0;
      const double exact = symbol(alpha, mu);
      cheb_err = std::max(cheb_err, std::abs(chebyshev_eval(a, mu) - exact));
      taylor_err = std::max(taylor_err, std::abs(f0 + f1 * mu + 0.5 * f2 * mu * mu - exact));
    }
    MESSAGE("alpha=" << alpha << " sup error: truncated Chebyshev " << cheb_err << ", implemented "
                     << taylor_err << ", constant-term gap " << coef_gap);
    // The two expansions are different polynomials, and the true Chebyshev
    // truncation is the more accurate one in the sup norm.
    CHECK(coef_gap > 0.0);
    CHECK(cheb_err <= taylor_err);
    // Sanity on the quadrature itself: a_k decays and reproduces f at mu = 0 to series accuracy.
    // At alpha = 0.5 the symbol has a square-root branch point at mu = -1, so
    // convergence is only algebraic there.
    const auto many = chebyshev_coefficients(alpha, 30);
    const double err30 = std::abs(chebyshev_eval(many, 0.3) - symbol(alpha, 0.3));
    if (alpha < 0.5) {
      CHECK(err30 < 1e-6);
    } else {
      const auto few = chebyshev_coefficients(alpha, 8);
      CHECK(err30 < std::abs(chebyshev_eval(few, 0.3) - symbol(alpha, 0.3)));
    }
  }
}

TEST_CASE("second order is never worse than first order") {
  Gen gen(17);
  for (int trial = 0; trial < 20; ++trial) {
    const auto inst = random_instance(gen, 100);
    const Laplacian lap = lap_of(inst);
    for (double alpha : {0.1, 0.3, 0.5}) {
      const Matrix exact = sqrt_apply_exact(lap, alpha, inst.x);
      const double e1 = (sqrt_apply_chebyshev(lap, alpha, 1, inst.x) - exact).norm();
      const double e2 = (sqrt_apply_chebyshev(lap, alpha, 2, inst.x) - exact).norm();
      CHECK(e2 <= e1 * (1.0 + 1e-12) + 1e-14);
    }
  }
}

TEST_CASE("projection does not depend on the transform mode") {
  Gen gen(18);
  const auto inst = random_instance(gen, 30, 6);
  const auto exact = fit(inst, 0.3, 3, TransformMode::exact);
  const auto cheb = fit(inst, 0.3, 3, TransformMode::chebyshev2);
  CHECK(exact.model.projection == cheb.model.projection);
  CHECK(cheb.model.config.mode == TransformMode::chebyshev2);
}

TEST_CASE("transform reproduces fit_transform and handles centering") {
  Gen gen(19);
  auto inst = random_instance(gen, 30, 6);
  inst.x.rowwise() += Vector::Constant(inst.x.cols(), 3.0).transpose();
  RecPcaConfig cfg;
  cfg.alpha = 0.2;
  cfg.out_dim = 3;
  cfg.center = true;
  const Laplacian lap = lap_of(inst);
  const auto res = fit_transform(EmbeddingMatrix(inst.x), lap, cfg);
  CHECK(res.model.mean.size() == inst.x.cols());
  CHECK((res.model.mean - inst.x.colwise().mean().transpose()).norm() < 1e-12);
  const auto again = transform(res.model, EmbeddingMatrix(inst.x), lap);
  CHECK((again.values() - res.embeddings.values()).norm() < 1e-12);

  Matrix centered = inst.x;
  centered.rowwise() -= res.model.mean.transpose();
  const auto [proj, emb] =
      testsupport::brute_force_recpca(centered, testsupport::dense_laplacian(inst.n, inst.edges), 0.2, 3);
  CHECK((res.embeddings.values() - emb).norm() < 1e-8 * emb.norm());

  CHECK_THROWS_AS(transform(res.model, EmbeddingMatrix(Matrix::Ones(inst.n, 2)), lap), DimensionError);
}

TEST_CASE("fit rejects mismatched graph") {
  Gen gen(20);
  const Matrix x = gen.gaussian(6, 3);
  const Laplacian lap(CooccurrenceGraph::from_edges(5, std::vector<Edge>{}));
  RecPcaConfig cfg;
  cfg.out_dim = 2;
  CHECK_THROWS_AS(fit_transform(EmbeddingMatrix(x), lap, cfg), DimensionError);
}

TEST_CASE("model sidecar") {
  Gen gen(21);
  const auto inst = random_instance(gen, 20, 5);
  const auto res = fit(inst, 0.4, 2, TransformMode::chebyshev1);
  const auto j = model_sidecar(res.model);
  CHECK(j["alpha"].get<double>() == 0.4);
  CHECK(j["d"].get<int>() == 2);
  CHECK(j["mode"].get<std::string>() == "cheb1");
  CHECK(j["eigenvalues"].size() == 2);
}

TEST_CASE("larger alpha tends to lower total variation (soft)") {
  Gen gen(22);
  int violations = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto inst = random_instance(gen, 40, 8);
    const Laplacian lap = lap_of(inst);
    const Index d = gen.index(1, inst.x.cols());
    const double tv_lo = total_variation(fit(inst, 0.1, d).embeddings, lap);
    const double tv_hi = total_variation(fit(inst, 0.4, d).embeddings, lap);
    if (tv_hi > tv_lo * (1.0 + 1e-6)) ++violations;
  }
  MESSAGE("monotone total-variation violations: " << violations << "/20");
  WARN(violations == 0);
}
