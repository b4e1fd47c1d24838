#include "fclust/rand_dist.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "fclust/errors.hpp"

namespace fclust {

Eigen::LLT<Matrix> chol_with_jitter(const Matrix& a, const char* context) {
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() == Eigen::Success) return llt;
  Matrix jittered = a;
  jittered.diagonal() += 1e-8 * a.diagonal().cwiseAbs();
  llt.compute(jittered);
  if (llt.info() == Eigen::Success) return llt;
  throw NumericalError(std::string("Cholesky failed after jitter: ") + context);
}

double logdet_from_llt(const Eigen::LLT<Matrix>& llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

Vector mvn_prec_chol(const Vector& mean, const Eigen::LLT<Matrix>& llt, RngStream& rng) {
  Vector z(mean.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
  // x = mean + L^-T z has covariance (L L^T)^-1.
  llt.matrixU().solveInPlace(z);
  return mean + z;
}

Vector mvn_prec(const Vector& mean, const Matrix& precision, RngStream& rng) {
  auto llt = chol_with_jitter(precision, "mvn_prec");
  return mvn_prec_chol(mean, llt, rng);
}

Vector mvn_cov(const Vector& mean, const Matrix& cov, RngStream& rng) {
  auto llt = chol_with_jitter(cov, "mvn_cov");
  Vector z(mean.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
  return mean + llt.matrixL() * z;
}

// Draw from the standard normal conditioned on exceeding a.
static double std_normal_above(double a, RngStream& rng) {
  if (a <= 5.0) {
    // Upper-tail inverse CDF: survival values are well conditioned near 0.
    double q = normal_sf(a);
    double v = q * rng.uniform();
    return -normal_quantile(v);
  }
  // Robert's exponential rejection for the far tail.
  const double alpha = 0.5 * (a + std::sqrt(a * a + 4.0));
  for (;;) {
    double e = -std::log(rng.uniform()) / alpha;
    double x = a + e;
    double accept = std::exp(-0.5 * (x - alpha) * (x - alpha));
    if (rng.uniform() <= accept) return x;
  }
}

double trunc_normal(double mu, TruncSide side, RngStream& rng) {
  if (side == TruncSide::AboveZero) return mu + std_normal_above(-mu, rng);
  return -(-mu + std_normal_above(mu, rng));
}

double gamma_draw(double shape, double scale, RngStream& rng) {
  if (!(shape > 0.0) || !(scale > 0.0))
    throw ValidationError("gamma_draw: shape and scale must be positive");
  if (shape < 1.0) {
    double u = rng.uniform();
    return gamma_draw(shape + 1.0, scale, rng) * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = rng.normal();
    double t = 1.0 + c * x;
    if (t <= 0.0) continue;
    double v = t * t * t;
    double u = rng.uniform();
    if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return scale * d * v;
  }
}

double inv_gamma(double shape, double scale, RngStream& rng) {
  return 1.0 / gamma_draw(shape, 1.0 / scale, rng);
}

double beta_draw(double a, double b, RngStream& rng) {
  if (!(a > 0.0) || !(b > 0.0)) throw ValidationError("beta_draw: a, b must be positive");
  double x = gamma_draw(a, 1.0, rng);
  double y = gamma_draw(b, 1.0, rng);
  return x / (x + y);
}

int poisson_draw(double lambda, RngStream& rng) {
  if (!(lambda >= 0.0)) throw ValidationError("poisson_draw: lambda must be >= 0");
  const double limit = std::exp(-lambda);
  int k = 0;
  double prod = rng.uniform();
  while (prod > limit) {
    ++k;
    prod *= rng.uniform();
  }
  return k;
}

Matrix inv_wishart(double df, const Matrix& scale, RngStream& rng) {
  const Eigen::Index r = scale.rows();
  if (scale.cols() != r) throw ValidationError("inv_wishart: scale must be square");
  if (!(df > static_cast<double>(r) - 1.0))
    throw ValidationError("inv_wishart: df must exceed r - 1");
  auto lltD = chol_with_jitter(scale, "inv_wishart scale");

  // Bartlett factor of Wishart(df, I): lower triangular, chi on the diagonal.
  Matrix a = Matrix::Zero(r, r);
  for (Eigen::Index i = 0; i < r; ++i) {
    double chi2 = gamma_draw(0.5 * (df - static_cast<double>(i)), 2.0, rng);
    a(i, i) = std::sqrt(chi2);
    for (Eigen::Index j = 0; j < i; ++j) a(i, j) = rng.normal();
  }
  // X = C A A^T C^T ~ Wishart(df, scale^-1) with C = L_D^-T, so
  // X^-1 = L_D A^-T A^-1 L_D^T = M^T M with M = A^-1 L_D^T.
  Matrix m = Matrix(lltD.matrixU());
  a.triangularView<Eigen::Lower>().solveInPlace(m);
  Matrix out = m.transpose() * m;
  return 0.5 * (out + out.transpose());
}

int categorical_draw(const Vector& log_weights, RngStream& rng) {
  const Eigen::Index n = log_weights.size();
  if (n == 0) throw InternalError("categorical_draw: empty weight vector");
  double mx = log_weights.maxCoeff();
  if (!std::isfinite(mx)) throw InternalError("categorical_draw: no finite log weight");
  double total = 0.0;
  Vector w(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    w[k] = std::exp(log_weights[k] - mx);
    total += w[k];
  }
  double u = rng.uniform() * total;
  double cum = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    cum += w[k];
    if (u <= cum) return static_cast<int>(k);
  }
  return static_cast<int>(n - 1);
}

double log_beta(double a, double b) { return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b); }

}  // namespace fclust
