#ifndef FCLUST_RAND_DIST_HPP
#define FCLUST_RAND_DIST_HPP

#include <Eigen/Dense>

#include "fclust/rng.hpp"

namespace fclust {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Cholesky with a one-shot ridge retry: if LLT of A fails, retries with
// 1e-8 * diag(A) added to the diagonal, then throws NumericalError.
Eigen::LLT<Matrix> chol_with_jitter(const Matrix& a, const char* context);

// log det(A) from its Cholesky factor.
double logdet_from_llt(const Eigen::LLT<Matrix>& llt);

// Draw from N(mean, Lambda^-1) given the precision Lambda via its Cholesky
// factor; the inverse is never formed.
Vector mvn_prec(const Vector& mean, const Matrix& precision, RngStream& rng);
Vector mvn_prec_chol(const Vector& mean, const Eigen::LLT<Matrix>& llt, RngStream& rng);

// Draw from N(mean, cov) with cov given directly (used for small r).
Vector mvn_cov(const Vector& mean, const Matrix& cov, RngStream& rng);

enum class TruncSide { BelowZero, AboveZero };

// Draw from N(mu, 1) truncated to (-inf, 0] or (0, inf).  Inverse CDF in the
// body of the distribution, exponential rejection once the kept tail starts
// beyond 5 sigma.
double trunc_normal(double mu, TruncSide side, RngStream& rng);

// Gamma(shape, scale) via Marsaglia-Tsang; shape < 1 handled by boosting.
double gamma_draw(double shape, double scale, RngStream& rng);

// 1 / Gamma(shape, rate = scale): the inverse-gamma with density
// x^-(shape+1) exp(-scale/x).
double inv_gamma(double shape, double scale, RngStream& rng);

double beta_draw(double a, double b, RngStream& rng);

// Poisson(lambda) by Knuth's product-of-uniforms method.
int poisson_draw(double lambda, RngStream& rng);

// Inverse Wishart IW(df, scale): mean scale/(df - r - 1).  Bartlett draw of
// the Wishart factor followed by triangular solves; no explicit inverse.
Matrix inv_wishart(double df, const Matrix& scale, RngStream& rng);

// Index draw proportional to exp(log_weights), normalized in log space.
int categorical_draw(const Vector& log_weights, RngStream& rng);

// log Beta function.
double log_beta(double a, double b);

}  // namespace fclust

#endif
