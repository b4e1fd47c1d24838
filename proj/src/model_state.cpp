#include "fclust/model_state.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "fclust/errors.hpp"
#include "fclust/rand_dist.hpp"

namespace fclust {

void Hyperparams::validate(Eigen::Index r) const {
  if (K < 1) throw ValidationError("truncation level K must be >= 1");
  if (!(nu > 0.0)) throw ValidationError("concentration nu must be positive");
  if (!(a > 0.0) || !(b > 0.0)) throw ValidationError("beta-binomial shapes must be positive");
  if (!(p_scale > 0.0)) throw ValidationError("fixed-effect prior scale must be positive");
  if (!(d_scale > 0.0)) throw ValidationError("IW scale must be positive");
  if (r > 0 && !(resolved_u(r) > static_cast<double>(r) - 1.0))
    throw ValidationError("IW degrees of freedom must exceed r - 1");
}

void ClusterParams::validate() const {
  if (!(tau > 0.0)) throw ValidationError("cluster scale tau must be positive");
  Eigen::Index active = 0;
  for (const auto& gl : gamma) {
    if (gl.size() < 2) throw ValidationError("indicator vector too short");
    if (!gl.bits[0]) throw ValidationError("constant basis indicator must stay on");
    active += gl.count();
  }
  if (phi.size() != active)
    throw ValidationError("phi length does not match active indicator count");
}

Vector stick_weights(const Vector& v) {
  const Eigen::Index k = v.size();
  if (k < 1) throw ValidationError("stick vector must be nonempty");
  if (v[k - 1] != 1.0) throw ValidationError("last stick must equal 1");
  Vector pi(k);
  double remaining = 1.0;
  for (Eigen::Index i = 0; i < k; ++i) {
    if (v[i] < 0.0 || v[i] > 1.0) throw ValidationError("sticks must lie in [0,1]");
    pi[i] = v[i] * remaining;
    remaining *= (1.0 - v[i]);
  }
  return pi;
}

std::vector<int> ChainState::occupancy() const {
  std::vector<int> m(clusters.size(), 0);
  for (int c : alloc) m[static_cast<std::size_t>(c)]++;
  return m;
}

void ChainState::validate(const LongitudinalDataset& data, const Hyperparams& hyper) const {
  const auto K = static_cast<std::size_t>(hyper.K);
  if (clusters.size() != K) throw ValidationError("state has wrong cluster count");
  if (v.size() != hyper.K || v[hyper.K - 1] != 1.0)
    throw ValidationError("stick state invalid");
  if (static_cast<Eigen::Index>(alloc.size()) != data.n_subjects())
    throw ValidationError("allocation vector has wrong length");
  for (int c : alloc)
    if (c < 0 || c >= hyper.K) throw ValidationError("allocation out of range");
  if (beta.size() != data.q) throw ValidationError("beta has wrong length");
  if (psi.rows() != data.r || psi.cols() != data.r) throw ValidationError("psi has wrong shape");
  if (data.r > 0) {
    Eigen::LLT<Matrix> llt(psi);
    if (llt.info() != Eigen::Success) throw ValidationError("psi is not positive definite");
  }
  for (const auto& c : clusters) c.validate();
  if (latent.size() != data.subjects.size()) throw ValidationError("latent block wrong length");
  for (std::size_t i = 0; i < latent.size(); ++i) {
    const auto& yi = data.subjects[i].y;
    if (latent[i].size() != yi.size()) throw ValidationError("latent vector wrong length");
    for (Eigen::Index j = 0; j < yi.size(); ++j) {
      bool pos = latent[i][j] > 0.0;
      if (pos != (yi[j] == 1)) throw ValidationError("latent sign disagrees with response");
    }
  }
}

double log_prior_gamma(const IndicatorVector& gamma_l, double a, double b) {
  const double m1 = static_cast<double>(gamma_l.size() - 1);  // M_l + 1 selectable slots
  const double s = static_cast<double>(gamma_l.selectable_count());
  return log_beta(s + a, m1 - s + b);
}

IndicatorVector draw_gamma_prior(Eigen::Index n_terms, double a, double b, RngStream& rng) {
  const Eigen::Index slots = n_terms - 1;  // M_l + 1
  // Count marginal: p(s) ~ C(slots, s) B(s + a, slots - s + b).
  Vector logw(slots + 1);
  for (Eigen::Index s = 0; s <= slots; ++s) {
    double lchoose = std::lgamma(static_cast<double>(slots) + 1.0) -
                     std::lgamma(static_cast<double>(s) + 1.0) -
                     std::lgamma(static_cast<double>(slots - s) + 1.0);
    logw[s] = lchoose + log_beta(static_cast<double>(s) + a,
                                 static_cast<double>(slots - s) + b);
  }
  const Eigen::Index s = categorical_draw(logw, rng);

  IndicatorVector g = IndicatorVector::constant_only(n_terms);
  // Partial Fisher-Yates over the selectable slots.
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(slots));
  for (Eigen::Index i = 0; i < slots; ++i) idx[static_cast<std::size_t>(i)] = i + 1;
  for (Eigen::Index i = 0; i < s; ++i) {
    auto span = static_cast<double>(slots - i);
    auto j = i + static_cast<Eigen::Index>(rng.uniform() * span);
    j = std::min(j, slots - 1);
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    g.bits[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])] = 1;
  }
  return g;
}

ClusterParams draw_from_base_measure(const Hyperparams& hyper, const FullDesign& design,
                                     Eigen::Index n_subjects, RngStream& rng) {
  const auto& basis = design.basis();
  ClusterParams out;
  out.gamma.reserve(static_cast<std::size_t>(basis.n_covariates()));
  for (Eigen::Index l = 0; l < basis.n_covariates(); ++l)
    out.gamma.push_back(draw_gamma_prior(basis.n_terms(l), hyper.a, hyper.b, rng));
  out.tau = inv_gamma(0.5, static_cast<double>(n_subjects) / 2.0, rng);

  Matrix r = design.gram_for(out.gamma);
  auto llt = chol_with_jitter(r, "base measure Gram");
  Vector z(r.rows());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
  llt.matrixU().solveInPlace(z);  // z ~ N(0, R^-1)
  out.phi = std::sqrt(out.tau) * z;
  return out;
}

void to_json(nlohmann::json& j, const Hyperparams& h) {
  j = nlohmann::json{{"K", h.K},   {"nu", h.nu},           {"a", h.a},
                     {"b", h.b},   {"P_scale", h.p_scale}, {"u", h.u},
                     {"D_scale", h.d_scale}};
}

void from_json(const nlohmann::json& j, Hyperparams& h) {
  h.K = j.value("K", 10);
  h.nu = j.value("nu", 1.0);
  h.a = j.value("a", 1.0);
  h.b = j.value("b", 1.0);
  h.p_scale = j.value("P_scale", 100.0);
  h.u = j.value("u", 0.0);
  h.d_scale = j.value("D_scale", 1.0);
}

}  // namespace fclust
