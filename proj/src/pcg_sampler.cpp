#include "fclust/pcg_sampler.hpp"

#include <cmath>
#include <string>

#include "fclust/errors.hpp"
#include "fclust/rand_dist.hpp"

namespace fclust {

namespace {

// Substream tags: step number within sweep, entity index within step.
RngStream step_stream(RngStream chain_rng, std::uint32_t sweep, std::uint32_t step) {
  return chain_rng.fork(sweep, step);
}

Matrix psi_inverse(const Matrix& psi) {
  auto llt = chol_with_jitter(psi, "psi");
  return llt.solve(Matrix::Identity(psi.rows(), psi.cols()));
}

// Active-column cache for a cluster, rebuilt whenever gamma or phi changes.
struct ClusterDesignRef {
  std::vector<Eigen::Index> cols;
  const Vector* phi;
};

std::vector<ClusterDesignRef> cluster_designs(const SamplerWorkspace& ws, const ChainState& state) {
  std::vector<ClusterDesignRef> out(state.clusters.size());
  for (std::size_t k = 0; k < state.clusters.size(); ++k) {
    out[k].cols = ws.design().active_columns(state.clusters[k].gamma);
    out[k].phi = &state.clusters[k].phi;
  }
  return out;
}

Vector cluster_mean_for_subject(const SamplerWorkspace& ws, Eigen::Index i,
                                const ClusterDesignRef& ref, const Vector& base) {
  return ws.design().design_for(i, ref.cols) * (*ref.phi) + base;
}

Vector subject_base_mean(const SamplerWorkspace& ws, const ChainState& state, Eigen::Index i) {
  const auto& s = ws.data().subjects[static_cast<std::size_t>(i)];
  Vector base = Vector::Zero(s.n_obs());
  if (ws.data().q > 0) base += s.X * state.beta;
  if (ws.data().r > 0) base += s.Z * state.b[static_cast<std::size_t>(i)];
  return base;
}

double log_prior_gamma_total(const GammaSet& gamma, const Hyperparams& hyper) {
  double acc = 0.0;
  for (const auto& gl : gamma) acc += log_prior_gamma(gl, hyper.a, hyper.b);
  return acc;
}

// log f for one cluster given full-basis stats; prior-only when unoccupied.
double log_f_from_stats(const SamplerWorkspace& ws, const FullClusterStats& stats,
                        const GammaSet& gamma, double tau) {
  const double prior = log_prior_gamma_total(gamma, ws.hyper());
  if (stats.member_count == 0) return prior;
  const auto cols = ws.design().active_columns(gamma);
  Matrix r = ws.design().gram_for(cols);
  Matrix s = stats.xi(cols, cols) + r / tau;
  auto llt_s = chol_with_jitter(s, "step 1 posterior precision");
  auto llt_r = chol_with_jitter(r, "step 1 prior Gram");
  Vector w = stats.xi_vec(cols);
  llt_s.matrixL().solveInPlace(w);
  const double d = static_cast<double>(cols.size());
  return prior -
         0.5 * (d * std::log(tau) + logdet_from_llt(llt_s) - logdet_from_llt(llt_r)) +
         0.5 * w.squaredNorm();
}

}  // namespace

SamplerWorkspace::SamplerWorkspace(const LongitudinalDataset& data, const Hyperparams& hyper,
                                   const BasisConfig& basis, Eigen::Index grid_points)
    : data_(&data), hyper_(&hyper), basis_(&basis), design_(data, basis) {
  data.validate();
  hyper.validate(data.r);
  if (grid_points < 2) throw ValidationError("grid needs at least 2 points");

  grid_.resize(grid_points);
  for (Eigen::Index g = 0; g < grid_points; ++g)
    grid_[g] = data.t_min + (data.t_max - data.t_min) * static_cast<double>(g) /
                                static_cast<double>(grid_points - 1);
  for (Eigen::Index l = 0; l < data.p; ++l)
    grid_basis_.push_back(basis_matrix(grid_, basis.knots[static_cast<std::size_t>(l)]));

  const Eigen::Index n = data.n_subjects();
  subject_gram_.reserve(static_cast<std::size_t>(n));
  zt_wfull_.reserve(static_cast<std::size_t>(n));
  ztz_.reserve(static_cast<std::size_t>(n));
  xtx_sum_ = Matrix::Zero(data.q, data.q);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = data.subjects[static_cast<std::size_t>(i)];
    const Matrix& wf = design_.subject(i);
    subject_gram_.push_back(Matrix(wf.transpose() * wf));
    zt_wfull_.push_back(Matrix(s.Z.transpose() * wf));
    ztz_.push_back(Matrix(s.Z.transpose() * s.Z));
    if (data.q > 0) xtx_sum_ += s.X.transpose() * s.X;
  }
}

StoreDims SamplerWorkspace::store_dims(std::uint64_t config_hash, std::uint64_t chain_seed) const {
  StoreDims d;
  d.n_subjects = data_->n_subjects();
  d.p = data_->p;
  d.q = data_->q;
  d.r = data_->r;
  d.K = hyper_->K;
  for (Eigen::Index l = 0; l < basis_->n_covariates(); ++l)
    d.terms_per_cov.push_back(basis_->n_terms(l));
  d.grid = grid_;
  d.config_hash = config_hash;
  d.chain_seed = chain_seed;
  return d;
}

Vector marginal_obs_precision_apply(const SubjectRecord& subject, const Matrix& psi,
                                    const Vector& v) {
  if (psi.rows() == 0) return v;
  Matrix core = psi_inverse(psi) + subject.Z.transpose() * subject.Z;
  auto llt = chol_with_jitter(core, "marginal observation precision core");
  return v - subject.Z * llt.solve(subject.Z.transpose() * v);
}

std::vector<FullClusterStats> compute_cluster_stats(const SamplerWorkspace& ws,
                                                    const ChainState& state, Backend backend) {
  const auto& data = ws.data();
  const Eigen::Index d = ws.design().total_cols();
  std::vector<FullClusterStats> stats(state.clusters.size());
  for (auto& s : stats) {
    s.xi = Matrix::Zero(d, d);
    s.xi_vec = Vector::Zero(d);
  }
  const bool marginal = backend == Backend::Pcg && data.r > 0;
  Matrix psi_inv;
  if (marginal) psi_inv = psi_inverse(state.psi);

  for (Eigen::Index i = 0; i < data.n_subjects(); ++i) {
    const auto& subj = data.subjects[static_cast<std::size_t>(i)];
    auto& s = stats[static_cast<std::size_t>(state.alloc[static_cast<std::size_t>(i)])];
    s.member_count++;

    Vector e = state.latent[static_cast<std::size_t>(i)];
    if (data.q > 0) e -= subj.X * state.beta;
    if (backend == Backend::PlainGibbs && data.r > 0)
      e -= subj.Z * state.b[static_cast<std::size_t>(i)];

    const Matrix& wf = ws.design().subject(i);
    if (marginal) {
      // W^T (I + Z Psi Z^T)^{-1} W = W^T W - (Z^T W)^T (Psi^{-1} + Z^T Z)^{-1} (Z^T W)
      Matrix core = psi_inv + ws.ztz(i);
      auto llt = chol_with_jitter(core, "cluster stats core");
      const Matrix& ztw = ws.zt_wfull(i);
      Matrix solved = llt.solve(ztw);
      s.xi += ws.subject_gram(i) - ztw.transpose() * solved;
      Vector zte = subj.Z.transpose() * e;
      s.xi_vec += wf.transpose() * e - ztw.transpose() * llt.solve(zte);
    } else {
      s.xi += ws.subject_gram(i);
      s.xi_vec += wf.transpose() * e;
    }
  }
  for (auto& s : stats) s.xi = 0.5 * (s.xi + s.xi.transpose()).eval();
  return stats;
}

ClusterSufficientStats cluster_stats(const SamplerWorkspace& ws, const ChainState& state, int k,
                                     const GammaSet& gamma, Backend backend) {
  auto full = compute_cluster_stats(ws, state, backend);
  const auto cols = ws.design().active_columns(gamma);
  ClusterSufficientStats out;
  out.xi = full[static_cast<std::size_t>(k)].xi(cols, cols);
  out.xi_vec = full[static_cast<std::size_t>(k)].xi_vec(cols);
  out.member_count = full[static_cast<std::size_t>(k)].member_count;
  return out;
}

double log_f_gamma(const SamplerWorkspace& ws, const ChainState& state, int k,
                   const GammaSet& candidate, Backend backend) {
  auto stats = compute_cluster_stats(ws, state, backend);
  return log_f_from_stats(ws, stats[static_cast<std::size_t>(k)], candidate,
                          state.clusters[static_cast<std::size_t>(k)].tau);
}

namespace steps {

std::vector<GammaSet> draw_indicators(const SamplerWorkspace& ws, const ChainState& state,
                                      const std::vector<FullClusterStats>& stats,
                                      RngStream step_rng, Backend backend) {
  (void)backend;  // backend differences live in `stats`
  const auto& basis = ws.basis();
  std::vector<GammaSet> out(state.clusters.size());
  for (std::size_t k = 0; k < state.clusters.size(); ++k) {
    RngStream rng = step_rng.fork(static_cast<std::uint64_t>(k));
    GammaSet gamma = state.clusters[k].gamma;
    const double tau = state.clusters[k].tau;
    const auto& st = stats[k];
    double cur = log_f_from_stats(ws, st, gamma, tau);
    for (Eigen::Index l = 0; l < basis.n_covariates(); ++l) {
      auto& bits = gamma[static_cast<std::size_t>(l)].bits;
      for (Eigen::Index m = 1; m < basis.n_terms(l); ++m) {
        auto& bit = bits[static_cast<std::size_t>(m)];
        bit ^= 1;
        const double flipped = log_f_from_stats(ws, st, gamma, tau);
        bit ^= 1;
        const double logf1 = bit ? cur : flipped;
        const double logf0 = bit ? flipped : cur;
        // P(gamma_m = 1) = f1 / (f1 + f0), evaluated in log space.
        const double p1 = 1.0 / (1.0 + std::exp(logf0 - logf1));
        const std::uint8_t newbit = rng.uniform() < p1 ? 1 : 0;
        if (newbit != bit) {
          bit = newbit;
          cur = flipped;
        }
      }
    }
    out[k] = std::move(gamma);
  }
  return out;
}

Vector draw_sticks(const Hyperparams& hyper, const std::vector<int>& occupancy,
                   RngStream step_rng) {
  const int k_max = hyper.K;
  Vector v(k_max);
  v[k_max - 1] = 1.0;
  std::vector<double> tail(static_cast<std::size_t>(k_max) + 1, 0.0);
  for (int k = k_max - 1; k >= 0; --k)
    tail[static_cast<std::size_t>(k)] =
        tail[static_cast<std::size_t>(k) + 1] + occupancy[static_cast<std::size_t>(k)];
  for (int k = 0; k < k_max - 1; ++k) {
    RngStream rng = step_rng.fork(static_cast<std::uint64_t>(k));
    v[k] = beta_draw(1.0 + occupancy[static_cast<std::size_t>(k)],
                     hyper.nu + tail[static_cast<std::size_t>(k) + 1], rng);
  }
  return v;
}

std::vector<Vector> draw_basis_coeffs(const SamplerWorkspace& ws,
                                      const std::vector<GammaSet>& gamma,
                                      const std::vector<FullClusterStats>& stats,
                                      const Vector& tau, RngStream step_rng) {
  std::vector<Vector> out(gamma.size());
  for (std::size_t k = 0; k < gamma.size(); ++k) {
    RngStream rng = step_rng.fork(static_cast<std::uint64_t>(k));
    const auto cols = ws.design().active_columns(gamma[k]);
    Matrix r = ws.design().gram_for(cols);
    Vector z(static_cast<Eigen::Index>(cols.size()));
    if (stats[k].member_count > 0) {
      Matrix s = stats[k].xi(cols, cols) + r / tau[static_cast<Eigen::Index>(k)];
      auto llt = chol_with_jitter(s, "step 3 posterior precision");
      Vector mean = llt.solve(stats[k].xi_vec(cols));
      for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
      llt.matrixU().solveInPlace(z);
      out[k] = mean + z;
    } else {
      auto llt = chol_with_jitter(r, "step 3 prior Gram");
      for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
      llt.matrixU().solveInPlace(z);
      out[k] = std::sqrt(tau[static_cast<Eigen::Index>(k)]) * z;
    }
  }
  return out;
}

std::vector<Vector> draw_random_effects(const SamplerWorkspace& ws, const ChainState& state,
                                        RngStream step_rng) {
  const auto& data = ws.data();
  std::vector<Vector> out(static_cast<std::size_t>(data.n_subjects()));
  if (data.r == 0) return out;
  const Matrix psi_inv = psi_inverse(state.psi);
  const auto designs = cluster_designs(ws, state);
  for (Eigen::Index i = 0; i < data.n_subjects(); ++i) {
    RngStream rng = step_rng.fork(static_cast<std::uint64_t>(i));
    const auto& subj = data.subjects[static_cast<std::size_t>(i)];
    const auto& ref = designs[static_cast<std::size_t>(state.alloc[static_cast<std::size_t>(i)])];
    Vector e = state.latent[static_cast<std::size_t>(i)] -
               ws.design().design_for(i, ref.cols) * (*ref.phi);
    if (data.q > 0) e -= subj.X * state.beta;
    // b_i | rest ~ N(G^{-1} Z^T e, G^{-1}) with G = Psi^{-1} + Z^T Z, the
    // Woodbury-reduced form of Psi Z^T (I + Z Psi Z^T)^{-1} e.
    Matrix g = psi_inv + ws.ztz(i);
    auto llt = chol_with_jitter(g, "step 4 precision");
    Vector mean = llt.solve(subj.Z.transpose() * e);
    out[static_cast<std::size_t>(i)] = mvn_prec_chol(mean, llt, rng);
  }
  return out;
}

Vector draw_scales(const SamplerWorkspace& ws, const ChainState& state, RngStream step_rng) {
  const double n = static_cast<double>(ws.data().n_subjects());
  Vector tau(state.n_clusters());
  for (int k = 0; k < state.n_clusters(); ++k) {
    RngStream rng = step_rng.fork(static_cast<std::uint64_t>(k));
    const auto& cl = state.clusters[static_cast<std::size_t>(k)];
    const auto cols = ws.design().active_columns(cl.gamma);
    Matrix r = ws.design().gram_for(cols);
    const double quad = cl.phi.dot(r * cl.phi);
    const double d = static_cast<double>(cols.size());
    tau[k] = inv_gamma(0.5 * (1.0 + d), 0.5 * (n + quad), rng);
  }
  return tau;
}

Matrix draw_ranef_cov(const SamplerWorkspace& ws, const ChainState& state, RngStream step_rng) {
  const auto& data = ws.data();
  if (data.r == 0) return Matrix(0, 0);
  Matrix scale = ws.hyper().d_scale * Matrix::Identity(data.r, data.r);
  for (const auto& bi : state.b) scale += bi * bi.transpose();
  const double df = ws.hyper().resolved_u(data.r) + static_cast<double>(data.n_subjects());
  return inv_wishart(df, scale, step_rng);
}

std::vector<Vector> draw_latents(const SamplerWorkspace& ws, const ChainState& state,
                                 RngStream step_rng) {
  const auto& data = ws.data();
  const auto designs = cluster_designs(ws, state);
  std::vector<Vector> out(static_cast<std::size_t>(data.n_subjects()));
  for (Eigen::Index i = 0; i < data.n_subjects(); ++i) {
    RngStream rng = step_rng.fork(static_cast<std::uint64_t>(i));
    const auto& subj = data.subjects[static_cast<std::size_t>(i)];
    const auto& ref = designs[static_cast<std::size_t>(state.alloc[static_cast<std::size_t>(i)])];
    Vector mu = cluster_mean_for_subject(ws, i, ref, subject_base_mean(ws, state, i));
    Vector li(subj.n_obs());
    for (Eigen::Index j = 0; j < subj.n_obs(); ++j)
      li[j] = trunc_normal(mu[j], subj.y[j] == 1 ? TruncSide::AboveZero : TruncSide::BelowZero,
                           rng);
    out[static_cast<std::size_t>(i)] = std::move(li);
  }
  return out;
}

std::vector<int> draw_allocations(const SamplerWorkspace& ws, const ChainState& state,
                                  RngStream step_rng) {
  const auto& data = ws.data();
  const auto designs = cluster_designs(ws, state);
  const Vector pi = stick_weights(state.v);
  Vector log_pi(pi.size());
  for (Eigen::Index k = 0; k < pi.size(); ++k) log_pi[k] = std::log(pi[k]);
  std::vector<int> alloc(static_cast<std::size_t>(data.n_subjects()));
  for (Eigen::Index i = 0; i < data.n_subjects(); ++i) {
    RngStream rng = step_rng.fork(static_cast<std::uint64_t>(i));
    Vector base = subject_base_mean(ws, state, i);
    Vector logw(state.n_clusters());
    for (int k = 0; k < state.n_clusters(); ++k) {
      Vector mu = cluster_mean_for_subject(ws, i, designs[static_cast<std::size_t>(k)], base);
      logw[k] = log_pi[k] -
                0.5 * (state.latent[static_cast<std::size_t>(i)] - mu).squaredNorm();
    }
    alloc[static_cast<std::size_t>(i)] = categorical_draw(logw, rng);
  }
  return alloc;
}

Vector draw_fixed_effects(const SamplerWorkspace& ws, const ChainState& state,
                          RngStream step_rng) {
  const auto& data = ws.data();
  if (data.q == 0) return Vector(0);
  Matrix delta = Matrix::Identity(data.q, data.q) / ws.hyper().p_scale + ws.xtx_sum();
  const auto designs = cluster_designs(ws, state);
  Vector rhs = Vector::Zero(data.q);
  for (Eigen::Index i = 0; i < data.n_subjects(); ++i) {
    const auto& subj = data.subjects[static_cast<std::size_t>(i)];
    const auto& ref = designs[static_cast<std::size_t>(state.alloc[static_cast<std::size_t>(i)])];
    Vector e = state.latent[static_cast<std::size_t>(i)] -
               ws.design().design_for(i, ref.cols) * (*ref.phi);
    if (data.r > 0) e -= subj.Z * state.b[static_cast<std::size_t>(i)];
    rhs += subj.X.transpose() * e;
  }
  auto llt = chol_with_jitter(delta, "step 9 precision");
  RngStream rng = step_rng;
  return mvn_prec_chol(llt.solve(rhs), llt, rng);
}

}  // namespace steps

double complete_log_posterior(const SamplerWorkspace& ws, const ChainState& state) {
  const auto& data = ws.data();
  const auto& hyper = ws.hyper();
  const double n = static_cast<double>(data.n_subjects());
  double lp = 0.0;

  // Latent likelihood and allocation mass.
  const auto designs = cluster_designs(ws, state);
  const Vector pi = stick_weights(state.v);
  for (Eigen::Index i = 0; i < data.n_subjects(); ++i) {
    const int k = state.alloc[static_cast<std::size_t>(i)];
    Vector mu = cluster_mean_for_subject(ws, i, designs[static_cast<std::size_t>(k)],
                                         subject_base_mean(ws, state, i));
    lp += -0.5 * (state.latent[static_cast<std::size_t>(i)] - mu).squaredNorm();
    lp += std::log(std::max(pi[k], 1e-300));
  }
  // Stick prior Beta(1, nu).
  for (int k = 0; k + 1 < hyper.K; ++k)
    lp += (hyper.nu - 1.0) * std::log1p(-std::min(state.v[k], 1.0 - 1e-16));
  // Cluster atoms.
  for (const auto& cl : state.clusters) {
    lp += log_prior_gamma_total(cl.gamma, hyper);
    const auto cols = ws.design().active_columns(cl.gamma);
    Matrix r = ws.design().gram_for(cols);
    auto llt = chol_with_jitter(r, "log posterior Gram");
    const double d = static_cast<double>(cols.size());
    lp += -0.5 * (d * std::log(cl.tau) - logdet_from_llt(llt)) -
          cl.phi.dot(r * cl.phi) / (2.0 * cl.tau);
    lp += -(0.5 + 1.0) * std::log(cl.tau) - 0.5 * n / cl.tau;
  }
  // Random effects and their covariance.
  if (data.r > 0) {
    auto llt = chol_with_jitter(state.psi, "log posterior psi");
    const double logdet_psi = logdet_from_llt(llt);
    double quad = 0.0;
    for (const auto& bi : state.b) quad += bi.dot(llt.solve(bi));
    lp += -0.5 * quad - 0.5 * n * logdet_psi;
    const double u = hyper.resolved_u(data.r);
    const Matrix d_mat = hyper.d_scale * Matrix::Identity(data.r, data.r);
    lp += -0.5 * (u + static_cast<double>(data.r) + 1.0) * logdet_psi -
          0.5 * llt.solve(d_mat).trace();
  }
  // Fixed effects.
  if (data.q > 0) lp += -0.5 * state.beta.squaredNorm() / hyper.p_scale;
  return lp;
}

SweepRecord make_record(const SamplerWorkspace& ws, const ChainState& state, std::uint32_t sweep) {
  SweepRecord rec;
  rec.sweep = sweep;
  rec.log_post = complete_log_posterior(ws, state);
  rec.beta = state.beta;
  rec.psi = state.psi;
  rec.tau.resize(state.n_clusters());
  for (int k = 0; k < state.n_clusters(); ++k)
    rec.tau[k] = state.clusters[static_cast<std::size_t>(k)].tau;
  rec.v = state.v;
  rec.alloc.resize(state.alloc.size());
  for (std::size_t i = 0; i < state.alloc.size(); ++i)
    rec.alloc[i] = static_cast<std::uint16_t>(state.alloc[i]);
  rec.gamma.reserve(state.clusters.size());
  rec.phi.reserve(state.clusters.size());
  rec.alpha.reserve(state.clusters.size());
  const Eigen::Index g_len = ws.grid().size();
  for (const auto& cl : state.clusters) {
    rec.gamma.push_back(cl.gamma);
    rec.phi.push_back(cl.phi);
    Matrix a(g_len, ws.data().p);
    Eigen::Index offset = 0;
    for (Eigen::Index l = 0; l < ws.data().p; ++l) {
      const auto& gl = cl.gamma[static_cast<std::size_t>(l)];
      const Eigen::Index nl = gl.count();
      a.col(l) = eval_alpha(gl, cl.phi.segment(offset, nl),
                            ws.basis().knots[static_cast<std::size_t>(l)], ws.grid());
      offset += nl;
    }
    rec.alpha.push_back(std::move(a));
  }
  return rec;
}

ChainState init_chain(const SamplerWorkspace& ws, const InitOptions& init, RngStream chain_rng) {
  const auto& data = ws.data();
  const auto& hyper = ws.hyper();
  ChainState state;

  RngStream rng_alloc = step_stream(chain_rng, 0, 8);
  state.alloc.resize(static_cast<std::size_t>(data.n_subjects()));
  for (auto& c : state.alloc) {
    c = static_cast<int>(rng_alloc.uniform() * hyper.K);
    if (c >= hyper.K) c = hyper.K - 1;
  }

  const double tau_scale = ws.tau_prior_scale();
  state.clusters.resize(static_cast<std::size_t>(hyper.K));
  for (int k = 0; k < hyper.K; ++k) {
    RngStream rng = step_stream(chain_rng, 0, 1).fork(static_cast<std::uint64_t>(k));
    auto& cl = state.clusters[static_cast<std::size_t>(k)];
    for (Eigen::Index l = 0; l < data.p; ++l) {
      IndicatorVector g = IndicatorVector::constant_only(ws.basis().n_terms(l));
      if (init.gamma_init == GammaInit::Random)
        for (Eigen::Index m = 1; m < g.size(); ++m)
          g.bits[static_cast<std::size_t>(m)] = rng.uniform() < 0.5 ? 1 : 0;
      cl.gamma.push_back(std::move(g));
    }
    cl.tau = inv_gamma(0.5, tau_scale, rng);
    const auto cols = ws.design().active_columns(cl.gamma);
    Matrix r = ws.design().gram_for(cols);
    auto llt = chol_with_jitter(r, "init Gram");
    Vector z(static_cast<Eigen::Index>(cols.size()));
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
    llt.matrixU().solveInPlace(z);
    cl.phi = std::sqrt(cl.tau) * z;
  }

  state.v = Vector::Constant(hyper.K, 0.5);
  state.v[hyper.K - 1] = 1.0;

  RngStream rng_beta = step_stream(chain_rng, 0, 9);
  state.beta.resize(data.q);
  for (Eigen::Index j = 0; j < data.q; ++j) state.beta[j] = rng_beta.normal();

  state.b.assign(static_cast<std::size_t>(data.n_subjects()), Vector::Zero(data.r));
  state.psi = Matrix::Identity(data.r, data.r);

  state.latent = steps::draw_latents(ws, state, step_stream(chain_rng, 0, 7));
  state.validate(data, hyper);
  return state;
}

namespace {

void one_sweep(const SamplerWorkspace& ws, ChainState& state, std::uint32_t sweep,
               RngStream chain_rng, const RunOptions& opts) {
  const Backend backend = opts.backend;
  try {
    auto stats = compute_cluster_stats(ws, state, backend);

    // Step 1: indicator sets (collapsed over phi, and over b under PCG).
    if (!opts.init.freeze_gamma) {
      auto gamma = steps::draw_indicators(ws, state, stats, step_stream(chain_rng, sweep, 1),
                                          backend);
      for (std::size_t k = 0; k < gamma.size(); ++k)
        state.clusters[k].gamma = std::move(gamma[k]);
    }

    // Step 2: sticks.
    state.v = steps::draw_sticks(ws.hyper(), state.occupancy(), step_stream(chain_rng, sweep, 2));

    // Step 3: basis coefficients for the refreshed indicator sets.
    {
      std::vector<GammaSet> gamma;
      Vector tau(state.n_clusters());
      gamma.reserve(state.clusters.size());
      for (int k = 0; k < state.n_clusters(); ++k) {
        gamma.push_back(state.clusters[static_cast<std::size_t>(k)].gamma);
        tau[k] = state.clusters[static_cast<std::size_t>(k)].tau;
      }
      auto phi =
          steps::draw_basis_coeffs(ws, gamma, stats, tau, step_stream(chain_rng, sweep, 3));
      for (std::size_t k = 0; k < phi.size(); ++k) state.clusters[k].phi = std::move(phi[k]);
    }

    // Step 4: random effects.
    if (ws.data().r > 0)
      state.b = steps::draw_random_effects(ws, state, step_stream(chain_rng, sweep, 4));

    // Step 5: g-prior scales for every cluster.
    Vector tau = steps::draw_scales(ws, state, step_stream(chain_rng, sweep, 5));
    for (int k = 0; k < state.n_clusters(); ++k)
      state.clusters[static_cast<std::size_t>(k)].tau = tau[k];

    // Step 6: random-effect covariance.
    if (ws.data().r > 0)
      state.psi = steps::draw_ranef_cov(ws, state, step_stream(chain_rng, sweep, 6));

    // Step 7: latent utilities.
    state.latent = steps::draw_latents(ws, state, step_stream(chain_rng, sweep, 7));

    // Step 8: allocations.
    state.alloc = steps::draw_allocations(ws, state, step_stream(chain_rng, sweep, 8));

    // Step 9: fixed effects.
    if (ws.data().q > 0)
      state.beta = steps::draw_fixed_effects(ws, state, step_stream(chain_rng, sweep, 9));
  } catch (const NumericalError& e) {
    throw NumericalError("sweep " + std::to_string(sweep) + ": " + e.what());
  }
}

}  // namespace

Checkpoint run_chain(const SamplerWorkspace& ws, const RunOptions& opts, std::uint64_t chain_seed,
                     DrawSink& sink) {
  if (opts.n_sweeps < 0) throw ValidationError("sweep count must be nonnegative");
  RngStream chain_rng(chain_seed);
  Checkpoint cp;
  cp.config_hash = opts.config_hash;
  cp.chain_seed = chain_seed;
  cp.state = init_chain(ws, opts.init, chain_rng);
  cp.next_sweep = 1;
  sink.record(make_record(ws, cp.state, 0));
  return resume_chain(ws, opts, std::move(cp), opts.n_sweeps, sink);
}

Checkpoint resume_chain(const SamplerWorkspace& ws, const RunOptions& opts, Checkpoint cp,
                        int target_sweeps, DrawSink& sink) {
  RngStream chain_rng(cp.chain_seed);
  for (std::uint32_t s = cp.next_sweep; s <= static_cast<std::uint32_t>(target_sweeps); ++s) {
    one_sweep(ws, cp.state, s, chain_rng, opts);
    sink.record(make_record(ws, cp.state, s));
    cp.next_sweep = s + 1;
  }
  return cp;
}

DrawStoreData run_chain_in_memory(const LongitudinalDataset& data, const Hyperparams& hyper,
                                  const BasisConfig& basis, const RunOptions& opts,
                                  std::uint64_t chain_seed) {
  SamplerWorkspace ws(data, hyper, basis, opts.grid_points);
  DrawStoreData store;
  store.dims = ws.store_dims(opts.config_hash, chain_seed);
  MemorySink sink(store);
  run_chain(ws, opts, chain_seed, sink);
  return store;
}

}  // namespace fclust
