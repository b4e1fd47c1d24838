#ifndef FCLUST_PCG_SAMPLER_HPP
#define FCLUST_PCG_SAMPLER_HPP

#include <Eigen/Dense>
#include <vector>

#include "fclust/data_model.hpp"
#include "fclust/draw_store.hpp"
#include "fclust/model_state.hpp"
#include "fclust/rng.hpp"
#include "fclust/spline_basis.hpp"

namespace fclust {

// Pcg marginalizes the random effects and basis coefficients out of the
// early steps; PlainGibbs conditions on the current random effects instead.
enum class Backend { Pcg, PlainGibbs };

enum class GammaInit { Random, ConstantOnly };

struct InitOptions {
  GammaInit gamma_init = GammaInit::Random;
  bool freeze_gamma = false;  // keep the initial indicator sets for the whole run
};

struct RunOptions {
  int n_sweeps = 1000;
  Backend backend = Backend::Pcg;
  Eigen::Index grid_points = 100;
  InitOptions init;
  std::uint64_t config_hash = 0;  // stamped into stores and checkpoints
};

// Immutable per-chain context: dataset views, full-basis designs, subject
// cross products, the output grid and its basis rows.
class SamplerWorkspace {
 public:
  SamplerWorkspace(const LongitudinalDataset& data, const Hyperparams& hyper,
                   const BasisConfig& basis, Eigen::Index grid_points);

  const LongitudinalDataset& data() const { return *data_; }
  const Hyperparams& hyper() const { return *hyper_; }
  const BasisConfig& basis() const { return *basis_; }
  const FullDesign& design() const { return design_; }
  const Vector& grid() const { return grid_; }
  const Matrix& grid_basis(Eigen::Index l) const {
    return grid_basis_[static_cast<std::size_t>(l)];
  }
  const Matrix& subject_gram(Eigen::Index i) const {
    return subject_gram_[static_cast<std::size_t>(i)];
  }
  const Matrix& zt_wfull(Eigen::Index i) const { return zt_wfull_[static_cast<std::size_t>(i)]; }
  const Matrix& ztz(Eigen::Index i) const { return ztz_[static_cast<std::size_t>(i)]; }
  const Matrix& xtx_sum() const { return xtx_sum_; }
  double tau_prior_scale() const { return 0.5 * static_cast<double>(data_->n_subjects()); }
  StoreDims store_dims(std::uint64_t config_hash, std::uint64_t chain_seed) const;

 private:
  const LongitudinalDataset* data_;
  const Hyperparams* hyper_;
  const BasisConfig* basis_;
  FullDesign design_;
  Vector grid_;
  std::vector<Matrix> grid_basis_;    // per covariate: G x (M_l + 2)
  std::vector<Matrix> subject_gram_;  // Wfull_i^T Wfull_i
  std::vector<Matrix> zt_wfull_;      // Z_i^T Wfull_i
  std::vector<Matrix> ztz_;           // Z_i^T Z_i
  Matrix xtx_sum_;                    // sum_i X_i^T X_i
};

// Restricted sufficient statistics for one cluster and one indicator set.
struct ClusterSufficientStats {
  Matrix xi;       // |gamma| x |gamma|
  Vector xi_vec;   // |gamma|
  int member_count = 0;
};

// Full-basis accumulators; restriction to an active set is a submatrix pick.
struct FullClusterStats {
  Matrix xi;      // D x D
  Vector xi_vec;  // D
  int member_count = 0;
};

// (I_{n_i} + Z_i Psi Z_i^T)^{-1} v through the r x r core; the dense inverse
// is never formed.
Vector marginal_obs_precision_apply(const SubjectRecord& subject, const Matrix& psi,
                                    const Vector& v);

std::vector<FullClusterStats> compute_cluster_stats(const SamplerWorkspace& ws,
                                                    const ChainState& state, Backend backend);

ClusterSufficientStats cluster_stats(const SamplerWorkspace& ws, const ChainState& state, int k,
                                     const GammaSet& gamma, Backend backend = Backend::Pcg);

// Log of the collapsed conditional mass f used by Step 1; prior-only for
// clusters with no members.
double log_f_gamma(const SamplerWorkspace& ws, const ChainState& state, int k,
                   const GammaSet& candidate, Backend backend = Backend::Pcg);

// Pure conditional draws, one per sweep step.  None of them mutates the
// state; a chain advances only through run_chain/resume_chain, which apply
// them in the fixed order 1..9.
namespace steps {

std::vector<GammaSet> draw_indicators(const SamplerWorkspace& ws, const ChainState& state,
                                      const std::vector<FullClusterStats>& stats,
                                      RngStream step_rng, Backend backend);
Vector draw_sticks(const Hyperparams& hyper, const std::vector<int>& occupancy,
                   RngStream step_rng);
// Uses the post-Step-1 indicator sets passed in `gamma`.
std::vector<Vector> draw_basis_coeffs(const SamplerWorkspace& ws,
                                      const std::vector<GammaSet>& gamma,
                                      const std::vector<FullClusterStats>& stats,
                                      const Vector& tau, RngStream step_rng);
std::vector<Vector> draw_random_effects(const SamplerWorkspace& ws, const ChainState& state,
                                        RngStream step_rng);
Vector draw_scales(const SamplerWorkspace& ws, const ChainState& state, RngStream step_rng);
Matrix draw_ranef_cov(const SamplerWorkspace& ws, const ChainState& state, RngStream step_rng);
std::vector<Vector> draw_latents(const SamplerWorkspace& ws, const ChainState& state,
                                 RngStream step_rng);
std::vector<int> draw_allocations(const SamplerWorkspace& ws, const ChainState& state,
                                  RngStream step_rng);
Vector draw_fixed_effects(const SamplerWorkspace& ws, const ChainState& state,
                          RngStream step_rng);

}  // namespace steps

// Complete-data log posterior up to an additive constant; the relabeling
// pivot maximizes this across recorded sweeps.
double complete_log_posterior(const SamplerWorkspace& ws, const ChainState& state);

SweepRecord make_record(const SamplerWorkspace& ws, const ChainState& state, std::uint32_t sweep);

ChainState init_chain(const SamplerWorkspace& ws, const InitOptions& init, RngStream chain_rng);

// Runs a fresh chain for opts.n_sweeps sweeps, recording the initial state
// as sweep 0 and every sweep after it.  Returns the final checkpoint.
Checkpoint run_chain(const SamplerWorkspace& ws, const RunOptions& opts, std::uint64_t chain_seed,
                     DrawSink& sink);

// Continues a checkpointed chain up to target_sweeps total sweeps, recording
// only the newly executed sweeps.  Bit-identical to an uninterrupted run.
Checkpoint resume_chain(const SamplerWorkspace& ws, const RunOptions& opts, Checkpoint cp,
                        int target_sweeps, DrawSink& sink);

// Convenience wrapper collecting records in memory.
DrawStoreData run_chain_in_memory(const LongitudinalDataset& data, const Hyperparams& hyper,
                                  const BasisConfig& basis, const RunOptions& opts,
                                  std::uint64_t chain_seed);

}  // namespace fclust

#endif
