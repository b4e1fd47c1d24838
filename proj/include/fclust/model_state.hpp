#ifndef FCLUST_MODEL_STATE_HPP
#define FCLUST_MODEL_STATE_HPP

#include <Eigen/Dense>
#include <vector>

#include "fclust/data_model.hpp"
#include "fclust/rng.hpp"
#include "fclust/spline_basis.hpp"

#include <nlohmann/json_fwd.hpp>

namespace fclust {

struct Hyperparams {
  int K = 10;            // truncation level
  double nu = 1.0;       // DP concentration
  double a = 1.0;        // beta-binomial shapes for the indicator prior
  double b = 1.0;
  double p_scale = 100.0;  // beta ~ N(0, p_scale * I_q)
  double u = 0.0;          // IW degrees of freedom; 0 means default r + 2
  double d_scale = 1.0;    // IW scale D = d_scale * I_r

  double resolved_u(Eigen::Index r) const { return u > 0.0 ? u : static_cast<double>(r) + 2.0; }
  void validate(Eigen::Index r) const;
};

// One cluster's atom: indicator set, coefficients on the active terms, and
// the g-prior scale.
struct ClusterParams {
  GammaSet gamma;
  Vector phi;
  double tau = 1.0;

  void validate() const;
};

// pi_k = V_k prod_{l<k} (1 - V_l); V_K = 1 so the weights sum to one.
Vector stick_weights(const Vector& v);

struct ChainState {
  std::vector<ClusterParams> clusters;  // K
  Vector v;                             // K sticks, v[K-1] == 1
  std::vector<int> alloc;               // 0-based cluster per subject
  Vector beta;                          // q
  std::vector<Vector> b;                // N vectors of length r
  Matrix psi;                           // r x r SPD
  std::vector<Vector> latent;           // L_i per subject

  int n_clusters() const { return static_cast<int>(clusters.size()); }
  std::vector<int> occupancy() const;  // m_k
  void validate(const LongitudinalDataset& data, const Hyperparams& hyper) const;
};

// Unnormalized log beta-binomial mass of one indicator vector: the count
// runs over the M_l + 1 selectable terms, never the always-on constant.
double log_prior_gamma(const IndicatorVector& gamma_l, double a, double b);

// Draw the selectable-count from its beta-binomial marginal, then a uniform
// subset of that size.
IndicatorVector draw_gamma_prior(Eigen::Index n_terms, double a, double b, RngStream& rng);

// One atom from the base measure: beta-binomial indicators, tau from
// IG(1/2, N/2), phi from N(0, tau R_(gamma)^-1).
ClusterParams draw_from_base_measure(const Hyperparams& hyper, const FullDesign& design,
                                     Eigen::Index n_subjects, RngStream& rng);

void to_json(nlohmann::json& j, const Hyperparams& h);
void from_json(const nlohmann::json& j, Hyperparams& h);

}  // namespace fclust

#endif
