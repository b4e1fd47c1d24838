#ifndef FCLUST_SPLINE_BASIS_HPP
#define FCLUST_SPLINE_BASIS_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "fclust/data_model.hpp"

#include <nlohmann/json_fwd.hpp>

namespace fclust {

// Knot-candidate locations per covariate.  Basis terms for covariate l are
// (1, t, |t - w_1|^3, ..., |t - w_M|^3): M_l + 2 columns.
struct BasisConfig {
  std::vector<std::vector<double>> knots;  // [l][m], strictly increasing

  Eigen::Index n_covariates() const { return static_cast<Eigen::Index>(knots.size()); }
  Eigen::Index n_knots(Eigen::Index l) const {
    return static_cast<Eigen::Index>(knots[static_cast<std::size_t>(l)].size());
  }
  Eigen::Index n_terms(Eigen::Index l) const { return n_knots(l) + 2; }
  Eigen::Index total_terms() const;
};

// Basis-term inclusion bits for one covariate; entry 0 (the constant term)
// is always on.  Entries 1..M+1 are the selectable linear/knot terms.
struct IndicatorVector {
  std::vector<std::uint8_t> bits;

  Eigen::Index size() const { return static_cast<Eigen::Index>(bits.size()); }
  Eigen::Index count() const;             // all active terms, constant included
  Eigen::Index selectable_count() const;  // active terms excluding the constant
  static IndicatorVector constant_only(Eigen::Index n_terms);
  static IndicatorVector all_on(Eigen::Index n_terms);
  bool operator==(const IndicatorVector&) const = default;
};

using GammaSet = std::vector<IndicatorVector>;  // one per covariate

Eigen::Index gamma_total_count(const GammaSet& g);

// Knots at sample quantiles of the pooled time values, probabilities
// m/(M+1); duplicate quantiles collapse (reducing the count) so the result
// is strictly increasing.  Same sequence for every covariate.
BasisConfig default_knots(const LongitudinalDataset& data, Eigen::Index m);

// (1, t, |t-w_1|^3, ..., |t-w_M|^3).
Vector basis_row(double t, const std::vector<double>& omega);
// Rows of basis_row stacked for each time value: n x (M+2).
Matrix basis_matrix(const Vector& times, const std::vector<double>& omega);

// Subject design restricted to the active basis terms: columns are, for each
// covariate l in order, w_il elementwise-scaled selected basis columns.
Matrix build_design(const SubjectRecord& subject, const GammaSet& gamma, const BasisConfig& basis);

// Pooled Gram over all subjects of the dataset: sum_i W*^T W*.
Matrix gram(const LongitudinalDataset& data, const GammaSet& gamma, const BasisConfig& basis);

// Coefficient function values on a grid: selected basis columns times phi_l.
Vector eval_alpha(const IndicatorVector& gamma_l, const Vector& phi_l,
                  const std::vector<double>& omega_l, const Vector& grid);

// Precomputed full-basis designs: per-subject n_i x D blocks over every basis
// term of every covariate, plus the pooled D x D Gram.  Restricting to an
// active set is then a row/column selection, so Step-1 scans never rebuild
// design matrices.
class FullDesign {
 public:
  FullDesign(const LongitudinalDataset& data, const BasisConfig& basis);

  Eigen::Index total_cols() const { return total_cols_; }
  Eigen::Index col_offset(Eigen::Index l) const { return offsets_[static_cast<std::size_t>(l)]; }
  const Matrix& subject(Eigen::Index i) const { return blocks_[static_cast<std::size_t>(i)]; }
  const Matrix& pooled_gram() const { return pooled_gram_; }
  const BasisConfig& basis() const { return *basis_; }

  // Global column indices selected by the indicator set, covariate-major.
  std::vector<Eigen::Index> active_columns(const GammaSet& gamma) const;
  // Submatrix R_(gamma) of the pooled Gram.
  Matrix gram_for(const GammaSet& gamma) const;
  Matrix gram_for(const std::vector<Eigen::Index>& cols) const;
  // Subject design limited to the selected columns (equals build_design).
  Matrix design_for(Eigen::Index i, const std::vector<Eigen::Index>& cols) const;

 private:
  const BasisConfig* basis_;
  std::vector<Eigen::Index> offsets_;
  Eigen::Index total_cols_ = 0;
  std::vector<Matrix> blocks_;
  Matrix pooled_gram_;
};

void to_json(nlohmann::json& j, const BasisConfig& b);
void from_json(const nlohmann::json& j, BasisConfig& b);

}  // namespace fclust

#endif
