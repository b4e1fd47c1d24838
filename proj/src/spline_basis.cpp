#include "fclust/spline_basis.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <nlohmann/json.hpp>

#include "fclust/errors.hpp"

namespace fclust {

Eigen::Index BasisConfig::total_terms() const {
  Eigen::Index d = 0;
  for (Eigen::Index l = 0; l < n_covariates(); ++l) d += n_terms(l);
  return d;
}

Eigen::Index IndicatorVector::count() const {
  Eigen::Index c = 0;
  for (auto b : bits) c += b ? 1 : 0;
  return c;
}

Eigen::Index IndicatorVector::selectable_count() const { return count() - 1; }

IndicatorVector IndicatorVector::constant_only(Eigen::Index n_terms) {
  IndicatorVector g;
  g.bits.assign(static_cast<std::size_t>(n_terms), 0);
  g.bits[0] = 1;
  return g;
}

IndicatorVector IndicatorVector::all_on(Eigen::Index n_terms) {
  IndicatorVector g;
  g.bits.assign(static_cast<std::size_t>(n_terms), 1);
  return g;
}

Eigen::Index gamma_total_count(const GammaSet& g) {
  Eigen::Index c = 0;
  for (const auto& gl : g) c += gl.count();
  return c;
}

// Type-7 quantile of an ascending sample.
static double quantile_sorted(const std::vector<double>& sorted, double prob) {
  const std::size_t n = sorted.size();
  if (n == 1) return sorted[0];
  double h = prob * static_cast<double>(n - 1);
  std::size_t lo = static_cast<std::size_t>(std::floor(h));
  if (lo >= n - 1) return sorted[n - 1];
  double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

BasisConfig default_knots(const LongitudinalDataset& data, Eigen::Index m) {
  if (m < 1) throw ValidationError("knot count must be at least 1");
  std::vector<double> pooled;
  pooled.reserve(static_cast<std::size_t>(data.total_obs()));
  for (const auto& s : data.subjects)
    pooled.insert(pooled.end(), s.times.begin(), s.times.end());
  std::sort(pooled.begin(), pooled.end());
  const auto distinct =
      static_cast<Eigen::Index>(std::set<double>(pooled.begin(), pooled.end()).size());
  if (m > distinct)
    throw ValidationError("knot count " + std::to_string(m) + " exceeds " +
                          std::to_string(distinct) + " distinct time values");

  std::vector<double> knots;
  for (Eigen::Index j = 1; j <= m; ++j) {
    double w = quantile_sorted(pooled, static_cast<double>(j) / static_cast<double>(m + 1));
    if (knots.empty() || w > knots.back()) knots.push_back(w);
  }
  BasisConfig cfg;
  cfg.knots.assign(static_cast<std::size_t>(data.p), knots);
  return cfg;
}

Vector basis_row(double t, const std::vector<double>& omega) {
  Vector row(static_cast<Eigen::Index>(omega.size()) + 2);
  row[0] = 1.0;
  row[1] = t;
  for (std::size_t mindex = 0; mindex < omega.size(); ++mindex) {
    double d = std::fabs(t - omega[mindex]);
    row[static_cast<Eigen::Index>(mindex) + 2] = d * d * d;
  }
  return row;
}

Matrix basis_matrix(const Vector& times, const std::vector<double>& omega) {
  Matrix b(times.size(), static_cast<Eigen::Index>(omega.size()) + 2);
  for (Eigen::Index j = 0; j < times.size(); ++j) b.row(j) = basis_row(times[j], omega);
  return b;
}

Matrix build_design(const SubjectRecord& subject, const GammaSet& gamma,
                    const BasisConfig& basis) {
  const Eigen::Index p = basis.n_covariates();
  if (static_cast<Eigen::Index>(gamma.size()) != p)
    throw InternalError("build_design: indicator count does not match covariate count");
  const Eigen::Index n = subject.n_obs();
  Matrix out(n, gamma_total_count(gamma));
  Eigen::Index col = 0;
  for (Eigen::Index l = 0; l < p; ++l) {
    const auto& gl = gamma[static_cast<std::size_t>(l)];
    if (gl.size() != basis.n_terms(l))
      throw InternalError("build_design: indicator length does not match basis");
    if (!gl.bits[0]) throw InternalError("build_design: constant indicator must be on");
    Matrix b = basis_matrix(subject.times, basis.knots[static_cast<std::size_t>(l)]);
    for (Eigen::Index m = 0; m < gl.size(); ++m) {
      if (!gl.bits[static_cast<std::size_t>(m)]) continue;
      out.col(col++) = subject.W.col(l).cwiseProduct(b.col(m));
    }
  }
  return out;
}

Matrix gram(const LongitudinalDataset& data, const GammaSet& gamma, const BasisConfig& basis) {
  const Eigen::Index d = gamma_total_count(gamma);
  Matrix r = Matrix::Zero(d, d);
  for (const auto& s : data.subjects) {
    Matrix w = build_design(s, gamma, basis);
    r.selfadjointView<Eigen::Lower>().rankUpdate(w.transpose());
  }
  return r.selfadjointView<Eigen::Lower>();
}

Vector eval_alpha(const IndicatorVector& gamma_l, const Vector& phi_l,
                  const std::vector<double>& omega_l, const Vector& grid) {
  if (phi_l.size() != gamma_l.count())
    throw InternalError("eval_alpha: coefficient length does not match active indicator count");
  Vector out = Vector::Zero(grid.size());
  for (Eigen::Index g = 0; g < grid.size(); ++g) {
    Vector row = basis_row(grid[g], omega_l);
    Eigen::Index j = 0;
    double acc = 0.0;
    for (Eigen::Index m = 0; m < gamma_l.size(); ++m)
      if (gamma_l.bits[static_cast<std::size_t>(m)]) acc += row[m] * phi_l[j++];
    out[g] = acc;
  }
  return out;
}

FullDesign::FullDesign(const LongitudinalDataset& data, const BasisConfig& basis)
    : basis_(&basis) {
  const Eigen::Index p = basis.n_covariates();
  if (p != data.p) throw InternalError("FullDesign: basis covariate count mismatch");
  offsets_.resize(static_cast<std::size_t>(p));
  for (Eigen::Index l = 0; l < p; ++l) {
    offsets_[static_cast<std::size_t>(l)] = total_cols_;
    total_cols_ += basis.n_terms(l);
  }
  blocks_.reserve(data.subjects.size());
  pooled_gram_ = Matrix::Zero(total_cols_, total_cols_);
  for (const auto& s : data.subjects) {
    Matrix block(s.n_obs(), total_cols_);
    for (Eigen::Index l = 0; l < p; ++l) {
      Matrix b = basis_matrix(s.times, basis.knots[static_cast<std::size_t>(l)]);
      block.middleCols(offsets_[static_cast<std::size_t>(l)], basis.n_terms(l)) =
          b.array().colwise() * s.W.col(l).array();
    }
    pooled_gram_.selfadjointView<Eigen::Lower>().rankUpdate(block.transpose());
    blocks_.push_back(std::move(block));
  }
  pooled_gram_ = Matrix(pooled_gram_.selfadjointView<Eigen::Lower>());
}

std::vector<Eigen::Index> FullDesign::active_columns(const GammaSet& gamma) const {
  std::vector<Eigen::Index> cols;
  for (std::size_t l = 0; l < gamma.size(); ++l) {
    const auto& gl = gamma[l];
    for (Eigen::Index m = 0; m < gl.size(); ++m)
      if (gl.bits[static_cast<std::size_t>(m)]) cols.push_back(offsets_[l] + m);
  }
  return cols;
}

Matrix FullDesign::gram_for(const std::vector<Eigen::Index>& cols) const {
  return pooled_gram_(cols, cols);
}

Matrix FullDesign::gram_for(const GammaSet& gamma) const { return gram_for(active_columns(gamma)); }

Matrix FullDesign::design_for(Eigen::Index i, const std::vector<Eigen::Index>& cols) const {
  return blocks_[static_cast<std::size_t>(i)](Eigen::all, cols);
}

void to_json(nlohmann::json& j, const BasisConfig& b) { j = nlohmann::json{{"knots", b.knots}}; }

void from_json(const nlohmann::json& j, BasisConfig& b) {
  b.knots = j.at("knots").get<std::vector<std::vector<double>>>();
}

}  // namespace fclust
