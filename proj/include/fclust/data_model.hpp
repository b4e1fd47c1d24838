#ifndef FCLUST_DATA_MODEL_HPP
#define FCLUST_DATA_MODEL_HPP

#include <Eigen/Dense>
#include <array>
#include <string>
#include <variant>
#include <vector>

#include "fclust/rng.hpp"

#include <nlohmann/json_fwd.hpp>

namespace fclust {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// One subject's observations: binary responses at ordered time points with
// the three covariate blocks.  W carries the dynamically-weighted covariates,
// X the fixed-effect covariates, Z the random-effect covariates.
struct SubjectRecord {
  std::string subject_id;
  Vector times;  // length n_i, nondecreasing
  Eigen::VectorXi y;
  Matrix W;  // n_i x p
  Matrix X;  // n_i x q
  Matrix Z;  // n_i x r

  Eigen::Index n_obs() const { return times.size(); }
};

struct LongitudinalDataset {
  std::vector<SubjectRecord> subjects;
  double t_min = 0.0;
  double t_max = 1.0;
  Eigen::Index p = 0, q = 0, r = 0;

  Eigen::Index n_subjects() const { return static_cast<Eigen::Index>(subjects.size()); }
  Eigen::Index total_obs() const;
  void validate() const;  // throws ValidationError on any broken invariant
};

// A time-varying coefficient, either one of the built-in benchmark shapes,
// a polynomial in t, or a * sin(f t + phase).
struct PolyAlpha {
  std::vector<double> coeffs;  // c0 + c1 t + ...
};
struct SineAlpha {
  double amplitude = 1.0, frequency = 1.0, phase = 0.0;
};
struct AlphaFunction {
  std::variant<std::string, PolyAlpha, SineAlpha> spec;  // string = catalog name

  double operator()(double t) const;
  static AlphaFunction catalog(const std::string& name);
  static AlphaFunction poly(std::vector<double> coeffs);
  static AlphaFunction sine(double amplitude, double frequency, double phase);
};

// The six benchmark coefficient functions (constant, linear, nonlinear mix),
// indexed by name: alpha11, alpha12, alpha21, alpha22, alpha31, alpha32.
const std::vector<std::pair<std::string, AlphaFunction>>& true_alpha_catalog();
double eval_catalog_alpha(const std::string& name, double t);

struct SimulationSpec {
  std::vector<Eigen::Index> cluster_sizes;
  std::vector<std::vector<AlphaFunction>> alphas;  // [cluster][covariate l], l < p
  Vector beta;                                     // length q
  Matrix psi;                                      // r x r SPD
};

struct SimulationTruth {
  std::vector<int> cluster_of;  // 0-based cluster index per subject
  std::vector<std::vector<AlphaFunction>> alpha_true;
  Vector beta_true;
  Matrix psi_true;
  std::vector<Vector> b_true;
  std::vector<Vector> L_true;
};

// Synthetic data matching the benchmark design: n_i ~ Poisson(10)+1,
// t ~ U(0,1) sorted within subject, standard-normal covariates with all-ones
// leading columns of W and Z, b_i ~ N(0, Psi), latent utilities with unit
// noise, y = I(L > 0).  Deterministic given (spec, seed).
std::pair<LongitudinalDataset, SimulationTruth> simulate_dataset(const SimulationSpec& spec,
                                                                 std::uint64_t seed);

// Column-role schema for CSV ingestion.  Role lists may contain the token
// "(intercept)" for an implicit all-ones column.
struct CsvSchema {
  std::string subject, time, response;
  std::vector<std::string> w, x, z;
};

LongitudinalDataset load_csv(const std::string& path, const CsvSchema& schema);
// Writes the dataset grouped by subject (sorted by time within subject) with
// columns id,t,y,w1..wp,x1..xq,z1..zr, plus the matching schema.
void write_csv_dataset(const std::string& path, const LongitudinalDataset& data);
CsvSchema default_written_schema(const LongitudinalDataset& data);

// JSON round trips for configs / truth files.
void to_json(nlohmann::json& j, const AlphaFunction& f);
void from_json(const nlohmann::json& j, AlphaFunction& f);
void to_json(nlohmann::json& j, const SimulationSpec& s);
void from_json(const nlohmann::json& j, SimulationSpec& s);
void to_json(nlohmann::json& j, const SimulationTruth& t);
void from_json(const nlohmann::json& j, SimulationTruth& t);
void to_json(nlohmann::json& j, const CsvSchema& s);
void from_json(const nlohmann::json& j, CsvSchema& s);

}  // namespace fclust

#endif
