#include "fclust/data_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include <nlohmann/json.hpp>

#include "fclust/csv.hpp"
#include "fclust/errors.hpp"
#include "fclust/rand_dist.hpp"

namespace fclust {

Eigen::Index LongitudinalDataset::total_obs() const {
  Eigen::Index n = 0;
  for (const auto& s : subjects) n += s.n_obs();
  return n;
}

void LongitudinalDataset::validate() const {
  if (subjects.empty()) throw ValidationError("dataset has no subjects");
  for (const auto& s : subjects) {
    const Eigen::Index n = s.times.size();
    if (n < 1) throw ValidationError("subject " + s.subject_id + " has no observations");
    if (s.y.size() != n || s.W.rows() != n || s.X.rows() != n || s.Z.rows() != n)
      throw ValidationError("subject " + s.subject_id + " has inconsistent row counts");
    if (s.W.cols() != p || s.X.cols() != q || s.Z.cols() != r)
      throw ValidationError("subject " + s.subject_id + " has inconsistent column counts");
    for (Eigen::Index j = 0; j < n; ++j) {
      if (s.y[j] != 0 && s.y[j] != 1)
        throw ValidationError("subject " + s.subject_id + " has non-binary response " +
                              std::to_string(s.y[j]));
      if (s.times[j] < t_min || s.times[j] > t_max)
        throw ValidationError("subject " + s.subject_id + " has time outside declared range");
      if (j > 0 && s.times[j] < s.times[j - 1])
        throw ValidationError("subject " + s.subject_id + " has unsorted times");
    }
  }
}

// --- varying-coefficient functions ------------------------------------------

double AlphaFunction::operator()(double t) const {
  if (std::holds_alternative<std::string>(spec)) return eval_catalog_alpha(std::get<std::string>(spec), t);
  if (std::holds_alternative<PolyAlpha>(spec)) {
    const auto& c = std::get<PolyAlpha>(spec).coeffs;
    double acc = 0.0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * t + *it;
    return acc;
  }
  const auto& s = std::get<SineAlpha>(spec);
  return s.amplitude * std::sin(s.frequency * t + s.phase);
}

AlphaFunction AlphaFunction::catalog(const std::string& name) {
  eval_catalog_alpha(name, 0.0);  // validates the name
  return AlphaFunction{name};
}
AlphaFunction AlphaFunction::poly(std::vector<double> coeffs) {
  return AlphaFunction{PolyAlpha{std::move(coeffs)}};
}
AlphaFunction AlphaFunction::sine(double amplitude, double frequency, double phase) {
  return AlphaFunction{SineAlpha{amplitude, frequency, phase}};
}

double eval_catalog_alpha(const std::string& name, double t) {
  if (name == "alpha11")
    return 2.0 * std::exp(-200.0 * (t - 0.2) * (t - 0.2)) + std::exp(-10.0 * (t - 0.6) * (t - 0.6));
  if (name == "alpha12") return std::sin(2.0 * M_PI * t * t * t);
  if (name == "alpha21")
    return std::sin(8.0 * (t - 0.5)) + 1.5 * std::exp(-400.0 * (t - 0.5) * (t - 0.5));
  if (name == "alpha22") return 2.0 * t;
  if (name == "alpha31") return -2.0 * t;
  if (name == "alpha32") return 0.0;
  throw ValidationError("unknown catalog function: " + name);
}

const std::vector<std::pair<std::string, AlphaFunction>>& true_alpha_catalog() {
  static const std::vector<std::pair<std::string, AlphaFunction>> table = [] {
    std::vector<std::pair<std::string, AlphaFunction>> v;
    for (const char* n : {"alpha11", "alpha12", "alpha21", "alpha22", "alpha31", "alpha32"})
      v.emplace_back(n, AlphaFunction{std::string(n)});
    return v;
  }();
  return table;
}

// --- simulation --------------------------------------------------------------

std::pair<LongitudinalDataset, SimulationTruth> simulate_dataset(const SimulationSpec& spec,
                                                                 std::uint64_t seed) {
  if (spec.cluster_sizes.empty()) throw ValidationError("simulation spec has no clusters");
  if (spec.alphas.size() != spec.cluster_sizes.size())
    throw ValidationError("alphas must list one function set per cluster");
  const Eigen::Index p = static_cast<Eigen::Index>(spec.alphas.front().size());
  if (p < 1) throw ValidationError("each cluster needs at least one varying coefficient");
  for (const auto& fs : spec.alphas)
    if (static_cast<Eigen::Index>(fs.size()) != p)
      throw ValidationError("all clusters must share the same number of varying coefficients");
  const Eigen::Index q = spec.beta.size();
  const Eigen::Index r = spec.psi.rows();
  if (spec.psi.cols() != r) throw ValidationError("psi must be square");
  if (r < 1) throw ValidationError("simulation requires r >= 1");
  Eigen::LLT<Matrix> psi_llt(spec.psi);
  if (psi_llt.info() != Eigen::Success)
    throw ValidationError("psi must be symmetric positive definite");
  Matrix psi_chol = psi_llt.matrixL();

  Eigen::Index n_total = 0;
  for (auto s : spec.cluster_sizes) {
    if (s < 1) throw ValidationError("cluster sizes must be positive");
    n_total += s;
  }

  LongitudinalDataset data;
  data.p = p;
  data.q = q;
  data.r = r;
  data.t_min = 0.0;
  data.t_max = 1.0;
  data.subjects.resize(n_total);

  SimulationTruth truth;
  truth.cluster_of.resize(n_total);
  truth.alpha_true = spec.alphas;
  truth.beta_true = spec.beta;
  truth.psi_true = spec.psi;
  truth.b_true.resize(n_total);
  truth.L_true.resize(n_total);

  RngStream root(seed);
  Eigen::Index i = 0;
  for (std::size_t k = 0; k < spec.cluster_sizes.size(); ++k) {
    for (Eigen::Index c = 0; c < spec.cluster_sizes[k]; ++c, ++i) {
      RngStream s = root.fork(static_cast<std::uint64_t>(i));
      SubjectRecord& rec = data.subjects[i];
      rec.subject_id = std::to_string(i + 1);
      truth.cluster_of[i] = static_cast<int>(k);

      const int n = poisson_draw(10.0, s) + 1;
      rec.times.resize(n);
      for (int j = 0; j < n; ++j) rec.times[j] = s.uniform();
      std::sort(rec.times.data(), rec.times.data() + n);

      rec.W.resize(n, p);
      rec.W.col(0).setOnes();
      for (Eigen::Index l = 1; l < p; ++l)
        for (int j = 0; j < n; ++j) rec.W(j, l) = s.normal();
      rec.X.resize(n, q);
      for (Eigen::Index l = 0; l < q; ++l)
        for (int j = 0; j < n; ++j) rec.X(j, l) = s.normal();
      rec.Z.resize(n, r);
      rec.Z.col(0).setOnes();
      for (Eigen::Index l = 1; l < r; ++l)
        for (int j = 0; j < n; ++j) rec.Z(j, l) = s.normal();

      Vector zb(r);
      for (Eigen::Index l = 0; l < r; ++l) zb[l] = s.normal();
      Vector b = psi_chol * zb;
      truth.b_true[i] = b;

      Vector L(n);
      rec.y.resize(n);
      for (int j = 0; j < n; ++j) {
        double mu = 0.0;
        for (Eigen::Index l = 0; l < p; ++l) mu += rec.W(j, l) * spec.alphas[k][l](rec.times[j]);
        mu += rec.X.row(j).dot(spec.beta) + rec.Z.row(j).dot(b);
        L[j] = mu + s.normal();
        rec.y[j] = L[j] > 0.0 ? 1 : 0;
      }
      truth.L_true[i] = L;
    }
  }
  data.validate();
  return {std::move(data), std::move(truth)};
}

// --- CSV ingestion ------------------------------------------------------------

namespace {

constexpr const char* kInterceptToken = "(intercept)";

double parse_double(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("cannot parse " + what + " value '" + s + "'");
  }
}

Matrix extract_block(const CsvTable& table, const std::vector<std::size_t>& row_ids,
                     const std::vector<std::string>& cols, const std::string& role) {
  Matrix out(static_cast<Eigen::Index>(row_ids.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) {
    if (cols[c] == kInterceptToken) {
      out.col(static_cast<Eigen::Index>(c)).setOnes();
      continue;
    }
    int idx = table.column(cols[c]);
    if (idx < 0) throw ValidationError("schema: missing " + role + " column '" + cols[c] + "'");
    for (std::size_t j = 0; j < row_ids.size(); ++j)
      out(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(c)) =
          parse_double(table.rows[row_ids[j]][idx], role + " column " + cols[c]);
  }
  return out;
}

}  // namespace

LongitudinalDataset load_csv(const std::string& path, const CsvSchema& schema) {
  CsvTable table = read_csv(path);
  const int id_col = table.column(schema.subject);
  const int t_col = table.column(schema.time);
  const int y_col = table.column(schema.response);
  if (id_col < 0) throw ValidationError("schema: missing subject column '" + schema.subject + "'");
  if (t_col < 0) throw ValidationError("schema: missing time column '" + schema.time + "'");
  if (y_col < 0) throw ValidationError("schema: missing response column '" + schema.response + "'");

  // Group rows by subject id, preserving first-appearance order of subjects.
  std::vector<std::string> order;
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t rrow = 0; rrow < table.rows.size(); ++rrow) {
    const std::string& id = table.rows[rrow][id_col];
    auto [it, inserted] = groups.try_emplace(id);
    if (inserted) order.push_back(id);
    it->second.push_back(rrow);
  }
  if (order.empty()) throw ValidationError("CSV contains no observations: " + path);

  LongitudinalDataset data;
  data.p = static_cast<Eigen::Index>(schema.w.size());
  data.q = static_cast<Eigen::Index>(schema.x.size());
  data.r = static_cast<Eigen::Index>(schema.z.size());
  data.t_min = std::numeric_limits<double>::infinity();
  data.t_max = -std::numeric_limits<double>::infinity();

  for (const auto& id : order) {
    auto rows = groups[id];
    // Sort rows by time within subject (stable, so ties keep file order).
    std::stable_sort(rows.begin(), rows.end(), [&](std::size_t a, std::size_t b) {
      return parse_double(table.rows[a][t_col], "time") < parse_double(table.rows[b][t_col], "time");
    });
    SubjectRecord rec;
    rec.subject_id = id;
    const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
    rec.times.resize(n);
    rec.y.resize(n);
    for (Eigen::Index j = 0; j < n; ++j) {
      rec.times[j] = parse_double(table.rows[rows[j]][t_col], "time");
      double yv = parse_double(table.rows[rows[j]][y_col], "response");
      if (yv != 0.0 && yv != 1.0)
        throw ValidationError("non-binary response '" + table.rows[rows[j]][y_col] +
                              "' for subject " + id);
      rec.y[j] = static_cast<int>(yv);
      data.t_min = std::min(data.t_min, rec.times[j]);
      data.t_max = std::max(data.t_max, rec.times[j]);
    }
    rec.W = extract_block(table, rows, schema.w, "W");
    rec.X = extract_block(table, rows, schema.x, "X");
    rec.Z = extract_block(table, rows, schema.z, "Z");
    data.subjects.push_back(std::move(rec));
  }
  data.validate();
  return data;
}

CsvSchema default_written_schema(const LongitudinalDataset& data) {
  CsvSchema s;
  s.subject = "id";
  s.time = "t";
  s.response = "y";
  for (Eigen::Index l = 0; l < data.p; ++l) s.w.push_back("w" + std::to_string(l + 1));
  for (Eigen::Index l = 0; l < data.q; ++l) s.x.push_back("x" + std::to_string(l + 1));
  for (Eigen::Index l = 0; l < data.r; ++l) s.z.push_back("z" + std::to_string(l + 1));
  return s;
}

void write_csv_dataset(const std::string& path, const LongitudinalDataset& data) {
  CsvSchema schema = default_written_schema(data);
  CsvTable table;
  table.header = {schema.subject, schema.time, schema.response};
  table.header.insert(table.header.end(), schema.w.begin(), schema.w.end());
  table.header.insert(table.header.end(), schema.x.begin(), schema.x.end());
  table.header.insert(table.header.end(), schema.z.begin(), schema.z.end());
  for (const auto& s : data.subjects) {
    for (Eigen::Index j = 0; j < s.n_obs(); ++j) {
      std::vector<std::string> row;
      row.push_back(s.subject_id);
      row.push_back(format_double(s.times[j]));
      row.push_back(std::to_string(s.y[j]));
      for (Eigen::Index l = 0; l < data.p; ++l) row.push_back(format_double(s.W(j, l)));
      for (Eigen::Index l = 0; l < data.q; ++l) row.push_back(format_double(s.X(j, l)));
      for (Eigen::Index l = 0; l < data.r; ++l) row.push_back(format_double(s.Z(j, l)));
      table.rows.push_back(std::move(row));
    }
  }
  write_csv(path, table);
}

// --- JSON ----------------------------------------------------------------------

void to_json(nlohmann::json& j, const AlphaFunction& f) {
  if (std::holds_alternative<std::string>(f.spec)) {
    j = "catalog:" + std::get<std::string>(f.spec);
  } else if (std::holds_alternative<PolyAlpha>(f.spec)) {
    j = nlohmann::json{{"type", "poly"}, {"coeffs", std::get<PolyAlpha>(f.spec).coeffs}};
  } else {
    const auto& s = std::get<SineAlpha>(f.spec);
    j = nlohmann::json{{"type", "sine"},
                       {"amplitude", s.amplitude},
                       {"frequency", s.frequency},
                       {"phase", s.phase}};
  }
}

void from_json(const nlohmann::json& j, AlphaFunction& f) {
  if (j.is_string()) {
    std::string s = j.get<std::string>();
    const std::string prefix = "catalog:";
    if (s.rfind(prefix, 0) == 0) s = s.substr(prefix.size());
    f = AlphaFunction::catalog(s);
    return;
  }
  std::string type = j.at("type").get<std::string>();
  if (type == "poly") {
    f = AlphaFunction::poly(j.at("coeffs").get<std::vector<double>>());
  } else if (type == "sine") {
    f = AlphaFunction::sine(j.at("amplitude").get<double>(), j.at("frequency").get<double>(),
                            j.value("phase", 0.0));
  } else {
    throw ValidationError("unknown alpha function type: " + type);
  }
}

static nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

static Matrix matrix_from_json(const nlohmann::json& j) {
  const Eigen::Index nr = static_cast<Eigen::Index>(j.size());
  if (nr == 0) return Matrix(0, 0);
  const Eigen::Index nc = static_cast<Eigen::Index>(j.at(0).size());
  Matrix m(nr, nc);
  for (Eigen::Index i = 0; i < nr; ++i)
    for (Eigen::Index c = 0; c < nc; ++c) m(i, c) = j.at(i).at(c).get<double>();
  return m;
}

void to_json(nlohmann::json& j, const SimulationSpec& s) {
  j = nlohmann::json{{"cluster_sizes", s.cluster_sizes},
                     {"alphas", s.alphas},
                     {"beta", std::vector<double>(s.beta.begin(), s.beta.end())},
                     {"psi", matrix_to_json(s.psi)}};
}

void from_json(const nlohmann::json& j, SimulationSpec& s) {
  s.cluster_sizes = j.at("cluster_sizes").get<std::vector<Eigen::Index>>();
  s.alphas = j.at("alphas").get<std::vector<std::vector<AlphaFunction>>>();
  auto beta = j.value("beta", std::vector<double>{});
  s.beta = Eigen::Map<const Vector>(beta.data(), static_cast<Eigen::Index>(beta.size()));
  s.psi = matrix_from_json(j.at("psi"));
}

void to_json(nlohmann::json& j, const SimulationTruth& t) {
  nlohmann::json b = nlohmann::json::array(), L = nlohmann::json::array();
  for (const auto& v : t.b_true) b.push_back(std::vector<double>(v.begin(), v.end()));
  for (const auto& v : t.L_true) L.push_back(std::vector<double>(v.begin(), v.end()));
  j = nlohmann::json{{"cluster_of", t.cluster_of},
                     {"alpha_true", t.alpha_true},
                     {"beta_true", std::vector<double>(t.beta_true.begin(), t.beta_true.end())},
                     {"psi_true", matrix_to_json(t.psi_true)},
                     {"b_true", std::move(b)},
                     {"L_true", std::move(L)}};
}

void from_json(const nlohmann::json& j, SimulationTruth& t) {
  t.cluster_of = j.at("cluster_of").get<std::vector<int>>();
  t.alpha_true = j.at("alpha_true").get<std::vector<std::vector<AlphaFunction>>>();
  auto beta = j.at("beta_true").get<std::vector<double>>();
  t.beta_true = Eigen::Map<const Vector>(beta.data(), static_cast<Eigen::Index>(beta.size()));
  t.psi_true = matrix_from_json(j.at("psi_true"));
  t.b_true.clear();
  for (const auto& row : j.at("b_true")) {
    auto v = row.get<std::vector<double>>();
    t.b_true.push_back(Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())));
  }
  t.L_true.clear();
  for (const auto& row : j.at("L_true")) {
    auto v = row.get<std::vector<double>>();
    t.L_true.push_back(Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())));
  }
}

void to_json(nlohmann::json& j, const CsvSchema& s) {
  j = nlohmann::json{{"subject", s.subject}, {"time", s.time}, {"response", s.response},
                     {"w", s.w},             {"x", s.x},       {"z", s.z}};
}

void from_json(const nlohmann::json& j, CsvSchema& s) {
  s.subject = j.at("subject").get<std::string>();
  s.time = j.at("time").get<std::string>();
  s.response = j.at("response").get<std::string>();
  s.w = j.value("w", std::vector<std::string>{});
  s.x = j.value("x", std::vector<std::string>{});
  s.z = j.value("z", std::vector<std::string>{});
}

}  // namespace fclust
