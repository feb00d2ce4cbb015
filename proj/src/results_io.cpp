#include "gsurvey/results_io.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <ostream>

#include "gsurvey/error.hpp"

namespace gsurvey {

namespace {

bool same(double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; }

std::string fmt_bool(bool b) { return b ? "true" : "false"; }

std::string fmt_size(std::size_t v) { return std::to_string(v); }

std::size_t parse_size(const std::string& text, const std::string& source, std::size_t line) {
  const std::int64_t v = parse_int(text, source, line);
  if (v < 0) throw ParseError(source, line, "expected a nonnegative integer, got '" + text + "'");
  return static_cast<std::size_t>(v);
}

// Column lookup helper bound to one table.
struct Columns {
  const CsvTable& table;
  const std::string& source;
  std::map<std::string, std::size_t, std::less<>> index;

  Columns(const CsvTable& t, const std::string& s, std::initializer_list<const char*> names)
      : table(t), source(s) {
    for (const char* name : names) index[name] = t.column(name, s);
  }
  const std::string& get(std::size_t row, const char* name) const {
    return table.rows[row][index.find(name)->second];
  }
  double num(std::size_t row, const char* name) const {
    return parse_double(get(row, name), source, table.line_of(row));
  }
  std::size_t size(std::size_t row, const char* name) const {
    return parse_size(get(row, name), source, table.line_of(row));
  }
  bool flag(std::size_t row, const char* name) const {
    return parse_bool(get(row, name), source, table.line_of(row));
  }
};

TestMethod method_from_text(const std::string& text, const std::string& source, std::size_t line) {
  try {
    return parse_test_method(text);
  } catch (const UsageError& e) {
    throw ParseError(source, line, e.what());
  }
}

}  // namespace

CsvTable test_results_table(const std::vector<TestResult>& results) {
  CsvTable t;
  t.header = {"method", "statistic", "p_value", "alpha", "reject", "n_permutations", "n_effective",
              "degenerate"};
  for (const auto& r : results)
    t.rows.push_back({std::string(to_string(r.method)), format_double(r.statistic),
                      format_double(r.p_value), format_double(r.alpha), fmt_bool(r.reject),
                      r.n_permutations ? fmt_size(*r.n_permutations) : "",
                      fmt_size(r.n_effective), fmt_bool(r.degenerate)});
  return t;
}

std::vector<TestResult> test_results_from_table(const CsvTable& table, const std::string& source) {
  Columns c(table, source,
            {"method", "statistic", "p_value", "alpha", "reject", "n_permutations", "n_effective",
             "degenerate"});
  std::vector<TestResult> out;
  for (std::size_t k = 0; k < table.rows.size(); ++k) {
    TestResult r;
    r.method = method_from_text(c.get(k, "method"), source, table.line_of(k));
    r.statistic = c.num(k, "statistic");
    r.p_value = c.num(k, "p_value");
    r.alpha = c.num(k, "alpha");
    r.reject = c.flag(k, "reject");
    if (!c.get(k, "n_permutations").empty()) r.n_permutations = c.size(k, "n_permutations");
    r.n_effective = c.size(k, "n_effective");
    r.degenerate = c.flag(k, "degenerate");
    out.push_back(r);
  }
  return out;
}

bool operator==(const EstimateRow& x, const EstimateRow& y) {
  const auto& a = x.estimate;
  const auto& b = y.estimate;
  const bool params_equal =
      same(a.alpha0_hat, b.alpha0_hat) && same(a.beta0_hat, b.beta0_hat) &&
      same(a.gamma_hat, b.gamma_hat) && same(a.rho_hat, b.rho_hat) &&
      same(a.prior_mean, b.prior_mean) && same(a.prior_precision, b.prior_precision) &&
      same(a.sigma2_hat, b.sigma2_hat) && same(a.sigma2_u_hat, b.sigma2_u_hat) &&
      a.n_valid_cells == b.n_valid_cells && a.n_personas == b.n_personas &&
      a.n_perturbations == b.n_perturbations && a.degenerate == b.degenerate;
  const bool beta1_equal = x.beta1_hat.has_value() == y.beta1_hat.has_value() &&
                           (!x.beta1_hat || same(*x.beta1_hat, *y.beta1_hat));
  return x.label == y.label && params_equal && x.bootstrap == y.bootstrap && beta1_equal;
}

CsvTable estimates_table(const std::vector<EstimateRow>& rows) {
  CsvTable t;
  t.header = {"label",    "prior_mean", "prior_mean_se", "prior_precision", "prior_precision_se",
              "gamma",    "gamma_se",   "rho",           "rho_se",          "alpha0",
              "alpha0_se", "beta0",     "beta0_se",      "beta1",           "sigma2",
              "sigma2_u", "n_personas", "n_perturbations", "n_valid_cells", "bootstrap_resamples",
              "bootstrap_failed", "degenerate"};
  for (const auto& row : rows) {
    const auto& e = row.estimate;
    const auto& b = row.bootstrap;
    auto se = [&](double BootstrapResult::*field) { return b ? format_double((*b).*field) : ""; };
    t.rows.push_back({row.label,
                      format_double(e.prior_mean),
                      se(&BootstrapResult::se_prior_mean),
                      format_double(e.prior_precision),
                      se(&BootstrapResult::se_prior_precision),
                      format_double(e.gamma_hat),
                      se(&BootstrapResult::se_gamma),
                      format_double(e.rho_hat),
                      se(&BootstrapResult::se_rho),
                      format_double(e.alpha0_hat),
                      se(&BootstrapResult::se_alpha0),
                      format_double(e.beta0_hat),
                      se(&BootstrapResult::se_beta0),
                      row.beta1_hat ? format_double(*row.beta1_hat) : "",
                      format_double(e.sigma2_hat),
                      format_double(e.sigma2_u_hat),
                      fmt_size(e.n_personas),
                      fmt_size(e.n_perturbations),
                      fmt_size(e.n_valid_cells),
                      b ? fmt_size(b->n_resamples) : "",
                      b ? fmt_size(b->n_failed) : "",
                      fmt_bool(e.degenerate)});
  }
  return t;
}

std::vector<EstimateRow> estimates_from_table(const CsvTable& table, const std::string& source) {
  Columns c(table, source,
            {"label", "prior_mean", "prior_mean_se", "prior_precision", "prior_precision_se",
             "gamma", "gamma_se", "rho", "rho_se", "alpha0", "alpha0_se", "beta0", "beta0_se",
             "beta1", "sigma2", "sigma2_u", "n_personas", "n_perturbations", "n_valid_cells",
             "bootstrap_resamples", "bootstrap_failed", "degenerate"});
  std::vector<EstimateRow> out;
  for (std::size_t k = 0; k < table.rows.size(); ++k) {
    EstimateRow row;
    row.label = c.get(k, "label");
    auto& e = row.estimate;
    e.prior_mean = c.num(k, "prior_mean");
    e.prior_precision = c.num(k, "prior_precision");
    e.gamma_hat = c.num(k, "gamma");
    e.rho_hat = c.num(k, "rho");
    e.alpha0_hat = c.num(k, "alpha0");
    e.beta0_hat = c.num(k, "beta0");
    e.sigma2_hat = c.num(k, "sigma2");
    e.sigma2_u_hat = c.num(k, "sigma2_u");
    e.n_personas = c.size(k, "n_personas");
    e.n_perturbations = c.size(k, "n_perturbations");
    e.n_valid_cells = c.size(k, "n_valid_cells");
    e.degenerate = c.flag(k, "degenerate");
    if (!c.get(k, "beta1").empty()) row.beta1_hat = c.num(k, "beta1");
    if (!c.get(k, "bootstrap_resamples").empty()) {
      BootstrapResult b;
      b.n_resamples = c.size(k, "bootstrap_resamples");
      b.n_failed = c.size(k, "bootstrap_failed");
      b.se_prior_mean = c.num(k, "prior_mean_se");
      b.se_prior_precision = c.num(k, "prior_precision_se");
      b.se_gamma = c.num(k, "gamma_se");
      b.se_rho = c.num(k, "rho_se");
      b.se_alpha0 = c.num(k, "alpha0_se");
      b.se_beta0 = c.num(k, "beta0_se");
      row.bootstrap = b;
    }
    out.push_back(std::move(row));
  }
  return out;
}

void write_estimate_report(std::ostream& out, const EstimateRow& row) {
  const auto& e = row.estimate;
  const auto& b = row.bootstrap;
  auto line = [&](const char* key, double value, std::optional<double> se) {
    out << key << ": " << format_fixed(value, 4);
    if (se) out << " (" << format_fixed(*se, 4) << ")";
    out << '\n';
  };
  auto se = [&](double BootstrapResult::*field) -> std::optional<double> {
    if (!b) return std::nullopt;
    return (*b).*field;
  };
  out << "label: " << row.label << '\n';
  out << "degenerate: " << fmt_bool(e.degenerate) << '\n';
  out << "n_personas: " << e.n_personas << '\n';
  out << "n_perturbations: " << e.n_perturbations << '\n';
  out << "n_valid_cells: " << e.n_valid_cells << '\n';
  if (!e.degenerate) {
    line("prior_mean", e.prior_mean, se(&BootstrapResult::se_prior_mean));
    line("prior_precision", e.prior_precision, se(&BootstrapResult::se_prior_precision));
    line("gamma", e.gamma_hat, se(&BootstrapResult::se_gamma));
    line("rho", e.rho_hat, se(&BootstrapResult::se_rho));
    line("alpha0", e.alpha0_hat, se(&BootstrapResult::se_alpha0));
    line("beta0", e.beta0_hat, se(&BootstrapResult::se_beta0));
    line("sigma2", e.sigma2_hat, std::nullopt);
    line("sigma2_u", e.sigma2_u_hat, std::nullopt);
  }
  if (row.beta1_hat) line("beta1", *row.beta1_hat, std::nullopt);
  if (b) {
    out << "bootstrap_resamples: " << b->n_resamples << '\n';
    out << "bootstrap_failed: " << b->n_failed << '\n';
  }
}

CsvTable profile_table(const RejectionProfile& profile) {
  CsvTable t;
  t.header = {"test", "metric", "value"};
  for (const auto& tp : profile.tests) {
    const std::string name(to_string(tp.method));
    t.rows.push_back({name, "rejection_rate", format_double(tp.rejection_rate)});
    t.rows.push_back({name, "mc_se", format_double(tp.mc_se)});
    t.rows.push_back({name, "n_degenerate", fmt_size(tp.n_degenerate)});
    t.rows.push_back({name, "alpha", format_double(profile.alpha)});
    t.rows.push_back({name, "n_sims", fmt_size(profile.n_sims)});
  }
  return t;
}

CsvTable pvalues_table(const RejectionProfile& profile) {
  CsvTable t;
  t.header = {"test", "sim", "p_value", "statistic"};
  for (const auto& tp : profile.tests) {
    const std::string name(to_string(tp.method));
    for (std::size_t s = 0; s < tp.p_values.size(); ++s)
      t.rows.push_back({name, fmt_size(s), format_double(tp.p_values[s]),
                        format_double(tp.statistics[s])});
  }
  return t;
}

RejectionProfile profile_from_tables(const CsvTable& summary, const CsvTable& pvalues,
                                     const std::string& source) {
  RejectionProfile profile;
  auto find_or_add = [&](TestMethod m) -> TestProfile& {
    for (auto& tp : profile.tests)
      if (tp.method == m) return tp;
    profile.tests.push_back(TestProfile{});
    profile.tests.back().method = m;
    return profile.tests.back();
  };

  Columns s(summary, source, {"test", "metric", "value"});
  for (std::size_t k = 0; k < summary.rows.size(); ++k) {
    const std::size_t line = summary.line_of(k);
    TestProfile& tp = find_or_add(method_from_text(s.get(k, "test"), source, line));
    const std::string& metric = s.get(k, "metric");
    if (metric == "rejection_rate") tp.rejection_rate = s.num(k, "value");
    else if (metric == "mc_se") tp.mc_se = s.num(k, "value");
    else if (metric == "n_degenerate") tp.n_degenerate = s.size(k, "value");
    else if (metric == "alpha") profile.alpha = s.num(k, "value");
    else if (metric == "n_sims") profile.n_sims = s.size(k, "value");
    else throw ParseError(source, line, "unknown metric '" + metric + "'");
  }

  Columns p(pvalues, source, {"test", "sim", "p_value", "statistic"});
  for (std::size_t k = 0; k < pvalues.rows.size(); ++k) {
    const std::size_t line = pvalues.line_of(k);
    TestProfile& tp = find_or_add(method_from_text(p.get(k, "test"), source, line));
    if (p.size(k, "sim") != tp.p_values.size())
      throw ParseError(source, line, "p-value rows must be listed in simulation order");
    tp.p_values.push_back(p.num(k, "p_value"));
    tp.statistics.push_back(p.num(k, "statistic"));
  }
  return profile;
}

CsvTable ecdf_table(const RejectionProfile& profile, const std::vector<double>& grid) {
  CsvTable t;
  t.header = {"test", "x", "ecdf"};
  for (const auto& tp : profile.tests) {
    const auto curve = ecdf_on_grid(tp.p_values, grid);
    for (std::size_t k = 0; k < grid.size(); ++k)
      t.rows.push_back({std::string(to_string(tp.method)), format_double(grid[k]),
                        format_double(curve[k])});
  }
  return t;
}

CsvTable sweep_table(const std::vector<SweepRow>& rows) {
  CsvTable t;
  t.header = {"rho",          "gamma",           "alpha0",          "beta0",         "beta1",
              "strategy",     "budget",          "n_personas",      "n_perturbations",
              "n_replicates", "realized_budget", "power",           "mc_se",         "skipped",
              "warning"};
  for (const auto& r : rows)
    t.rows.push_back({format_double(r.rho), format_double(r.gamma), format_double(r.alpha0),
                      format_double(r.beta0), format_double(r.beta1), r.strategy,
                      fmt_size(r.budget), fmt_size(r.n_personas), fmt_size(r.n_perturbations),
                      fmt_size(r.n_replicates), fmt_size(r.realized_budget),
                      format_double(r.power), format_double(r.mc_se), fmt_bool(r.skipped),
                      r.warning});
  return t;
}

std::vector<SweepRow> sweep_from_table(const CsvTable& table, const std::string& source) {
  Columns c(table, source,
            {"rho", "gamma", "alpha0", "beta0", "beta1", "strategy", "budget", "n_personas",
             "n_perturbations", "n_replicates", "realized_budget", "power", "mc_se", "skipped",
             "warning"});
  std::vector<SweepRow> out;
  for (std::size_t k = 0; k < table.rows.size(); ++k) {
    SweepRow r;
    r.rho = c.num(k, "rho");
    r.gamma = c.num(k, "gamma");
    r.alpha0 = c.num(k, "alpha0");
    r.beta0 = c.num(k, "beta0");
    r.beta1 = c.num(k, "beta1");
    r.strategy = c.get(k, "strategy");
    r.budget = c.size(k, "budget");
    r.n_personas = c.size(k, "n_personas");
    r.n_perturbations = c.size(k, "n_perturbations");
    r.n_replicates = c.size(k, "n_replicates");
    r.realized_budget = c.size(k, "realized_budget");
    r.power = c.num(k, "power");
    r.mc_se = c.num(k, "mc_se");
    r.skipped = c.flag(k, "skipped");
    r.warning = c.get(k, "warning");
    out.push_back(std::move(r));
  }
  return out;
}

void write_table(const std::filesystem::path& path, const CsvTable& table) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  write_csv(out, table);
  if (!out) throw DataError("error while writing '" + path.string() + "'");
}

CsvTable read_table(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return read_csv(in, path.string());
}

}  // namespace gsurvey
