#include "gsurvey/cli.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gsurvey/config.hpp"
#include "gsurvey/csv.hpp"
#include "gsurvey/error.hpp"
#include "gsurvey/estimation.hpp"
#include "gsurvey/harness.hpp"
#include "gsurvey/hypothesis_tests.hpp"
#include "gsurvey/model.hpp"
#include "gsurvey/records.hpp"
#include "gsurvey/results_io.hpp"
#include "gsurvey/svg.hpp"

namespace gsurvey {

namespace {

namespace fs = std::filesystem;

struct CommonFlags {
  std::string config;
  std::optional<Seed> seed;
  std::optional<double> alpha;
  std::optional<std::size_t> permutations;
  std::optional<std::size_t> n_sims;
  std::optional<std::string> rule;
  std::optional<unsigned> threads;
  std::string format;
  std::string out_dir;
  std::optional<std::string> prefix;
};

struct ModelFlags {
  std::optional<double> alpha0;
  std::optional<double> beta0;
  std::optional<double> prior_mean;
  std::optional<double> prior_precision;
  std::optional<double> gamma;
  std::optional<double> rho;
  std::optional<double> beta1;
  std::optional<std::size_t> n_personas;
  std::optional<std::size_t> n_perturbations;
  std::optional<std::size_t> n_replicates;
  std::optional<std::string> coupling;
};

void add_common(CLI::App* app, CommonFlags& f, bool data_format) {
  app->add_option("--config", f.config, "JSON run configuration")->check(CLI::ExistingFile);
  app->add_option("--seed", f.seed, "master seed");
  app->add_option("--alpha", f.alpha, "significance level (default 0.05)");
  app->add_option("--permutations", f.permutations, "Monte Carlo permutations (default 10000)");
  app->add_option("--n-sims", f.n_sims, "simulations or sub-samples (default 200)");
  app->add_option("--pvalue-correction", f.rule, "permutation p-value rule")
      ->check(CLI::IsMember({"paper", "add-one"}));
  app->add_option("--threads", f.threads, "worker threads, 0 = all cores");
  app->add_option("--out-dir", f.out_dir, "output directory (default $GSURVEY_OUTPUT_DIR or .)");
  app->add_option("--prefix", f.prefix, "prefix for output file names");
  if (data_format)
    app->add_option("--format", f.format, "response file format (default: from extension)")
        ->check(CLI::IsMember({"jsonl", "csv"}));
}

void add_model(CLI::App* app, ModelFlags& f) {
  app->add_option("--alpha0", f.alpha0, "Beta prior shape alpha0");
  app->add_option("--beta0", f.beta0, "Beta prior shape beta0");
  app->add_option("--prior-mean", f.prior_mean, "Beta prior mean (instead of shapes)");
  app->add_option("--prior-precision", f.prior_precision, "Beta prior precision alpha0 + beta0");
  app->add_option("--gamma", f.gamma, "logit-scale precision");
  app->add_option("--rho", f.rho, "shared share of logit variance");
  app->add_option("--beta1", f.beta1, "logit shift of message B");
  app->add_option("--n-personas", f.n_personas, "N");
  app->add_option("--n-perturbations", f.n_perturbations, "M");
  app->add_option("--n-replicates", f.n_replicates, "R");
  app->add_option("--coupling", f.coupling, "perturbation draws for message B")
      ->check(CLI::IsMember({"shared", "independent"}));
}

RunConfig resolve(const CommonFlags& c, const ModelFlags* m) {
  RunConfig cfg = c.config.empty() ? RunConfig{} : load_run_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (c.alpha) cfg.experiment.alpha = *c.alpha;
  if (c.permutations) cfg.experiment.n_permutations = *c.permutations;
  if (c.n_sims) cfg.experiment.n_sims = *c.n_sims;
  if (c.rule) cfg.experiment.rule = parse_pvalue_rule(*c.rule);
  if (c.threads) cfg.experiment.threads = *c.threads;
  if (c.prefix) cfg.output.prefix = *c.prefix;
  if (!c.out_dir.empty()) cfg.output.directory = c.out_dir;
  if (!(cfg.experiment.alpha > 0.0 && cfg.experiment.alpha < 1.0))
    throw UsageError("--alpha must lie in (0, 1)");
  if (cfg.experiment.n_permutations == 0) throw UsageError("--permutations must be positive");
  if (cfg.experiment.n_sims == 0) throw UsageError("--n-sims must be positive");

  if (m) {
    if ((m->alpha0 || m->beta0) && (m->prior_mean || m->prior_precision))
      throw UsageError("give either --alpha0/--beta0 or --prior-mean/--prior-precision");
    const auto& p = cfg.params;
    double alpha0 = m->alpha0.value_or(p.alpha0());
    double beta0 = m->beta0.value_or(p.beta0());
    if (m->prior_mean || m->prior_precision) {
      const double mean = m->prior_mean.value_or(p.prior_mean());
      const double precision = m->prior_precision.value_or(p.prior_precision());
      if (!(mean > 0.0 && mean < 1.0)) throw ParameterError("--prior-mean must lie in (0, 1)");
      alpha0 = mean * precision;
      beta0 = (1.0 - mean) * precision;
    }
    cfg.params = GenerativeParams(alpha0, beta0, m->gamma.value_or(p.gamma()),
                                  m->rho.value_or(p.rho()), m->beta1.value_or(p.beta1()));
    cfg.design = SurveyDesign(m->n_personas.value_or(cfg.design.n_personas()),
                              m->n_perturbations.value_or(cfg.design.n_perturbations()),
                              m->n_replicates.value_or(cfg.design.n_replicates()));
    if (m->coupling) cfg.experiment.coupling = parse_coupling(*m->coupling);
  }

  cfg.sweep.alpha = cfg.experiment.alpha;
  cfg.sweep.rule = cfg.experiment.rule;
  cfg.sweep.coupling = cfg.experiment.coupling;
  cfg.sweep.threads = cfg.experiment.threads;
  cfg.sweep.master_seed = cfg.seed;
  if (c.n_sims) cfg.sweep.n_sims = *c.n_sims;
  if (c.permutations) cfg.sweep.n_permutations = *c.permutations;
  return cfg;
}

fs::path output_dir(const RunConfig& cfg) {
  fs::path dir = cfg.output.directory;
  if (dir.empty()) {
    const char* env = std::getenv("GSURVEY_OUTPUT_DIR");
    dir = (env && *env) ? fs::path(env) : fs::path(".");
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory '" + dir.string() + "': " + ec.message());
  return dir;
}

fs::path output_path(const RunConfig& cfg, const std::string& name) {
  return output_dir(cfg) / (cfg.output.prefix + name);
}

std::string file_safe(const std::string& label) {
  std::string out;
  for (char c : label) {
    const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
    out += ok ? c : '_';
  }
  return out.empty() ? "_" : out;
}

ResponseDataset read_inputs(const std::vector<std::string>& paths, const std::string& format) {
  ResponseDataset all;
  for (const auto& path : paths) {
    const DataFormat f = format.empty() ? format_from_path(path) : parse_data_format(format);
    auto part = read_responses(path, f);
    all.records.insert(all.records.end(), part.records.begin(), part.records.end());
  }
  if (paths.size() > 1) {
    // Re-validate the merged set so duplicates across files are caught.
    std::ostringstream buffer;
    write_responses(buffer, all, DataFormat::kJsonl);
    std::istringstream in(buffer.str());
    all = parse_responses(in, DataFormat::kJsonl, "merged input");
  }
  return all;
}

std::pair<std::string, std::string> pick_pair(const ResponseDataset& data, const std::string& a,
                                              const std::string& b) {
  if (!a.empty() && !b.empty()) return {a, b};
  const auto messages = data.messages();
  if (messages.size() != 2)
    throw UsageError("input has " + std::to_string(messages.size()) +
                     " messages; choose two with --message-a and --message-b");
  return {a.empty() ? messages[0] : a, b.empty() ? messages[1] : b};
}

void wrote(std::ostream& out, const fs::path& path) { out << "wrote " << path.string() << '\n'; }

LineChart ecdf_chart(const std::string& title, const std::vector<ChartSeries>& series) {
  LineChart chart;
  chart.title = title;
  chart.x_label = "p-value";
  chart.y_label = "empirical CDF";
  chart.series = series;
  chart.diagonal = true;
  return chart;
}

std::vector<ChartSeries> ecdf_series(const RejectionProfile& profile, const std::vector<double>& grid) {
  std::vector<ChartSeries> series;
  for (const auto& t : profile.tests)
    series.push_back({std::string(to_string(t.method)), grid, ecdf_on_grid(t.p_values, grid)});
  return series;
}

void write_profile(std::ostream& out, const RunConfig& cfg, const RejectionProfile& profile,
                   const std::string& stem, const std::string& title) {
  const auto grid = uniform_grid(cfg.experiment.ecdf_points);
  const auto summary = profile_table(profile);
  write_csv(out, summary);
  const auto p_summary = output_path(cfg, stem + "profile.csv");
  const auto p_values = output_path(cfg, stem + "pvalues.csv");
  const auto p_ecdf = output_path(cfg, stem + "ecdf.csv");
  const auto p_svg = output_path(cfg, stem + "ecdf.svg");
  write_table(p_summary, summary);
  write_table(p_values, pvalues_table(profile));
  write_table(p_ecdf, ecdf_table(profile, grid));
  write_svg(p_svg, ecdf_chart(title, ecdf_series(profile, grid)));
  for (const auto& p : {p_summary, p_values, p_ecdf, p_svg}) wrote(out, p);
}

ExperimentConfig experiment_config(const RunConfig& cfg) {
  ExperimentConfig e(cfg.params, cfg.design);
  e.n_sims = cfg.experiment.n_sims;
  e.alpha = cfg.experiment.alpha;
  e.n_permutations = cfg.experiment.n_permutations;
  e.tests = cfg.experiment.tests;
  e.master_seed = cfg.seed;
  e.rule = cfg.experiment.rule;
  e.threads = cfg.experiment.threads;
  e.coupling = cfg.experiment.coupling;
  return e;
}

SubsampleConfig subsample_config(const RunConfig& cfg) {
  SubsampleConfig s{cfg.design};
  s.n_subsamples = cfg.experiment.n_sims;
  s.alpha = cfg.experiment.alpha;
  s.n_permutations = cfg.experiment.n_permutations;
  s.tests = cfg.experiment.tests;
  s.master_seed = cfg.seed;
  s.rule = cfg.experiment.rule;
  s.threads = cfg.experiment.threads;
  return s;
}

// ----- subcommands -----------------------------------------------------------

struct SimulateFlags {
  std::string out;
  std::string label_a = "A";
  std::string label_b = "B";
  std::optional<std::string> model_id;
};

int run_simulate(const CommonFlags& c, const ModelFlags& m, const SimulateFlags& s,
                 std::ostream& out) {
  const RunConfig cfg = resolve(c, &m);
  if (s.label_a == s.label_b) throw UsageError("--label-a and --label-b must differ");
  const DataFormat format = !c.format.empty() ? parse_data_format(c.format)
                            : !s.out.empty() ? format_from_path(s.out)
                                             : DataFormat::kJsonl;
  const fs::path path = !s.out.empty() ? fs::path(s.out)
                                       : output_path(cfg, format == DataFormat::kCsv
                                                              ? "responses.csv"
                                                              : "responses.jsonl");
  const auto data = simulate_survey(cfg.params, cfg.design, cfg.seed, cfg.experiment.coupling);
  write_responses(path, to_records(data, s.label_a, s.label_b, s.model_id), format);
  wrote(out, path);
  return 0;
}

struct DataFlags {
  std::vector<std::string> inputs;
  std::string message_a;
  std::string message_b;
  std::vector<std::string> methods;
  std::string out;
};

int run_test_cmd(const CommonFlags& c, const DataFlags& d, std::ostream& out) {
  const RunConfig cfg = resolve(c, nullptr);
  const auto data = read_inputs(d.inputs, c.format);
  const auto [a, b] = pick_pair(data, d.message_a, d.message_b);
  const auto paired = to_paired(data, a, b);

  std::vector<TestMethod> methods;
  for (const auto& name : d.methods) methods.push_back(parse_test_method(name));
  if (methods.empty()) methods = cfg.experiment.tests;

  TestOptions options;
  options.alpha = cfg.experiment.alpha;
  options.n_permutations = cfg.experiment.n_permutations;
  options.seed = cfg.seed;
  options.rule = cfg.experiment.rule;
  std::vector<TestResult> results;
  for (auto method : methods) results.push_back(run_test(method, paired, options));

  const auto table = test_results_table(results);
  write_csv(out, table);
  if (!d.out.empty()) {
    write_table(d.out, table);
    wrote(out, d.out);
  }
  return 0;
}

struct EstimateFlags {
  std::vector<std::string> inputs;
  std::vector<std::string> messages;
  bool pooled = false;
  bool effect_size = false;
  std::size_t bootstrap = 1000;
  std::string out;
};

int run_estimate(const CommonFlags& c, const EstimateFlags& e, std::ostream& out,
                 std::ostream& err) {
  const RunConfig cfg = resolve(c, nullptr);
  const auto data = read_inputs(e.inputs, c.format);
  std::vector<std::string> messages = e.messages.empty() ? data.messages() : e.messages;
  if ((e.pooled || e.effect_size) && messages.size() != 2)
    throw UsageError("--pooled and --effect-size need exactly two messages");

  struct Job {
    std::string label;
    ResponseTensor tensor;
  };
  std::vector<Job> jobs;
  std::optional<PairedResponses> pair;
  if (e.pooled || e.effect_size) pair = to_paired(data, messages[0], messages[1]);
  if (e.pooled) {
    jobs.push_back({messages[0] + "+" + messages[1], pool_perturbations(*pair)});
  } else {
    for (const auto& label : messages) jobs.push_back({label, to_tensor(data, label).tensor});
  }

  std::vector<EstimateRow> rows;
  std::vector<std::string> degenerate;
  for (std::size_t k = 0; k < jobs.size(); ++k) {
    const CellCounts counts(jobs[k].tensor);
    EstimateRow row{jobs[k].label, estimate_params(counts), std::nullopt, std::nullopt};
    if (row.estimate.degenerate) {
      degenerate.push_back(jobs[k].label);
    } else if (e.bootstrap > 0) {
      row.bootstrap = bootstrap_standard_errors(counts, e.bootstrap,
                                                substream_seed(stream_seed(cfg.seed, Stream::kBootstrap), k),
                                                cfg.experiment.threads);
    }
    rows.push_back(std::move(row));
  }
  if (e.effect_size) {
    const auto effect = estimate_effect_size(*pair);
    // Attached to message B's row (or the pooled row).
    EstimateRow& target = rows.back();
    target.beta1_hat = effect.degenerate ? std::numeric_limits<double>::quiet_NaN() : effect.beta1_hat;
    if (effect.degenerate) degenerate.push_back("effect size " + messages[0] + " -> " + messages[1]);
  }

  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (k) out << '\n';
    write_estimate_report(out, rows[k]);
  }
  const fs::path path = !e.out.empty() ? fs::path(e.out) : output_path(cfg, "estimates.csv");
  write_table(path, estimates_table(rows));
  wrote(out, path);

  if (!degenerate.empty()) {
    for (const auto& label : degenerate)
      err << "degenerate estimate for " << label
          << ": too few cells with response rates strictly between 0 and 1 "
             "(e.g. the model always answers yes)\n";
    return 3;
  }
  return 0;
}

struct ProfileFlags {
  std::vector<std::string> inputs;
  std::vector<std::string> messages;
  std::string message_a;
  std::string message_b;
  std::vector<std::size_t> n_grid;
};

int run_validity(const CommonFlags& c, const ModelFlags& m, const ProfileFlags& p,
                 std::ostream& out) {
  const RunConfig cfg = resolve(c, &m);
  if (p.inputs.empty()) {
    if (cfg.params.beta1() != 0.0)
      throw UsageError("validity simulates the null; beta1 must be 0 (use power instead)");
    write_profile(out, cfg, run_validity_profile(experiment_config(cfg)), "validity_",
                  "p-value ECDF under the null");
    return 0;
  }

  const auto data = read_inputs(p.inputs, c.format);
  const auto messages = p.messages.empty() ? data.messages() : p.messages;
  const auto grid = uniform_grid(cfg.experiment.ecdf_points);
  std::map<std::string, std::vector<std::vector<double>>> curves;
  for (std::size_t k = 0; k < messages.size(); ++k) {
    const auto labeled = to_tensor(data, messages[k]);
    const auto pair = null_split_pair(labeled.tensor, labeled.persona_ids, labeled.perturbation_ids,
                                      substream_seed(stream_seed(cfg.seed, Stream::kSplit), k));
    const auto profile = run_subsample_profile(pair, subsample_config(cfg));
    write_profile(out, cfg, profile, "validity_" + file_safe(messages[k]) + "_",
                  "null-split p-value ECDF: " + messages[k]);
    for (const auto& t : profile.tests)
      curves[std::string(to_string(t.method))].push_back(ecdf_on_grid(t.p_values, grid));
  }
  if (messages.size() > 1) {
    CsvTable table{{"test", "x", "ecdf"}, {}, {}};
    std::vector<ChartSeries> series;
    for (auto method : cfg.experiment.tests) {
      const std::string name(to_string(method));
      const auto median = median_curve(curves.at(name));
      for (std::size_t g = 0; g < grid.size(); ++g)
        table.rows.push_back({name, format_double(grid[g]), format_double(median[g])});
      series.push_back({name, grid, median});
    }
    const auto csv = output_path(cfg, "validity_median_ecdf.csv");
    const auto svg = output_path(cfg, "validity_median_ecdf.svg");
    write_table(csv, table);
    write_svg(svg, ecdf_chart("median null-split ECDF across messages", series));
    wrote(out, csv);
    wrote(out, svg);
  }
  return 0;
}

int run_power(const CommonFlags& c, const ModelFlags& m, const ProfileFlags& p, std::ostream& out) {
  const RunConfig cfg = resolve(c, &m);
  if (!p.inputs.empty()) {
    const auto data = read_inputs(p.inputs, c.format);
    const auto [a, b] = pick_pair(data, p.message_a, p.message_b);
    write_profile(out, cfg, run_subsample_profile(to_paired(data, a, b), subsample_config(cfg)),
                  "power_", "sub-sample p-value ECDF: " + a + " vs " + b);
    return 0;
  }
  if (p.n_grid.empty()) {
    write_profile(out, cfg, run_power_profile(experiment_config(cfg)), "power_",
                  "p-value ECDF");
    return 0;
  }

  CsvTable table{{"n_personas", "test", "power", "mc_se"}, {}, {}};
  std::map<std::string, ChartSeries> series;
  for (std::size_t n : p.n_grid) {
    RunConfig point = cfg;
    point.design = SurveyDesign(n, cfg.design.n_perturbations(), cfg.design.n_replicates());
    const auto profile = run_power_profile(experiment_config(point));
    for (const auto& t : profile.tests) {
      const std::string name(to_string(t.method));
      table.rows.push_back({std::to_string(n), name, format_double(t.rejection_rate),
                            format_double(t.mc_se)});
      auto& s = series[name];
      s.name = name;
      s.x.push_back(static_cast<double>(n));
      s.y.push_back(t.rejection_rate);
    }
  }
  write_csv(out, table);
  LineChart chart;
  chart.title = "power by number of personas";
  chart.x_label = "personas N";
  chart.y_label = "rejection rate";
  for (auto method : cfg.experiment.tests) chart.series.push_back(series.at(std::string(to_string(method))));
  const auto [lo, hi] = std::minmax_element(p.n_grid.begin(), p.n_grid.end());
  chart.x_min = static_cast<double>(*lo);
  chart.x_max = *hi > *lo ? static_cast<double>(*hi) : chart.x_min + 1.0;
  const auto csv = output_path(cfg, "power_curve.csv");
  const auto svg = output_path(cfg, "power_curve.svg");
  write_table(csv, table);
  write_svg(svg, chart);
  wrote(out, csv);
  wrote(out, svg);
  return 0;
}

struct BudgetFlags {
  std::vector<std::size_t> budgets;
  std::vector<std::string> strategies;
  std::vector<double> rho;
  std::vector<double> gamma;
};

int run_budget(const CommonFlags& c, const BudgetFlags& b, std::ostream& out, std::ostream& err) {
  RunConfig cfg = resolve(c, nullptr);
  auto& s = cfg.sweep;
  if (!b.budgets.empty()) s.budgets = b.budgets;
  if (!b.rho.empty()) s.rho_grid = b.rho;
  if (!b.gamma.empty()) s.gamma_grid = b.gamma;
  if (!b.strategies.empty()) {
    s.strategies.clear();
    for (const auto& text : b.strategies) s.strategies.push_back(AllocationStrategy::parse(text));
  }
  for (double r : s.rho_grid)
    if (!(r >= 0.0 && r <= 1.0)) throw UsageError("--rho values must lie in [0, 1]");
  for (double g : s.gamma_grid)
    if (!(g > 0.0)) throw UsageError("--gamma values must be positive");

  const auto rows = run_budget_sweep(s);
  for (const auto& row : rows)
    if (row.skipped) err << "warning: " << row.warning << '\n';
  const auto csv = output_path(cfg, "sweep.csv");
  write_table(csv, sweep_table(rows));
  wrote(out, csv);

  const auto [lo, hi] = std::minmax_element(s.budgets.begin(), s.budgets.end());
  for (double rho : s.rho_grid) {
    for (double gamma : s.gamma_grid) {
      LineChart chart;
      chart.title = "power by budget, rho = " + format_double(rho) + ", gamma = " + format_double(gamma);
      chart.x_label = "budget N x M x R";
      chart.y_label = "power";
      chart.log_x = *hi > *lo;
      chart.x_min = static_cast<double>(*lo);
      chart.x_max = *hi > *lo ? static_cast<double>(*hi) : chart.x_min + 1.0;
      for (const auto& strategy : s.strategies) {
        ChartSeries series{strategy.label(), {}, {}};
        for (const auto& row : rows) {
          if (row.skipped || row.rho != rho || row.gamma != gamma || row.strategy != strategy.label())
            continue;
          series.x.push_back(static_cast<double>(row.budget));
          series.y.push_back(row.power);
        }
        chart.series.push_back(std::move(series));
      }
      const auto svg =
          output_path(cfg, "sweep_rho" + format_double(rho) + "_gamma" + format_double(gamma) + ".svg");
      write_svg(svg, chart);
      wrote(out, svg);
    }
  }
  return 0;
}

struct SplitFlags {
  std::optional<std::size_t> m_total;
  std::vector<std::string> inputs;
  std::string message;
};

int run_split(const CommonFlags& c, const SplitFlags& f, std::ostream& out) {
  const RunConfig cfg = resolve(c, nullptr);
  const Seed seed = stream_seed(cfg.seed, Stream::kSplit);
  if (f.m_total) {
    if (!f.inputs.empty()) throw UsageError("give either --m-total or --in, not both");
    if (*f.m_total < 2) throw UsageError("--m-total must be at least 2");
    const auto [first, second] = null_split(*f.m_total, seed);
    for (const auto& [name, half] : {std::pair{"split_a.txt", first}, std::pair{"split_b.txt", second}}) {
      const auto path = output_path(cfg, name);
      std::ofstream file(path, std::ios::binary | std::ios::trunc);
      if (!file) throw DataError("cannot write '" + path.string() + "'");
      for (auto j : half) file << j << '\n';
      wrote(out, path);
    }
    return 0;
  }
  if (f.inputs.empty()) throw UsageError("split-null needs --m-total or --in");
  const auto data = read_inputs(f.inputs, c.format);
  std::string message = f.message;
  if (message.empty()) {
    const auto messages = data.messages();
    if (messages.size() != 1)
      throw UsageError("input has " + std::to_string(messages.size()) +
                       " messages; choose one with --message");
    message = messages.front();
  }
  const auto labeled = to_tensor(data, message);
  const auto pair = null_split_pair(labeled.tensor, labeled.persona_ids, labeled.perturbation_ids, seed);
  const auto records = to_records(pair, message + "_A", message + "_B");
  const DataFormat format = c.format.empty() ? DataFormat::kJsonl : parse_data_format(c.format);
  const std::string ext = format == DataFormat::kCsv ? ".csv" : ".jsonl";
  for (const auto& [suffix, label] : {std::pair{"split_a", message + "_A"}, std::pair{"split_b", message + "_B"}}) {
    ResponseDataset half;
    for (const auto& r : records.records)
      if (r.message == label) half.records.push_back(r);
    const auto path = output_path(cfg, std::string(suffix) + ext);
    write_responses(path, half, format);
    wrote(out, path);
  }
  return 0;
}

}  // namespace

int cli_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Survey-style evaluation of language-model responses under perturbation"};
  app.name("gsurvey");
  app.require_subcommand(1);

  CommonFlags common;
  ModelFlags model;

  auto* simulate = app.add_subcommand("simulate", "write a synthetic response file");
  add_common(simulate, common, true);
  add_model(simulate, model);
  SimulateFlags sim;
  simulate->add_option("--out", sim.out, "output file");
  simulate->add_option("--label-a", sim.label_a, "message label for A");
  simulate->add_option("--label-b", sim.label_b, "message label for B");
  simulate->add_option("--model-id", sim.model_id, "model_id written on every record");

  auto* test = app.add_subcommand("test", "test whether two messages draw different responses");
  add_common(test, common, true);
  DataFlags data;
  test->add_option("--in", data.inputs, "response file(s)")->required()->check(CLI::ExistingFile);
  test->add_option("--message-a", data.message_a, "first message label");
  test->add_option("--message-b", data.message_b, "second message label");
  test->add_option("--method", data.methods, "sign, wilcoxon, permutation or permutation-exact");
  test->add_option("--out", data.out, "also write the results CSV here");

  auto* estimate = app.add_subcommand("estimate", "estimate model parameters from response data");
  add_common(estimate, common, true);
  EstimateFlags est;
  estimate->add_option("--in", est.inputs, "response file(s)")->required()->check(CLI::ExistingFile);
  estimate->add_option("--message", est.messages, "message label(s), default all");
  estimate->add_flag("--pooled", est.pooled, "pool two messages into one null-split estimate");
  estimate->add_flag("--effect-size", est.effect_size, "estimate beta1 of the second message");
  estimate->add_option("--bootstrap", est.bootstrap, "bootstrap resamples, 0 disables")
      ->capture_default_str();
  estimate->add_option("--out", est.out, "estimates CSV");

  ProfileFlags prof;
  auto* validity = app.add_subcommand("validity", "Type-I error profile");
  add_common(validity, common, true);
  add_model(validity, model);
  validity->add_option("--in", prof.inputs, "null-split real data instead of simulating")
      ->check(CLI::ExistingFile);
  validity->add_option("--message", prof.messages, "message(s) to split, default all");

  auto* power = app.add_subcommand("power", "rejection-rate profile under an effect");
  add_common(power, common, true);
  add_model(power, model);
  power->add_option("--in", prof.inputs, "sub-sample real data instead of simulating")
      ->check(CLI::ExistingFile);
  power->add_option("--message-a", prof.message_a, "first message label");
  power->add_option("--message-b", prof.message_b, "second message label");
  power->add_option("--n-grid", prof.n_grid, "persona counts for a power curve")->delimiter(',');

  auto* budget = app.add_subcommand("budget", "power of allocation strategies across budgets");
  add_common(budget, common, false);
  BudgetFlags bud;
  budget->add_option("--budgets", bud.budgets, "total query budgets")->delimiter(',');
  budget->add_option("--strategies", bud.strategies, "N:M:R weight triples")->delimiter(',');
  budget->add_option("--rho", bud.rho, "rho grid")->delimiter(',');
  budget->add_option("--gamma", bud.gamma, "gamma grid")->delimiter(',');

  auto* split = app.add_subcommand("split-null", "split perturbations into two null halves");
  add_common(split, common, true);
  SplitFlags spl;
  split->add_option("--m-total", spl.m_total, "write index lists for M perturbations");
  split->add_option("--in", spl.inputs, "split one message of this data")->check(CLI::ExistingFile);
  split->add_option("--message", spl.message, "message label");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (simulate->parsed()) return run_simulate(common, model, sim, out);
    if (test->parsed()) return run_test_cmd(common, data, out);
    if (estimate->parsed()) return run_estimate(common, est, out, err);
    if (validity->parsed()) return run_validity(common, model, prof, out);
    if (power->parsed()) return run_power(common, model, prof, out);
    if (budget->parsed()) return run_budget(common, bud, out, err);
    if (split->parsed()) return run_split(common, spl, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return 3;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return 2;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

}  // namespace gsurvey
