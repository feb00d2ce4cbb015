#include "gsurvey/config.hpp"

#include <fstream>
#include <initializer_list>
#include <optional>
#include <sstream>

#include <json.hpp>

namespace gsurvey {

namespace {

using nlohmann::json;

// Reads one JSON object, remembering its path for error messages.
class Section {
 public:
  Section(const json& node, std::string path, std::initializer_list<const char*> allowed)
      : node_(node), path_(std::move(path)) {
    if (!node.is_object()) fail(path_, "must be an object");
    for (const auto& [key, value] : node.items()) {
      bool known = false;
      for (const char* a : allowed) known = known || key == a;
      if (!known) fail(join(key), "unknown key");
    }
  }

  bool has(const char* key) const { return node_.contains(key); }

  std::optional<Section> child(const char* key, std::initializer_list<const char*> allowed) const {
    if (!has(key)) return std::nullopt;
    return Section(node_.at(key), join(key), allowed);
  }

  double number(const char* key, double fallback) const {
    if (!has(key)) return fallback;
    const json& v = node_.at(key);
    if (!v.is_number()) fail(join(key), "must be a number");
    return v.get<double>();
  }

  std::uint64_t count(const char* key, std::uint64_t fallback, std::uint64_t minimum = 1) const {
    if (!has(key)) return fallback;
    const json& v = node_.at(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
      fail(join(key), "must be a nonnegative integer");
    const auto n = v.get<std::uint64_t>();
    if (n < minimum) fail(join(key), "must be >= " + std::to_string(minimum));
    return n;
  }

  std::string text(const char* key, const std::string& fallback) const {
    if (!has(key)) return fallback;
    const json& v = node_.at(key);
    if (!v.is_string()) fail(join(key), "must be a string");
    return v.get<std::string>();
  }

  template <class T, class F>
  std::vector<T> list(const char* key, const std::vector<T>& fallback, F&& convert) const {
    if (!has(key)) return fallback;
    const json& v = node_.at(key);
    if (!v.is_array() || v.empty()) fail(join(key), "must be a non-empty array");
    std::vector<T> out;
    for (std::size_t k = 0; k < v.size(); ++k)
      out.push_back(convert(v[k], join(key) + "[" + std::to_string(k) + "]"));
    return out;
  }

  std::string join(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  [[noreturn]] static void fail(const std::string& path, const std::string& what) {
    throw ConfigError((path.empty() ? std::string("config") : path) + ": " + what);
  }

 private:
  const json& node_;
  std::string path_;
};

void check_unit_interval(double v, const std::string& path, bool open) {
  const bool ok = open ? (v > 0.0 && v < 1.0) : (v >= 0.0 && v <= 1.0);
  if (!ok) Section::fail(path, open ? "must lie in (0, 1)" : "must lie in [0, 1]");
}

void check_positive(double v, const std::string& path) {
  if (!(v > 0.0)) Section::fail(path, "must be positive");
}

GenerativeParams parse_params(const Section& s, const GenerativeParams& d) {
  const bool shapes = s.has("alpha0") || s.has("beta0");
  const bool prior = s.has("prior_mean") || s.has("prior_precision");
  if (shapes && prior)
    Section::fail(s.join("prior_mean"), "give either alpha0/beta0 or prior_mean/prior_precision");
  double alpha0 = s.number("alpha0", d.alpha0());
  double beta0 = s.number("beta0", d.beta0());
  if (prior) {
    const double mean = s.number("prior_mean", d.prior_mean());
    const double precision = s.number("prior_precision", d.prior_precision());
    check_unit_interval(mean, s.join("prior_mean"), true);
    check_positive(precision, s.join("prior_precision"));
    alpha0 = mean * precision;
    beta0 = (1.0 - mean) * precision;
  }
  check_positive(alpha0, s.join("alpha0"));
  check_positive(beta0, s.join("beta0"));
  const double gamma = s.number("gamma", d.gamma());
  check_positive(gamma, s.join("gamma"));
  const double rho = s.number("rho", d.rho());
  check_unit_interval(rho, s.join("rho"), false);
  const double beta1 = s.number("beta1", d.beta1());
  return GenerativeParams(alpha0, beta0, gamma, rho, beta1);
}

TestMethod json_method(const json& v, const std::string& path) {
  if (!v.is_string()) Section::fail(path, "must be a test name");
  try {
    return parse_test_method(v.get<std::string>());
  } catch (const UsageError& e) {
    Section::fail(path, e.what());
  }
}

double json_number(const json& v, const std::string& path) {
  if (!v.is_number()) Section::fail(path, "must be a number");
  return v.get<double>();
}

RunConfig parse(const json& root) {
  RunConfig cfg;
  const Section top(root, "", {"params", "design", "experiment", "sweep", "seed", "output"});
  if (auto s = top.child("params", {"alpha0", "beta0", "prior_mean", "prior_precision", "gamma",
                                    "rho", "beta1"}))
    cfg.params = parse_params(*s, cfg.params);

  if (auto s = top.child("design", {"n_personas", "n_perturbations", "n_replicates"})) {
    const auto n = s->count("n_personas", cfg.design.n_personas());
    const auto m = s->count("n_perturbations", cfg.design.n_perturbations());
    const auto r = s->count("n_replicates", cfg.design.n_replicates());
    try {
      cfg.design = SurveyDesign(n, m, r);
    } catch (const ParameterError& e) {
      Section::fail("design", e.what());
    }
  }

  if (auto s = top.child("experiment", {"n_sims", "alpha", "n_permutations", "tests",
                                        "pvalue_correction", "threads", "ecdf_points",
                                        "coupling"})) {
    auto& e = cfg.experiment;
    e.n_sims = s->count("n_sims", e.n_sims);
    e.alpha = s->number("alpha", e.alpha);
    check_unit_interval(e.alpha, s->join("alpha"), true);
    e.n_permutations = s->count("n_permutations", e.n_permutations);
    e.tests = s->list<TestMethod>("tests", e.tests, json_method);
    const std::string rule = s->text("pvalue_correction", std::string(to_string(e.rule)));
    try {
      e.rule = parse_pvalue_rule(rule);
    } catch (const UsageError& err) {
      Section::fail(s->join("pvalue_correction"), err.what());
    }
    e.threads = static_cast<unsigned>(s->count("threads", e.threads, 0));
    e.ecdf_points = s->count("ecdf_points", e.ecdf_points, 2);
    const std::string coupling = s->text("coupling", std::string(to_string(e.coupling)));
    try {
      e.coupling = parse_coupling(coupling);
    } catch (const UsageError& err) {
      Section::fail(s->join("coupling"), err.what());
    }
  }

  if (auto s = top.child("sweep", {"strategies", "budgets", "rho", "gamma", "prior_mean",
                                   "prior_precision", "beta1", "n_sims", "n_permutations"})) {
    auto& w = cfg.sweep;
    w.strategies = s->list<AllocationStrategy>(
        "strategies", w.strategies, [](const json& v, const std::string& path) {
          if (!v.is_string()) Section::fail(path, "must be a string like \"1:10:1\"");
          try {
            return AllocationStrategy::parse(v.get<std::string>());
          } catch (const UsageError& e) {
            Section::fail(path, e.what());
          }
        });
    w.budgets = s->list<std::size_t>("budgets", w.budgets, [](const json& v, const std::string& path) {
      if (!v.is_number_integer() || v.get<std::int64_t>() < 1)
        Section::fail(path, "must be a positive integer");
      return v.get<std::size_t>();
    });
    w.rho_grid = s->list<double>("rho", w.rho_grid, [](const json& v, const std::string& path) {
      const double x = json_number(v, path);
      check_unit_interval(x, path, false);
      return x;
    });
    w.gamma_grid = s->list<double>("gamma", w.gamma_grid, [](const json& v, const std::string& path) {
      const double x = json_number(v, path);
      check_positive(x, path);
      return x;
    });
    w.prior_mean = s->number("prior_mean", w.prior_mean);
    check_unit_interval(w.prior_mean, s->join("prior_mean"), true);
    w.prior_precision = s->number("prior_precision", w.prior_precision);
    check_positive(w.prior_precision, s->join("prior_precision"));
    w.beta1 = s->number("beta1", w.beta1);
    w.n_sims = s->count("n_sims", w.n_sims);
    w.n_permutations = s->count("n_permutations", w.n_permutations);
  }

  if (top.has("seed")) {
    const json& v = root.at("seed");
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
      Section::fail("seed", "must be a nonnegative integer");
    cfg.seed = v.get<std::uint64_t>();
  }

  if (auto s = top.child("output", {"directory", "prefix"})) {
    cfg.output.directory = s->text("directory", cfg.output.directory);
    cfg.output.prefix = s->text("prefix", cfg.output.prefix);
  }

  // Experiment-wide settings drive the sweep too, except where overridden.
  cfg.sweep.alpha = cfg.experiment.alpha;
  cfg.sweep.rule = cfg.experiment.rule;
  cfg.sweep.coupling = cfg.experiment.coupling;
  cfg.sweep.threads = cfg.experiment.threads;
  cfg.sweep.master_seed = cfg.seed;
  return cfg;
}

}  // namespace

RunConfig parse_run_config(std::string_view json_text, const std::string& source) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(source + ": invalid JSON: " + e.what());
  }
  try {
    return parse(root);
  } catch (const ConfigError& e) {
    throw ConfigError(source + ": " + e.what());
  }
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_run_config(text.str(), path.string());
}

std::string run_config_to_json(const RunConfig& c) {
  json root;
  root["params"] = {{"alpha0", c.params.alpha0()}, {"beta0", c.params.beta0()},
                    {"gamma", c.params.gamma()},   {"rho", c.params.rho()},
                    {"beta1", c.params.beta1()}};
  root["design"] = {{"n_personas", c.design.n_personas()},
                    {"n_perturbations", c.design.n_perturbations()},
                    {"n_replicates", c.design.n_replicates()}};
  json tests = json::array();
  for (auto t : c.experiment.tests) tests.push_back(std::string(to_string(t)));
  root["experiment"] = {{"n_sims", c.experiment.n_sims},
                        {"alpha", c.experiment.alpha},
                        {"n_permutations", c.experiment.n_permutations},
                        {"tests", tests},
                        {"pvalue_correction", std::string(to_string(c.experiment.rule))},
                        {"threads", c.experiment.threads},
                        {"ecdf_points", c.experiment.ecdf_points},
                        {"coupling", std::string(to_string(c.experiment.coupling))}};
  json strategies = json::array();
  for (const auto& s : c.sweep.strategies) strategies.push_back(s.label());
  root["sweep"] = {{"strategies", strategies},
                   {"budgets", c.sweep.budgets},
                   {"rho", c.sweep.rho_grid},
                   {"gamma", c.sweep.gamma_grid},
                   {"prior_mean", c.sweep.prior_mean},
                   {"prior_precision", c.sweep.prior_precision},
                   {"beta1", c.sweep.beta1},
                   {"n_sims", c.sweep.n_sims},
                   {"n_permutations", c.sweep.n_permutations}};
  root["seed"] = c.seed;
  root["output"] = {{"directory", c.output.directory}, {"prefix", c.output.prefix}};
  return root.dump(2) + "\n";
}

}  // namespace gsurvey
