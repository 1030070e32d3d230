#include "sibdep/harness.hpp"

#include <charconv>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>
#include <vector>

#include "CLI11.hpp"

#include "sibdep/ensemble_io.hpp"
#include "sibdep/moments.hpp"
#include "sibdep/simulator.hpp"
#include "sibdep/spectral.hpp"

#ifndef SIBDEP_VERSION
#define SIBDEP_VERSION "0.0.0"
#endif

namespace sibdep::harness {

namespace fs = std::filesystem;
using nlohmann::json;

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string config_hash(const json& document, const std::string& command,
                        const json& params) {
  const json canonical = {{"document", document}, {"command", command}, {"params", params}};
  char buf[17];
  auto [end, ec] = std::to_chars(buf, buf + 16, fnv1a(canonical.dump()), 16);
  std::string hex(buf, end);
  return std::string(16 - hex.size(), '0') + hex;
}

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, end);
}

namespace {

/// Raw flag values; whether a flag was given is asked of its CLI::Option.
struct Flags {
  std::string config;
  std::uint64_t seed = 1;
  std::size_t replicas = 0;
  std::string out = "results";
  std::string format = "json";
  int type = 1;
  std::size_t horizon = 0;
  std::vector<std::size_t> horizons;
  std::vector<double> thetas;
  double alpha = 2.0;
  double tol = 0.0;
  double epsilon = 0.0;
  double delta = 0.0;
  double h = 0.0;
  double a3_tol = 0.0;
  std::string method;
  bool macro = false;
  std::uint64_t cap = kPopulationCap;
  std::size_t keep_paths = 0;
};

/// Value precedence: command-line flag, then the config's experiment section,
/// then the built-in default.
class Resolver {
 public:
  Resolver(const CLI::App& app, const CLI::App& sub, const json& experiment)
      : app_(app), sub_(sub), experiment_(experiment) {}

  template <typename T>
  T get(const std::string& flag, const T& cli_value, const char* key,
        const T& fallback) {
    T value = fallback;
    if (given(flag)) {
      value = cli_value;
    } else if (experiment_.is_object() && experiment_.contains(key)) {
      try {
        value = experiment_.at(key).get<T>();
      } catch (const json::exception& e) {
        throw ParseError(std::string("experiment.") + key + ": " + e.what());
      }
    }
    params_[key] = value;
    return value;
  }

  const json& params() const { return params_; }

 private:
  bool given(const std::string& flag) const {
    for (const CLI::App* a : {&sub_, &app_}) {
      try {
        if (a->get_option(flag)->count() > 0) return true;
      } catch (const CLI::OptionNotFound&) {
      }
    }
    return false;
  }

  const CLI::App& app_;
  const CLI::App& sub_;
  const json& experiment_;
  json params_ = json::object();
};

struct Output {
  json payload;
  /// Header plus rows, written when --format csv.
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::string summary;
  /// Extra JSON documents written next to the result, by file name.
  std::map<std::string, json> extra;
};

std::string cell(double v) { return format_double(v); }
std::string cell(std::size_t v) { return std::to_string(v); }
std::string cell(int v) { return std::to_string(v); }

json estimate_json(const Estimate& e) {
  return {{"value", e.value}, {"std_error", e.std_error}};
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("io", "cannot write " + path.string());
  f << text;
}

std::string csv_text(const Output& o, const std::string& hash, std::uint64_t seed) {
  std::ostringstream s;
  s << "# config_hash=" << hash << " seed=" << seed << "\n";
  for (std::size_t c = 0; c < o.header.size(); ++c) s << (c ? "," : "") << o.header[c];
  s << "\n";
  for (const auto& row : o.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) s << (c ? "," : "") << row[c];
    s << "\n";
  }
  return s.str();
}

// ---------------------------------------------------------------- commands

Output cmd_moments(const EnvironmentEnsemble& ens, Resolver&) {
  Output o;
  o.header = {"member", "quantity", "i", "j", "value"};
  json members = json::array();
  for (std::size_t m = 0; m < ens.size(); ++m) {
    const MomentSet ms = compute_moments(ens.member(m));
    json entry = to_json(ms);
    entry["weight"] = ens.weights()[m];
    members.push_back(entry);
    auto add_matrix = [&](const std::string& name, const Eigen::MatrixXd& a) {
      for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
          o.rows.push_back({cell(m), name, cell(static_cast<int>(i + 1)),
                            cell(static_cast<int>(j + 1)), cell(a(i, j))});
    };
    add_matrix("M", ms.mean);
    add_matrix("M_macro", ms.macro.mean);
    for (std::size_t k = 0; k < ms.hessians.size(); ++k) {
      add_matrix("B" + std::to_string(k + 1), ms.hessians[k]);
      add_matrix("B_macro" + std::to_string(k + 1), ms.macro.hessians[k]);
    }
    o.rows.push_back({cell(m), "rho", "", "", cell(ms.perron.root)});
    for (Eigen::Index j = 0; j < ms.perron.vector.size(); ++j) {
      o.rows.push_back({cell(m), "u", cell(static_cast<int>(j + 1)), "",
                        cell(ms.perron.vector(j))});
      o.rows.push_back({cell(m), "U", cell(static_cast<int>(j + 1)), "",
                        cell(ms.macro_vector(j))});
    }
    o.rows.push_back({cell(m), "curvature_B", "", "", cell(ms.curvature.total)});
    o.rows.push_back({cell(m), "curvature_T", "", "", cell(ms.curvature.ratio)});
    o.rows.push_back({cell(m), "delta", "", "", cell(ms.delta)});
  }
  const Eigen::MatrixXd mean = ensemble_mean_matrix(ens);
  const auto pr = perron(mean);
  o.payload = {{"members", members},
               {"ensemble_mean", {{"M", matrix_to_json(mean)}, {"rho", pr.root}}}};
  o.rows.push_back({"mean", "rho", "", "", cell(pr.root)});
  std::ostringstream s;
  s << "moments: " << ens.size() << " member(s), rho(E[M]) = " << format_double(pr.root);
  if (ens.size() == 1) s << ", rho(M) = " << format_double(perron(mean_matrix(ens.member(0))).root);
  o.summary = s.str();
  return o;
}

Output cmd_lyapunov(const EnvironmentEnsemble& ens, Resolver& r, const Flags& f) {
  const auto n = r.get<std::size_t>("--horizon", f.horizon, "horizon", 1000);
  const auto replicas = r.get<std::size_t>("--replicas", f.replicas, "replicas", 200);
  const auto seed = r.get<std::uint64_t>("--seed", f.seed, "seed", 1);
  const auto thetas = r.get<std::vector<double>>("--theta", f.thetas, "theta", {1.0});
  const auto macro = r.get<bool>("--macro", f.macro, "use_macro", false);
  const auto h = r.get<double>("--fd-step", f.h, "h", 0.1);

  const Estimate lyap = estimate_lyapunov(ens, n, replicas, seed, macro);
  const auto log_norms = sample_log_norms(ens, n, replicas, seed, macro);
  Output o;
  o.header = {"quantity", "theta", "value", "std_error"};
  o.rows.push_back({"Lambda", "", cell(lyap.value), cell(lyap.std_error)});
  json lambdas = json::array();
  for (double theta : thetas) {
    if (!(theta > 0.0)) throw ArgumentError("theta must be positive");
    const LambdaEstimate le = lambda_from_log_norms(log_norms, theta, n);
    lambdas.push_back({{"theta", theta},
                       {"lambda", le.lambda},
                       {"log_lambda", le.log_lambda},
                       {"log_lambda_stderr", le.log_lambda_stderr}});
    o.rows.push_back({"lambda", cell(theta), cell(le.lambda), ""});
    o.rows.push_back({"log_lambda", cell(theta), cell(le.log_lambda), cell(le.log_lambda_stderr)});
  }
  const Estimate d = lambda_prime_at_one(ens, h, n, replicas, seed);
  o.rows.push_back({"Lambda_prime_1", "", cell(d.value), cell(d.std_error)});
  o.payload = {{"lyapunov", estimate_json(lyap)},
               {"lambda", lambdas},
               {"lambda_prime_at_one", estimate_json(d)},
               {"horizon", n},
               {"replicas", replicas},
               {"use_macro", macro},
               {"seed", seed}};
  o.summary = "lyapunov: Lambda = " + format_double(lyap.value) + " +- " +
              format_double(lyap.std_error) + " (n = " + std::to_string(n) + ")";
  return o;
}

Output cmd_conditions(const EnvironmentEnsemble& ens, Resolver& r, const Flags& f) {
  ConditionParams p;
  const auto thetas = r.get<std::vector<double>>("--theta", f.thetas, "theta", {p.theta});
  if (thetas.size() != 1) throw ArgumentError("conditions take a single theta");
  p.theta = thetas.front();
  p.epsilon = r.get<double>("--epsilon", f.epsilon, "epsilon", p.epsilon);
  p.delta = r.get<double>("--delta", f.delta, "delta", p.delta);
  p.tol = r.get<double>("--tol", f.tol, "tol", p.tol);
  p.a3_tol = r.get<double>("--a3-tol", f.a3_tol, "a3_tol", p.a3_tol);
  p.alpha = r.get<double>("--alpha", f.alpha, "alpha", p.alpha);
  p.h = r.get<double>("--fd-step", f.h, "h", p.h);
  p.horizon = r.get<std::size_t>("--horizon", f.horizon, "horizon", p.horizon);
  p.replicas = r.get<std::size_t>("--replicas", f.replicas, "replicas", p.replicas);
  p.seed = r.get<std::uint64_t>("--seed", f.seed, "seed", p.seed);

  const ConditionReport report = check_conditions(ens, p);
  Output o;
  o.payload = to_json(report);
  o.header = {"condition", "verdict", "witness", "value"};
  std::size_t holding = 0;
  for (const auto& e : report.entries) {
    if (e.verdict == Verdict::holds) ++holding;
    if (e.witness.empty()) o.rows.push_back({e.name, to_string(e.verdict), "", ""});
    for (const auto& [key, value] : e.witness)
      o.rows.push_back({e.name, to_string(e.verdict), key, cell(value)});
  }
  o.summary = "conditions: " + std::to_string(holding) + " of " +
              std::to_string(report.entries.size()) + " hold";
  return o;
}

Output cmd_calibrate(const EnvironmentEnsemble& ens, Resolver& r, const Flags& f) {
  if (ens.size() != 2) {
    throw ArgumentError("calibrate needs a two-member config: supercritical first, subcritical second");
  }
  const auto tol = r.get<double>("--tol", f.tol, "tol", 1e-3);
  const auto n = r.get<std::size_t>("--horizon", f.horizon, "horizon", 1000);
  const auto replicas = r.get<std::size_t>("--replicas", f.replicas, "replicas", 200);
  const auto seed = r.get<std::uint64_t>("--seed", f.seed, "seed", 1);
  const Calibration cal = calibrate_critical(ens.member(0), ens.member(1), tol, n, replicas, seed);

  Output o;
  o.header = {"iteration", "lower", "upper", "weight", "lyapunov", "std_error"};
  json trace = json::array();
  for (const auto& step : cal.trace) {
    trace.push_back({{"iteration", step.iteration},
                     {"lower", step.lower},
                     {"upper", step.upper},
                     {"weight", step.weight},
                     {"lyapunov", estimate_json(step.lyapunov)}});
    o.rows.push_back({cell(step.iteration), cell(step.lower), cell(step.upper),
                      cell(step.weight), cell(step.lyapunov.value),
                      cell(step.lyapunov.std_error)});
  }
  const auto calibrated = EnvironmentEnsemble::mixture(ens.member(0), ens.member(1), cal.weight);
  json doc = to_json(calibrated);
  doc["experiment"] = {{"initial_type", 1}, {"alpha", 2.0}};
  o.payload = {{"weight", cal.weight},
               {"lyapunov", estimate_json(cal.lyapunov)},
               {"trace", trace},
               {"horizon", n},
               {"replicas", replicas},
               {"seed", seed},
               {"ensemble", doc}};
  o.extra["calibrated_ensemble.json"] = doc;
  o.summary = "calibrate: w* = " + format_double(cal.weight) + ", Lambda = " +
              format_double(cal.lyapunov.value) + " after " +
              std::to_string(cal.trace.size()) + " steps";
  return o;
}

Output cmd_survival(const EnvironmentEnsemble& ens, Resolver& r, const Flags& f) {
  const auto i = r.get<int>("--type", f.type, "initial_type", 1);
  const auto n = r.get<std::size_t>("--horizon", f.horizon, "horizon", 10);
  const auto replicas = r.get<std::size_t>("--replicas", f.replicas, "replicas", 1000);
  const auto seed = r.get<std::uint64_t>("--seed", f.seed, "seed", 1);
  const auto method = r.get<std::string>("--method", f.method, "method", "quenched");
  SurvivalEstimate e;
  if (method == "quenched") {
    e = estimate_survival(ens, i, n, replicas, seed);
  } else if (method == "particle") {
    const auto cap = r.get<std::uint64_t>("--cap", f.cap, "cap", kPopulationCap);
    e = estimate_survival_particle(ens, i, n, replicas, seed, cap);
  } else {
    throw ArgumentError("survival method must be quenched or particle");
  }
  Output o;
  o.header = {"horizon", "initial_type", "estimate", "std_error", "replicas", "method"};
  o.rows.push_back({cell(e.horizon), cell(e.initial_type), cell(e.estimate),
                    cell(e.std_error), cell(e.replicas), to_string(e.method)});
  o.payload = {{"horizon", e.horizon},      {"initial_type", e.initial_type},
               {"estimate", e.estimate},    {"std_error", e.std_error},
               {"replicas", e.replicas},    {"method", to_string(e.method)},
               {"seed", seed}};
  o.summary = "survival: P(zeta(" + std::to_string(n) + ") > 0) = " +
              format_double(e.estimate) + " +- " + format_double(e.std_error);
  return o;
}

Output cmd_scan(const EnvironmentEnsemble& ens, Resolver& r, const Flags& f) {
  const auto i = r.get<int>("--type", f.type, "initial_type", 1);
  const auto horizons = r.get<std::vector<std::size_t>>("--horizons", f.horizons, "horizons",
                                                        {64, 128, 256, 512});
  const auto replicas = r.get<std::size_t>("--replicas", f.replicas, "replicas", 1000);
  const auto alpha = r.get<double>("--alpha", f.alpha, "alpha", 2.0);
  const auto seed = r.get<std::uint64_t>("--seed", f.seed, "seed", 1);
  const auto rows = survival_scaling_scan(ens, i, horizons, replicas, alpha, seed);
  Output o;
  o.header = {"n", "p_n", "std_error", "scaled"};
  json table = json::array();
  double lo = rows.front().scaled, hi = lo;
  for (const auto& row : rows) {
    o.rows.push_back({cell(row.horizon), cell(row.survival), cell(row.std_error), cell(row.scaled)});
    table.push_back({{"n", row.horizon},
                     {"p_n", row.survival},
                     {"std_error", row.std_error},
                     {"scaled", row.scaled}});
    lo = std::min(lo, row.scaled);
    hi = std::max(hi, row.scaled);
  }
  o.payload = {{"rows", table}, {"alpha", alpha}, {"initial_type", i},
               {"replicas", replicas}, {"seed", seed}, {"scaled_ratio", hi / lo}};
  o.summary = "scan: " + std::to_string(rows.size()) + " horizons, max/min scaled = " +
              format_double(hi / lo);
  return o;
}

Output cmd_paths(const EnvironmentEnsemble& ens, Resolver& r, const Flags& f) {
  const auto i = r.get<int>("--type", f.type, "initial_type", 1);
  const auto n = r.get<std::size_t>("--horizon", f.horizon, "horizon", 512);
  const auto replicas = r.get<std::size_t>("--replicas", f.replicas, "replicas", 1000);
  const auto alpha = r.get<double>("--alpha", f.alpha, "alpha", 2.0);
  const auto seed = r.get<std::uint64_t>("--seed", f.seed, "seed", 1);
  const auto keep = r.get<std::size_t>("--keep-paths", f.keep_paths, "keep_paths", 20);
  PathOptions opts;
  opts.cap = r.get<std::uint64_t>("--cap", f.cap, "cap", kPopulationCap);
  const PathSummary s = log_population_path(ens, i, n, replicas, alpha, seed, opts);

  Output o;
  o.header = {"series", "index", "time", "value"};
  std::size_t mean_field = 0;
  for (const auto& rec : s.records) mean_field += rec.used_mean_field ? 1 : 0;
  json kept = json::array();
  for (std::size_t k = 0; k < std::min(keep, s.records.size()); ++k) {
    kept.push_back(s.records[k].values);
    for (std::size_t m = 0; m <= n; ++m)
      o.rows.push_back({"path" + std::to_string(k), cell(m), cell(s.records[k].times[m]),
                        cell(s.records[k].values[m])});
  }
  for (std::size_t m = 0; m <= n; ++m)
    o.rows.push_back({"mean", cell(m),
                      cell(static_cast<double>(m) / static_cast<double>(n)), cell(s.mean_path[m])});
  for (std::size_t k = 0; k < s.endpoints.size(); ++k)
    o.rows.push_back({"endpoint", cell(k), "1", cell(s.endpoints[k])});
  o.payload = {{"horizon", n},
               {"alpha", alpha},
               {"replicas", replicas},
               {"survivors", s.records.size()},
               {"mean_field_records", mean_field},
               {"seed", seed},
               {"endpoints", s.endpoints},
               {"mean_path", s.mean_path},
               {"paths", kept}};
  o.summary = "paths: " + std::to_string(s.records.size()) + " of " +
              std::to_string(replicas) + " replicas survived to n = " + std::to_string(n);
  return o;
}

Output cmd_condsize(const EnvironmentEnsemble& ens, Resolver& r, const Flags& f) {
  const auto i = r.get<int>("--type", f.type, "initial_type", 1);
  const auto n = r.get<std::size_t>("--horizon", f.horizon, "horizon", 40);
  const auto replicas = r.get<std::size_t>("--replicas", f.replicas, "replicas", 2000);
  const auto seed = r.get<std::uint64_t>("--seed", f.seed, "seed", 1);
  const auto method_name = r.get<std::string>("--method", f.method, "method", "conditioned");
  const auto cap = r.get<std::uint64_t>("--cap", f.cap, "cap", kPopulationCap);
  ConditioningMethod method;
  if (method_name == "conditioned") method = ConditioningMethod::conditioned;
  else if (method_name == "rejection") method = ConditioningMethod::rejection;
  else throw ArgumentError("condsize method must be conditioned or rejection");
  const ConditionalLaw law = conditional_size_distribution(ens, i, n, replicas, seed, method, cap);

  Output o;
  o.header = {"quantity", "x", "value"};
  for (std::size_t k = 1; k < law.mass.size(); ++k)
    if (law.mass[k] > 0.0) o.rows.push_back({"mass", cell(k), cell(law.mass[k])});
  for (std::size_t g = 0; g < law.pgf_grid.size(); ++g)
    o.rows.push_back({"pgf", cell(law.pgf_grid[g]), cell(law.pgf_values[g])});
  o.payload = {{"horizon", n},
               {"initial_type", i},
               {"method", to_string(law.method)},
               {"replicas", replicas},
               {"survivors", law.survivors},
               {"effective_sample_size", law.effective_sample_size},
               {"seed", seed},
               {"mass", law.mass},
               {"pgf", {{"s", law.pgf_grid}, {"value", law.pgf_values}}}};
  o.summary = "condsize: ESS " + format_double(law.effective_sample_size) + ", " +
              std::to_string(law.survivors) + " survivors at n = " + std::to_string(n);
  return o;
}

// ---------------------------------------------------------------- plumbing

json read_json_file(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw ParseError("cannot open " + path.string());
  try {
    return json::parse(f);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

json config_document(const std::string& path) {
  const json doc = read_json_file(path);
  parse_ensemble(doc);  // schema check
  return doc;
}

void persist(const Output& o, const std::string& command, const Flags& f,
             const json& document, const json& params, double seconds,
             std::uint64_t seed, std::ostream& out) {
  const std::string hash = config_hash(document, command, params);
  const fs::path dir(f.out);
  fs::create_directories(dir);
  std::vector<std::string> files;
  if (f.format == "csv") {
    const std::string name = command + ".csv";
    write_text(dir / name, csv_text(o, hash, seed));
    files.push_back(name);
  } else {
    json payload = o.payload;
    payload["command"] = command;
    payload["config_hash"] = hash;
    payload["seed"] = seed;
    payload["params"] = params;
    const std::string name = command + ".json";
    write_text(dir / name, payload.dump(2) + "\n");
    files.push_back(name);
  }
  for (const auto& [name, doc] : o.extra) {
    json tagged = doc;
    tagged["experiment"]["source_config_hash"] = hash;
    write_text(dir / name, tagged.dump(2) + "\n");
    files.push_back(name);
  }

  json manifest = json::object();
  const fs::path manifest_path = dir / "manifest.json";
  if (fs::exists(manifest_path)) {
    try {
      manifest = read_json_file(manifest_path);
    } catch (const ParseError&) {
      manifest = json::object();
    }
  }
  manifest["version"] = SIBDEP_VERSION;
  manifest["config_hash"] = hash;
  manifest["seed"] = seed;
  manifest["commands"][command] = {{"config", f.config},
                                   {"config_hash", hash},
                                   {"seed", seed},
                                   {"params", params},
                                   {"format", f.format},
                                   {"files", files},
                                   {"wall_clock_seconds", seconds}};
  write_text(manifest_path, manifest.dump(2) + "\n");
  out << o.summary << " [" << hash << "]\n";
}

/// Recomputes the hash of every manifest entry from its config file and
/// compares it with the manifest and the hash embedded in each result file.
int check_results(const Flags& f, std::ostream& out) {
  const fs::path dir(f.out);
  const json manifest = read_json_file(dir / "manifest.json");
  json report = json::array();
  bool stale = false;
  for (const auto& [command, entry] : manifest.at("commands").items()) {
    std::string status = "ok";
    std::string current;
    try {
      current = config_hash(read_json_file(entry.at("config").get<std::string>()), command,
                            entry.at("params"));
    } catch (const ParseError&) {
      status = "config_missing";
    }
    const std::string recorded = entry.at("config_hash").get<std::string>();
    if (status == "ok" && current != recorded) status = "stale";
    for (const auto& file : entry.at("files")) {
      if (status != "ok") break;
      const fs::path path = dir / file.get<std::string>();
      std::ifstream in(path);
      if (!in) {
        status = "file_missing";
        break;
      }
      std::stringstream text;
      text << in.rdbuf();
      if (text.str().find(recorded) == std::string::npos) status = "hash_mismatch";
    }
    if (status != "ok") stale = true;
    report.push_back({{"command", command}, {"status", status}, {"config_hash", recorded}});
  }
  out << json{{"stale", stale}, {"results", report}}.dump(2) << "\n";
  return stale ? kDomainError : kSuccess;
}

void error_json(std::ostream& err, const std::string& kind, const std::string& message) {
  err << json{{"error", {{"kind", kind}, {"message", message}}}}.dump() << "\n";
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Flags f;
  CLI::App app{"Branching processes in random environment with sibling dependence"};
  app.set_version_flag("--version", SIBDEP_VERSION);
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--config", f.config, "ensemble config (JSON)");
  app.add_option("--seed", f.seed, "base seed; replica r uses stream (seed, r)");
  app.add_option("--replicas", f.replicas, "Monte Carlo replicas");
  app.add_option("--out", f.out, "output directory")->capture_default_str();
  app.add_option("--format", f.format, "result format")
      ->check(CLI::IsMember({"csv", "json"}))
      ->capture_default_str();

  auto add = [&](const std::string& name, const std::string& help) {
    return app.add_subcommand(name, help);
  };
  auto* validate_cmd = add("validate", "validate an ensemble config");
  auto* moments_cmd = add("moments", "mean matrices, Hessians, Perron data");
  auto* lyapunov_cmd = add("lyapunov", "Lyapunov exponent and moment function");
  auto* conditions_cmd = add("conditions", "check the standing hypotheses");
  auto* calibrate_cmd = add("calibrate", "calibrate a critical two-member mixture");
  auto* survival_cmd = add("survival", "survival probability");
  auto* scan_cmd = add("scan", "survival scaling scan over horizons");
  auto* paths_cmd = add("paths", "normalized log-population paths");
  auto* condsize_cmd = add("condsize", "population size given survival");
  auto* check_cmd = add("check", "flag result files whose config changed");
  (void)validate_cmd;
  (void)moments_cmd;
  (void)check_cmd;

  for (auto* c : {lyapunov_cmd, conditions_cmd, calibrate_cmd, survival_cmd, paths_cmd,
                  condsize_cmd})
    c->add_option("--horizon", f.horizon, "horizon n");
  for (auto* c : {survival_cmd, scan_cmd, paths_cmd, condsize_cmd})
    c->add_option("--type", f.type, "initial sibling-group size");
  for (auto* c : {lyapunov_cmd, conditions_cmd})
    c->add_option("--theta", f.thetas, "theta value(s)");
  for (auto* c : {conditions_cmd, scan_cmd, paths_cmd})
    c->add_option("--alpha", f.alpha, "stability index in (1, 2]");
  for (auto* c : {conditions_cmd, calibrate_cmd}) c->add_option("--tol", f.tol, "tolerance");
  for (auto* c : {lyapunov_cmd, conditions_cmd})
    c->add_option("--fd-step", f.h, "finite-difference step for Lambda'(1)");
  for (auto* c : {survival_cmd, paths_cmd, condsize_cmd})
    c->add_option("--cap", f.cap, "particle cap");
  survival_cmd->add_option("--method", f.method, "quenched | particle");
  condsize_cmd->add_option("--method", f.method, "conditioned | rejection");
  lyapunov_cmd->add_flag("--macro", f.macro, "use M_macro factors");
  conditions_cmd->add_option("--epsilon", f.epsilon, "H4 epsilon");
  conditions_cmd->add_option("--delta", f.delta, "H5 delta");
  conditions_cmd->add_option("--a3-tol", f.a3_tol, "|E log rho| accepted as zero");
  scan_cmd->add_option("--horizons", f.horizons, "horizons");
  paths_cmd->add_option("--keep-paths", f.keep_paths, "paths written out in full");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kSuccess : kUsageError;
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string command = sub->get_name();
  try {
    if (command == "check") return check_results(f, out);
    if (f.config.empty()) {
      error_json(err, "usage", "--config is required");
      return kUsageError;
    }
    const EnsembleSpec spec = load_ensemble_spec(f.config);
    if (command == "validate") {
      const EnsembleValidation v = validate(spec);
      out << to_json(v).dump(2) << "\n";
      return v.accepted ? kSuccess : kDomainError;
    }
    const json document = config_document(f.config);
    const EnvironmentEnsemble ens = build_ensemble(spec);
    Resolver resolver(app, *sub, spec.experiment);
    const auto start = std::chrono::steady_clock::now();

    static const std::map<std::string,
                          std::function<Output(const EnvironmentEnsemble&, Resolver&,
                                               const Flags&)>>
        dispatch = {
            {"moments", [](const auto& e, auto& r, const auto&) { return cmd_moments(e, r); }},
            {"lyapunov", cmd_lyapunov},
            {"conditions", cmd_conditions},
            {"calibrate", cmd_calibrate},
            {"survival", cmd_survival},
            {"scan", cmd_scan},
            {"paths", cmd_paths},
            {"condsize", cmd_condsize},
        };
    const Output o = dispatch.at(command)(ens, resolver, f);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const json& params = resolver.params();
    const std::uint64_t seed =
        params.contains("seed") ? params["seed"].get<std::uint64_t>() : f.seed;
    persist(o, command, f, document, params, seconds, seed, out);
    return kSuccess;
  } catch (const ParseError& e) {
    error_json(err, e.kind(), e.what());
    return kUsageError;
  } catch (const Error& e) {
    error_json(err, e.kind(), e.what());
    return kDomainError;
  } catch (const std::exception& e) {
    error_json(err, "internal", e.what());
    return kDomainError;
  }
}

}  // namespace sibdep::harness
