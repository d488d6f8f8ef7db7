#include "cpdlp/cli.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <unistd.h>

#include "CLI11.hpp"

#include "cpdlp/certificates.hpp"
#include "cpdlp/engine.hpp"
#include "cpdlp/error.hpp"
#include "cpdlp/parallel.hpp"
#include "cpdlp/percolation.hpp"
#include "cpdlp/rng.hpp"

#ifndef CPDLP_VERSION
#define CPDLP_VERSION "0.0.0"
#endif

namespace cpdlp::cli {

using nlohmann::json;

namespace {

std::string num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) throw ConfigError("unknown key '" + it.key() + "' in " + where);
}

double get_number(const json& j, const std::string& key, const std::string& where) {
  const auto& v = j.at(key);
  if (!v.is_number()) throw ConfigError(where + "." + key + " must be a number");
  return v.get<double>();
}

std::uint64_t get_count(const json& j, const std::string& key, const std::string& where) {
  const auto& v = j.at(key);
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0)
    throw ConfigError(where + "." + key + " must be a non-negative integer");
  return v.get<std::uint64_t>();
}

std::vector<double> get_numbers(const json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + " must be an array of numbers");
  std::vector<double> out;
  for (const auto& v : j) {
    if (!v.is_number()) throw ConfigError(where + " must be an array of numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

Sequence parse_sequence(const json& j, const std::string& where) {
  check_keys(j, {"form", "coeff", "exponent", "ratio", "table", "tail"}, where);
  if (!j.contains("form") || !j["form"].is_string()) throw ConfigError(where + ".form must be a string");
  SeqForm f = seq_form_from_string(j["form"].get<std::string>());
  switch (f) {
    case SeqForm::power_law:
      return Sequence::power_law(get_number(j, "coeff", where), get_number(j, "exponent", where));
    case SeqForm::geometric:
      return Sequence::geometric(get_number(j, "coeff", where), get_number(j, "ratio", where));
    case SeqForm::finite_support:
      return Sequence::finite_support(get_numbers(j.at("table"), where + ".table"));
    case SeqForm::tabulated: {
      std::optional<TermForm> tail;
      if (j.contains("tail")) {
        const auto& t = j["tail"];
        check_keys(t, {"coeff", "power", "ratio"}, where + ".tail");
        tail = TermForm{get_number(t, "coeff", where + ".tail"), get_number(t, "power", where + ".tail"),
                        t.contains("ratio") ? get_number(t, "ratio", where + ".tail") : 1.0};
      }
      return Sequence::tabulated(get_numbers(j.at("table"), where + ".table"), tail);
    }
  }
  throw ConfigError(where + ": unknown form");
}

std::string csv_header() {
  return "lambda,r,gamma,q,horizon,window_L,cutoff_R,replicas,theta_hat,stderr,ci_lo,ci_hi,ledger_bound\n";
}

std::string csv_row(const RunConfig& c, const SurvivalEstimate& e) {
  std::ostringstream os;
  os << num(e.params.lambda) << ',' << num(e.params.r) << ',' << num(e.params.gamma) << ',' << num(e.params.q) << ','
     << num(c.horizon) << ',' << c.window_L << ',' << c.cutoff_R << ',' << e.replicas << ',' << num(e.theta) << ','
     << num(e.stderr_) << ',' << num(e.ci.lo) << ',' << num(e.ci.hi) << ',' << num(e.ledger.total()) << '\n';
  return os.str();
}

json envelope(const RunConfig& c) {
  return {{"version", version()}, {"seed", c.seed}, {"config", to_json(c)}};
}

std::string comment_block(const RunConfig& c) {
  return "# cpdlp " + version() + "\n# seed " + std::to_string(c.seed) + "\n# config " + to_json(c).dump() + "\n";
}

std::string out_path(const RunConfig& c, const std::string& name) {
  std::filesystem::create_directories(c.out);
  return (std::filesystem::path(c.out) / name).string();
}

Window window_of(const RunConfig& c) { return Window::symmetric(c.window_L, c.cutoff_R); }

json certificate_json(const Certificate& cert) {
  json ladder = json::array();
  for (const auto& l : cert.ladder) {
    json line = {{"param", l.param}, {"value", l.value}, {"threshold", l.threshold}, {"passed", l.passed},
                 {"confidence", l.confidence}};
    if (!l.at.empty()) line["at"] = l.at;
    if (!l.note.empty()) line["note"] = l.note;
    ladder.push_back(line);
  }
  json output = json::object();
  for (const auto& [k, v] : cert.output) output[k] = v;
  for (const auto& [k, v] : cert.output_text) output[k] = v;
  json j = {{"kind", cert.kind},
            {"inputs", cert.inputs},
            {"ladder", ladder},
            {"verdict", cert.verdict},
            {"output", output},
            {"confidence", cert.confidence},
            {"confidence_statement", cert.confidence_statement}};
  if (!cert.failing.empty()) j["failing"] = cert.failing;
  if (cert.certified)
    j["corroboration"] = {{"mean", cert.corroboration.mean},
                          {"stderr", cert.corroboration.stderr_},
                          {"ci", {cert.corroboration.ci.lo, cert.corroboration.ci.hi}},
                          {"replicas", cert.corroboration.replicas},
                          {"passed", cert.corroboration.passed}};
  return j;
}

PercolationSpec percolation_spec(const PercolationConfig& p) {
  if (p.b.is_array()) return PercolationSpec::from_table(get_numbers(p.b, "percolation.b"), p.cutoff);
  Sequence s = parse_sequence(p.b, "percolation.b");
  auto tail = s.tail_form();
  if (!tail) throw ConfigError("percolation.b needs a closed-form tail");
  return PercolationSpec::from_function([s](std::int64_t k) { return s(k); }, *tail, s.head_length(), p.cutoff);
}

int run_simulate(const RunConfig& c, std::ostream& log) {
  KernelSpec kernel = parse_kernel(c.kernel);
  Window w = window_of(c);
  BackgroundOptions bo;
  bo.init = c.init;
  BackgroundPath path = evolve_background(kernel, c.params, w, c.horizon, replica_background_seed(c.seed, 0), bo);
  EventLog ev = EventLog::uniform(w, c.horizon, replica_event_seed(c.seed, 0), c.params.lambda, c.params.r);
  std::vector<double> samples = c.sample_times.empty() ? std::vector<double>{0.0, c.horizon} : c.sample_times;
  Trajectory tr = simulate_forward(c.initial, path, ev, samples);
  json sizes = json::array(), sets = json::array();
  for (const auto& s : tr.infected) {
    sizes.push_back(s.size());
    sets.push_back(s);
  }
  json j = envelope(c);
  j["trajectory"] = {{"sample_times", tr.sample_times},
                     {"sizes", sizes},
                     {"infected", sets},
                     {"extinction_time", tr.extinction_time ? json(*tr.extinction_time) : json(nullptr)},
                     {"occupation", tr.occupation},
                     {"max_size", tr.max_size},
                     {"suppressed_attempts", tr.suppressed_attempts}};
  write_atomic(out_path(c, "simulate.json"), j.dump(2) + "\n");
  log << "simulate: " << (tr.extinction_time ? "extinct" : "alive") << " at horizon\n";
  return 0;
}

int run_survival(const RunConfig& c, std::ostream& log) {
  KernelSpec kernel = parse_kernel(c.kernel);
  SurvivalOptions so;
  so.init = c.init;
  so.confidence = c.confidence;
  so.workers = c.workers;
  auto e = survival_estimate(c.initial, kernel, c.params, window_of(c), c.horizon, c.replicas, c.seed, so);
  write_atomic(out_path(c, "survival.csv"), comment_block(c) + csv_header() + csv_row(c, e));
  log << "survival: theta_hat = " << num(e.theta) << "\n";
  return 0;
}

int run_sweep(const RunConfig& c, std::ostream& log) {
  KernelSpec kernel = parse_kernel(c.kernel);
  auto grid = [](const std::vector<double>& g, double d) { return g.empty() ? std::vector<double>{d} : g; };
  SurvivalOptions so;
  so.init = c.init;
  so.confidence = c.confidence;
  so.workers = c.workers;
  std::string text = comment_block(c) + csv_header();
  std::size_t rows = 0;
  for (double lam : grid(c.sweep.lambda, c.params.lambda))
    for (double gam : grid(c.sweep.gamma, c.params.gamma))
      for (double q : grid(c.sweep.q, c.params.q)) {
        ModelParams p = c.params;
        p.lambda = lam;
        p.gamma = gam;
        p.q = q;
        p.validate();
        auto e = survival_estimate(c.initial, kernel, p, window_of(c), c.horizon, c.replicas, c.seed, so);
        text += csv_row(c, e);
        ++rows;
      }
  write_atomic(out_path(c, "sweep.csv"), text);
  log << "sweep: " << rows << " rows\n";
  return 0;
}

int run_percolation(const RunConfig& c, std::ostream& log) {
  PercolationSpec spec = percolation_spec(c.percolation);
  double mu = spec.mu();
  RunningStats st;
  double missed = 0.0;
  std::uint64_t caps = 0;
  std::vector<double> sizes(c.replicas);
  std::vector<double> miss(c.replicas);
  std::vector<std::uint8_t> capped(c.replicas);
  parallel_for(c.replicas, c.workers, [&](std::size_t i) {
    auto cl = sample_cluster(0, spec, derive(c.seed, Tag::percolation, {i}));
    sizes[i] = static_cast<double>(cl.size());
    miss[i] = cl.missed_edge_bound;
    capped[i] = cl.cap_hit;
  });
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    st.add(sizes[i]);
    missed += miss[i];
    caps += capped[i];
  }
  CutReport cr = cut_analysis(spec, c.percolation.lo, c.percolation.hi, std::max<std::uint64_t>(1, c.replicas / 10),
                              derive(c.seed, Tag::ladder, {0}));
  double z = z_two_sided(c.confidence);
  json j = envelope(c);
  j["mu"] = mu;
  j["cluster"] = {{"replicas", c.replicas},
                  {"mean", st.mean()},
                  {"stderr", st.stderr_mean()},
                  {"ci", {st.mean() - z * st.stderr_mean(), st.mean() + z * st.stderr_mean()}},
                  {"branching_bound", mu < 1.0 ? json(1.0 / (1.0 - mu)) : json(nullptr)},
                  {"missed_edge_bound", missed / static_cast<double>(std::max<std::uint64_t>(1, c.replicas))},
                  {"cap_hits", caps}};
  j["cuts"] = {{"lo", cr.lo},
               {"hi", cr.hi},
               {"replicas", cr.replicas},
               {"density", cr.density},
               {"density_sigma", cr.density_sigma},
               {"analytic", {cr.analytic.lo, cr.analytic.hi}},
               {"false_cut_bound", cr.false_cut_bound},
               {"lag1_correlation", cr.lag1_correlation},
               {"lag1_sigma", cr.lag1_sigma},
               {"iid_passed", cr.iid_passed},
               {"density_passed", cr.density_passed}};
  write_atomic(out_path(c, "percolation.json"), j.dump(2) + "\n");
  log << "percolation: mean cluster " << num(st.mean()) << "\n";
  return 0;
}

int run_certify_immunization(const RunConfig& c, std::ostream& log) {
  KernelSpec kernel = parse_kernel(c.kernel);
  Q0Options o;
  o.T_max = c.certificate.T_max;
  o.tail_replicas = c.certificate.tail_replicas;
  o.ey1_replicas = c.certificate.ey1_replicas;
  o.schedule.exponent = c.certificate.q_exponent;
  o.workers = c.workers;
  Certificate cert = find_q0(c.params.gamma, kernel, c.params.r, c.epsilon, c.confidence, c.seed, o);
  json j = envelope(c);
  j.update(certificate_json(cert));
  write_atomic(out_path(c, "certificate.json"), j.dump(2) + "\n");
  log << "certify-immunization: " << cert.verdict << "\n";
  return 0;
}

int run_certify_slow_speed(const RunConfig& c, std::ostream& log) {
  KernelSpec kernel = parse_kernel(c.kernel);
  GammaStarOptions o;
  o.r0_max = c.certificate.r0_max;
  o.eps.eps1_replicas = c.certificate.eps1_replicas;
  o.tail_replicas = c.certificate.tail_replicas;
  o.z_replicas = c.certificate.z_replicas;
  o.r = c.params.r;
  o.workers = c.workers;
  Certificate cert = find_gamma_star(c.params.lambda, c.params.q, kernel, c.epsilon, c.confidence, c.seed, o);
  json j = envelope(c);
  j.update(certificate_json(cert));
  write_atomic(out_path(c, "certificate.json"), j.dump(2) + "\n");
  log << "certify-slow-speed: " << cert.verdict << "\n";
  return 0;
}

int run_verify_bounds(const RunConfig& c, std::ostream& log) {
  KernelSpec kernel = parse_kernel(c.kernel);
  FormulaSuiteReport rep = formula_suite(kernel, 200, c.seed);
  json checks = json::array();
  for (const auto& ch : rep.checks)
    checks.push_back({{"name", ch.name}, {"points", ch.points}, {"failures", ch.failures}, {"worst", ch.worst}});
  json j = envelope(c);
  j["grid_points"] = rep.grid_points;
  j["tolerance"] = rep.tolerance;
  j["checks"] = checks;
  j["passed"] = rep.passed();
  write_atomic(out_path(c, "verify_bounds.json"), j.dump(2) + "\n");
  log << "verify-bounds: " << (rep.passed() ? "passed" : "FAILED") << "\n";
  return rep.passed() ? 0 : 1;
}

void diagnostic(const std::string& kind, const std::string& msg) {
  std::cerr << json{{"error", kind}, {"message", msg}}.dump() << "\n";
}

}  // namespace

std::string version() { return CPDLP_VERSION; }

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> s{"simulate",           "survival",      "percolation", "certify-immunization",
                                          "certify-slow-speed", "verify-bounds", "sweep"};
  return s;
}

KernelSpec parse_kernel(const json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() == "reference") return KernelSpec::reference();
    throw ConfigError("unknown kernel '" + j.get<std::string>() + "'");
  }
  check_keys(j, {"p", "v"}, "kernel");
  if (!j.contains("p") || !j.contains("v")) throw ConfigError("kernel needs p and v");
  return KernelSpec(parse_sequence(j["p"], "kernel.p"), parse_sequence(j["v"], "kernel.v"));
}

static void validate(const RunConfig& c);

RunConfig parse_config(const json& j, const std::string& subcommand) {
  RunConfig c;
  c.subcommand = subcommand;
  if (std::find(subcommands().begin(), subcommands().end(), subcommand) == subcommands().end())
    throw ConfigError("unknown subcommand '" + subcommand + "'");
  const json& root = j.is_null() ? json::object() : j;
  if (root.contains("subcommand") && root["subcommand"] != subcommand)
    throw ConfigError("config was written for subcommand " + root["subcommand"].dump());
  check_keys(root,
             {"subcommand", "kernel", "params", "window", "horizon", "sample_times", "replicas", "seed", "workers", "confidence",
              "epsilon", "out", "initial", "init", "percolation", "sweep", "certificate"},
             "config");
  if (root.contains("kernel")) c.kernel = root["kernel"];
  if (root.contains("params")) {
    const auto& p = root["params"];
    check_keys(p, {"lambda", "r", "gamma", "q"}, "params");
    if (p.contains("lambda")) c.params.lambda = get_number(p, "lambda", "params");
    if (p.contains("r")) c.params.r = get_number(p, "r", "params");
    if (p.contains("gamma")) c.params.gamma = get_number(p, "gamma", "params");
    if (p.contains("q")) c.params.q = get_number(p, "q", "params");
  }
  if (root.contains("window")) {
    const auto& w = root["window"];
    check_keys(w, {"L", "R"}, "window");
    if (w.contains("L")) c.window_L = static_cast<std::int64_t>(get_count(w, "L", "window"));
    if (w.contains("R")) c.cutoff_R = static_cast<std::int64_t>(get_count(w, "R", "window"));
  }
  if (root.contains("horizon")) c.horizon = get_number(root, "horizon", "config");
  if (root.contains("sample_times")) c.sample_times = get_numbers(root["sample_times"], "sample_times");
  if (root.contains("replicas")) c.replicas = get_count(root, "replicas", "config");
  if (root.contains("seed")) c.seed = get_count(root, "seed", "config");
  if (root.contains("workers")) c.workers = static_cast<unsigned>(get_count(root, "workers", "config"));
  if (root.contains("confidence")) c.confidence = get_number(root, "confidence", "config");
  if (root.contains("epsilon")) c.epsilon = get_number(root, "epsilon", "config");
  if (root.contains("out")) {
    if (!root["out"].is_string()) throw ConfigError("out must be a string");
    c.out = root["out"].get<std::string>();
  }
  if (root.contains("initial")) {
    if (!root["initial"].is_array()) throw ConfigError("initial must be an array of integers");
    c.initial.clear();
    for (const auto& v : root["initial"]) {
      if (!v.is_number_integer()) throw ConfigError("initial must be an array of integers");
      c.initial.push_back(v.get<Vertex>());
    }
    c.initial = normalized(c.initial);
  }
  if (root.contains("init")) {
    if (!root["init"].is_string()) throw ConfigError("init must be a string");
    c.init = background_init_from_string(root["init"].get<std::string>());
    if (c.init == BackgroundInit::explicit_set) throw ConfigError("explicit_set init is not available from config");
  }
  if (root.contains("percolation")) {
    const auto& p = root["percolation"];
    check_keys(p, {"b", "cutoff", "lo", "hi"}, "percolation");
    if (p.contains("b")) c.percolation.b = p["b"];
    if (p.contains("cutoff")) c.percolation.cutoff = static_cast<std::int64_t>(get_count(p, "cutoff", "percolation"));
    if (p.contains("lo")) c.percolation.lo = static_cast<Vertex>(get_number(p, "lo", "percolation"));
    if (p.contains("hi")) c.percolation.hi = static_cast<Vertex>(get_number(p, "hi", "percolation"));
  }
  if (root.contains("sweep")) {
    const auto& s = root["sweep"];
    check_keys(s, {"lambda", "gamma", "q"}, "sweep");
    if (s.contains("lambda")) c.sweep.lambda = get_numbers(s["lambda"], "sweep.lambda");
    if (s.contains("gamma")) c.sweep.gamma = get_numbers(s["gamma"], "sweep.gamma");
    if (s.contains("q")) c.sweep.q = get_numbers(s["q"], "sweep.q");
  }
  if (root.contains("certificate")) {
    const auto& s = root["certificate"];
    check_keys(s, {"T_max", "tail_replicas", "ey1_replicas", "q_exponent", "r0_max", "eps1_replicas", "z_replicas"},
               "certificate");
    auto& cc = c.certificate;
    if (s.contains("T_max")) cc.T_max = get_number(s, "T_max", "certificate");
    if (s.contains("tail_replicas")) cc.tail_replicas = get_count(s, "tail_replicas", "certificate");
    if (s.contains("ey1_replicas")) cc.ey1_replicas = get_count(s, "ey1_replicas", "certificate");
    if (s.contains("q_exponent")) cc.q_exponent = get_number(s, "q_exponent", "certificate");
    if (s.contains("r0_max")) cc.r0_max = static_cast<std::int64_t>(get_count(s, "r0_max", "certificate"));
    if (s.contains("eps1_replicas")) cc.eps1_replicas = get_count(s, "eps1_replicas", "certificate");
    if (s.contains("z_replicas")) cc.z_replicas = get_count(s, "z_replicas", "certificate");
  }
  validate(c);
  return c;
}

// Value checks; run() repeats them after command-line overrides.
static void validate(const RunConfig& c) {
  c.params.validate();
  parse_kernel(c.kernel);
  if (c.window_L < 0) throw ConfigError("window.L must be >= 0");
  if (c.cutoff_R < 1) throw ConfigError("window.R must be >= 1");
  if (!(c.horizon > 0.0) || !std::isfinite(c.horizon)) throw ConfigError("horizon must be positive");
  for (double t : c.sample_times)
    if (!(t >= 0.0 && t <= c.horizon)) throw ConfigError("sample_times must lie in [0, horizon]");
  if (c.replicas < 2) throw ConfigError("replicas must be >= 2");
  if (c.workers < 1) throw ConfigError("workers must be >= 1");
  if (!(c.confidence > 0.0 && c.confidence < 1.0)) throw ConfigError("confidence must lie in (0,1)");
  if (!(c.epsilon > 0.0 && c.epsilon < 1.0)) throw ConfigError("epsilon must lie in (0,1)");
  if (c.subcommand == "certify-slow-speed" && !(c.epsilon < 1.0 / 3.0))
    throw ConfigError("certify-slow-speed needs epsilon < 1/3");
  Window w = Window::symmetric(c.window_L, c.cutoff_R);
  for (Vertex x : c.initial)
    if (!w.contains(x)) throw ConfigError("initial vertex outside the window");
  if (c.subcommand == "percolation") {
    if (c.percolation.b.is_null()) throw ConfigError("percolation.b is required");
    if (c.percolation.hi < c.percolation.lo) throw ConfigError("percolation.hi < percolation.lo");
    if (c.percolation.cutoff < 1) throw ConfigError("percolation.cutoff must be >= 1");
    percolation_spec(c.percolation);
  }
}

json to_json(const RunConfig& c) {
  json j = {{"subcommand", c.subcommand},
            {"kernel", c.kernel},
            {"params", {{"lambda", c.params.lambda}, {"r", c.params.r}, {"gamma", c.params.gamma}, {"q", c.params.q}}},
            {"window", {{"L", c.window_L}, {"R", c.cutoff_R}}},
            {"horizon", c.horizon},
            {"sample_times", c.sample_times},
            {"replicas", c.replicas},
            {"seed", c.seed},
            {"confidence", c.confidence},
            {"epsilon", c.epsilon},
            {"initial", c.initial},
            {"init", to_string(c.init)}};
  if (c.subcommand == "percolation")
    j["percolation"] = {
        {"b", c.percolation.b}, {"cutoff", c.percolation.cutoff}, {"lo", c.percolation.lo}, {"hi", c.percolation.hi}};
  if (c.subcommand == "sweep")
    j["sweep"] = {{"lambda", c.sweep.lambda}, {"gamma", c.sweep.gamma}, {"q", c.sweep.q}};
  if (c.subcommand.rfind("certify", 0) == 0) {
    const auto& cc = c.certificate;
    j["certificate"] = {{"T_max", cc.T_max},           {"tail_replicas", cc.tail_replicas},
                        {"ey1_replicas", cc.ey1_replicas}, {"q_exponent", cc.q_exponent},
                        {"r0_max", cc.r0_max},         {"eps1_replicas", cc.eps1_replicas},
                        {"z_replicas", cc.z_replicas}};
  }
  return j;
}

void write_atomic(const std::string& path, const std::string& text) {
  std::string tmp = path + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + tmp);
    f << text;
    f.flush();
    if (!f) throw std::runtime_error("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

int run(const RunConfig& c, std::ostream& log) {
  validate(c);
  const auto& s = c.subcommand;
  if (s == "simulate") return run_simulate(c, log);
  if (s == "survival") return run_survival(c, log);
  if (s == "sweep") return run_sweep(c, log);
  if (s == "percolation") return run_percolation(c, log);
  if (s == "certify-immunization") return run_certify_immunization(c, log);
  if (s == "certify-slow-speed") return run_certify_slow_speed(c, log);
  if (s == "verify-bounds") return run_verify_bounds(c, log);
  throw ConfigError("unknown subcommand '" + s + "'");
}

int main(int argc, char** argv) {
  CLI::App app{"Contact process on dynamical long-range percolation"};
  app.set_version_flag("--version", version());
  app.require_subcommand(1, 1);

  std::string config_path;
  std::optional<std::uint64_t> seed, replicas;
  std::optional<unsigned> workers;
  std::optional<std::string> out;
  std::optional<double> confidence;
  const std::map<std::string, std::string> about{
      {"simulate", "one trajectory with sampled infected sets"},
      {"survival", "survival probability with confidence interval"},
      {"percolation", "cluster sizes and cut points of independent percolation"},
      {"certify-immunization", "search for q0 below which the process dies out"},
      {"certify-slow-speed", "search for gamma* below which the process dies out"},
      {"verify-bounds", "closed-form inequality suite"},
      {"sweep", "survival over a (lambda, gamma, q) grid"}};
  for (const auto& name : subcommands()) {
    auto* sub = app.add_subcommand(name, about.count(name) ? about.at(name) : "");
    sub->add_option("--config", config_path, "JSON configuration file");
    sub->add_option("--seed", seed, "64-bit seed");
    sub->add_option("--replicas", replicas, "number of replicas");
    sub->add_option("--workers", workers, "worker threads");
    sub->add_option("--out", out, "output directory");
    sub->add_option("--confidence", confidence, "confidence level");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  std::string subcommand = app.get_subcommands().front()->get_name();

  try {
    json j = json::object();
    if (!config_path.empty()) {
      std::ifstream f(config_path);
      if (!f) throw ConfigError("cannot open config file " + config_path);
      try {
        j = json::parse(f);
      } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
      }
    }
    RunConfig c = parse_config(j, subcommand);
    if (seed) c.seed = *seed;
    if (replicas) c.replicas = *replicas;
    if (workers) c.workers = *workers;
    if (out) c.out = *out;
    if (confidence) c.confidence = *confidence;
    return run(c, std::cerr);
  } catch (const ConfigError& e) {
    diagnostic("config", e.what());
    return 2;
  } catch (const ResourceError& e) {
    diagnostic("resource", e.what());
    return 3;
  } catch (const DivergenceError& e) {
    diagnostic("divergence", e.what());
    return 4;
  } catch (const CouplingViolation& e) {
    diagnostic("coupling_violation", e.what());
    return 5;
  } catch (const json::exception& e) {
    diagnostic("config", e.what());
    return 2;
  } catch (const std::exception& e) {
    diagnostic("internal", e.what());
    return 1;
  }
}

}  // namespace cpdlp::cli
