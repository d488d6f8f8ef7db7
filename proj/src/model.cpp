#include "cpdlp/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cpdlp/error.hpp"
#include "cpdlp/rng.hpp"

namespace cpdlp {

const char* to_string(SeqForm f) {
  switch (f) {
    case SeqForm::power_law: return "power_law";
    case SeqForm::geometric: return "geometric";
    case SeqForm::finite_support: return "finite_support";
    case SeqForm::tabulated: return "tabulated";
  }
  return "?";
}

SeqForm seq_form_from_string(const std::string& s) {
  if (s == "power_law") return SeqForm::power_law;
  if (s == "geometric") return SeqForm::geometric;
  if (s == "finite_support") return SeqForm::finite_support;
  if (s == "tabulated") return SeqForm::tabulated;
  throw ConfigError("unknown sequence form '" + s + "'");
}

Sequence Sequence::power_law(double c, double s) {
  Sequence q;
  q.form = SeqForm::power_law;
  q.coeff = c;
  q.exponent = s;
  return q;
}

Sequence Sequence::geometric(double c, double rho) {
  Sequence q;
  q.form = SeqForm::geometric;
  q.coeff = c;
  q.ratio = rho;
  return q;
}

Sequence Sequence::finite_support(std::vector<double> t) {
  Sequence q;
  q.form = SeqForm::finite_support;
  q.table = std::move(t);
  return q;
}

Sequence Sequence::tabulated(std::vector<double> t, std::optional<TermForm> tail) {
  Sequence q;
  q.form = SeqForm::tabulated;
  q.table = std::move(t);
  q.tail = tail;
  return q;
}

double Sequence::operator()(std::int64_t k) const {
  if (k < 1) throw ConfigError("sequence index must be >= 1");
  switch (form) {
    case SeqForm::power_law: return coeff * std::pow(static_cast<double>(k), exponent);
    case SeqForm::geometric: return k == 1 ? coeff : coeff * std::pow(ratio, static_cast<double>(k - 1));
    case SeqForm::finite_support:
      return k <= static_cast<std::int64_t>(table.size()) ? table[static_cast<std::size_t>(k - 1)] : 0.0;
    case SeqForm::tabulated:
      if (k <= static_cast<std::int64_t>(table.size())) return table[static_cast<std::size_t>(k - 1)];
      if (!tail) throw ConfigError("tabulated sequence queried beyond its table without a declared tail");
      return (*tail)(k);
  }
  return 0.0;
}

std::int64_t Sequence::head_length() const {
  if (form == SeqForm::finite_support || form == SeqForm::tabulated) return static_cast<std::int64_t>(table.size());
  return 0;
}

std::optional<TermForm> Sequence::tail_form() const {
  switch (form) {
    case SeqForm::power_law: return TermForm{coeff, exponent, 1.0};
    case SeqForm::geometric: return TermForm{coeff, 0.0, ratio};
    case SeqForm::finite_support: return TermForm{0.0, 0.0, 1.0};
    case SeqForm::tabulated: return tail;
  }
  return std::nullopt;
}

namespace {

bool finite_all(const std::vector<double>& t) {
  for (double x : t)
    if (!std::isfinite(x)) return false;
  return true;
}

// Largest value of a term form over k > n, for forms that are eventually decreasing.
double form_sup_beyond(const TermForm& t, std::int64_t n) {
  double best = t(n + 1);
  if (t.power > 0.0 && t.ratio < 1.0 && t.ratio > 0.0) {
    double kstar = -t.power / std::log(t.ratio);
    for (double k : {std::floor(kstar), std::ceil(kstar)})
      if (k > static_cast<double>(n)) best = std::max(best, t(static_cast<std::int64_t>(k)));
  }
  return best;
}

void validate_p(const Sequence& p) {
  bool positive = false;
  switch (p.form) {
    case SeqForm::power_law:
      if (!(p.coeff >= 0.0 && p.coeff <= 1.0) || !std::isfinite(p.exponent))
        throw ConfigError("p_k = c k^s needs c in [0,1]");
      if (p.exponent > 0.0 && p.coeff > 0.0) throw ConfigError("p_k = c k^s with s > 0 exceeds 1 for large k");
      positive = p.coeff > 0.0;
      break;
    case SeqForm::geometric:
      if (!(p.coeff >= 0.0 && p.coeff <= 1.0) || !(p.ratio >= 0.0 && p.ratio <= 1.0))
        throw ConfigError("geometric p_k needs coefficient and ratio in [0,1]");
      positive = p.coeff > 0.0;
      break;
    case SeqForm::finite_support:
    case SeqForm::tabulated:
      if (!finite_all(p.table)) throw ConfigError("p table has non-finite entries");
      for (double x : p.table) {
        if (x < 0.0 || x > 1.0) throw ConfigError("p_k must lie in [0,1]");
        positive = positive || x > 0.0;
      }
      if (p.form == SeqForm::tabulated && p.tail) {
        const TermForm& t = *p.tail;
        if (t.coeff < 0.0 || t.ratio < 0.0 || t.ratio > 1.0 || (t.ratio == 1.0 && t.power > 0.0 && t.coeff > 0.0))
          throw ConfigError("declared p tail must be nonnegative and bounded");
        if (form_sup_beyond(t, p.head_length()) > 1.0) throw ConfigError("declared p tail exceeds 1");
        positive = positive || t.coeff > 0.0;
      }
      break;
  }
  if (!positive) throw ConfigError("p_k = 0 for all k is excluded");
}

void validate_v(const Sequence& v) {
  switch (v.form) {
    case SeqForm::power_law:
      if (!(v.coeff > 0.0) || !std::isfinite(v.coeff) || !std::isfinite(v.exponent))
        throw ConfigError("v_k = c k^s needs c > 0");
      break;
    case SeqForm::geometric:
      if (!(v.coeff > 0.0) || !(v.ratio > 0.0) || !std::isfinite(v.ratio))
        throw ConfigError("geometric v_k needs positive coefficient and ratio");
      break;
    case SeqForm::finite_support:
      throw ConfigError("v_k must be positive for every k; finite support is not allowed");
    case SeqForm::tabulated:
      if (!finite_all(v.table)) throw ConfigError("v table has non-finite entries");
      for (double x : v.table)
        if (!(x > 0.0)) throw ConfigError("v_k must be positive");
      if (v.tail && (!(v.tail->coeff > 0.0) || !(v.tail->ratio > 0.0)))
        throw ConfigError("declared v tail must be positive");
      break;
  }
}

}  // namespace

KernelSpec::KernelSpec(Sequence p, Sequence v) : p_(std::move(p)), v_(std::move(v)) {
  validate_p(p_);
  validate_v(v_);
}

KernelSpec KernelSpec::reference() {
  return KernelSpec(Sequence::power_law(1.0, -7.0), Sequence::power_law(1.0, 3.0));
}

std::int64_t KernelSpec::head_length() const { return std::max(p_.head_length(), v_.head_length()); }

void ModelParams::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be >= 0");
  if (!(r > 0.0) || !std::isfinite(r)) throw ConfigError("r must be > 0");
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ConfigError("gamma must be > 0");
  if (!(q >= 0.0 && q <= 1.0)) throw ConfigError("q must lie in [0,1]");
}

bool AssumptionReport::passed() const {
  for (const auto& s : sums)
    if (!s.passed) return false;
  return !sums.empty();
}

TermForm p_dominator(const KernelSpec& kernel) {
  auto t = kernel.p_seq().tail_form();
  if (!t) throw ConfigError("tabulated p has no declared tail; the series cannot be certified");
  return *t;
}

TermForm inv_v_dominator(const KernelSpec& kernel) {
  auto t = kernel.v_seq().tail_form();
  if (!t) throw ConfigError("tabulated v has no declared tail; the series cannot be certified");
  return t->reciprocal();
}

AssumptionReport validate_assumptions(const KernelSpec& kernel, const ModelParams& params, AssumptionMode mode) {
  params.validate();
  TermForm pt = p_dominator(kernel);
  TermForm vt = *kernel.v_seq().tail_form();
  TermForm iv = inv_v_dominator(kernel);
  AssumptionReport rep;
  rep.mode = mode;
  bool tab = kernel.p_seq().form == SeqForm::tabulated || kernel.v_seq().form == SeqForm::tabulated;
  rep.method = tab ? "numeric head + declared tail remainder" : "numeric head + closed-form tail remainder";
  double m = mode == AssumptionMode::strong ? 1.0 : 0.0;
  std::int64_t n0 = std::max<std::int64_t>(64, kernel.head_length());
  auto run = [&](const std::string& name, auto f, TermForm dom) {
    SeriesCheck c;
    c.name = name;
    c.sum = certified_sum(f, {dom}, 1, n0);
    c.passed = c.sum.finite;
    rep.sums.push_back(c);
  };
  std::string pre = mode == AssumptionMode::strong ? "sum k*" : "sum ";
  run(pre + "v_k*p_k", [&](std::int64_t k) { return std::pow(double(k), m) * kernel.v(k) * kernel.p(k); },
      (pt * vt).times_k(m));
  run(pre + "1/v_k", [&](std::int64_t k) { return std::pow(double(k), m) / kernel.v(k); }, iv.times_k(m));
  return rep;
}

double a_bar_rate(double lambda, double v_hat, double p_hat) {
  double d = lambda * v_hat * p_hat;
  if (d <= 0.0) return 0.0;
  double s = lambda + v_hat;
  // (lambda + v)^2 - 4 lambda v p = (lambda - v)^2 + 4 lambda v (1 - p) >= 0
  double disc = (lambda - v_hat) * (lambda - v_hat) + 4.0 * lambda * v_hat * (1.0 - p_hat);
  return 2.0 * d / (s + std::sqrt(std::max(0.0, disc)));
}

double a_bar(std::int64_t k, const KernelSpec& kernel, const ModelParams& params) {
  return a_bar_rate(params.lambda, params.v_hat(kernel, k), params.p_hat(kernel, k));
}

double delta_block_rate(double p, double v, double T) {
  if (p <= 0.0) return 1.0;
  if (p >= 1.0) return 0.0;
  double a = p * v * T;
  double ratio = -std::expm1(-v * T) / -std::expm1(-a);
  double d = (1.0 - p) * std::exp(-a) * (1.0 - p * ratio);
  return std::clamp(d, 0.0, 1.0);
}

double one_minus_delta_rate(double p, double v, double T) {
  if (p <= 0.0) return 0.0;
  if (p >= 1.0) return 1.0;
  double a = p * v * T;
  double x = -std::expm1(-a) + p * std::exp(-a) + (1.0 - p) * p * (-std::expm1(-v * T)) / std::expm1(a);
  return std::clamp(x, 0.0, 1.0);
}

double delta_block(std::int64_t k, const KernelSpec& kernel, const ModelParams& params, double T) {
  return delta_block_rate(params.p_hat(kernel, k), params.v_hat(kernel, k), T);
}

double one_minus_delta(std::int64_t k, const KernelSpec& kernel, const ModelParams& params, double T) {
  return one_minus_delta_rate(params.p_hat(kernel, k), params.v_hat(kernel, k), T);
}

std::vector<TermForm> one_minus_delta_dominators(const KernelSpec& kernel, const ModelParams& params, double T) {
  // 1 - delta <= p v T + p + 1/(v T) in tilted rates; identically 0 when q = 0.
  if (params.q == 0.0) return {TermForm{0.0, 0.0, 1.0}};
  TermForm pt = p_dominator(kernel);
  TermForm vt = *kernel.v_seq().tail_form();
  return {(pt * vt).scaled(params.q * params.gamma * T), pt.scaled(params.q),
          inv_v_dominator(kernel).scaled(1.0 / (params.gamma * T))};
}

double occupation_mean_rate(double p, double v, double t, EdgeStart start) {
  if (t <= 0.0) return 0.0;
  double relax = -std::expm1(-v * t) / v;
  double m = 0.0;
  switch (start) {
    case EdgeStart::open: m = p * t + (1.0 - p) * relax; break;
    case EdgeStart::closed: m = p * (t - relax); break;
    case EdgeStart::stationary: m = p * t; break;
  }
  return std::clamp(m, 0.0, t);
}

double occupation_mean(std::int64_t k, const KernelSpec& kernel, const ModelParams& params, double t,
                       EdgeStart start) {
  return occupation_mean_rate(params.p_hat(kernel, k), params.v_hat(kernel, k), t, start);
}

double QSchedule::q(double T) const { return std::min(1.0, std::pow(T, -exponent)); }

double b_of_T(std::int64_t k, const KernelSpec& kernel, double gamma, double T, const QSchedule& sched) {
  if (!(T > 1.0)) throw ConfigError("b_of_T needs T > 1");
  double p = kernel.p(k);
  double v = gamma * kernel.v(k);
  double qT = sched.q(T);
  double b = qT * p * v * T + qT * p + 1.0 / (v * T);
  return std::min(1.0, b);
}

std::vector<TermForm> b_of_T_dominators(const KernelSpec& kernel, double gamma, double T, const QSchedule& sched) {
  ModelParams p;
  p.gamma = gamma;
  p.q = sched.q(T);
  return one_minus_delta_dominators(kernel, p, T);
}

bool FormulaSuiteReport::passed() const {
  for (const auto& c : checks)
    if (c.failures) return false;
  return !checks.empty();
}

FormulaSuiteReport formula_suite(const KernelSpec& kernel, std::size_t points, std::uint64_t seed, double tolerance) {
  FormulaSuiteReport rep;
  rep.grid_points = points;
  rep.tolerance = tolerance;
  rep.checks = {{"a_bar lower bound"}, {"a_bar upper bound"}, {"a_bar monotone in gamma"},
                {"a_bar -> lambda p_hat"}, {"1 - delta bound"}, {"b_k(T) >= 1 - delta_k(q(T), T)"}};
  auto record = [&](std::size_t i, double lhs, double rhs) {
    auto& c = rep.checks[i];
    ++c.points;
    double scale = std::max(std::abs(rhs), 1e-300);
    double v = (lhs - rhs) / scale;
    c.worst = c.points == 1 ? v : std::max(c.worst, v);
    if (v > tolerance) ++c.failures;
  };
  auto loguni = [](Rng& g, double lo, double hi) { return std::exp(std::log(lo) + g.uniform() * (std::log(hi) - std::log(lo))); };
  for (std::size_t i = 0; i < points; ++i) {
    Rng g(derive(seed, Tag::ladder, {i}));
    auto k = static_cast<std::int64_t>(std::floor(loguni(g, 1.0, 64.0)));
    ModelParams m;
    m.lambda = loguni(g, 1e-2, 1e2);
    m.gamma = loguni(g, 1e-3, 1e3);
    m.q = i % 10 == 0 ? 1.0 : g.uniform();
    double T = loguni(g, 1.01, 1e3);
    double ph = m.p_hat(kernel, k), vh = m.v_hat(kernel, k), lam = m.lambda;
    double a = a_bar_rate(lam, vh, ph);

    record(0, vh / (lam + vh) * lam * ph, a);
    record(1, a, 2.0 * lam * vh * ph / (lam + vh));
    record(2, a, a_bar_rate(lam, 2.0 * vh, ph));

    double prev = std::abs(a - lam * ph), v = vh;
    bool mono = true;
    for (int j = 1; j <= 40; ++j) {
      v *= 2.0;
      double d = std::abs(a_bar_rate(lam, v, ph) - lam * ph);
      // a_bar and lambda p_hat are each within a few ulps of exact
      if (d > prev * (1.0 + tolerance) + 8.0 * std::numeric_limits<double>::epsilon() * lam * ph) mono = false;
      prev = d;
    }
    double limit = lam * ph * std::max(2.0 * lam / v, 1e-12);
    record(3, mono ? prev : std::max(prev, 2.0 * limit + 1.0), limit);

    record(4, one_minus_delta_rate(ph, vh, T), ph * vh * T + ph + 1.0 / (vh * T));

    QSchedule sched;
    ModelParams mq = m;
    mq.q = sched.q(T);
    record(5, one_minus_delta(k, kernel, mq, T), b_of_T(k, kernel, m.gamma, T, sched));
  }
  return rep;
}

}  // namespace cpdlp
