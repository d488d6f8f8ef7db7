#include "cpdlp/series.hpp"

#include <cmath>
#include <limits>

namespace cpdlp {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

double TermForm::operator()(std::int64_t k) const {
  if (coeff == 0.0) return 0.0;
  double kd = static_cast<double>(k);
  double r = (k == 1) ? 1.0 : std::pow(ratio, kd - 1.0);
  return coeff * std::pow(kd, power) * r;
}

TermForm TermForm::reciprocal() const {
  return {1.0 / coeff, -power, 1.0 / ratio};
}

double tail_bound(const TermForm& t, std::int64_t n) {
  if (t.coeff == 0.0 || t.ratio == 0.0) return 0.0;
  if (t.coeff < 0.0) return kInf;
  if (t.ratio > 1.0) return kInf;
  double nd = static_cast<double>(n);
  if (t.ratio == 1.0) {
    if (t.power >= -1.0) return kInf;
    // k^s is convex and decreasing, so k^s <= integral over [k-1/2, k+1/2].
    return t.coeff * std::pow(nd + 0.5, t.power + 1.0) / (-t.power - 1.0);
  }
  double first = t(n + 1);
  if (t.power <= 0.0) return first / (1.0 - t.ratio);
  double kappa = std::pow(1.0 + 1.0 / (nd + 1.0), t.power) * t.ratio;
  if (kappa >= 1.0) return kInf;
  return first / (1.0 - kappa);
}

double tail_bound(const std::vector<TermForm>& ts, std::int64_t n) {
  double s = 0.0;
  for (const auto& t : ts) s += tail_bound(t, n);
  return s;
}

void CompensatedSum::add(double x) {
  double t = sum_ + x;
  if (std::fabs(sum_) >= std::fabs(x))
    comp_ += (sum_ - t) + x;
  else
    comp_ += (x - t) + sum_;
  sum_ = t;
}

CertifiedSum certified_sum(const std::function<double(std::int64_t)>& f,
                           const std::vector<TermForm>& dominators, std::int64_t first,
                           std::int64_t n_min, std::int64_t n_max, double rel_tol, double abs_tol) {
  CertifiedSum out;
  CompensatedSum acc;
  std::int64_t k = first;
  std::int64_t n = std::max(n_min, first);
  double prev = std::numeric_limits<double>::infinity();
  for (;;) {
    for (; k <= n; ++k) acc.add(f(k));
    double tail = tail_bound(dominators, n);
    out.partial = acc.value();
    out.tail = tail;
    out.n = n;
    out.finite = std::isfinite(tail) && std::isfinite(out.partial);
    if (out.finite && (tail <= rel_tol * std::fabs(out.partial) || tail <= abs_tol)) return out;
    // Every n gives a valid bound; stop once doubling n no longer tightens it.
    double up = out.upper();
    if (out.finite && prev - up <= rel_tol * std::fabs(up)) return out;
    prev = up;
    if (n >= n_max) return out;
    n = std::min(n * 2, n_max);
  }
}

}  // namespace cpdlp
