#include "cpdlp/stats.hpp"

#include <boost/math/distributions/beta.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>

#include "cpdlp/error.hpp"

namespace cpdlp {

namespace {
void check_level(double c) {
  if (!(c > 0.0 && c < 1.0)) throw ConfigError("confidence level must lie in (0,1)");
}
}  // namespace

double z_two_sided(double confidence) {
  check_level(confidence);
  boost::math::normal_distribution<double> nd;
  return boost::math::quantile(nd, 0.5 + confidence / 2.0);
}

double z_one_sided(double confidence) {
  check_level(confidence);
  boost::math::normal_distribution<double> nd;
  return boost::math::quantile(nd, confidence);
}

Interval wilson_interval(std::uint64_t k, std::uint64_t n, double confidence) {
  if (n == 0) return {0.0, 1.0};
  double z = z_two_sided(confidence);
  double nd = static_cast<double>(n);
  double p = static_cast<double>(k) / nd;
  double denom = 1.0 + z * z / nd;
  double centre = (p + z * z / (2.0 * nd)) / denom;
  double half = z * std::sqrt(p * (1.0 - p) / nd + z * z / (4.0 * nd * nd)) / denom;
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

double clopper_pearson_upper(std::uint64_t k, std::uint64_t n, double confidence) {
  check_level(confidence);
  if (k >= n) return 1.0;
  boost::math::beta_distribution<double> b(static_cast<double>(k) + 1.0, static_cast<double>(n - k));
  return boost::math::quantile(b, confidence);
}

Interval clopper_pearson(std::uint64_t k, std::uint64_t n, double confidence) {
  check_level(confidence);
  double a = (1.0 - confidence) / 2.0;
  Interval out{0.0, 1.0};
  if (k > 0) {
    boost::math::beta_distribution<double> b(static_cast<double>(k), static_cast<double>(n - k) + 1.0);
    out.lo = boost::math::quantile(b, a);
  }
  if (k < n) {
    boost::math::beta_distribution<double> b(static_cast<double>(k) + 1.0, static_cast<double>(n - k));
    out.hi = boost::math::quantile(b, 1.0 - a);
  }
  return out;
}

double chi2_sf(double x, double dof) {
  if (x <= 0.0) return 1.0;
  return boost::math::gamma_q(dof / 2.0, x / 2.0);
}

double poisson_sf(std::uint64_t m, double mu) {
  if (m == 0) return 1.0;
  if (mu <= 0.0) return 0.0;
  return boost::math::gamma_p(static_cast<double>(m), mu);
}

void RunningStats::add(double x) {
  ++n_;
  double d = x - mean_;
  mean_ += d / static_cast<double>(n_);
  m2_ += d * (x - mean_);
}

void RunningStats::merge(const RunningStats& o) {
  if (o.n_ == 0) return;
  if (n_ == 0) {
    *this = o;
    return;
  }
  double n = static_cast<double>(n_ + o.n_);
  double d = o.mean_ - mean_;
  mean_ += d * static_cast<double>(o.n_) / n;
  m2_ += o.m2_ + d * d * static_cast<double>(n_) * static_cast<double>(o.n_) / n;
  n_ += o.n_;
}

double RunningStats::variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
double RunningStats::stddev() const { return std::sqrt(variance()); }
double RunningStats::stderr_mean() const {
  return n_ > 0 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0;
}

double mean_of(const std::vector<double>& xs) {
  RunningStats s;
  for (double x : xs) s.add(x);
  return s.mean();
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  std::size_t n = std::min(x.size(), y.size());
  if (n < 2) return 0.0;
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

double autocorrelation(const std::vector<double>& xs, std::size_t lag) {
  std::size_t n = xs.size();
  if (lag >= n) return 0.0;
  double m = mean_of(xs);
  double num = 0, den = 0;
  for (std::size_t i = 0; i < n; ++i) den += (xs[i] - m) * (xs[i] - m);
  for (std::size_t i = 0; i + lag < n; ++i) num += (xs[i] - m) * (xs[i + lag] - m);
  return den == 0.0 ? 0.0 : num / den;
}

}  // namespace cpdlp
