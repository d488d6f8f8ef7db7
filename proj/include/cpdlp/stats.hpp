#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace cpdlp {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

// Two-sided standard normal quantile for a central confidence level.
double z_two_sided(double confidence);
// One-sided standard normal quantile.
double z_one_sided(double confidence);

Interval wilson_interval(std::uint64_t successes, std::uint64_t n, double confidence);
// One-sided Clopper-Pearson upper bound on a binomial proportion.
double clopper_pearson_upper(std::uint64_t successes, std::uint64_t n, double confidence);
Interval clopper_pearson(std::uint64_t successes, std::uint64_t n, double confidence);

// Upper tail P(chi2_dof >= x).
double chi2_sf(double x, double dof);
// P(Poisson(mu) >= m).
double poisson_sf(std::uint64_t m, double mu);

// Streaming mean / variance (Welford). merge() is associative.
class RunningStats {
 public:
  void add(double x);
  void merge(const RunningStats& o);
  std::uint64_t count() const { return n_; }
  double mean() const { return mean_; }
  double variance() const;  // unbiased
  double stddev() const;
  double stderr_mean() const;

 private:
  std::uint64_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

double mean_of(const std::vector<double>& xs);
double pearson(const std::vector<double>& x, const std::vector<double>& y);
// Sample autocorrelation at the given lag.
double autocorrelation(const std::vector<double>& xs, std::size_t lag);

}  // namespace cpdlp
