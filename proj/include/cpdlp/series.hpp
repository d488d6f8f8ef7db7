#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace cpdlp {

// term(k) = coeff * k^power * ratio^(k-1), k >= 1.
struct TermForm {
  double coeff = 0.0;
  double power = 0.0;
  double ratio = 1.0;

  double operator()(std::int64_t k) const;
  TermForm operator*(const TermForm& o) const { return {coeff * o.coeff, power + o.power, ratio * o.ratio}; }
  TermForm scaled(double c) const { return {coeff * c, power, ratio}; }
  TermForm times_k(double m = 1.0) const { return {coeff, power + m, ratio}; }
  TermForm reciprocal() const;
};

// Upper bound on sum_{k > n} term(k); +inf when the bound is not available
// at this n (divergent, or n too small for the ratio test).
double tail_bound(const TermForm& t, std::int64_t n);

// Sum of several forms.
double tail_bound(const std::vector<TermForm>& ts, std::int64_t n);

// Neumaier compensated accumulator.
class CompensatedSum {
 public:
  void add(double x);
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

struct CertifiedSum {
  double partial = 0.0;    // exact head sum over k <= n
  double tail = 0.0;       // analytic bound on the remainder
  std::int64_t n = 0;
  bool finite = false;
  double upper() const { return partial + tail; }
};

// Sum_{k >= first} f(k) with f(k) <= sum of dominators for k > n. The head
// length n starts at n_min and doubles until the tail bound is finite and
// below rel_tol * partial (or abs_tol), up to n_max.
CertifiedSum certified_sum(const std::function<double(std::int64_t)>& f,
                           const std::vector<TermForm>& dominators,
                           std::int64_t first = 1,
                           std::int64_t n_min = 64,
                           std::int64_t n_max = std::int64_t{1} << 22,
                           double rel_tol = 1e-7,
                           double abs_tol = 1e-14);

}  // namespace cpdlp
