#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cpdlp/series.hpp"

namespace cpdlp {

enum class SeqForm { power_law, geometric, finite_support, tabulated };

const char* to_string(SeqForm f);
SeqForm seq_form_from_string(const std::string& s);

// Distance-indexed sequence a_k, k >= 1.
struct Sequence {
  SeqForm form = SeqForm::power_law;
  double coeff = 1.0;
  double exponent = 0.0;  // power_law: a_k = coeff * k^exponent
  double ratio = 1.0;     // geometric: a_k = coeff * ratio^(k-1)
  std::vector<double> table;        // finite_support / tabulated: a_1..a_n
  std::optional<TermForm> tail;     // tabulated: a_k for k > n

  static Sequence power_law(double c, double s);
  static Sequence geometric(double c, double rho);
  static Sequence finite_support(std::vector<double> t);
  static Sequence tabulated(std::vector<double> t, std::optional<TermForm> tail);

  double operator()(std::int64_t k) const;
  // Entries k <= head_length() come from the table.
  std::int64_t head_length() const;
  // Closed form valid for every k > head_length(); empty if none is declared.
  std::optional<TermForm> tail_form() const;
};

// The kernel (p_k, v_k).
class KernelSpec {
 public:
  KernelSpec(Sequence p, Sequence v);

  static KernelSpec reference();  // p_k = k^-7, v_k = k^3

  double p(std::int64_t k) const { return p_(k); }
  double v(std::int64_t k) const { return v_(k); }
  const Sequence& p_seq() const { return p_; }
  const Sequence& v_seq() const { return v_; }
  SeqForm form() const { return p_.form; }
  std::int64_t head_length() const;

 private:
  Sequence p_;
  Sequence v_;
};

struct ModelParams {
  double lambda = 1.0;
  double r = 1.0;
  double gamma = 1.0;
  double q = 1.0;

  void validate() const;
  double p_hat(const KernelSpec& k, std::int64_t d) const { return q * k.p(d); }
  double v_hat(const KernelSpec& k, std::int64_t d) const { return gamma * k.v(d); }
};

enum class AssumptionMode { basic, strong };

struct SeriesCheck {
  std::string name;
  CertifiedSum sum;
  bool passed = false;
};

struct AssumptionReport {
  AssumptionMode mode = AssumptionMode::basic;
  std::vector<SeriesCheck> sums;
  std::string method;
  bool passed() const;
};

AssumptionReport validate_assumptions(const KernelSpec& kernel, const ModelParams& params, AssumptionMode mode);

// Closed-form scalars, in terms of the tilted rates p_hat = q p_k, v_hat = gamma v_k.
double a_bar_rate(double lambda, double v_hat, double p_hat);
double a_bar(std::int64_t k, const KernelSpec& kernel, const ModelParams& params);

double delta_block_rate(double p_hat, double v_hat, double T);
double one_minus_delta_rate(double p_hat, double v_hat, double T);
double delta_block(std::int64_t k, const KernelSpec& kernel, const ModelParams& params, double T);
double one_minus_delta(std::int64_t k, const KernelSpec& kernel, const ModelParams& params, double T);
// Dominating forms of 1 - delta_k for the certified sums.
std::vector<TermForm> one_minus_delta_dominators(const KernelSpec& kernel, const ModelParams& params, double T);

enum class EdgeStart { open, closed, stationary };

// Expected open time of one edge over [0, t].
double occupation_mean_rate(double p_hat, double v_hat, double t, EdgeStart start = EdgeStart::open);
double occupation_mean(std::int64_t k, const KernelSpec& kernel, const ModelParams& params, double t,
                       EdgeStart start = EdgeStart::open);

// q(T) = T^-exponent; the default exponent 2 gives q = T^-2.
struct QSchedule {
  double exponent = 2.0;
  double q(double T) const;
};

// Upper bound on 1 - delta_k(q(T), T), clamped to 1.
double b_of_T(std::int64_t k, const KernelSpec& kernel, double gamma, double T, const QSchedule& sched = {});
std::vector<TermForm> b_of_T_dominators(const KernelSpec& kernel, double gamma, double T, const QSchedule& sched = {});

struct FormulaCheck {
  std::string name;
  std::uint64_t points = 0;
  std::uint64_t failures = 0;
  double worst = 0.0;  // largest relative violation seen (<= 0 when passing)
};

struct FormulaSuiteReport {
  std::uint64_t grid_points = 0;
  double tolerance = 1e-12;
  std::vector<FormulaCheck> checks;
  bool passed() const;
};

// The closed-form inequalities on a deterministic grid over (k, lambda,
// gamma, q, T): bounds and monotonicity of a_bar, its limit on a gamma
// doubling ladder, the bound on 1 - delta and b_k(T) >= 1 - delta_k(q(T), T).
FormulaSuiteReport formula_suite(const KernelSpec& kernel, std::size_t points = 200, std::uint64_t seed = 1,
                                 double tolerance = 1e-12);

// Term forms for p_k and 1/v_k valid beyond kernel.head_length().
TermForm p_dominator(const KernelSpec& kernel);
TermForm inv_v_dominator(const KernelSpec& kernel);

}  // namespace cpdlp
