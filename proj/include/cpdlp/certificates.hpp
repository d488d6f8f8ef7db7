#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cpdlp/blocks.hpp"
#include "cpdlp/engine.hpp"
#include "cpdlp/model.hpp"
#include "cpdlp/percolation.hpp"
#include "cpdlp/stats.hpp"

namespace cpdlp {

// ---------------------------------------------------------------------------
// Immunization side: the graph G1 on V x N0 and the process Y.

struct G1Level {
  // X_{e,n} = 1 - w'_n(e) for covered edges, U_{x,n} = no recovery at x in block n.
  std::function<bool(const Edge&)> X;
  std::function<bool(Vertex)> U;
  std::function<bool(Vertex)> in_window;
  std::int64_t cutoff = 1;
};

// Y_{n+1} from Y_n: the X-closure of Y_n at level n, keeping the members that
// carry a vertical edge (U = 1 or some incident X edge).
VertexSet y_step(const VertexSet& Y, const G1Level& level);

struct YRun {
  std::vector<VertexSet> Y;        // Y_0 .. Y_generations
  std::vector<VertexSet> ctilde;   // C~ at nT when checked
  std::uint64_t violations = 0;    // n with C~_{nT} not inside Y_n
};

struct YOptions {
  Window window = Window::symmetric(20, 10);
  BackgroundInit init = BackgroundInit::stationary;
};

// Y driven by w' of a stationary background and the recovery streams of the
// same EventLog that drives C~.
YRun simulate_Y(const VertexSet& Y0, double T, const KernelSpec& kernel, const ModelParams& params, int generations,
                std::uint64_t seed, bool with_containment_check, const YOptions& opts = {});

struct MeanEstimate {
  double mean = 0.0;
  double stderr_ = 0.0;
  Interval ci;
  double bias_bound = 0.0;   // certified bound on the truncation bias, already inside ci.hi
  std::uint64_t replicas = 0;
};

struct EY1Options {
  double confidence = 0.99;
  std::int64_t cutoff = 0;   // 0: chosen so that the truncation bias is below 1e-3 of the CI width
  unsigned workers = 1;
};

// E[|Y_1| | Y_0 = {x}] with X_e ~ Bernoulli(1 - delta_e(q, T)) and U ~ Bernoulli(e^{-rT}).
MeanEstimate estimate_EY1(Vertex x, double T, const KernelSpec& kernel, const ModelParams& params,
                          std::uint64_t replicas, std::uint64_t seed, const EY1Options& opts = {});

// ---------------------------------------------------------------------------
// Certificates.

struct LedgerLine {
  std::string param;
  double value = 0.0;
  double threshold = 0.0;
  bool passed = false;
  double confidence = 1.0;  // 1 for analytic lines
  std::map<std::string, double> at;  // ladder coordinates (T, M, r0, ...)
  std::string note;
};

struct Corroboration {
  double mean = 0.0;
  double stderr_ = 0.0;
  Interval ci;
  std::uint64_t replicas = 0;
  bool passed = false;
};

struct Certificate {
  std::string kind;  // "immunization" | "slow-speed"
  std::map<std::string, double> inputs;
  std::vector<LedgerLine> ladder;
  bool certified = false;
  std::string verdict;  // "certified" | "no certificate found"
  std::string failing;  // last failing line when not certified
  std::map<std::string, double> output;
  std::map<std::string, std::string> output_text;  // values outside double range
  Corroboration corroboration;
  double confidence = 0.99;
  std::string confidence_statement;
};

struct Q0Options {
  double T_start = 2.0;
  double T_factor = 2.0;
  double T_max = 1 << 20;
  std::int64_t M_max = 1 << 16;
  QSchedule schedule{};
  std::uint64_t tail_replicas = 100000;
  std::uint64_t ey1_replicas = 20000;
  unsigned workers = 1;
};

Certificate find_q0(double gamma, const KernelSpec& kernel, double r, double epsilon, double confidence,
                    std::uint64_t seed, const Q0Options& opts = {});

// ---------------------------------------------------------------------------
// Slow-speed side: boxes, X / W / U and the process Z on box indices.

struct VInterval {
  Vertex lo = 0, hi = -1;
  std::int64_t size() const { return hi - lo + 1; }
  bool contains(Vertex x) const { return x >= lo && x <= hi; }
};

struct BoxGeometry {
  std::int64_t K0 = 1, r0 = 1;
  std::int64_t period() const { return 2 * K0 + r0; }
  VInterval M(std::int64_t k) const { return {k * period(), (k + 1) * period() - 1}; }
  VInterval left(std::int64_t k) const { return {k * period(), k * period() + K0 - 1}; }
  VInterval mid(std::int64_t k) const { return {k * period() + K0, k * period() + K0 + r0 - 1}; }
  VInterval right(std::int64_t k) const { return {k * period() + K0 + r0, (k + 1) * period() - 1}; }
  VInterval Dmin(std::int64_t k) const { return {right(k - 1).lo, left(k).hi}; }
  VInterval Dmax(std::int64_t k) const { return {mid(k - 1).lo, mid(k).hi}; }
};

// The partition of block n. Box indices run over [k_lo, k_hi]; cut anchors
// c_k are stored for k in [k_lo - 1, k_hi].
struct BlockPartition {
  BoxGeometry geom;
  int n = 0;
  std::int64_t k_lo = 0, k_hi = -1;
  std::vector<Vertex> anchors;
  std::vector<std::uint8_t> X;  // X_{k,n}, k in [k_lo - 1, k_hi]

  Vertex anchor(std::int64_t k) const { return anchors.at(static_cast<std::size_t>(k - k_lo + 1)); }
  bool x(std::int64_t k) const { return X.at(static_cast<std::size_t>(k - k_lo + 1)); }
  VInterval D(std::int64_t k) const { return {anchor(k - 1) + 1, anchor(k)}; }
  // Both boundaries are cuts, so only long edges leave the box.
  bool isolated(std::int64_t k) const { return !x(k - 1) && !x(k); }
  // Box of x, or nullopt if x is outside the indexed boxes.
  std::optional<std::int64_t> box_of(Vertex x) const;
};

// Short edges (length <= 2 K0) decide (n, K0)-cuts.
bool is_cut(const BlockTable& table, const BoxGeometry& g, int n, Vertex m);
BlockPartition build_partition(const BlockTable& table, const BoxGeometry& g, int n, std::int64_t k_lo,
                               std::int64_t k_hi);

struct WEntry {
  std::int64_t k = 0, l = 0;
  bool W = false, Wprime = false;
  double pW = 1.0, a = 0.0, sW = 1.0;
};

struct XWUTable {
  int n = 0;
  std::int64_t k_lo = 0, k_hi = -1;
  std::vector<std::uint8_t> U, Uprime;
  std::vector<double> pU, sU;
  double eps3 = 0.0;
  std::vector<WEntry> W;  // pairs k < l within range that some covered edge can join

  bool u(std::int64_t k) const { return U.at(static_cast<std::size_t>(k - k_lo)); }
  bool uprime(std::int64_t k) const { return Uprime.at(static_cast<std::size_t>(k - k_lo)); }
};

struct XWUOptions {
  std::uint64_t chi_seed = 0;
  std::size_t max_box = 12;          // exact p^U enumeration limit (vertices)
  std::size_t max_long_edges = 16;   // and long edges inside a box
};

// a_{k,l} restricted to pairs within the table cutoff (the truncated world
// the audits live in).
double a_pair_truncated(const BlockTable& table, const BoxGeometry& g, std::int64_t k, std::int64_t l);

// X from the partition; W, U from the realized streams; U', W' by thinning
// with the exact conditionals p^U, p^W given the short-edge information.
XWUTable build_XWU(const BlockPartition& part, const BlockTable& table, const EventLog& log, const ModelParams& params,
                   const XWUOptions& opts = {});

std::pair<BlockPartition, XWUTable> build_partition_and_XWU(const BlockTable& table, const EventLog& log,
                                                            const BoxGeometry& g, int n, std::int64_t k_lo,
                                                            std::int64_t k_hi, const ModelParams& params,
                                                            const XWUOptions& opts = {});

struct G2Level {
  std::int64_t k_lo = 0, k_hi = -1;
  std::function<bool(std::int64_t)> X;   // link k -- k+1
  std::function<bool(std::int64_t)> U;
  std::vector<std::pair<std::int64_t, std::int64_t>> W;  // active long links
};

// Z_{n+1} from Z_n under the three G2 rules, clipped to [k_lo, k_hi].
VertexSet z_step(const VertexSet& Z, const G2Level& level);

struct ZRun {
  std::vector<VertexSet> Z;       // from (X, U, W)
  std::vector<VertexSet> Zprime;  // from (X, U', W')
  std::uint64_t subset_violations = 0;      // Z_n not inside Z'_n
  std::uint64_t containment_violations = 0; // box index of C~_{nT} not in Z_n
};

// Runs both processes over the given per-block tables. If ctilde is given
// (C~ at 0, T, 2T, ...), checks box-index containment.
ZRun simulate_Zprime(const VertexSet& Z0, const std::vector<BlockPartition>& parts,
                     const std::vector<XWUTable>& tables, int generations,
                     const std::vector<VertexSet>* ctilde = nullptr);

struct ZAuditReport {
  std::uint64_t replicas = 0;
  std::uint64_t u_violations = 0, w_violations = 0, z_violations = 0;
  std::uint64_t containment_violations = 0;
  std::uint64_t ctilde_violations = 0;  // C_t not inside C~_t
  std::uint64_t partition_violations = 0;
  std::vector<double> uprime_means;  // per replica, for the independence audit
  RunningStats uprime;               // all U' draws
  RunningStats isolated;             // isolated-box indicators
  double eps3 = 0.0;
};

struct ZAuditOptions {
  std::int64_t K0 = 1, r0 = 1;
  double T = 1.0;
  int generations = 3;
  std::int64_t boxes = 6;   // box indices [-boxes, boxes]
  std::int64_t cutoff = 8;
  unsigned workers = 1;
};

ZAuditReport audit_Z(const KernelSpec& kernel, const ModelParams& params, const VertexSet& C0, std::uint64_t replicas,
                     std::uint64_t seed, const ZAuditOptions& opts = {});

struct EpsBounds {
  std::int64_t K0 = 0, r0 = 0;
  double eps1 = 1.0;            // UCB incl. the cutoff correction
  double eps1_mc = 1.0;
  double eps1_correction = 0.0;
  std::int64_t eps1_cutoff = 0;
  std::uint64_t eps1_hits = 0, eps1_replicas = 0;
  double eps2 = 1.0;
  std::vector<double> a;        // a_j = a_{k,k+j}, j = 1..J
  double a_tail = 0.0;          // certified sum_{j > J} a_j
  double a_total = 0.0;         // sum_{l != k} a_{k,l}
  double confidence = 0.99;
};

struct EpsOptions {
  std::uint64_t eps1_replicas = 4000;
  double eps1_correction_target = 1e-4;
  std::int64_t J = 8;
  unsigned workers = 1;
};

// delta_y with K0 = r0 and T = 1/gamma, which does not depend on gamma.
double delta_slow(std::int64_t y, const KernelSpec& kernel, double q);

EpsBounds eps_bounds(std::int64_t K0, std::int64_t r0, const KernelSpec& kernel, double q, std::uint64_t seed,
                     double confidence, const EpsOptions& opts = {});

// eps3 via the exact mean extinction time and Markov's inequality.
struct Eps3Bound {
  std::int64_t N = 0;
  double log_mean_time = 0.0;
  double log_gamma = 0.0;   // natural log of the gamma at which it is evaluated
  double value = 1.0;       // min(1, E[tau] gamma)
  std::optional<double> exact;  // exact tail for small N
};
Eps3Bound eps3_bound(std::int64_t K0, std::int64_t r0, double lambda, double r, double log_gamma);

struct GammaStarOptions {
  std::int64_t r0_start = 1;
  std::int64_t r0_max = 1 << 12;
  std::int64_t M_max = 1 << 10;
  EpsOptions eps{};
  std::uint64_t tail_replicas = 100000;
  std::uint64_t z_replicas = 20000;
  double r = 1.0;
  unsigned workers = 1;
};

Certificate find_gamma_star(double lambda, double q, const KernelSpec& kernel, double epsilon, double confidence,
                            std::uint64_t seed, const GammaStarOptions& opts = {});

// One draw of |Z'_1| from Z'_0 = {0} with independent X, U' ~ Bernoulli(eps3),
// W'_{k,l} ~ Bernoulli(a_{|k-l|}).
std::size_t sample_Zprime1(const EpsBounds& eb, const KernelSpec& kernel, double q, double eps3, Rng& rng);

}  // namespace cpdlp
