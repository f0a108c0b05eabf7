#pragma once

// Foster-Lyapunov drift certificates Qv <= -e + b 1_C, the LFP data y_n and
// r_n, and the total-variation error bound of an LBCL-augmented truncation.

#include "hessolve/block_chain.hpp"
#include "hessolve/models.hpp"
#include "hessolve/solver.hpp"

#include <optional>
#include <string>
#include <vector>

namespace hessolve {

// Closed-form Lyapunov functions that can be written to a model file.
//   affine:    a + b*k (+ offsets[k mod P][i] when offsets are given)
//   log:       scale * log(k + e)
//   geometric: base^k / c for phases below last_phase, base^k / (c*gamma) at it
// `custom` wraps an arbitrary callable and is not serializable.
struct LyapunovFunction {
  enum class Kind { affine, log, geometric, custom };

  Kind kind = Kind::affine;
  double a = 1.0;
  double b = 0.0;
  std::vector<std::vector<double>> offsets;
  double scale = 1.0;
  double base = 1.0;
  double c = 1.0;
  double gamma = 1.0;
  int last_phase = 0;
  StateFunction fn;

  static LyapunovFunction affine(double a, double b, std::vector<std::vector<double>> offsets = {});
  static LyapunovFunction log(double scale = 1.0);
  static LyapunovFunction geometric(double base, double c, double gamma, int last_phase);
  static LyapunovFunction custom(StateFunction f);

  double operator()(Level k, int i) const;
  StateFunction function() const;
  std::string describe() const;
};

struct DriftCertificate {
  LyapunovFunction v;
  double v_inf_floor = 1.0;
  double b = 1.0;
  // C = {(k,i) : k <= c_max_level, i in c_phases}; empty c_phases means all.
  Level c_max_level = 0;
  std::vector<int> c_phases;
  std::optional<double> beta;
  std::optional<double> phi_bar;

  bool in_c(Level k, int i) const;
  StateFunction function() const { return v.function(); }
};

struct DriftViolation {
  Level level;
  int phase;
  double slack;  // (Qv)(k,i) - (-1 + b 1_C(k,i)) > 0
};

struct DriftReport {
  Level checked_prefix = 0;
  std::vector<DriftViolation> violations;
  double max_slack = 0.0;
  bool ok() const { return violations.empty(); }
};

// Evaluates (Qv)_k for k = 0..n_max and lists every state where the drift
// inequality fails by more than 1e-9 relative to the row's magnitude.
DriftReport check_drift(const BlockGenerator& gen, const DriftCertificate& cert, Level n_max);

struct YVector {
  Vector values;
  // True when a tail hook only supplied an upper bound (the y-bar variant).
  bool upper_bound = false;
};

// y_n = v_n + sum_k U*_{n,k} sum_{l>n} Q_{k,l} v_l.
YVector compute_y(const SolverState& state, const BlockGenerator& gen,
                  const DriftCertificate& cert);

// r_n(alpha) = alpha y / alpha u*.
double residual(const SolverState& state, const RowVector& alpha, const Vector& y);

struct ErrorBound {
  std::optional<double> E;
  double computable_part = 0.0;
};

// E(n) = 2 (r_n(alpha) + 2b / (beta phi_bar alpha u*)). Only the first term is
// computable without the user-supplied phi_bar.
ErrorBound error_bound(const SolverState& state, const DriftCertificate& cert,
                       const RowVector& alpha, const Vector& y);

// Partial sums of sum_k pi_k Delta_k v_k with Delta_k = |diag Q_{k,k}|.
std::vector<double> condition2_partial(const BlockGenerator& gen, const DriftCertificate& cert,
                                       const LevelVector& pi_hat);

// Log-type certificate for BMAP/M/inf. C and b are found by scanning levels
// up to `horizon`.
DriftCertificate bmap_certificate(const models::BMAPSpec& spec, Level horizon = 1000);

// Geometric certificate for the stable M/M/s retrial queue.
DriftCertificate retrial_certificate(const models::RetrialSpec& spec);

// Parity-dependent affine certificate for the counterexample chain.
DriftCertificate counterexample_certificate(const models::CounterexampleSpec& spec = {});

// v_k = (k+1)/(mu-lambda), b = mu/(mu-lambda), C = level 0.
DriftCertificate mm1_certificate(double lambda, double mu);

}  // namespace hessolve
