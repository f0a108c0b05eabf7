#include "hessolve/bounds.hpp"

#include "hessolve/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace hessolve {

LyapunovFunction LyapunovFunction::affine(double a, double b,
                                          std::vector<std::vector<double>> offsets) {
  LyapunovFunction f;
  f.kind = Kind::affine;
  f.a = a;
  f.b = b;
  f.offsets = std::move(offsets);
  return f;
}

LyapunovFunction LyapunovFunction::log(double scale) {
  LyapunovFunction f;
  f.kind = Kind::log;
  f.scale = scale;
  return f;
}

LyapunovFunction LyapunovFunction::geometric(double base, double c, double gamma, int last_phase) {
  LyapunovFunction f;
  f.kind = Kind::geometric;
  f.base = base;
  f.c = c;
  f.gamma = gamma;
  f.last_phase = last_phase;
  return f;
}

LyapunovFunction LyapunovFunction::custom(StateFunction fn) {
  LyapunovFunction f;
  f.kind = Kind::custom;
  f.fn = std::move(fn);
  return f;
}

double LyapunovFunction::operator()(Level k, int i) const {
  switch (kind) {
    case Kind::affine: {
      double v = a + b * k;
      if (!offsets.empty()) {
        const auto& row = offsets[static_cast<std::size_t>(k) % offsets.size()];
        if (i >= 0 && static_cast<std::size_t>(i) < row.size()) v += row[i];
      }
      return v;
    }
    case Kind::log:
      return scale * std::log(k + std::numbers::e);
    case Kind::geometric: {
      const double g = std::pow(base, k) / c;
      return i >= last_phase ? g / gamma : g;
    }
    case Kind::custom:
      return fn(k, i);
  }
  return 0.0;
}

StateFunction LyapunovFunction::function() const {
  return [self = *this](Level k, int i) { return self(k, i); };
}

std::string LyapunovFunction::describe() const {
  std::ostringstream os;
  os.precision(17);
  switch (kind) {
    case Kind::affine:
      os << "affine " << a << " " << b;
      if (!offsets.empty()) os << " (with " << offsets.size() << "-periodic phase offsets)";
      break;
    case Kind::log:
      os << "log " << scale;
      break;
    case Kind::geometric:
      os << "geometric " << base << " " << c << " " << gamma << " " << last_phase;
      break;
    case Kind::custom:
      os << "custom";
      break;
  }
  return os.str();
}

bool DriftCertificate::in_c(Level k, int i) const {
  if (k > c_max_level) return false;
  return c_phases.empty() || std::find(c_phases.begin(), c_phases.end(), i) != c_phases.end();
}

namespace {

struct Drift {
  Vector qv;
  Vector magnitude;
};

// (Qv)_k and sum_l |Q_{k,l}| v_l for the certificate's v.
Drift drift_at(const BlockGenerator& gen, const StateFunction& v, Level k) {
  const int mk = gen.level_dim(k);
  Drift d{Vector::Zero(mk), Vector::Zero(mk)};
  for (Level l = std::max(0, k - 1); l <= k; ++l) {
    const Matrix blk = gen.block(k, l);
    const Vector vl = level_values(v, l, gen.level_dim(l));
    d.qv.noalias() += blk * vl;
    d.magnitude.noalias() += blk.cwiseAbs() * vl.cwiseAbs();
  }
  const TailSum t = tail_weighted_sum(gen, v, k, k);
  d.qv += t.values;
  d.magnitude += t.values.cwiseAbs();
  return d;
}

constexpr double kDriftTolerance = 1e-9;

}  // namespace

DriftReport check_drift(const BlockGenerator& gen, const DriftCertificate& cert, Level n_max) {
  DriftReport rep;
  rep.checked_prefix = n_max;
  rep.max_slack = -std::numeric_limits<double>::infinity();
  const StateFunction v = cert.function();
  for (Level k = 0; k <= n_max; ++k) {
    const Drift d = drift_at(gen, v, k);
    for (int i = 0; i < d.qv.size(); ++i) {
      const double rhs = -1.0 + (cert.in_c(k, i) ? cert.b : 0.0);
      const double slack = d.qv(i) - rhs;
      rep.max_slack = std::max(rep.max_slack, slack);
      if (slack > kDriftTolerance * std::max(1.0, d.magnitude(i)))
        rep.violations.push_back(DriftViolation{k, i, slack});
    }
  }
  return rep;
}

YVector compute_y(const SolverState& state, const BlockGenerator& gen,
                  const DriftCertificate& cert) {
  const Level n = state.n;
  const StateFunction v = cert.function();
  YVector y{level_values(v, n, state.width()), false};
  // Levels k with k + B <= n have nothing above n.
  const auto bw = gen.upper_bandwidth();
  const Level lo = bw ? std::max(0, n - *bw + 1) : 0;
  for (Level k = lo; k <= n; ++k) {
    const TailSum t = tail_weighted_sum(gen, v, k, n);
    if (!t.exact) y.upper_bound = true;
    y.values.noalias() += state.ustar_nk[k] * t.values;
  }
  return y;
}

double residual(const SolverState& state, const RowVector& alpha, const Vector& y) {
  if (alpha.size() != state.width() || y.size() != state.width())
    throw ContractError("residual: width mismatch");
  return alpha.dot(y) / alpha.dot(state.ustar);
}

ErrorBound error_bound(const SolverState& state, const DriftCertificate& cert,
                       const RowVector& alpha, const Vector& y) {
  ErrorBound out;
  const double r = residual(state, alpha, y);
  out.computable_part = 2.0 * r;
  if (cert.beta && cert.phi_bar) {
    const double mass = alpha.dot(state.ustar);
    out.E = 2.0 * (r + (1.0 / mass) * (2.0 * cert.b / (*cert.beta * *cert.phi_bar)));
  }
  return out;
}

std::vector<double> condition2_partial(const BlockGenerator& gen, const DriftCertificate& cert,
                                       const LevelVector& pi_hat) {
  std::vector<double> sums;
  sums.reserve(pi_hat.segments.size());
  double acc = 0.0;
  for (Level k = 0; k < pi_hat.levels(); ++k) {
    const Matrix qkk = gen.block(k, k);
    const RowVector& pk = pi_hat.segments[k];
    for (Eigen::Index i = 0; i < pk.size(); ++i)
      acc += pk(i) * std::abs(qkk(i, i)) * cert.v(k, static_cast<int>(i));
    sums.push_back(acc);
  }
  return sums;
}

DriftCertificate bmap_certificate(const models::BMAPSpec& spec, Level horizon) {
  spec.validate();
  if (horizon < 2) throw ContractError("bmap_certificate: horizon too small");
  const models::BmapGenerator gen(spec);

  // Asymptotically (Qv)_k -> -scale * mu, so scale >= 2/mu leaves room below -1.
  DriftCertificate cert;
  cert.v = LyapunovFunction::log(std::max(1.0, 2.0 / spec.mu));
  cert.v_inf_floor = cert.v.scale;  // log(e) at level 0

  const StateFunction v = cert.function();
  std::vector<double> worst;
  worst.reserve(horizon + 1);
  Level last_bad = -1;
  for (Level k = 0; k <= horizon; ++k) {
    worst.push_back(drift_at(gen, v, k).qv.maxCoeff());
    if (worst.back() > -1.0) last_bad = k;
  }
  if (last_bad < 0) last_bad = 0;
  if (last_bad > horizon / 2)
    throw CertificateError("no level beyond which the log drift stays below -1 was found within " +
                           std::to_string(horizon) + " levels");

  double bmax = 0.0;
  for (Level k = 0; k <= last_bad; ++k) bmax = std::max(bmax, worst[k] + 1.0);
  cert.c_max_level = last_bad;
  cert.b = 1.1 * bmax;
  if (!(cert.b > 0.0)) cert.b = 0.1;
  return cert;
}

DriftCertificate retrial_certificate(const models::RetrialSpec& spec) {
  spec.validate();
  const double rho = spec.rho();
  if (!(rho < 1.0))
    throw StabilityError("retrial queue is unstable: rho = " + std::to_string(rho) + " >= 1");
  const double lambda = spec.lambda, eta = spec.eta;
  const double smu = spec.s * spec.mu;

  // Midpoints of the admissible open intervals.
  const double alpha = 0.5 * (1.0 + 1.0 / rho);
  const double gamma = 0.5 * (1.0 / alpha + (1.0 - rho * (alpha - 1.0)));
  const double c = smu * (1.0 - rho * (alpha - 1.0) - gamma);

  const double denom = eta * (1.0 - 1.0 / (gamma * alpha));
  const double x = (c + lambda * (1.0 / gamma - 1.0)) / denom;
  const Level K = std::max<Level>(static_cast<Level>(std::ceil(x)), 1) - 1;

  double b = 0.0;
  for (Level k = 0; k <= K; ++k) {
    const double term =
        std::pow(alpha, k) *
        (1.0 - (k * eta * (1.0 - 1.0 / (gamma * alpha)) + lambda * (1.0 - 1.0 / gamma)) / c);
    b = std::max(b, term);
  }

  DriftCertificate cert;
  cert.v = LyapunovFunction::geometric(alpha, c, gamma, spec.s);
  cert.v_inf_floor = 1.0 / c;
  cert.b = b;
  cert.c_max_level = K;
  return cert;
}

DriftCertificate counterexample_certificate(const models::CounterexampleSpec& spec) {
  spec.validate();
  const models::CounterexampleGenerator gen(spec);

  // v(k,i) = 1 + k + h(k mod 2, i). Phase 1 at even levels can only move up,
  // so it needs extra height to show negative drift there.
  DriftCertificate cert;
  cert.v = LyapunovFunction::affine(1.0, 1.0, {{0.0, 5.0}, {0.0, 6.0}});
  cert.v_inf_floor = 1.0;

  const StateFunction v = cert.function();
  // Rows are 2-periodic from level 1 on, so levels 0..4 see every case.
  Level last_bad = 0;
  double bmax = 0.0;
  for (Level k = 0; k <= 4; ++k) {
    const double worst = drift_at(gen, v, k).qv.maxCoeff();
    if (worst > -1.0) {
      if (k > 0)
        throw CertificateError("parity certificate fails at level " + std::to_string(k) +
                               " for these rates");
      last_bad = k;
    }
    if (k <= last_bad) bmax = std::max(bmax, worst + 1.0);
  }
  cert.c_max_level = last_bad;
  cert.b = bmax > 0.0 ? 1.1 * bmax : 0.1;
  return cert;
}

DriftCertificate mm1_certificate(double lambda, double mu) {
  if (!(lambda > 0.0) || !(mu > lambda))
    throw StabilityError("M/M/1 certificate needs 0 < lambda < mu");
  const double gap = mu - lambda;
  DriftCertificate cert;
  cert.v = LyapunovFunction::affine(1.0 / gap, 1.0 / gap);
  cert.v_inf_floor = 1.0 / gap;
  cert.b = mu / gap;
  cert.c_max_level = 0;
  return cert;
}

}  // namespace hessolve
