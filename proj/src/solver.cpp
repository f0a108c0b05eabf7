#include "hessolve/solver.hpp"

#include "hessolve/bounds.hpp"
#include "hessolve/errors.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <thread>

namespace hessolve {

namespace {

constexpr double kPivotThreshold = 1e-13;
constexpr double kClipBand = 1e-12;

// Inverse of a censored block via partial-pivoted LU. A pivot below
// kPivotThreshold * max|a| means the levels up to n cannot be censored.
Matrix invert_censored_block(const Matrix& a, Level n) {
  const double scale = a.cwiseAbs().maxCoeff();
  Eigen::PartialPivLU<Matrix> lu(a);
  const auto pivots = lu.matrixLU().diagonal().cwiseAbs();
  if (!(scale > 0.0) || !(pivots.minCoeff() >= kPivotThreshold * scale))
    throw ModelError("singular censored block at level " + std::to_string(n) +
                     (n == 0 ? ": level 0 not transient under censoring"
                             : ": prefix up to this level is not censorable"));
  return lu.inverse();
}

// Rounding can leave entries slightly below zero in matrices that are
// nonnegative in exact arithmetic; anything beyond the band is a breakdown.
void clip_nonnegative(Matrix& m, Level n) {
  if (m.size() == 0) return;
  const double band = kClipBand * m.cwiseAbs().maxCoeff();
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      double& x = m(i, j);
      if (x < 0.0) {
        if (x < -band)
          throw NumericalBreakdown("negative sojourn-time entry " + std::to_string(x) +
                                   " at level " + std::to_string(n));
        x = 0.0;
      }
    }
}

void check_ustar(const Vector& u, Level n) {
  for (Eigen::Index i = 0; i < u.size(); ++i)
    if (!(u(i) > 0.0))
      throw NumericalBreakdown("u*_" + std::to_string(n) + " lost positivity at phase " +
                               std::to_string(i) + " (value " + std::to_string(u(i)) + ")");
}

// sum_{m>n} Q_{k,m} e, or nullopt when only a bound is available.
std::optional<Vector> exact_tail(const BlockGenerator& gen, Level k, Level n) {
  static const StateFunction one = [](Level, int) { return 1.0; };
  try {
    TailSum t = tail_weighted_sum(gen, one, k, n);
    if (!t.exact) return std::nullopt;
    return std::move(t.values);
  } catch (const CapabilityError&) {
    return std::nullopt;
  }
}

// Killing rate of level n: the part of each row sum below zero.
Vector deficit(const BlockGenerator& gen, Level n, const Vector& up) {
  Vector sums = gen.block(n, n).rowwise().sum() + up;
  if (n > 0) sums += gen.block(n, n - 1).rowwise().sum();
  return (-sums).cwiseMax(0.0);
}

// Rate of leaving levels 0..n from level n: upward jumps plus killing.
std::optional<Vector> upward_leak(const BlockGenerator& gen, Level n) {
  auto up = exact_tail(gen, n, n);
  if (!up) return std::nullopt;
  return Vector(*up + deficit(gen, n, *up));
}

// The bracket is an M-matrix whose row sums are the rates of leaving
// levels 0..n upward. Forming them by subtraction loses about eps * u*_n
// relative accuracy, and u*_n grows geometrically for stable chains, so the
// diagonal is rebuilt from row sums made of nonnegative terms only.
void rebuild_diagonal(Matrix& bracket, const Vector& row_sums) {
  for (Eigen::Index i = 0; i < bracket.rows(); ++i) {
    double off = 0.0;
    for (Eigen::Index j = 0; j < bracket.cols(); ++j)
      if (j != i) off += bracket(i, j);
    bracket(i, i) = row_sums(i) - off;
  }
}

}  // namespace

SolverState init_state(const BlockGenerator& gen) {
  SolverState state;
  state.n = 0;
  Matrix bracket = -gen.block(0, 0);
  if (auto leak = upward_leak(gen, 0)) rebuild_diagonal(bracket, *leak);
  Matrix u0 = invert_censored_block(bracket, 0);
  clip_nonnegative(u0, 0);
  state.ustar = u0.rowwise().sum();
  check_ustar(state.ustar, 0);
  state.ustar_nk.push_back(std::move(u0));
  return state;
}

SolverState advance(SolverState state, const BlockGenerator& gen, int threads) {
  const Level n = state.n + 1;
  const Matrix down = gen.block(n, n - 1);  // Q_{n,n-1}

  // sum_{l<n} U*_{n-1,l} Q_{l,n}; only l with l + B >= n contribute.
  const auto bw = gen.upper_bandwidth();
  const Level lo = bw ? std::max(0, n - *bw) : 0;
  Matrix feed = Matrix::Zero(state.width(), gen.level_dim(n));
  for (Level l = lo; l < n; ++l) feed.noalias() += state.ustar_nk[l] * gen.block(l, n);

  Matrix bracket = -gen.block(n, n);
  bracket.noalias() -= down * feed;
  if (auto leak = upward_leak(gen, n)) {
    // Chance that the censored chain started in level n-1 never enters
    // level n: it jumps past n or is killed. Killing is only looked for
    // inside the band; validated generators have none anywhere.
    Vector above = Vector::Zero(state.width());
    bool exact = true;
    for (Level l = bw ? std::max(0, n - *bw + 1) : 0; l < n && exact; ++l) {
      const auto t = exact_tail(gen, l, n);
      const auto up = exact_tail(gen, l, l);
      if (!t || !up) exact = false;
      else above.noalias() += state.ustar_nk[l] * (*t + deficit(gen, l, *up));
    }
    if (exact) rebuild_diagonal(bracket, *leak + down * above);
  }
  Matrix un = invert_censored_block(bracket, n);
  clip_nonnegative(un, n);

  const Matrix lift = un * down;  // U*_n Q_{n,n-1}

  auto update = [&](Level from, Level to) {
    for (Level k = from; k < to; ++k) {
      Matrix next = lift * state.ustar_nk[k];
      clip_nonnegative(next, n);
      state.ustar_nk[k] = std::move(next);
    }
  };

  const int workers = std::clamp(threads, 1, std::max(1, n / 8));
  if (workers <= 1) {
    update(0, n);
  } else {
    std::vector<std::thread> pool;
    const Level chunk = (n + workers - 1) / workers;
    for (int t = 0; t < workers; ++t) {
      const Level from = t * chunk;
      const Level to = std::min<Level>(n, from + chunk);
      if (from < to) pool.emplace_back(update, from, to);
    }
    for (auto& th : pool) th.join();
  }

  Vector ustar = un * (Vector::Ones(un.rows()) + down * state.ustar);
  check_ustar(ustar, n);

  state.ustar_nk.push_back(std::move(un));
  state.ustar = std::move(ustar);
  state.n = n;
  return state;
}

AlphaChoice optimal_alpha(const SolverState& state, const Vector& y) {
  const int m = state.width();
  if (y.size() != m) throw ContractError("optimal_alpha: y has the wrong width");
  int best = 0;
  double best_ratio = y(0) / state.ustar(0);
  for (int j = 1; j < m; ++j) {
    const double ratio = y(j) / state.ustar(j);
    if (ratio < best_ratio) {
      best = j;
      best_ratio = ratio;
    }
  }
  AlphaChoice out;
  out.j_star = best;
  out.alpha = RowVector::Zero(m);
  out.alpha(best) = 1.0;
  return out;
}

LevelVector approximation(const SolverState& state, const RowVector& alpha) {
  const int m = state.width();
  if (alpha.size() != m) throw ContractError("augmentation vector has the wrong width");
  if ((alpha.array() < 0.0).any() || std::abs(alpha.sum() - 1.0) > 1e-12)
    throw ContractError("augmentation vector must be a probability vector");

  LevelVector out;
  out.kind = Interpretation::probability;
  out.segments.reserve(state.ustar_nk.size());

  // Indicator rows are copied exactly, so the sum is one up to rounding of
  // the individual divisions.
  int nonzero = 0, hot = 0;
  for (int j = 0; j < m; ++j)
    if (alpha(j) != 0.0) {
      ++nonzero;
      hot = j;
    }
  if (nonzero == 1) {
    const double denom = state.ustar(hot);
    for (const auto& blk : state.ustar_nk) out.segments.emplace_back(blk.row(hot) / denom);
    return out;
  }

  const double denom = alpha.dot(state.ustar);
  for (const auto& blk : state.ustar_nk) out.segments.emplace_back((alpha * blk) / denom);
  return out;
}

double tv_distance(const LevelVector& p, const LevelVector& q) {
  const RowVector a = p.flatten();
  const RowVector b = q.flatten();
  const Eigen::Index common = std::min(a.size(), b.size());
  double s = (a.head(common) - b.head(common)).cwiseAbs().sum();
  s += a.tail(a.size() - common).cwiseAbs().sum();
  s += b.tail(b.size() - common).cwiseAbs().sum();
  return s;
}

TruncationSchedule TruncationSchedule::arithmetic(int step, std::optional<Level> cap) {
  if (step < 1) throw ContractError("arithmetic schedule step must be >= 1");
  TruncationSchedule s;
  s.kind = Kind::arithmetic;
  s.step = step;
  s.first = step;
  s.cap = cap;
  return s;
}

TruncationSchedule TruncationSchedule::geometric(double ratio, Level first,
                                                 std::optional<Level> cap) {
  if (!(ratio > 1.0)) throw ContractError("geometric schedule ratio must exceed 1");
  if (first < 1) throw ContractError("schedule must start at level >= 1");
  TruncationSchedule s;
  s.kind = Kind::geometric;
  s.ratio = ratio;
  s.first = first;
  s.cap = cap;
  return s;
}

TruncationSchedule TruncationSchedule::parse(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos)
    throw ContractError("schedule must look like arithmetic:STEP or geometric:RATIO");
  const std::string kind = text.substr(0, colon);
  const std::string arg = text.substr(colon + 1);
  try {
    std::size_t used = 0;
    if (kind == "arithmetic") {
      const int step = std::stoi(arg, &used);
      if (used != arg.size()) throw std::invalid_argument(arg);
      return arithmetic(step);
    }
    if (kind == "geometric") {
      const double ratio = std::stod(arg, &used);
      if (used != arg.size()) throw std::invalid_argument(arg);
      return geometric(ratio);
    }
  } catch (const ContractError&) {
    throw;
  } catch (const std::exception&) {
    throw ContractError("bad schedule parameter '" + arg + "'");
  }
  throw ContractError("unknown schedule kind '" + kind + "'");
}

Level TruncationSchedule::next(Level current) const {
  if (kind == Kind::arithmetic) return current + step;
  const auto grown = static_cast<Level>(std::ceil(current * ratio));
  return std::max(current + 1, grown);
}

std::string TruncationSchedule::describe() const {
  std::ostringstream os;
  if (kind == Kind::arithmetic)
    os << "arithmetic:" << step;
  else
    os << "geometric:" << ratio << " from " << first;
  if (cap) os << " cap " << *cap;
  return os.str();
}

namespace {

struct Choice {
  RowVector alpha;
  std::optional<int> j_star;
  std::optional<double> r;
  bool y_upper_bound = false;
  std::optional<double> bound;
  std::optional<double> computable;
};

using Chooser = std::function<Choice(const SolverState&)>;

SolveResult drive(const BlockGenerator& gen, const TruncationSchedule& schedule, double epsilon,
                  const Chooser& choose, const RunOptions& options) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ContractError("epsilon must lie in (0,1)");
  if (schedule.first_level() < 1) throw ContractError("schedule must start at level >= 1");
  if (schedule.cap && *schedule.cap < schedule.first_level())
    throw ContractError("schedule cap lies below the first checkpoint");

  SolverState state = options.resume ? *options.resume : init_state(gen);
  Level target = schedule.first_level();
  while (target < state.n || (state.last_checkpoint && target <= state.last_checkpoint->level))
    target = schedule.next(target);

  SolveResult result;
  std::optional<SolverState::Checkpoint> previous = state.last_checkpoint;
  if (previous) {
    result.pi_hat = previous->pi_hat;
    result.stop_level = previous->level;
  }

  while (true) {
    if (schedule.cap && target > *schedule.cap) break;
    while (state.n < target) state = advance(std::move(state), gen, options.threads);

    Choice c = choose(state);
    LevelVector pi = approximation(state, c.alpha);

    result.checkpoints.push_back(state.n);
    if (c.j_star) result.j_star_history.push_back(*c.j_star);
    if (c.r) result.r_history.push_back(*c.r);
    result.y_upper_bound = result.y_upper_bound || c.y_upper_bound;
    result.bound = c.bound;
    result.computable_bound = c.computable;

    bool done = false;
    if (previous) {
      const double tv = tv_distance(pi, previous->pi_hat);
      result.tv_history.push_back(tv);
      done = tv < epsilon;
    }
    previous = SolverState::Checkpoint{state.n, pi};
    state.last_checkpoint = previous;
    result.pi_hat = std::move(pi);
    result.stop_level = state.n;
    if (done) {
      result.converged = true;
      break;
    }
    target = schedule.next(target);
  }
  result.final_state = std::move(state);
  return result;
}

}  // namespace

SolveResult run(const BlockGenerator& gen, const DriftCertificate& cert,
                const TruncationSchedule& schedule, double epsilon, const RunOptions& options) {
  Chooser choose = [&](const SolverState& state) {
    const YVector y = compute_y(state, gen, cert);
    AlphaChoice best = optimal_alpha(state, y.values);
    const ErrorBound eb = error_bound(state, cert, best.alpha, y.values);
    Choice c;
    c.j_star = best.j_star;
    c.r = residual(state, best.alpha, y.values);
    c.y_upper_bound = y.upper_bound;
    c.bound = eb.E;
    c.computable = eb.computable_part;
    c.alpha = std::move(best.alpha);
    return c;
  };
  return drive(gen, schedule, epsilon, choose, options);
}

SolveResult run_fixed_alpha(const BlockGenerator& gen, const TruncationSchedule& schedule,
                            double epsilon, const AlphaRule& rule, const RunOptions& options) {
  Chooser choose = [&](const SolverState& state) {
    Choice c;
    c.alpha = rule(state.n, state.width());
    int nonzero = 0;
    for (Eigen::Index j = 0; j < c.alpha.size(); ++j)
      if (c.alpha(j) != 0.0) {
        ++nonzero;
        c.j_star = static_cast<int>(j);
      }
    if (nonzero != 1) c.j_star.reset();
    return c;
  };
  return drive(gen, schedule, epsilon, choose, options);
}

}  // namespace hessolve
