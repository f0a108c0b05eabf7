#pragma once

// Sequential-update solver for the stationary vector of an upper
// block-Hessenberg chain via last-block-column linearly augmented
// truncations.
//
// The state at level n holds
//   U*_{n,k}, k = 0..n   (M_n x M_k, entry n is U*_n)
//   u*_n = sum_k U*_{n,k} e
// where U*_{n,k} is the bottom block-row of (-(n)Q)^{-1}. Row i of U*_{n,k}
// is the expected time spent in level k, started from (n,i), before the chain
// first leaves levels 0..n.

#include "hessolve/block_chain.hpp"

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace hessolve {

struct DriftCertificate;

struct SolverState {
  struct Checkpoint {
    Level level = 0;
    LevelVector pi_hat;
  };

  Level n = 0;
  std::vector<Matrix> ustar_nk;
  Vector ustar;
  std::optional<Checkpoint> last_checkpoint;

  const Matrix& ustar_nn() const { return ustar_nk.back(); }
  int width() const { return static_cast<int>(ustar.size()); }
};

SolverState init_state(const BlockGenerator& gen);

// One level up. `threads > 1` splits the U*_{n,k} updates across workers; the
// result does not depend on the thread count.
SolverState advance(SolverState state, const BlockGenerator& gen, int threads = 1);

struct AlphaChoice {
  int j_star = 0;
  RowVector alpha;
};

// Indicator at argmin_j y(j)/u*(j), smallest index on ties.
AlphaChoice optimal_alpha(const SolverState& state, const Vector& y);

// (n)pi_hat_k = alpha U*_{n,k} / (alpha u*_n).
LevelVector approximation(const SolverState& state, const RowVector& alpha);

// Sum of absolute differences, shorter vector padded with zeros.
double tv_distance(const LevelVector& p, const LevelVector& q);

struct TruncationSchedule {
  enum class Kind { arithmetic, geometric };

  Kind kind = Kind::arithmetic;
  int step = 10;
  double ratio = 2.0;
  Level first = 10;
  std::optional<Level> cap = 10000;

  static TruncationSchedule arithmetic(int step, std::optional<Level> cap = 10000);
  static TruncationSchedule geometric(double ratio, Level first = 10,
                                      std::optional<Level> cap = 10000);
  // "arithmetic:STEP" or "geometric:RATIO".
  static TruncationSchedule parse(const std::string& text);

  Level first_level() const { return first; }
  Level next(Level current) const;
  std::string describe() const;
};

struct SolveResult {
  LevelVector pi_hat;
  Level stop_level = 0;
  std::vector<Level> checkpoints;
  std::vector<int> j_star_history;
  std::vector<double> r_history;
  std::vector<double> tv_history;
  bool converged = false;
  // Set when some tail sum was only an upper bound.
  bool y_upper_bound = false;
  std::optional<double> bound;
  std::optional<double> computable_bound;
  SolverState final_state;
};

struct RunOptions {
  int threads = 1;
  // Continue from a saved state instead of level 0.
  std::optional<SolverState> resume;
};

// Sequential update with the LFP-optimal augmentation at every checkpoint.
// Stops once two consecutive checkpoints are closer than epsilon in total
// variation, or when the schedule cap is reached (converged == false).
SolveResult run(const BlockGenerator& gen, const DriftCertificate& cert,
                const TruncationSchedule& schedule, double epsilon, const RunOptions& options = {});

// Augmentation distribution supplied by the caller: (level, width) -> row.
using AlphaRule = std::function<RowVector(Level, int)>;

SolveResult run_fixed_alpha(const BlockGenerator& gen, const TruncationSchedule& schedule,
                            double epsilon, const AlphaRule& rule, const RunOptions& options = {});

// Full-precision text form of a solver state.
void save_state(const SolverState& state, std::ostream& os);
SolverState load_state(std::istream& is);

}  // namespace hessolve
