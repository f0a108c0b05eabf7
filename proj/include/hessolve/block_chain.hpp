#pragma once

// Block-partitioned generators of upper block-Hessenberg chains, level
// vectors, structural validation and finite-prefix assembly.

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace hessolve {

using Level = int;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

// Lyapunov-type function on states: (level, phase) -> value.
using StateFunction = std::function<double(Level, int)>;

// Column vector (v(k,0), ..., v(k,dim-1)).
Vector level_values(const StateFunction& v, Level k, int dim);

// Result of sum_{l>n} Q_{k,l} v_l. `exact == false` means the value is only an
// elementwise upper bound.
struct TailSum {
  Vector values;
  bool exact = true;
};

// Lazily queried generator Q = (Q_{k,l}). Implementations must be immutable
// after construction; every query is a pure function of its arguments.
//
// block(k, l) is defined for every pair of nonnegative levels and returns a
// zero block (of shape M_k x M_l) wherever the model has no transitions.
class BlockGenerator {
 public:
  virtual ~BlockGenerator() = default;

  virtual int level_dim(Level k) const = 0;
  virtual Matrix block(Level k, Level l) const = 0;

  // Largest B with Q_{k,k+B} possibly nonzero; nullopt for unbounded reach.
  virtual std::optional<int> upper_bandwidth() const = 0;

  // sum_{l>n} Q_{k,l} v_l for generators with unbounded reach. The default
  // has no hook.
  virtual std::optional<TailSum> tail(Level k, Level n, const StateFunction& v) const;

  virtual std::string name() const { return "generator"; }

  // Highest level l with Q_{k,l} possibly nonzero, or nullopt if unbounded.
  std::optional<Level> reach(Level k) const;
};

// Generator assembled from callables. Handy for tests and for models that
// do not deserve their own class.
class FunctionGenerator : public BlockGenerator {
 public:
  using DimFn = std::function<int(Level)>;
  using BlockFn = std::function<Matrix(Level, Level)>;
  using TailFn = std::function<TailSum(Level, Level, const StateFunction&)>;

  FunctionGenerator(std::string name, DimFn dim, BlockFn block, std::optional<int> bandwidth,
                    TailFn tail = {});

  int level_dim(Level k) const override { return dim_(k); }
  Matrix block(Level k, Level l) const override;
  std::optional<int> upper_bandwidth() const override { return bandwidth_; }
  std::optional<TailSum> tail(Level k, Level n, const StateFunction& v) const override;
  std::string name() const override { return name_; }

 private:
  std::string name_;
  DimFn dim_;
  BlockFn block_;
  std::optional<int> bandwidth_;
  TailFn tail_;
};

enum class Interpretation { probability, sub_probability, signed_values };

// Row vector partitioned by level; segment k has width M_k.
struct LevelVector {
  std::vector<RowVector> segments;
  Interpretation kind = Interpretation::probability;

  Level levels() const { return static_cast<Level>(segments.size()); }
  Eigen::Index size() const;
  double total() const;
  double level_mass(Level k) const { return segments.at(k).sum(); }
  RowVector flatten() const;

  // Nonnegative with unit total within `tol`.
  bool is_probability(double tol = 1e-12) const;
  // Segment widths agree with gen's level dimensions.
  bool matches(const BlockGenerator& gen) const;

  static LevelVector from_flat(const RowVector& flat, const std::vector<int>& dims,
                               Interpretation kind = Interpretation::probability);
};

struct Violation {
  enum class Kind { dimension, sub_sub_diagonal, negative_rate, diagonal, row_sum, unverifiable };
  Kind kind;
  Level level;
  int phase;  // -1 when the violation concerns a whole block
  Level column_level;
  double value;
  std::string message;
};

struct ValidationReport {
  Level checked_prefix = 0;
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
  std::string summary() const;
};

// Checks the structural assumptions on levels 0..n_max. Never throws for a
// bad model; every problem is reported with its location.
ValidationReport validate_generator(const BlockGenerator& gen, Level n_max);

// Offsets of each level inside the flattened prefix over levels 0..n, plus
// the total size as the last element.
std::vector<Eigen::Index> level_offsets(const BlockGenerator& gen, Level n);
std::vector<int> level_dims(const BlockGenerator& gen, Level n);

// Dense northwest-corner truncation over levels 0..n, level-major order.
Matrix finite_prefix(const BlockGenerator& gen, Level n);

// sum_{l=n+1}^inf Q_{k,l} v_l for k <= n. Exact for finite bandwidth;
// otherwise delegated to the generator's tail hook.
TailSum tail_weighted_sum(const BlockGenerator& gen, const StateFunction& v, Level k, Level n);

}  // namespace hessolve
