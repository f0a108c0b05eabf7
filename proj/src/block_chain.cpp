#include "hessolve/block_chain.hpp"

#include "hessolve/errors.hpp"

#include <cmath>
#include <sstream>

namespace hessolve {

Vector level_values(const StateFunction& v, Level k, int dim) {
  Vector out(dim);
  for (int i = 0; i < dim; ++i) out(i) = v(k, i);
  return out;
}

std::optional<TailSum> BlockGenerator::tail(Level, Level, const StateFunction&) const {
  return std::nullopt;
}

std::optional<Level> BlockGenerator::reach(Level k) const {
  auto b = upper_bandwidth();
  if (!b) return std::nullopt;
  return k + *b;
}

FunctionGenerator::FunctionGenerator(std::string name, DimFn dim, BlockFn block,
                                     std::optional<int> bandwidth, TailFn tail)
    : name_(std::move(name)),
      dim_(std::move(dim)),
      block_(std::move(block)),
      bandwidth_(bandwidth),
      tail_(std::move(tail)) {}

Matrix FunctionGenerator::block(Level k, Level l) const {
  if (bandwidth_ && l > k + *bandwidth_) return Matrix::Zero(dim_(k), dim_(l));
  return block_(k, l);
}

std::optional<TailSum> FunctionGenerator::tail(Level k, Level n, const StateFunction& v) const {
  if (!tail_) return std::nullopt;
  return tail_(k, n, v);
}

Eigen::Index LevelVector::size() const {
  Eigen::Index s = 0;
  for (const auto& seg : segments) s += seg.size();
  return s;
}

double LevelVector::total() const {
  double s = 0.0;
  for (const auto& seg : segments) s += seg.sum();
  return s;
}

RowVector LevelVector::flatten() const {
  RowVector out(size());
  Eigen::Index pos = 0;
  for (const auto& seg : segments) {
    out.segment(pos, seg.size()) = seg;
    pos += seg.size();
  }
  return out;
}

bool LevelVector::is_probability(double tol) const {
  for (const auto& seg : segments)
    if ((seg.array() < 0.0).any()) return false;
  return std::abs(total() - 1.0) <= tol;
}

bool LevelVector::matches(const BlockGenerator& gen) const {
  for (Level k = 0; k < levels(); ++k)
    if (segments[k].size() != gen.level_dim(k)) return false;
  return true;
}

LevelVector LevelVector::from_flat(const RowVector& flat, const std::vector<int>& dims,
                                   Interpretation kind) {
  LevelVector out;
  out.kind = kind;
  Eigen::Index pos = 0;
  for (int d : dims) {
    if (pos + d > flat.size()) throw ContractError("from_flat: vector shorter than level dims");
    out.segments.emplace_back(flat.segment(pos, d));
    pos += d;
  }
  if (pos != flat.size()) throw ContractError("from_flat: vector longer than level dims");
  return out;
}

std::string ValidationReport::summary() const {
  std::ostringstream os;
  if (ok()) {
    os << "valid prefix up to level " << checked_prefix;
    return os.str();
  }
  os << violations.size() << " violation(s) in prefix up to level " << checked_prefix << ":";
  for (const auto& v : violations) os << "\n  " << v.message;
  return os.str();
}

namespace {

std::string format_number(double x) {
  std::ostringstream os;
  os.precision(12);
  os << x;
  return os.str();
}

void add(ValidationReport& rep, Violation::Kind kind, Level k, int i, Level l, double value,
         std::string msg) {
  rep.violations.push_back(Violation{kind, k, i, l, value, std::move(msg)});
}

}  // namespace

ValidationReport validate_generator(const BlockGenerator& gen, Level n_max) {
  ValidationReport rep;
  rep.checked_prefix = n_max;
  if (n_max < 0) return rep;

  const StateFunction one = [](Level, int) { return 1.0; };

  for (Level k = 0; k <= n_max; ++k) {
    const int mk = gen.level_dim(k);
    if (mk <= 0) {
      add(rep, Violation::Kind::dimension, k, -1, k, mk,
          "nonpositive dimension " + std::to_string(mk) + " at level " + std::to_string(k));
      continue;
    }

    for (Level l = 0; l + 2 <= k; ++l) {
      Matrix blk = gen.block(k, l);
      if (blk.size() != 0 && blk.cwiseAbs().maxCoeff() != 0.0)
        add(rep, Violation::Kind::sub_sub_diagonal, k, -1, l, blk.cwiseAbs().maxCoeff(),
            "sub-sub-diagonal block nonzero at (" + std::to_string(k) + "," + std::to_string(l) +
                ")");
    }

    Vector row_sum = Vector::Zero(mk);
    Vector row_scale = Vector::Zero(mk);
    bool dims_ok = true;

    const Level lo = std::max(0, k - 1);
    const auto top = gen.reach(k);
    const Level hi = top ? *top : k;
    for (Level l = lo; l <= hi; ++l) {
      Matrix blk = gen.block(k, l);
      const int ml = gen.level_dim(l);
      if (blk.rows() != mk || blk.cols() != ml) {
        add(rep, Violation::Kind::dimension, k, -1, l, 0.0,
            "block (" + std::to_string(k) + "," + std::to_string(l) + ") has shape " +
                std::to_string(blk.rows()) + "x" + std::to_string(blk.cols()) + ", expected " +
                std::to_string(mk) + "x" + std::to_string(ml));
        dims_ok = false;
        continue;
      }
      for (int i = 0; i < mk; ++i) {
        for (int j = 0; j < ml; ++j) {
          const double q = blk(i, j);
          const bool diag = (l == k && i == j);
          if (!std::isfinite(q)) {
            add(rep, Violation::Kind::diagonal, k, i, l, q,
                "non-finite rate at level " + std::to_string(k) + " phase " + std::to_string(i));
            continue;
          }
          if (diag && q > 0.0)
            add(rep, Violation::Kind::diagonal, k, i, l, q,
                "positive diagonal " + format_number(q) + " at level " + std::to_string(k) +
                    " phase " + std::to_string(i));
          if (!diag && q < 0.0)
            add(rep, Violation::Kind::negative_rate, k, i, l, q,
                "negative rate " + format_number(q) + " at (" + std::to_string(k) + "," +
                    std::to_string(i) + ";" + std::to_string(l) + "," + std::to_string(j) + ")");
          row_scale(i) = std::max(row_scale(i), std::abs(q));
        }
        row_sum(i) += blk.row(i).sum();
      }
    }
    if (!dims_ok) continue;

    if (!top) {
      auto t = gen.tail(k, k, one);
      if (!t || !t->exact) {
        add(rep, Violation::Kind::unverifiable, k, -1, k, 0.0,
            "row sums at level " + std::to_string(k) + " unverifiable without an exact tail hook");
        continue;
      }
      row_sum += t->values;
    }

    for (int i = 0; i < mk; ++i) {
      if (std::abs(row_sum(i)) > 1e-10 * row_scale(i))
        add(rep, Violation::Kind::row_sum, k, i, k, row_sum(i),
            "row sum " + format_number(row_sum(i)) + " at level " + std::to_string(k) + " phase " +
                std::to_string(i));
    }
  }
  return rep;
}

std::vector<int> level_dims(const BlockGenerator& gen, Level n) {
  std::vector<int> dims;
  dims.reserve(n + 1);
  for (Level k = 0; k <= n; ++k) dims.push_back(gen.level_dim(k));
  return dims;
}

std::vector<Eigen::Index> level_offsets(const BlockGenerator& gen, Level n) {
  std::vector<Eigen::Index> off;
  off.reserve(n + 2);
  off.push_back(0);
  for (Level k = 0; k <= n; ++k) off.push_back(off.back() + gen.level_dim(k));
  return off;
}

Matrix finite_prefix(const BlockGenerator& gen, Level n) {
  if (n < 0) throw ContractError("finite_prefix: level must be nonnegative");
  const auto off = level_offsets(gen, n);
  Matrix out = Matrix::Zero(off.back(), off.back());
  for (Level k = 0; k <= n; ++k) {
    const auto top = gen.reach(k);
    const Level hi = top ? std::min(*top, n) : n;
    for (Level l = std::max(0, k - 1); l <= hi; ++l) {
      Matrix blk = gen.block(k, l);
      const auto rows = off[k + 1] - off[k];
      const auto cols = off[l + 1] - off[l];
      if (blk.rows() != rows || blk.cols() != cols)
        throw StructuralError("block (" + std::to_string(k) + "," + std::to_string(l) +
                              ") has shape " + std::to_string(blk.rows()) + "x" +
                              std::to_string(blk.cols()) + ", expected " + std::to_string(rows) +
                              "x" + std::to_string(cols));
      out.block(off[k], off[l], rows, cols) = blk;
    }
  }
  return out;
}

TailSum tail_weighted_sum(const BlockGenerator& gen, const StateFunction& v, Level k, Level n) {
  if (k < 0 || k > n) throw ContractError("tail_weighted_sum: requires 0 <= k <= n");
  const int mk = gen.level_dim(k);
  const auto top = gen.reach(k);
  if (top) {
    TailSum out{Vector::Zero(mk), true};
    for (Level l = n + 1; l <= *top; ++l)
      out.values.noalias() += gen.block(k, l) * level_values(v, l, gen.level_dim(l));
    return out;
  }
  auto hooked = gen.tail(k, n, v);
  if (!hooked)
    throw CapabilityError("generator '" + gen.name() +
                          "' has unbounded upper bandwidth; supply a tail hook giving "
                          "sum_{l>n} Q_{k,l} v_l (exact or as an upper bound)");
  if (hooked->values.size() != mk)
    throw StructuralError("tail hook returned a vector of width " +
                          std::to_string(hooked->values.size()) + " at level " +
                          std::to_string(k));
  return *hooked;
}

}  // namespace hessolve
