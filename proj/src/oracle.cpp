#include "hessolve/oracle.hpp"

#include "hessolve/errors.hpp"

#include <cmath>
#include <vector>

namespace hessolve::oracle {

namespace {

// -(n)Q is nonsingular iff every state reaches a row with a deficit through
// positive rates. Checked on the graph: the matrix is far too ill-conditioned
// near the tail (cond ~ 1/pi_n) for a pivot threshold to mean anything.
Eigen::FullPivLU<Matrix> factor_prefix(const Matrix& neg_q, Level n) {
  const Eigen::Index size = neg_q.rows();
  const double scale = neg_q.cwiseAbs().maxCoeff();
  std::vector<char> leaks(static_cast<std::size_t>(size), 0);
  std::vector<Eigen::Index> queue;
  for (Eigen::Index i = 0; i < size; ++i) {
    double row = 0.0, mag = 0.0;
    for (Eigen::Index j = 0; j < size; ++j) {
      row += neg_q(i, j);
      mag += std::abs(neg_q(i, j));
    }
    if (row > 1e-10 * mag) {
      leaks[i] = 1;
      queue.push_back(i);
    }
  }
  for (std::size_t head = 0; head < queue.size(); ++head) {
    const Eigen::Index j = queue[head];
    for (Eigen::Index i = 0; i < size; ++i)
      if (!leaks[i] && i != j && -neg_q(i, j) > 0.0) {
        leaks[i] = 1;
        queue.push_back(i);
      }
  }
  if (!(scale > 0.0) || static_cast<Eigen::Index>(queue.size()) < size)
    throw ModelError("truncated generator over levels 0.." + std::to_string(n) + " is singular");
  return Eigen::FullPivLU<Matrix>(neg_q);
}

}  // namespace

RowVector embed_last_block(const BlockGenerator& gen, Level n, const RowVector& alpha_n) {
  const auto off = level_offsets(gen, n);
  if (alpha_n.size() != off[n + 1] - off[n])
    throw ContractError("last-block augmentation has the wrong width");
  RowVector full = RowVector::Zero(off.back());
  full.tail(alpha_n.size()) = alpha_n;
  return full;
}

DenseSolveOutput dense_augmented_solve(const BlockGenerator& gen, Level n,
                                       const RowVector& alpha_full) {
  const Matrix q = finite_prefix(gen, n);
  if (alpha_full.size() != q.rows())
    throw ContractError("augmentation vector must span levels 0..n");
  if ((alpha_full.array() < 0.0).any() || std::abs(alpha_full.sum() - 1.0) > 1e-12)
    throw ContractError("augmentation vector must be a probability vector");

  factor_prefix(-q, n);  // singularity check only
  // Same vector as alpha X / alpha X e, but the resolvent X is hopelessly
  // conditioned near the tail; pi Q_hat = 0, pi e = 1 is not.
  const Vector deficit = q.rowwise().sum();  // (n)Q e <= 0
  const Matrix q_hat = q - deficit * alpha_full;
  Matrix a = q_hat.transpose();
  a.row(a.rows() - 1).setOnes();
  Vector rhs = Vector::Zero(a.rows());
  rhs(rhs.size() - 1) = 1.0;
  const RowVector pi = Eigen::FullPivLU<Matrix>(a).solve(rhs).transpose();

  DenseSolveOutput out;
  out.residual_norm = (pi * q_hat).cwiseAbs().maxCoeff();
  out.pi_hat = LevelVector::from_flat(pi, level_dims(gen, n));
  return out;
}

Matrix censored_expected_sojourn(const BlockGenerator& gen, Level n) {
  const Matrix neg_q = -finite_prefix(gen, n);
  Matrix inv = factor_prefix(neg_q, n).inverse();
  const double band = 1e-12 * inv.cwiseAbs().maxCoeff();
  for (Eigen::Index j = 0; j < inv.cols(); ++j)
    for (Eigen::Index i = 0; i < inv.rows(); ++i)
      if (inv(i, j) < 0.0 && inv(i, j) >= -band) inv(i, j) = 0.0;
  return inv;
}

double mm1_closed_form(double lambda, double mu, Level k) {
  if (!(lambda < mu)) throw StabilityError("M/M/1 needs lambda < mu");
  const double rho = lambda / mu;
  return (1.0 - rho) * std::pow(rho, k);
}

double mminf_poisson(double lambda, double mu, Level k) {
  if (!(lambda > 0.0) || !(mu > 0.0)) throw SpecError("rates must be positive");
  const double a = lambda / mu;
  return std::exp(-a + k * std::log(a) - std::lgamma(k + 1.0));
}

double t_star_identity_check(const BlockGenerator& gen, const SolverState& state,
                             const LevelVector& pi_ref) {
  const Level n = state.n;
  if (pi_ref.levels() <= n + 1) throw ContractError("reference vector must extend beyond level n");
  Eigen::FullPivLU<Matrix> lu(state.ustar_nn());
  const Matrix neg_t = lu.inverse();  // (U*_n)^{-1} = -T*_n
  const RowVector lhs = pi_ref.segments[n] * neg_t;
  // Only level n+1 can move down into level n.
  const RowVector rhs = pi_ref.segments[n + 1] * gen.block(n + 1, n);
  return (lhs - rhs).cwiseAbs().maxCoeff();
}

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Portable uniform stream; std distributions are not reproducible across
// standard libraries.
class Stream {
 public:
  explicit Stream(std::uint64_t seed) : state_(seed) {}
  double uniform() { return (next() >> 11) * 0x1.0p-53; }
  std::uint64_t next() { return state_ = splitmix(state_); }

 private:
  std::uint64_t state_;
};

class RandomGenerator : public BlockGenerator {
 public:
  RandomGenerator(std::uint64_t seed, int max_dim, int bandwidth)
      : seed_(seed), max_dim_(max_dim), bandwidth_(bandwidth) {}

  int level_dim(Level k) const override {
    return 1 + static_cast<int>(splitmix(seed_ * 0x2545f4914f6cdd1dULL + 7919u * k) % max_dim_);
  }

  Matrix block(Level k, Level l) const override {
    if (l < k - 1 || l > k + bandwidth_) return Matrix::Zero(level_dim(k), level_dim(l));
    return row(k)[l - std::max(0, k - 1)];
  }

  std::optional<int> upper_bandwidth() const override { return bandwidth_; }
  std::string name() const override { return "random-" + std::to_string(seed_); }

 private:
  // Blocks Q_{k,l} for l = max(0,k-1) .. k+B.
  std::vector<Matrix> row(Level k) const {
    Stream rng(splitmix(seed_ ^ (0x5851f42d4c957f2dULL * (k + 1))));
    const int mk = level_dim(k);
    const Level lo = std::max(0, k - 1);
    std::vector<Matrix> blocks;
    for (Level l = lo; l <= k + bandwidth_; ++l) blocks.push_back(Matrix::Zero(mk, level_dim(l)));
    auto at = [&](Level l) -> Matrix& { return blocks[l - lo]; };

    Vector up_drift = Vector::Zero(mk);
    for (Level l = k + 1; l <= k + bandwidth_; ++l) {
      Matrix& up = at(l);
      for (int i = 0; i < mk; ++i) {
        for (int j = 0; j < up.cols(); ++j)
          if (rng.uniform() < 0.6) up(i, j) = 0.1 + rng.uniform();
        if (l == k + 1 && up.row(i).sum() == 0.0)
          up(i, static_cast<int>(rng.next() % up.cols())) = 0.1 + rng.uniform();
        up_drift(i) += (l - k) * up.row(i).sum();
      }
    }

    Matrix& same = at(k);
    for (int i = 0; i < mk; ++i)
      for (int j = 0; j < mk; ++j)
        if (i != j && rng.uniform() < 0.5) same(i, j) = rng.uniform();

    if (k >= 1) {
      Matrix& down = at(k - 1);
      for (int i = 0; i < mk; ++i) {
        for (int j = 0; j < down.cols(); ++j) down(i, j) = 0.5 + rng.uniform();
        // Down-rate strictly dominates the expected upward jump.
        const double target = 2.0 * up_drift(i) + 0.5 + rng.uniform();
        down.row(i) *= target / down.row(i).sum();
      }
    }

    Vector out_rate = Vector::Zero(mk);
    for (const auto& b : blocks) out_rate += b.rowwise().sum();
    for (int i = 0; i < mk; ++i) same(i, i) = -out_rate(i);
    return blocks;
  }

  std::uint64_t seed_;
  int max_dim_;
  int bandwidth_;
};

}  // namespace

std::unique_ptr<BlockGenerator> random_ergodic_generator(std::uint64_t seed, int max_dim,
                                                         int bandwidth) {
  if (max_dim < 1 || bandwidth < 1)
    throw ContractError("random generator needs max_dim >= 1 and bandwidth >= 1");
  return std::make_unique<RandomGenerator>(seed, max_dim, bandwidth);
}

}  // namespace hessolve::oracle
