#include "hessolve/models.hpp"

#include "hessolve/errors.hpp"

#include <cmath>
#include <queue>

namespace hessolve::models {

namespace {

bool irreducible(const Matrix& gen) {
  const auto m = gen.rows();
  // Strong connectivity: every state reaches state 0 and is reached from it.
  auto reaches_all = [&](bool transpose) {
    std::vector<bool> seen(m, false);
    std::queue<Eigen::Index> todo;
    seen[0] = true;
    todo.push(0);
    while (!todo.empty()) {
      auto i = todo.front();
      todo.pop();
      for (Eigen::Index j = 0; j < m; ++j) {
        const double q = transpose ? gen(j, i) : gen(i, j);
        if (i != j && q > 0.0 && !seen[j]) {
          seen[j] = true;
          todo.push(j);
        }
      }
    }
    for (bool s : seen)
      if (!s) return false;
    return true;
  };
  return m > 0 && reaches_all(false) && reaches_all(true);
}

}  // namespace

void BMAPSpec::validate() const {
  if (D.size() < 2) throw SpecError("BMAP needs D_0 and at least one arrival matrix");
  const auto m = D.front().rows();
  if (m == 0) throw SpecError("BMAP has no phases");
  if (!(mu > 0.0) || !std::isfinite(mu)) throw SpecError("service rate mu must be positive");
  Matrix total = Matrix::Zero(m, m);
  double scale = 0.0;
  for (std::size_t idx = 0; idx < D.size(); ++idx) {
    const Matrix& dm = D[idx];
    if (dm.rows() != m || dm.cols() != m)
      throw SpecError("D_" + std::to_string(idx) + " is not " + std::to_string(m) + "x" +
                      std::to_string(m));
    if (!dm.allFinite()) throw SpecError("D_" + std::to_string(idx) + " has non-finite entries");
    for (Eigen::Index i = 0; i < m; ++i)
      for (Eigen::Index j = 0; j < m; ++j) {
        const bool diag0 = (idx == 0 && i == j);
        if (diag0 && !(dm(i, j) < 0.0)) throw SpecError("D_0 must have a negative diagonal");
        if (!diag0 && dm(i, j) < 0.0)
          throw SpecError("D_" + std::to_string(idx) + " has a negative off-diagonal rate");
      }
    total += dm;
    scale = std::max(scale, dm.cwiseAbs().maxCoeff());
  }
  if ((total.rowwise().sum().cwiseAbs().array() > 1e-10 * scale).any())
    throw SpecError("sum of D_m must have zero row sums");
  if (!irreducible(total)) throw SpecError("background generator sum(D_m) is reducible");
  Vector arrivals = Vector::Zero(m);
  for (std::size_t idx = 1; idx < D.size(); ++idx) arrivals += D[idx].rowwise().sum();
  if (!(arrivals.maxCoeff() > 0.0)) throw SpecError("BMAP has no arrivals");
}

BMAPSpec BMAPSpec::poisson(double lambda, double mu) {
  BMAPSpec spec;
  spec.D = {Matrix::Constant(1, 1, -lambda), Matrix::Constant(1, 1, lambda)};
  spec.mu = mu;
  return spec;
}

void RetrialSpec::validate() const {
  if (s < 1) throw SpecError("server count s must be at least 1");
  for (double r : {lambda, mu, eta})
    if (!(r > 0.0) || !std::isfinite(r)) throw SpecError("retrial rates must be positive");
}

void CounterexampleSpec::validate() const {
  for (double r : {d, u, w})
    if (!(r > 0.0) || !std::isfinite(r)) throw SpecError("counterexample rates must be positive");
}

BmapGenerator::BmapGenerator(BMAPSpec spec) : spec_(std::move(spec)) { spec_.validate(); }

Matrix BmapGenerator::block(Level k, Level l) const {
  const int m = spec_.phases();
  if (l == k - 1) return Matrix::Identity(m, m) * (k * spec_.mu);
  if (l == k) return spec_.D[0] - Matrix::Identity(m, m) * (k * spec_.mu);
  if (l > k && l - k <= spec_.max_batch()) return spec_.D[l - k];
  return Matrix::Zero(m, m);
}

RetrialGenerator::RetrialGenerator(RetrialSpec spec) : spec_(spec) { spec_.validate(); }

Matrix RetrialGenerator::block(Level k, Level l) const {
  const int s = spec_.s;
  Matrix out = Matrix::Zero(s + 1, s + 1);
  if (l == k - 1) {
    // A retrial from the orbit seizes an idle server.
    for (int i = 0; i < s; ++i) out(i, i + 1) = k * spec_.eta;
  } else if (l == k + 1) {
    out(s, s) = spec_.lambda;
  } else if (l == k) {
    for (int i = 0; i <= s; ++i) {
      const double psi = (i < s) ? spec_.lambda + i * spec_.mu + k * spec_.eta
                                 : spec_.lambda + s * spec_.mu;
      out(i, i) = -psi;
      if (i < s) out(i, i + 1) = spec_.lambda;
      if (i > 0) out(i, i - 1) = i * spec_.mu;
    }
  }
  return out;
}

CounterexampleGenerator::CounterexampleGenerator(CounterexampleSpec spec) : spec_(spec) {
  spec_.validate();
}

Matrix CounterexampleGenerator::block(Level k, Level l) const {
  const double d = spec_.d, u = spec_.u, w = spec_.w;
  Matrix out = Matrix::Zero(2, 2);
  if (l == k + 1) {
    out << u, 0.0, u, u;
  } else if (l == k - 1) {
    if (k % 2 == 1)
      out << d, 0.0, 0.0, d;
    else
      out << d, 0.0, 0.0, 0.0;
  } else if (l == k) {
    double down0 = 0.0, down1 = 0.0;
    if (k >= 1) {
      down0 = d;
      down1 = (k % 2 == 1) ? d : 0.0;
    }
    out << -(w + u + down0), w, 0.0, -(2.0 * u + down1);
  }
  return out;
}

Mm1Generator::Mm1Generator(double lambda, double mu) : lambda_(lambda), mu_(mu) {
  if (!(lambda > 0.0) || !(mu > 0.0)) throw SpecError("M/M/1 rates must be positive");
}

Matrix Mm1Generator::block(Level k, Level l) const {
  Matrix out = Matrix::Zero(1, 1);
  if (l == k + 1)
    out(0, 0) = lambda_;
  else if (l == k - 1)
    out(0, 0) = mu_;
  else if (l == k)
    out(0, 0) = -(lambda_ + (k > 0 ? mu_ : 0.0));
  return out;
}

BmapGenerator bmap_generator(const BMAPSpec& spec) { return BmapGenerator(spec); }
RetrialGenerator retrial_generator(const RetrialSpec& spec) { return RetrialGenerator(spec); }
CounterexampleGenerator counterexample_generator(const CounterexampleSpec& spec) {
  return CounterexampleGenerator(spec);
}
Mm1Generator mm1_generator(double lambda, double mu) { return Mm1Generator(lambda, mu); }

}  // namespace hessolve::models
