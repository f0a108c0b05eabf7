#include <doctest.h>

#include "hessolve/bounds.hpp"
#include "hessolve/errors.hpp"
#include "hessolve/models.hpp"
#include "hessolve/oracle.hpp"

using namespace hessolve;

namespace {

Matrix m2(double a, double b, double c, double d) {
  Matrix m(2, 2);
  m << a, b, c, d;
  return m;
}

models::BMAPSpec mmpp() {
  models::BMAPSpec spec;
  spec.mu = 1.5;
  spec.D = {m2(-3.0, 1.0, 2.0, -2.5), m2(2.0, 0.0, 0.0, 0.5)};
  return spec;
}

}  // namespace

TEST_CASE("bmap blocks") {
  models::BMAPSpec spec;
  spec.mu = 1.0;
  spec.D = {Matrix::Constant(1, 1, -2.0), Matrix::Constant(1, 1, 2.0)};
  const auto gen = models::bmap_generator(spec);
  for (Level k : {0, 1, 5}) {
    CHECK(gen.block(k, k)(0, 0) == -2.0 - k);
    CHECK(gen.block(k, k + 1)(0, 0) == 2.0);
    if (k > 0) CHECK(gen.block(k, k - 1)(0, 0) == k);
  }
  CHECK(gen.upper_bandwidth() == 1);

  const auto g2 = models::bmap_generator(mmpp());
  CHECK(g2.block(3, 2) == Matrix(Matrix::Identity(2, 2) * 4.5));

  models::BMAPSpec batch = mmpp();
  batch.D[0] = m2(-4.0, 1.0, 2.0, -3.5);
  batch.D.push_back(Matrix::Zero(2, 2));
  batch.D.push_back(m2(0.5, 0.5, 0.5, 0.5));
  const auto g3 = models::bmap_generator(batch);
  CHECK(g3.upper_bandwidth() == 3);
  CHECK(g3.block(2, 6).isZero(0.0));
  CHECK(g3.block(2, 5) == batch.D[3]);
  CHECK(g3.block(2, 4).isZero(0.0));
}

TEST_CASE("bmap spec validation") {
  models::BMAPSpec bad = mmpp();
  bad.D[1](0, 0) = 1.0;  // row sums no longer zero
  CHECK_THROWS_AS(bad.validate(), SpecError);

  bad = mmpp();
  bad.mu = 0.0;
  CHECK_THROWS_AS(bad.validate(), SpecError);

  bad = mmpp();
  bad.D[0] = m2(-2.0, 0.0, 0.0, -0.5);  // phases never communicate
  CHECK_THROWS_AS(bad.validate(), SpecError);

  bad = mmpp();
  bad.D[1] = Matrix::Zero(2, 2);
  bad.D[0] = m2(-1.0, 1.0, 2.0, -2.0);
  CHECK_THROWS_AS(bad.validate(), SpecError);

  bad = mmpp();
  bad.D.push_back(Matrix::Zero(3, 3));
  CHECK_THROWS_AS(bad.validate(), SpecError);
  CHECK_THROWS_AS(models::bmap_generator(bad), SpecError);
}

TEST_CASE("retrial blocks from the displays") {
  const auto gen = models::retrial_generator({1.0, 2.0, 1, 3.0});
  CHECK(gen.block(2, 1) == m2(0, 6, 0, 0));
  CHECK(gen.block(2, 3) == m2(0, 0, 0, 1));
  CHECK(gen.block(2, 2) == m2(-7, 1, 2, -3));

  const auto g2 = models::retrial_generator({1.0, 1.0, 2, 1.0});
  const Matrix q00 = g2.block(0, 0);
  CHECK(q00(0, 0) == -1.0);
  CHECK(q00(1, 1) == -2.0);
  CHECK(q00(2, 2) == -3.0);
  for (Level k = 0; k < 20; ++k) {
    Vector sums = g2.block(k, k).rowwise().sum() + g2.block(k, k + 1).rowwise().sum();
    if (k > 0) sums += g2.block(k, k - 1).rowwise().sum();
    CHECK(sums.cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK(g2.spec().rho() == 0.5);
  CHECK_THROWS_AS(models::retrial_generator({1.0, -1.0, 2, 1.0}), SpecError);
  CHECK_THROWS_AS(models::retrial_generator({1.0, 1.0, 0, 1.0}), SpecError);
}

TEST_CASE("counterexample blocks") {
  const auto gen = models::counterexample_generator();
  CHECK(gen.block(2, 1) == m2(10, 0, 0, 0));
  CHECK(gen.block(1, 0) == m2(10, 0, 0, 10));
  CHECK(gen.block(1, 1) == m2(-12, 1, 0, -12));
  CHECK(gen.block(4, 5) == m2(1, 0, 1, 1));
  CHECK(gen.block(0, 0) == m2(-2, 1, 0, -2));
  CHECK(gen.block(2, 2) == m2(-12, 1, 0, -2));
  CHECK_THROWS_AS(models::counterexample_generator({10.0, 0.0, 1.0}), SpecError);
}

TEST_CASE("M/M/1 blocks") {
  const auto gen = models::mm1_generator(1.0, 2.0);
  CHECK(gen.block(0, 0)(0, 0) == -1.0);
  CHECK(gen.block(3, 3)(0, 0) == -3.0);
  CHECK(gen.block(3, 2)(0, 0) == 2.0);
  CHECK(gen.block(3, 4)(0, 0) == 1.0);
  CHECK(gen.block(3, 1)(0, 0) == 0.0);
}

TEST_CASE("every built-in generator validates on 100 levels") {
  CHECK(validate_generator(models::bmap_generator(models::BMAPSpec::poisson(2.0, 1.0)), 100).ok());
  CHECK(validate_generator(models::bmap_generator(mmpp()), 100).ok());
  CHECK(validate_generator(models::retrial_generator({1.0, 1.0, 2, 1.0}), 100).ok());
  CHECK(validate_generator(models::retrial_generator({3.0, 1.0, 1, 0.5}), 100).ok());
  CHECK(validate_generator(models::counterexample_generator(), 100).ok());
  CHECK(validate_generator(models::mm1_generator(1.0, 2.0), 100).ok());
  for (std::uint64_t seed = 1; seed <= 10; ++seed)
    CHECK(validate_generator(*oracle::random_ergodic_generator(seed, 3, 2), 100).ok());
}

TEST_CASE("M/M/inf through the BMAP builder") {
  const auto spec = models::BMAPSpec::poisson(2.0, 1.0);
  const auto gen = models::bmap_generator(spec);
  const auto res = run(gen, bmap_certificate(spec), TruncationSchedule::arithmetic(10), 1e-8);
  REQUIRE(res.converged);
  double tv = 0.0;
  for (Level k = 0; k < res.pi_hat.levels(); ++k)
    tv += std::abs(res.pi_hat.segments[k](0) - oracle::mminf_poisson(2.0, 1.0, k));
  // Poisson mass beyond the stop level.
  double seen = 0.0;
  for (Level k = 0; k < res.pi_hat.levels(); ++k) seen += oracle::mminf_poisson(2.0, 1.0, k);
  tv += 1.0 - seen;
  CHECK(tv < 1e-6);
}

TEST_CASE("retrial tail decays at rate rho") {
  const auto gen = models::retrial_generator({1.0, 1.0, 2, 1.0});
  const auto res = run(gen, retrial_certificate(gen.spec()), TruncationSchedule::arithmetic(10), 1e-12);
  REQUIRE(res.converged);
  const Level n = res.stop_level;
  for (Level k = 2 * n / 3; k < n - 1; ++k) {
    const double ratio = res.pi_hat.level_mass(k + 1) / res.pi_hat.level_mass(k);
    CHECK(ratio == doctest::Approx(0.5).epsilon(0.05));
  }
}

TEST_CASE("counterexample: fixed last-phase augmentation sticks, optimal one converges") {
  const auto gen = models::counterexample_generator();
  const auto sched = TruncationSchedule::arithmetic(2, 10);
  const RowVector last = (RowVector(2) << 0.0, 1.0).finished();
  const auto fixed = run_fixed_alpha(gen, sched, 1e-8, [&](Level, int) { return last; });
  CHECK_FALSE(fixed.converged);
  CHECK(fixed.checkpoints == std::vector<Level>{2, 4, 6, 8, 10});
  for (double tv : fixed.tv_history) CHECK(tv == 2.0);

  const auto opt = run(gen, counterexample_certificate(), TruncationSchedule::arithmetic(2), 1e-8);
  CHECK(opt.converged);
  for (int j : opt.j_star_history) CHECK(j == 0);
}
