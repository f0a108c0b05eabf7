#pragma once

// Brute-force and closed-form references for checking the solver. Nothing
// here shares code with the block recursion: the dense routines factor the
// whole truncated generator with full pivoting.

#include "hessolve/block_chain.hpp"
#include "hessolve/solver.hpp"

#include <cstdint>
#include <memory>

namespace hessolve::oracle {

struct DenseSolveOutput {
  LevelVector pi_hat;
  double residual_norm = 0.0;  // max |pi_hat (n)Q_hat|
};

// (n)pi_bar = alpha (-(n)Q)^{-1} / alpha (-(n)Q)^{-1} e for any probability
// vector alpha over levels 0..n.
DenseSolveOutput dense_augmented_solve(const BlockGenerator& gen, Level n,
                                       const RowVector& alpha_full);

// Zero-pads a last-level augmentation row to the full prefix width.
RowVector embed_last_block(const BlockGenerator& gen, Level n, const RowVector& alpha_n);

// (-(n)Q)^{-1}, entries clipped at zero within 1e-12.
Matrix censored_expected_sojourn(const BlockGenerator& gen, Level n);

// (1 - rho) rho^k.
double mm1_closed_form(double lambda, double mu, Level k);

// Poisson(lambda/mu) mass at k.
double mminf_poisson(double lambda, double mu, Level k);

// max |pi_n (U*_n)^{-1} - sum_{l>n} pi_l Q_{l,n}| with U*_n re-inverted
// densely. pi_ref must extend beyond level n.
double t_star_identity_check(const BlockGenerator& gen, const SolverState& state,
                             const LevelVector& pi_ref);

// Seeded random ergodic generator: level widths 1..max_dim, upward reach up
// to `bandwidth`, and down-rates dominating the upward drift in every phase.
std::unique_ptr<BlockGenerator> random_ergodic_generator(std::uint64_t seed, int max_dim,
                                                         int bandwidth);

}  // namespace hessolve::oracle
