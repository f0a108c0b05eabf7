#pragma once

// Concrete generators: BMAP/M/inf, M/M/s retrial, the alternating-parity
// counterexample, and the M/M/1 birth-death chain.

#include "hessolve/block_chain.hpp"

#include <vector>

namespace hessolve::models {

// Batch Markovian arrivals {D_0, ..., D_mmax} with exponential service.
struct BMAPSpec {
  std::vector<Matrix> D;
  double mu = 1.0;

  int phases() const { return D.empty() ? 0 : static_cast<int>(D.front().rows()); }
  int max_batch() const { return static_cast<int>(D.size()) - 1; }
  // Throws SpecError on the first broken invariant.
  void validate() const;

  // Poisson(lambda) single arrivals: the M/M/inf queue.
  static BMAPSpec poisson(double lambda, double mu);
};

struct RetrialSpec {
  double lambda = 1.0;
  double mu = 1.0;
  int s = 1;
  double eta = 1.0;

  double rho() const { return lambda / (s * mu); }
  void validate() const;
};

struct CounterexampleSpec {
  double d = 10.0;  // down rate
  double u = 1.0;   // up rate
  double w = 1.0;   // phase 0 -> phase 1 within a level

  void validate() const;
};

class BmapGenerator : public BlockGenerator {
 public:
  explicit BmapGenerator(BMAPSpec spec);

  int level_dim(Level) const override { return spec_.phases(); }
  Matrix block(Level k, Level l) const override;
  std::optional<int> upper_bandwidth() const override { return spec_.max_batch(); }
  std::string name() const override { return "bmap"; }
  const BMAPSpec& spec() const { return spec_; }

 private:
  BMAPSpec spec_;
};

// Level = orbit size, phase = number of busy servers (0..s).
class RetrialGenerator : public BlockGenerator {
 public:
  explicit RetrialGenerator(RetrialSpec spec);

  int level_dim(Level) const override { return spec_.s + 1; }
  Matrix block(Level k, Level l) const override;
  std::optional<int> upper_bandwidth() const override { return 1; }
  std::string name() const override { return "mms-retrial"; }
  const RetrialSpec& spec() const { return spec_; }

 private:
  RetrialSpec spec_;
};

// Two phases per level. From (2k,1) the levels below 2k are unreachable
// without first leaving levels 0..2k.
class CounterexampleGenerator : public BlockGenerator {
 public:
  explicit CounterexampleGenerator(CounterexampleSpec spec);

  int level_dim(Level) const override { return 2; }
  Matrix block(Level k, Level l) const override;
  std::optional<int> upper_bandwidth() const override { return 1; }
  std::string name() const override { return "counterexample"; }
  const CounterexampleSpec& spec() const { return spec_; }

 private:
  CounterexampleSpec spec_;
};

class Mm1Generator : public BlockGenerator {
 public:
  Mm1Generator(double lambda, double mu);

  int level_dim(Level) const override { return 1; }
  Matrix block(Level k, Level l) const override;
  std::optional<int> upper_bandwidth() const override { return 1; }
  std::string name() const override { return "mm1"; }
  double lambda() const { return lambda_; }
  double mu() const { return mu_; }

 private:
  double lambda_;
  double mu_;
};

BmapGenerator bmap_generator(const BMAPSpec& spec);
RetrialGenerator retrial_generator(const RetrialSpec& spec);
CounterexampleGenerator counterexample_generator(const CounterexampleSpec& spec = {});
Mm1Generator mm1_generator(double lambda, double mu);

}  // namespace hessolve::models
