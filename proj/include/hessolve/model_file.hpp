#pragma once

// Plain-text model files.
//
//   hessolve-model 1
//   name: mm1
//   levels: 2
//   dim: 1 1
//   repeat_from: 1
//   block 0 0: -1
//   block 0 1: 1
//   block 1 0: 2
//   block 1 1: -3
//   block 1 2: 1
//   certificate:
//   v: affine 1 1
//   b: 2
//   C_levels: 0
//
// Entries are separated by ',' and rows by ';'. Each entry is affine in the
// level index: `a`, `b*k`, `a + b*k`, `a - b*k`. Blocks not listed are zero.
// With `repeat_from: k0` (and optionally `repeat_period: p`, default 1) the
// block row of any level k >= levels is the row of level
// k0 + (k - k0) mod p, shifted to k and evaluated at k.

#include "hessolve/block_chain.hpp"
#include "hessolve/bounds.hpp"
#include "hessolve/errors.hpp"
#include "hessolve/models.hpp"

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace hessolve::models {

struct AffineEntry {
  double a = 0.0;
  double b = 0.0;
  double at(Level k) const { return a + b * k; }
};

struct BlockPattern {
  Level k = 0;
  Level l = 0;
  int rows = 0;
  int cols = 0;
  std::vector<AffineEntry> entries;  // row-major
};

struct ModelDescription {
  std::string name = "file";
  Level levels = 0;
  std::vector<int> dims;
  std::optional<Level> repeat_from;
  int repeat_period = 1;
  std::vector<BlockPattern> blocks;
  std::optional<DriftCertificate> certificate;
};

// Thrown when a file parses but the generator it describes breaks the
// structural assumptions.
class ValidationFailure : public StructuralError {
 public:
  explicit ValidationFailure(ValidationReport report);
  const ValidationReport& report() const { return report_; }

 private:
  ValidationReport report_;
};

// Parses a model file, or a file holding only a `certificate:` section
// (levels == 0 then). Errors carry line numbers.
ModelDescription parse_model(std::istream& in);
ModelDescription read_model_file(const std::string& path);

void write_model(std::ostream& out, const ModelDescription& model);
void write_certificate(std::ostream& out, const DriftCertificate& cert);

// Checks dimensions and builds the lazy generator. Validation covers levels
// 0..3*levels-1.
std::unique_ptr<BlockGenerator> make_generator(ModelDescription model);
std::unique_ptr<BlockGenerator> load_generator(const std::string& path);

// Certificate section of a file; CertificateError when there is none.
DriftCertificate load_certificate(const std::string& path);

// Canonical files for the built-in models.
ModelDescription describe(const BMAPSpec& spec);
ModelDescription describe(const RetrialSpec& spec);
ModelDescription describe(const CounterexampleSpec& spec);
ModelDescription describe_mm1(double lambda, double mu);

}  // namespace hessolve::models
