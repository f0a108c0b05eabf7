#include "hessolve/model_file.hpp"

#include "hessolve/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

namespace hessolve::models {

ValidationFailure::ValidationFailure(ValidationReport report)
    : StructuralError(report.summary()), report_(std::move(report)) {}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(trim(cur));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

std::string fmt(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

double parse_number(const std::string& text, int line) {
  const std::string t = trim(text);
  char* end = nullptr;
  const double x = std::strtod(t.c_str(), &end);
  if (t.empty() || end != t.c_str() + t.size()) throw ParseError("bad number '" + t + "'", line);
  return x;
}

long parse_int(const std::string& text, int line) {
  const std::string t = trim(text);
  long x = 0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), x);
  if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size())
    throw ParseError("bad integer '" + t + "'", line);
  return x;
}

std::vector<double> parse_numbers(const std::string& text, int line) {
  std::vector<double> out;
  std::istringstream is(text);
  std::string tok;
  while (is >> tok) out.push_back(parse_number(tok, line));
  return out;
}

// a, b*k, k, a + b*k, -b*k + a, ...
AffineEntry parse_entry(const std::string& text, int line) {
  AffineEntry e;
  const char* p = text.c_str();
  auto skip = [&] {
    while (*p == ' ' || *p == '\t') ++p;
  };
  skip();
  if (!*p) throw ParseError("empty matrix entry", line);
  bool first = true;
  while (*p) {
    double sign = 1.0;
    if (*p == '+' || *p == '-') {
      sign = (*p == '-') ? -1.0 : 1.0;
      ++p;
      skip();
    } else if (!first) {
      throw ParseError("expected '+' or '-' in entry '" + text + "'", line);
    }
    double coef = 1.0;
    bool has_number = false;
    if (*p != 'k') {
      char* end = nullptr;
      coef = std::strtod(p, &end);
      if (end == p) throw ParseError("bad entry '" + trim(text) + "'", line);
      p = end;
      has_number = true;
      skip();
    }
    bool has_k = false;
    if (*p == '*') {
      ++p;
      skip();
      if (*p != 'k') throw ParseError("expected k after '*' in '" + trim(text) + "'", line);
    }
    if (*p == 'k') {
      if (has_number && p[-1] != '*' && p[-1] != ' ' && p[-1] != '\t')
        throw ParseError("write coefficients as b*k in '" + trim(text) + "'", line);
      ++p;
      has_k = true;
      skip();
    }
    if (has_k)
      e.b += sign * coef;
    else
      e.a += sign * coef;
    first = false;
  }
  return e;
}

std::string format_entry(const AffineEntry& e) {
  if (e.b == 0.0) return fmt(e.a);
  const std::string slope = fmt(std::abs(e.b)) + "*k";
  if (e.a == 0.0) return (e.b < 0.0 ? "-" : "") + slope;
  return fmt(e.a) + (e.b < 0.0 ? " - " : " + ") + slope;
}

BlockPattern parse_block(const std::string& header, const std::string& body, int line) {
  std::istringstream hs(header);
  std::string word;
  long k = -1, l = -1;
  hs >> word;
  std::string ks, ls, rest;
  hs >> ks >> ls;
  if (ks.empty() || ls.empty() || (hs >> rest))
    throw ParseError("block header must be 'block K L'", line);
  k = parse_int(ks, line);
  l = parse_int(ls, line);
  if (k < 0 || l < 0) throw ParseError("block levels must be nonnegative", line);
  if (l < k - 1)
    throw ParseError("block " + ks + " " + ls + " lies below the first sub-diagonal", line);

  BlockPattern b;
  b.k = static_cast<Level>(k);
  b.l = static_cast<Level>(l);
  const auto rows = split(body, ';');
  b.rows = static_cast<int>(rows.size());
  for (const auto& r : rows) {
    const auto cells = split(r, ',');
    if (b.cols == 0) b.cols = static_cast<int>(cells.size());
    if (static_cast<int>(cells.size()) != b.cols)
      throw ParseError("block " + ks + " " + ls + " has ragged rows", line);
    for (const auto& c : cells) b.entries.push_back(parse_entry(c, line));
  }
  return b;
}

void parse_certificate_line(DriftCertificate& cert, bool& has_b, const std::string& key,
                            const std::string& value, int line) {
  if (key == "v") {
    std::istringstream is(value);
    std::string kind;
    is >> kind;
    std::string rest;
    std::getline(is, rest);
    const auto nums = parse_numbers(rest, line);
    auto need = [&](std::size_t n) {
      if (nums.size() != n)
        throw ParseError("v: " + kind + " takes " + std::to_string(n) + " parameters", line);
    };
    if (kind == "affine") {
      need(2);
      auto offsets = std::move(cert.v.offsets);
      cert.v = LyapunovFunction::affine(nums[0], nums[1], std::move(offsets));
    } else if (kind == "log") {
      need(1);
      cert.v = LyapunovFunction::log(nums[0]);
    } else if (kind == "geometric") {
      need(4);
      cert.v = LyapunovFunction::geometric(nums[0], nums[1], nums[2], static_cast<int>(nums[3]));
    } else {
      throw ParseError("unknown Lyapunov kind '" + kind + "'", line);
    }
  } else if (key == "v_offsets") {
    cert.v.offsets.clear();
    for (const auto& row : split(value, ';')) cert.v.offsets.push_back(parse_numbers(row, line));
  } else if (key == "b") {
    cert.b = parse_number(value, line);
    has_b = true;
  } else if (key == "C_levels") {
    cert.c_max_level = static_cast<Level>(parse_int(value, line));
  } else if (key == "C_phases") {
    cert.c_phases.clear();
    for (double x : parse_numbers(value, line)) cert.c_phases.push_back(static_cast<int>(x));
  } else if (key == "v_floor") {
    cert.v_inf_floor = parse_number(value, line);
  } else if (key == "beta") {
    cert.beta = parse_number(value, line);
  } else if (key == "phibar") {
    cert.phi_bar = parse_number(value, line);
  } else {
    throw ParseError("unknown certificate key '" + key + "'", line);
  }
}

class FileGenerator : public BlockGenerator {
 public:
  explicit FileGenerator(ModelDescription model) : model_(std::move(model)) {
    for (std::size_t idx = 0; idx < model_.blocks.size(); ++idx) {
      const auto& b = model_.blocks[idx];
      index_[{b.k, b.l}] = idx;
      bandwidth_ = std::max(bandwidth_, b.l - b.k);
    }
  }

  int level_dim(Level k) const override {
    if (k < 0) throw ContractError("negative level");
    return model_.dims[pattern_level(k)];
  }

  Matrix block(Level k, Level l) const override {
    const Level p = pattern_level(k);
    const Level shift = k - p;
    Matrix out = Matrix::Zero(level_dim(k), level_dim(l));
    const auto it = index_.find({p, l - shift});
    if (it == index_.end()) return out;
    const BlockPattern& b = model_.blocks[it->second];
    for (int i = 0; i < b.rows; ++i)
      for (int j = 0; j < b.cols; ++j) out(i, j) = b.entries[i * b.cols + j].at(k);
    return out;
  }

  std::optional<int> upper_bandwidth() const override { return bandwidth_; }
  std::string name() const override { return model_.name; }

 private:
  Level pattern_level(Level k) const {
    if (k < model_.levels) return k;
    if (!model_.repeat_from)
      throw StructuralError("level " + std::to_string(k) + " lies beyond the " +
                            std::to_string(model_.levels) +
                            " explicit levels and the file has no repeat_from rule");
    const Level k0 = *model_.repeat_from;
    return k0 + (k - k0) % model_.repeat_period;
  }

  ModelDescription model_;
  std::map<std::pair<Level, Level>, std::size_t> index_;
  int bandwidth_ = 1;
};

void check_dimensions(const ModelDescription& m) {
  if (m.levels < 1) throw ParseError("model declares no levels", 0);
  if (static_cast<Level>(m.dims.size()) != m.levels)
    throw ParseError("dim lists " + std::to_string(m.dims.size()) + " widths for " +
                         std::to_string(m.levels) + " levels",
                     0);
  if (m.repeat_from) {
    const Level k0 = *m.repeat_from;
    if (k0 < 0 || k0 + m.repeat_period > m.levels)
      throw ParseError("repeat_from + repeat_period must not exceed levels", 0);
    for (Level k = k0; k < m.levels; ++k)
      if (m.dims[k] != m.dims[k0 + (k - k0) % m.repeat_period])
        throw ParseError("level widths are not periodic from repeat_from on", 0);
  }
  auto dim_of = [&](Level l) -> std::optional<int> {
    if (l < m.levels) return m.dims[l];
    if (!m.repeat_from) return std::nullopt;
    return m.dims[*m.repeat_from + (l - *m.repeat_from) % m.repeat_period];
  };
  for (const auto& b : m.blocks) {
    const std::string where = "block " + std::to_string(b.k) + " " + std::to_string(b.l);
    if (b.k >= m.levels) throw ParseError(where + " lies beyond the declared levels", 0);
    const auto cols = dim_of(b.l);
    if (!cols) throw ParseError(where + " reaches an undeclared level", 0);
    if (b.rows != m.dims[b.k] || b.cols != *cols)
      throw ParseError(where + " is " + std::to_string(b.rows) + "x" + std::to_string(b.cols) +
                           ", expected " + std::to_string(m.dims[b.k]) + "x" +
                           std::to_string(*cols),
                       0);
  }
}

}  // namespace

ModelDescription parse_model(std::istream& in) {
  ModelDescription m;
  std::string raw;
  int line = 0;
  bool header = false, in_cert = false, has_b = false;
  std::map<std::string, int> key_lines;
  std::map<std::pair<Level, Level>, int> block_lines;
  DriftCertificate cert;

  while (std::getline(in, raw)) {
    ++line;
    const std::string text = trim(raw.substr(0, raw.find('#')));
    if (text.empty()) continue;
    if (!header) {
      if (text == "certificate:") {
        header = in_cert = true;
        continue;
      }
      std::istringstream hs(text);
      std::string magic;
      int version = 0;
      if (!(hs >> magic >> version) || magic != "hessolve-model")
        throw ParseError("expected 'hessolve-model 1' header", line);
      if (version != 1) throw ParseError("unsupported model file version", line);
      header = true;
      continue;
    }
    if (text == "certificate:") {
      if (in_cert) throw ParseError("duplicate certificate section", line);
      in_cert = true;
      continue;
    }
    const auto colon = text.find(':');
    if (colon == std::string::npos) throw ParseError("expected 'key: value'", line);
    const std::string key = trim(text.substr(0, colon));
    const std::string value = trim(text.substr(colon + 1));

    if (in_cert) {
      parse_certificate_line(cert, has_b, key, value, line);
      continue;
    }
    if (key.rfind("block", 0) == 0 && (key.size() == 5 || key[5] == ' ')) {
      BlockPattern b = parse_block(key, value, line);
      if (!block_lines.emplace(std::make_pair(b.k, b.l), line).second)
        throw ParseError("block " + std::to_string(b.k) + " " + std::to_string(b.l) +
                             " given twice",
                         line);
      m.blocks.push_back(std::move(b));
      continue;
    }
    if (!key_lines.emplace(key, line).second) throw ParseError("duplicate key '" + key + "'", line);
    if (key == "name") {
      m.name = value;
    } else if (key == "levels") {
      m.levels = static_cast<Level>(parse_int(value, line));
      if (m.levels < 1) throw ParseError("levels must be positive", line);
    } else if (key == "dim") {
      for (double x : parse_numbers(value, line)) {
        if (x < 1 || x != static_cast<int>(x)) throw ParseError("level widths must be positive integers", line);
        m.dims.push_back(static_cast<int>(x));
      }
    } else if (key == "repeat_from") {
      m.repeat_from = static_cast<Level>(parse_int(value, line));
    } else if (key == "repeat_period") {
      m.repeat_period = static_cast<int>(parse_int(value, line));
      if (m.repeat_period < 1) throw ParseError("repeat_period must be positive", line);
    } else {
      throw ParseError("unknown key '" + key + "'", line);
    }
  }
  if (!header) throw ParseError("empty model file", 0);
  if (in_cert) {
    if (!has_b) throw ParseError("certificate section lacks 'b:'", line);
    m.certificate = cert;
  }
  if (m.levels == 0 && m.blocks.empty() && m.dims.empty()) return m;  // certificate only

  try {
    check_dimensions(m);
  } catch (const ParseError& e) {
    // Point at the offending block line when we know it.
    for (const auto& b : m.blocks) {
      const std::string tag = "block " + std::to_string(b.k) + " " + std::to_string(b.l) + " ";
      if (std::string(e.what()).find(tag) != std::string::npos)
        throw ParseError(e.what(), block_lines[{b.k, b.l}]);
    }
    const auto dim_line = key_lines.find("dim");
    throw ParseError(e.what(), dim_line != key_lines.end() ? dim_line->second : line);
  }
  return m;
}

ModelDescription read_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open model file '" + path + "'", 0);
  return parse_model(in);
}

void write_certificate(std::ostream& out, const DriftCertificate& cert) {
  const auto& v = cert.v;
  out << "certificate:\n";
  switch (v.kind) {
    case LyapunovFunction::Kind::affine:
      out << "v: affine " << fmt(v.a) << ' ' << fmt(v.b) << '\n';
      if (!v.offsets.empty()) {
        out << "v_offsets:";
        for (std::size_t r = 0; r < v.offsets.size(); ++r) {
          if (r) out << " ;";
          for (double x : v.offsets[r]) out << ' ' << fmt(x);
        }
        out << '\n';
      }
      break;
    case LyapunovFunction::Kind::log:
      out << "v: log " << fmt(v.scale) << '\n';
      break;
    case LyapunovFunction::Kind::geometric:
      out << "v: geometric " << fmt(v.base) << ' ' << fmt(v.c) << ' ' << fmt(v.gamma) << ' '
          << v.last_phase << '\n';
      break;
    case LyapunovFunction::Kind::custom:
      throw CertificateError("custom Lyapunov functions cannot be written to a file");
  }
  out << "b: " << fmt(cert.b) << '\n';
  out << "C_levels: " << cert.c_max_level << '\n';
  if (!cert.c_phases.empty()) {
    out << "C_phases:";
    for (int i : cert.c_phases) out << ' ' << i;
    out << '\n';
  }
  out << "v_floor: " << fmt(cert.v_inf_floor) << '\n';
  if (cert.beta) out << "beta: " << fmt(*cert.beta) << '\n';
  if (cert.phi_bar) out << "phibar: " << fmt(*cert.phi_bar) << '\n';
}

void write_model(std::ostream& out, const ModelDescription& m) {
  out << "hessolve-model 1\n";
  out << "name: " << m.name << '\n';
  out << "levels: " << m.levels << '\n';
  out << "dim:";
  for (int d : m.dims) out << ' ' << d;
  out << '\n';
  if (m.repeat_from) {
    out << "repeat_from: " << *m.repeat_from << '\n';
    if (m.repeat_period != 1) out << "repeat_period: " << m.repeat_period << '\n';
  }
  for (const auto& b : m.blocks) {
    out << "block " << b.k << ' ' << b.l << ':';
    for (int i = 0; i < b.rows; ++i) {
      if (i) out << " ;";
      for (int j = 0; j < b.cols; ++j) out << (j ? ", " : " ") << format_entry(b.entries[i * b.cols + j]);
    }
    out << '\n';
  }
  if (m.certificate) write_certificate(out, *m.certificate);
}

std::unique_ptr<BlockGenerator> make_generator(ModelDescription model) {
  if (model.levels == 0) throw ParseError("file holds no model, only a certificate", 0);
  check_dimensions(model);
  const Level prefix = model.levels;
  const bool repeats = model.repeat_from.has_value();
  auto gen = std::make_unique<FileGenerator>(std::move(model));
  // Without a repeat rule, rows whose reach leaves the explicit levels
  // cannot be checked.
  const Level n_check = repeats ? 3 * prefix - 1 : prefix - 1 - *gen->upper_bandwidth();
  ValidationReport rep = validate_generator(*gen, n_check);
  if (!rep.ok()) throw ValidationFailure(std::move(rep));
  return gen;
}

std::unique_ptr<BlockGenerator> load_generator(const std::string& path) {
  return make_generator(read_model_file(path));
}

DriftCertificate load_certificate(const std::string& path) {
  const ModelDescription m = read_model_file(path);
  if (!m.certificate) throw CertificateError("'" + path + "' has no certificate section");
  return *m.certificate;
}

namespace {

BlockPattern constant_block(Level k, Level l, const Matrix& m) {
  BlockPattern b{k, l, static_cast<int>(m.rows()), static_cast<int>(m.cols()), {}};
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) b.entries.push_back({m(i, j), 0.0});
  return b;
}

BlockPattern zero_block(Level k, Level l, int rows, int cols) {
  return BlockPattern{k, l, rows, cols, std::vector<AffineEntry>(rows * cols)};
}

AffineEntry& at(BlockPattern& b, int i, int j) { return b.entries[i * b.cols + j]; }

}  // namespace

ModelDescription describe(const BMAPSpec& spec) {
  spec.validate();
  const int m = spec.phases();
  ModelDescription d;
  d.name = "bmap";
  d.levels = 2;
  d.dims = {m, m};
  d.repeat_from = 1;
  for (Level k = 0; k <= 1; ++k) {
    if (k == 1) {
      BlockPattern down = zero_block(1, 0, m, m);
      for (int i = 0; i < m; ++i) at(down, i, i).b = spec.mu;
      d.blocks.push_back(std::move(down));
    }
    BlockPattern same = constant_block(k, k, spec.D[0]);
    if (k == 1)
      for (int i = 0; i < m; ++i) at(same, i, i).b = -spec.mu;
    d.blocks.push_back(std::move(same));
    for (int batch = 1; batch <= spec.max_batch(); ++batch)
      if (spec.D[batch].cwiseAbs().maxCoeff() > 0.0)
        d.blocks.push_back(constant_block(k, k + batch, spec.D[batch]));
  }
  return d;
}

ModelDescription describe(const RetrialSpec& spec) {
  spec.validate();
  const int s = spec.s;
  ModelDescription d;
  d.name = "mms-retrial";
  d.levels = 2;
  d.dims = {s + 1, s + 1};
  d.repeat_from = 1;
  for (Level k = 0; k <= 1; ++k) {
    if (k == 1) {
      BlockPattern down = zero_block(1, 0, s + 1, s + 1);
      for (int i = 0; i < s; ++i) at(down, i, i + 1).b = spec.eta;
      d.blocks.push_back(std::move(down));
    }
    BlockPattern same = zero_block(k, k, s + 1, s + 1);
    for (int i = 0; i <= s; ++i) {
      if (i < s) {
        at(same, i, i) = {-(spec.lambda + i * spec.mu), k == 1 ? -spec.eta : 0.0};
        at(same, i, i + 1).a = spec.lambda;
      } else {
        at(same, i, i).a = -(spec.lambda + s * spec.mu);
      }
      if (i > 0) at(same, i, i - 1).a = i * spec.mu;
    }
    d.blocks.push_back(std::move(same));
    BlockPattern up = zero_block(k, k + 1, s + 1, s + 1);
    at(up, s, s).a = spec.lambda;
    d.blocks.push_back(std::move(up));
  }
  return d;
}

ModelDescription describe(const CounterexampleSpec& spec) {
  spec.validate();
  const CounterexampleGenerator gen(spec);
  ModelDescription d;
  d.name = "counterexample";
  d.levels = 3;
  d.dims = {2, 2, 2};
  d.repeat_from = 1;
  d.repeat_period = 2;
  for (Level k = 0; k < 3; ++k)
    for (Level l = std::max(0, k - 1); l <= k + 1; ++l) d.blocks.push_back(constant_block(k, l, gen.block(k, l)));
  return d;
}

ModelDescription describe_mm1(double lambda, double mu) {
  const Mm1Generator gen(lambda, mu);
  ModelDescription d;
  d.name = "mm1";
  d.levels = 2;
  d.dims = {1, 1};
  d.repeat_from = 1;
  for (Level k = 0; k < 2; ++k)
    for (Level l = std::max(0, k - 1); l <= k + 1; ++l) d.blocks.push_back(constant_block(k, l, gen.block(k, l)));
  return d;
}

}  // namespace hessolve::models
