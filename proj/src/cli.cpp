#include "hessolve/cli.hpp"

#include "hessolve/bounds.hpp"
#include "hessolve/errors.hpp"
#include "hessolve/model_file.hpp"
#include "hessolve/models.hpp"
#include "hessolve/oracle.hpp"
#include "hessolve/solver.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>

namespace hessolve::cli {

namespace {

struct ModelOptions {
  std::string model = "mms-retrial";
  std::optional<double> lambda, mu, eta, d, u, w;
  int s = 2;
  std::vector<double> batch_probs;
  int max_dim = 3;
  int bandwidth = 2;
};

struct RunConfig {
  ModelOptions model;
  double epsilon = 1e-8;
  std::string schedule = "arithmetic:10";
  Level cap = 10000;
  std::string format = "json";
  std::string cert_path;
  std::optional<double> beta, phi_bar;
  int threads = 1;
  std::optional<int> fixed_alpha;
  std::string save_state, resume;
  Level n = 10;
  Level n_max = 100;
  std::string output;
};

struct Loaded {
  std::unique_ptr<BlockGenerator> gen;
  std::optional<DriftCertificate> cert;
  std::optional<models::ModelDescription> description;
};

std::uint64_t seed_from_env() {
  const char* s = std::getenv("HESSOLVE_SEED");
  if (!s || !*s) return 1;
  std::uint64_t x = 0;
  const auto res = std::from_chars(s, s + std::char_traits<char>::length(s), x);
  if (res.ec != std::errc() || *res.ptr != '\0')
    throw SpecError(std::string("HESSOLVE_SEED must be an unsigned integer, got '") + s + "'");
  return x;
}

// Built-in certificates need a stable model; their absence is not fatal
// for commands that can run uncertified.
template <class F>
std::optional<DriftCertificate> try_certificate(F&& make, bool required) {
  if (required) return make();
  try {
    return make();
  } catch (const CertificateError&) {
    return std::nullopt;
  }
}

Loaded load_model(const ModelOptions& m, bool cert_required) {
  Loaded out;
  const std::string& name = m.model;
  if (name.rfind("file:", 0) == 0) {
    auto desc = models::read_model_file(name.substr(5));
    out.cert = desc.certificate;
    out.gen = models::make_generator(desc);
    out.description = std::move(desc);
  } else if (name == "mms-retrial") {
    models::RetrialSpec spec{m.lambda.value_or(1.0), m.mu.value_or(1.0), m.s, m.eta.value_or(1.0)};
    out.gen = std::make_unique<models::RetrialGenerator>(spec);
    out.cert = try_certificate([&] { return retrial_certificate(spec); }, cert_required);
    out.description = models::describe(spec);
  } else if (name == "bmap") {
    models::BMAPSpec spec;
    const double lambda = m.lambda.value_or(2.0);
    if (m.batch_probs.empty()) {
      spec = models::BMAPSpec::poisson(lambda, m.mu.value_or(1.0));
    } else {
      spec.mu = m.mu.value_or(1.0);
      spec.D.push_back(Matrix::Constant(1, 1, -lambda));
      for (double p : m.batch_probs) spec.D.push_back(Matrix::Constant(1, 1, lambda * p));
      double total = 0.0;
      for (double p : m.batch_probs) total += p;
      if (std::abs(total - 1.0) > 1e-12) throw SpecError("batch probabilities must sum to 1");
    }
    out.gen = std::make_unique<models::BmapGenerator>(spec);
    out.cert = try_certificate([&] { return bmap_certificate(spec); }, cert_required);
    out.description = models::describe(spec);
  } else if (name == "counterexample") {
    models::CounterexampleSpec spec{m.d.value_or(10.0), m.u.value_or(1.0), m.w.value_or(1.0)};
    out.gen = std::make_unique<models::CounterexampleGenerator>(spec);
    out.cert = try_certificate([&] { return counterexample_certificate(spec); }, cert_required);
    out.description = models::describe(spec);
  } else if (name == "mm1") {
    const double lambda = m.lambda.value_or(1.0), mu = m.mu.value_or(2.0);
    out.gen = std::make_unique<models::Mm1Generator>(lambda, mu);
    out.cert = try_certificate([&] { return mm1_certificate(lambda, mu); }, cert_required);
    out.description = models::describe_mm1(lambda, mu);
  } else if (name == "random") {
    out.gen = oracle::random_ergodic_generator(seed_from_env(), m.max_dim, m.bandwidth);
  } else {
    throw SpecError("unknown model '" + name +
                    "' (expected mms-retrial, bmap, counterexample, mm1, random or file:PATH)");
  }
  return out;
}

// Certificate in force: --cert file, then the model's own, then v = 1.
DriftCertificate pick_certificate(const RunConfig& cfg, const Loaded& loaded, bool& certified) {
  DriftCertificate cert;
  certified = true;
  if (!cfg.cert_path.empty()) {
    cert = models::load_certificate(cfg.cert_path);
  } else if (loaded.cert) {
    cert = *loaded.cert;
  } else {
    // Not a proof of anything; only steers the augmentation choice.
    cert.v = LyapunovFunction::affine(1.0, 0.0);
    cert.b = 0.0;
    certified = false;
  }
  if (cfg.beta) cert.beta = cfg.beta;
  if (cfg.phi_bar) cert.phi_bar = cfg.phi_bar;
  return cert;
}

std::string num(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

nlohmann::json result_json(const RunConfig& cfg, const BlockGenerator& gen,
                           const SolveResult& res, const std::string& cert_text) {
  using nlohmann::json;
  json pi = json::array();
  json marginals = json::array();
  for (const auto& seg : res.pi_hat.segments) {
    pi.push_back(std::vector<double>(seg.data(), seg.data() + seg.size()));
    marginals.push_back(seg.sum());
  }
  json doc{{"model", gen.name()},
           {"epsilon", cfg.epsilon},
           {"schedule", cfg.schedule},
           {"cap", cfg.cap},
           {"certificate", cert_text},
           {"converged", res.converged},
           {"stop_level", res.stop_level},
           {"checkpoints", res.checkpoints},
           {"j_star", res.j_star_history},
           {"r", res.r_history},
           {"tv", res.tv_history},
           {"y_upper_bound", res.y_upper_bound},
           {"error_bound", res.bound ? json(*res.bound) : json(nullptr)},
           {"computable_bound",
            res.computable_bound ? json(*res.computable_bound) : json(nullptr)},
           {"marginals", marginals},
           {"pi", pi}};
  return doc;
}

void write_csv(std::ostream& os, const RunConfig& cfg, const BlockGenerator& gen,
               const SolveResult& res, const std::string& cert_text) {
  os << "# model: " << gen.name() << '\n'
     << "# epsilon: " << num(cfg.epsilon) << '\n'
     << "# schedule: " << cfg.schedule << " cap " << cfg.cap << '\n'
     << "# certificate: " << cert_text << '\n'
     << "# converged: " << (res.converged ? "true" : "false") << '\n'
     << "# stop_level: " << res.stop_level << '\n';
  if (!res.r_history.empty()) os << "# r_final: " << num(res.r_history.back()) << '\n';
  if (!res.tv_history.empty()) os << "# tv_final: " << num(res.tv_history.back()) << '\n';
  if (res.bound) os << "# error_bound: " << num(*res.bound) << '\n';
  os << "level,phase,probability\n";
  for (Level k = 0; k < res.pi_hat.levels(); ++k) {
    const auto& seg = res.pi_hat.segments[k];
    for (Eigen::Index i = 0; i < seg.size(); ++i) os << k << ',' << i << ',' << num(seg(i)) << '\n';
  }
}

void write_human(std::ostream& os, const RunConfig& cfg, const BlockGenerator& gen,
                 const SolveResult& res, const std::string& cert_text) {
  os << "model        " << gen.name() << '\n'
     << "certificate  " << cert_text << '\n'
     << "schedule     " << cfg.schedule << ", cap " << cfg.cap << '\n'
     << "status       " << (res.converged ? "converged" : "cap reached without convergence")
     << " at level " << res.stop_level << '\n';
  if (!res.tv_history.empty()) os << "last TV      " << num(res.tv_history.back()) << '\n';
  if (!res.r_history.empty()) os << "last r_n     " << num(res.r_history.back()) << '\n';
  if (res.bound)
    os << "E(n)         " << num(*res.bound) << '\n';
  else if (res.computable_bound)
    os << "2 r_n        " << num(*res.computable_bound) << "  (E(n) needs --beta and --phibar)\n";

  os << "\nlevel marginals\n";
  for (Level k = 0; k < res.pi_hat.levels(); ++k)
    os << std::setw(6) << k << "  " << num(res.pi_hat.level_mass(k)) << '\n';
  os << "\nfirst levels\n";
  for (Level k = 0; k < std::min<Level>(10, res.pi_hat.levels()); ++k) {
    os << std::setw(6) << k << " ";
    const auto& seg = res.pi_hat.segments[k];
    for (Eigen::Index i = 0; i < seg.size(); ++i) os << ' ' << num(seg(i));
    os << '\n';
  }
}

TruncationSchedule schedule_of(const RunConfig& cfg) {
  TruncationSchedule s = TruncationSchedule::parse(cfg.schedule);
  s.cap = cfg.cap;
  if (cfg.cap < s.first_level())
    throw ContractError("cap " + std::to_string(cfg.cap) + " lies below the first checkpoint " +
                        std::to_string(s.first_level()));
  return s;
}

class OutputSink {
 public:
  OutputSink(const std::string& path, std::ostream& fallback) : os_(&fallback) {
    if (!path.empty()) {
      file_.open(path);
      if (!file_) throw SpecError("cannot write '" + path + "'");
      os_ = &file_;
    }
  }
  std::ostream& stream() { return *os_; }

 private:
  std::ofstream file_;
  std::ostream* os_;
};

int cmd_solve(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  if (!(cfg.epsilon > 0.0 && cfg.epsilon < 1.0)) throw ContractError("epsilon must lie in (0,1)");
  if (cfg.format != "json" && cfg.format != "csv" && cfg.format != "human")
    throw SpecError("--out must be json, csv or human");
  const TruncationSchedule schedule = schedule_of(cfg);
  const Loaded loaded = load_model(cfg.model, false);
  bool certified = true;
  const DriftCertificate cert = pick_certificate(cfg, loaded, certified);

  RunOptions opts;
  opts.threads = cfg.threads;
  if (!cfg.resume.empty()) {
    std::ifstream in(cfg.resume);
    if (!in) throw SpecError("cannot read state '" + cfg.resume + "'");
    opts.resume = load_state(in);
  }

  SolveResult res;
  std::string cert_text;
  if (cfg.fixed_alpha) {
    const int j = *cfg.fixed_alpha;
    res = run_fixed_alpha(*loaded.gen, schedule, cfg.epsilon,
                          [j](Level, int width) {
                            if (j < 0 || j >= width)
                              throw ContractError("--fixed-alpha phase " + std::to_string(j) +
                                                  " outside the last level's " +
                                                  std::to_string(width) + " phases");
                            RowVector a = RowVector::Zero(width);
                            a(j) = 1.0;
                            return a;
                          },
                          opts);
    cert_text = "none (fixed augmentation at phase " + std::to_string(j) + ")";
  } else {
    if (!certified) err << "note: no drift certificate for this model; using v = 1 (uncertified)\n";
    res = run(*loaded.gen, cert, schedule, cfg.epsilon, opts);
    cert_text = certified ? cert.v.describe() : "uncertified v = 1";
  }

  if (!cfg.save_state.empty()) {
    std::ofstream st(cfg.save_state);
    if (!st) throw SpecError("cannot write '" + cfg.save_state + "'");
    save_state(res.final_state, st);
  }

  OutputSink sink(cfg.output, out);
  std::ostream& os = sink.stream();
  if (cfg.format == "json")
    os << result_json(cfg, *loaded.gen, res, cert_text).dump(2) << '\n';
  else if (cfg.format == "csv")
    write_csv(os, cfg, *loaded.gen, res, cert_text);
  else
    write_human(os, cfg, *loaded.gen, res, cert_text);

  if (!res.converged) {
    err << "not converged: cap " << cfg.cap << " reached";
    if (!res.tv_history.empty()) err << " with last TV " << num(res.tv_history.back());
    err << '\n';
    return cap_hit;
  }
  return ok;
}

constexpr Level kOracleScaleGuard = 25;

int cmd_compare(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  if (cfg.n > kOracleScaleGuard) {
    err << "error: oracle scale guard: n = " << cfg.n << " exceeds " << kOracleScaleGuard << '\n';
    return usage_error;
  }
  if (cfg.n < 0) throw ContractError("--n must be nonnegative");
  const Loaded loaded = load_model(cfg.model, false);
  bool certified = true;
  const DriftCertificate cert = pick_certificate(cfg, loaded, certified);
  const BlockGenerator& gen = *loaded.gen;

  out << "level  j_star  tv\n";
  bool all_ok = true;
  SolverState state = init_state(gen);
  for (Level n = 0; n <= cfg.n; ++n) {
    if (n > 0) state = advance(std::move(state), gen, cfg.threads);
    const YVector y = compute_y(state, gen, cert);
    const AlphaChoice choice = optimal_alpha(state, y.values);
    const LevelVector approx = approximation(state, choice.alpha);
    const auto dense =
        oracle::dense_augmented_solve(gen, n, oracle::embed_last_block(gen, n, choice.alpha));
    const double tv = tv_distance(approx, dense.pi_hat);
    all_ok = all_ok && tv < 1e-9;
    out << std::setw(5) << n << "  " << std::setw(6) << choice.j_star << "  " << num(tv) << '\n';
  }
  out << (all_ok ? "all TV < 1e-9\n" : "some TV >= 1e-9\n");
  return all_ok ? ok : numerical;
}

int cmd_drift_check(const RunConfig& cfg, std::ostream& out, std::ostream&) {
  const Loaded loaded = load_model(cfg.model, cfg.cert_path.empty());
  DriftCertificate cert;
  if (!cfg.cert_path.empty())
    cert = models::load_certificate(cfg.cert_path);
  else if (loaded.cert)
    cert = *loaded.cert;
  else
    throw CertificateError("model has no certificate; pass --cert FILE");

  const DriftReport rep = check_drift(*loaded.gen, cert, cfg.n_max);
  out << "certificate  v = " << cert.v.describe() << ", b = " << num(cert.b)
      << ", C = levels 0.." << cert.c_max_level << '\n'
      << "checked      levels 0.." << rep.checked_prefix << '\n'
      << "max slack    " << num(rep.max_slack) << '\n';
  if (rep.ok()) {
    out << "drift condition holds on the checked prefix\n";
    return ok;
  }
  out << rep.violations.size() << " violation(s)\n";
  for (const auto& v : rep.violations)
    out << "  level " << v.level << " phase " << v.phase << " slack " << num(v.slack) << '\n';
  return drift_violation;
}

int cmd_validate(const RunConfig& cfg, std::ostream& out, std::ostream&) {
  const Loaded loaded = load_model(cfg.model, false);
  const ValidationReport rep = validate_generator(*loaded.gen, cfg.n_max);
  out << rep.summary() << '\n';
  return rep.ok() ? ok : usage_error;
}

int cmd_model(const RunConfig& cfg, std::ostream& out, std::ostream&) {
  const Loaded loaded = load_model(cfg.model, false);
  if (!loaded.description) throw SpecError("model '" + cfg.model.model + "' has no file form");
  models::ModelDescription desc = *loaded.description;
  if (!desc.certificate && loaded.cert) desc.certificate = loaded.cert;
  OutputSink sink(cfg.output, out);
  models::write_model(sink.stream(), desc);
  return ok;
}

void add_model_options(CLI::App* app, ModelOptions& m) {
  app->add_option("--model", m.model,
                  "mms-retrial | bmap | counterexample | mm1 | random | file:PATH")
      ->capture_default_str();
  app->add_option("--lambda", m.lambda, "arrival rate");
  app->add_option("--mu", m.mu, "service rate");
  app->add_option("--s", m.s, "servers (retrial)")->capture_default_str();
  app->add_option("--eta", m.eta, "retrial rate");
  app->add_option("--d", m.d, "down rate (counterexample)");
  app->add_option("--u", m.u, "up rate (counterexample)");
  app->add_option("--w", m.w, "within-level rate (counterexample)");
  app->add_option("--batch-probs", m.batch_probs, "BMAP batch size distribution")->delimiter(',');
  app->add_option("--max-dim", m.max_dim, "random model level width bound")->capture_default_str();
  app->add_option("--bandwidth", m.bandwidth, "random model upper bandwidth")->capture_default_str();
}

void add_cert_options(CLI::App* app, RunConfig& cfg) {
  app->add_option("--cert", cfg.cert_path, "certificate file (a model file's certificate section)");
  app->add_option("--beta", cfg.beta, "beta for E(n)");
  app->add_option("--phibar", cfg.phi_bar, "phi-bar for E(n)");
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Stationary distributions of upper block-Hessenberg Markov chains", "hessolve"};
  app.require_subcommand(1);
  RunConfig cfg;

  auto* solve = app.add_subcommand("solve", "run the sequential-update solver");
  add_model_options(solve, cfg.model);
  add_cert_options(solve, cfg);
  solve->add_option("--epsilon", cfg.epsilon, "TV stopping tolerance")->capture_default_str();
  solve->add_option("--schedule", cfg.schedule, "arithmetic:STEP | geometric:RATIO")
      ->capture_default_str();
  solve->add_option("--cap", cfg.cap, "largest truncation level")->capture_default_str();
  solve->add_option("--out", cfg.format, "json | csv | human")->capture_default_str();
  solve->add_option("--threads", cfg.threads, "worker threads inside the update")
      ->capture_default_str();
  solve->add_option("--fixed-alpha", cfg.fixed_alpha, "augment at this last-level phase");
  solve->add_option("--save-state", cfg.save_state, "write the final solver state");
  solve->add_option("--resume", cfg.resume, "continue from a saved solver state");
  solve->add_option("-o,--output", cfg.output, "write the report here instead of stdout");

  auto* compare = app.add_subcommand("compare", "solver against the dense oracle, levels 0..n");
  add_model_options(compare, cfg.model);
  add_cert_options(compare, cfg);
  compare->add_option("--n", cfg.n, "highest level")->capture_default_str();
  compare->add_option("--threads", cfg.threads)->capture_default_str();

  auto* drift = app.add_subcommand("drift-check", "check Qv <= -e + b 1_C on a prefix");
  add_model_options(drift, cfg.model);
  add_cert_options(drift, cfg);
  drift->add_option("--n-max", cfg.n_max, "highest level checked")->capture_default_str();

  auto* validate = app.add_subcommand("validate", "structural checks on a prefix");
  add_model_options(validate, cfg.model);
  validate->add_option("--n-max", cfg.n_max, "highest level checked")->capture_default_str();

  auto* model = app.add_subcommand("model", "emit the model in file form");
  add_model_options(model, cfg.model);
  model->add_option("-o,--output", cfg.output, "write here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? ok : usage_error;
  }

  try {
    if (*solve) return cmd_solve(cfg, out, err);
    if (*compare) return cmd_compare(cfg, out, err);
    if (*drift) return cmd_drift_check(cfg, out, err);
    if (*validate) return cmd_validate(cfg, out, err);
    if (*model) return cmd_model(cfg, out, err);
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return usage_error;
  } catch (const StructuralError& e) {
    err << "error: " << e.what() << '\n';
    return usage_error;
  } catch (const CertificateError& e) {
    err << "error: " << e.what() << '\n';
    return usage_error;
  } catch (const std::invalid_argument& e) {  // SpecError, ContractError
    err << "error: " << e.what() << '\n';
    return usage_error;
  } catch (const ModelError& e) {
    err << "error: " << e.what() << '\n';
    return numerical;
  } catch (const NumericalBreakdown& e) {
    err << "error: " << e.what() << '\n';
    return numerical;
  } catch (const CapabilityError& e) {
    err << "error: " << e.what() << '\n';
    return numerical;
  }
  return usage_error;
}

}  // namespace hessolve::cli
