#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"

#include "hbfill/dataset.hpp"
#include "hbfill/error.hpp"
#include "hbfill/inversion.hpp"
#include "hbfill/simd/flux_kernel.hpp"
#include "hbfill/solver.hpp"
#include "hbfill/surrogate.hpp"

namespace hbfill::cli {

namespace fs = std::filesystem;

namespace {

struct UsageError : Error {
  using Error::Error;
};

struct ThresholdFailure : Error {
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Settings: a flat JSON object. Defaults come from a profile, then the
// --config file is merged in, then explicit flags win.

class Settings {
 public:
  explicit Settings(Json j) : j_(std::move(j)) {}

  const Json& json() const { return j_; }
  Json& json() { return j_; }

  bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }

  double number(const std::string& key) const {
    try {
      return parse_double(at(key));
    } catch (const FormatError& e) {
      throw UsageError("--" + key + ": " + e.what());
    }
  }

  std::size_t count(const std::string& key) const { return to_count(at(key), key); }

  std::string text(const std::string& key) const {
    const Json& v = at(key);
    if (!v.is_string()) throw UsageError("--" + key + ": expected a string");
    return v.get<std::string>();
  }

  bool flag(const std::string& key) const {
    const Json& v = at(key);
    if (v.is_boolean()) return v.get<bool>();
    if (v.is_string()) return v.get<std::string>() == "true";
    throw UsageError("--" + key + ": expected true or false");
  }

  std::vector<double> numbers(const std::string& key) const {
    std::vector<double> out;
    for (const Json& v : list(key)) out.push_back(parse_double(v));
    return out;
  }

  std::vector<std::size_t> counts(const std::string& key) const {
    std::vector<std::size_t> out;
    for (const Json& v : list(key)) out.push_back(to_count(v, key));
    return out;
  }

  std::uint64_t seed() const {
    const double s = number("seed");
    if (!(s >= 0.0) || s != std::floor(s) || s > 1.8e19) throw UsageError("--seed must be a nonnegative integer");
    if (at("seed").is_number_unsigned()) return at("seed").get<std::uint64_t>();
    return static_cast<std::uint64_t>(s);
  }

  SolverConfig solver() const {
    SolverConfig c;
    c.nx = count("nx");
    c.Cd = number("Cd");
    if (has("dt_max")) c.dt_max = number("dt_max");
    c.wall_touch_threshold = number("wall_touch_threshold");
    c.max_steps = static_cast<std::uint64_t>(number("max_steps"));
    c.validate();
    return c;
  }

  std::size_t workers() const { return std::max<std::size_t>(1, count("workers")); }

 private:
  const Json& at(const std::string& key) const {
    if (!has(key)) throw UsageError("missing required setting --" + key);
    return j_.at(key);
  }

  Json list(const std::string& key) const {
    const Json& v = at(key);
    if (v.is_array()) return v;
    if (v.is_string()) {
      // Comma-separated list from the command line.
      Json arr = Json::array();
      std::stringstream ss(v.get<std::string>());
      std::string item;
      while (std::getline(ss, item, ',')) {
        if (!item.empty()) arr.push_back(item);
      }
      return arr;
    }
    throw UsageError("--" + key + ": expected a list");
  }

  static std::size_t to_count(const Json& v, const std::string& key) {
    if (v.is_number_unsigned()) return v.get<std::size_t>();
    double d = 0.0;
    try {
      d = parse_double(v);
    } catch (const FormatError& e) {
      throw UsageError("--" + key + ": " + e.what());
    }
    if (!(d >= 0.0) || d != std::floor(d) || d > 1e15) throw UsageError("--" + key + " must be a nonnegative integer");
    return static_cast<std::size_t>(d);
  }

  Json j_;
};

std::string now_utc() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

class Manifest {
 public:
  Manifest(std::string command, const Settings& s)
      : command_(std::move(command)), config_(s.json()), started_(now_utc()), t0_(std::chrono::steady_clock::now()) {}

  void add_task(std::size_t id, double seconds, bool resumed = false) {
    tasks_.push_back({{"id", id}, {"seconds", format_double(seconds)}, {"resumed", resumed}});
  }
  void note(const std::string& key, Json value) { extra_[key] = std::move(value); }

  void write(const fs::path& dir) const {
    Json j;
    j["command"] = command_;
    j["tool_version"] = kToolVersion;
    j["kernel"] = std::string(simd::kernel_name(simd::active_kernel()));
    j["config"] = config_;
    j["seed"] = config_.value("seed", Json(nullptr));
    j["started"] = started_;
    j["finished"] = now_utc();
    j["wall_seconds"] =
        format_double(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count());
    j["tasks"] = tasks_;
    if (!extra_.is_null()) j["results"] = extra_;
    write_text(dir / "manifest.json", j.dump(2) + "\n");
  }

 private:
  std::string command_;
  Json config_;
  std::string started_;
  std::chrono::steady_clock::time_point t0_;
  Json tasks_ = Json::array();
  Json extra_;
};

fs::path parent_or_cwd(const fs::path& p) { return p.has_parent_path() ? p.parent_path() : fs::path("."); }

std::string fmt(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

Json stats_json(const ErrorStats& s) {
  return Json{{"count", s.count},
              {"median", format_double(s.median)},
              {"q3", format_double(s.q3)},
              {"max", format_double(s.max)},
              {"mean", format_double(s.mean)},
              {"variance", format_double(s.variance)}};
}

// ---------------------------------------------------------------------------
// Commands

int cmd_simulate(const Settings& s) {
  const RheoParams p{s.number("B"), s.number("S"), s.number("n")};
  const SolverConfig config = s.solver();
  const fs::path stem = s.text("out");
  Manifest manifest("simulate", s);
  SolverRun run = run_to_wall_touch(p, config);
  write_profile(run.final, stem, run.steps_taken);
  const double mass = trapezoid_mass(run.final.h, 1.0 / static_cast<double>(config.nx - 1));
  manifest.note("wall_touch_time", format_double(run.wall_touch_time));
  manifest.note("steps", run.steps_taken);
  manifest.write(parent_or_cwd(stem));
  std::cout << "wall_touch_time " << format_double(run.wall_touch_time) << "\n"
            << "steps " << run.steps_taken << "\n"
            << "mass " << fmt(mass) << " (relative deviation " << fmt(std::abs(mass - run.wall_touch_time) / run.wall_touch_time, 3)
            << ")\n"
            << "max_boundary_residual " << fmt(run.max_boundary_residual, 3) << "\n";
  return kOk;
}

DatasetSpec dataset_spec(const Settings& s) {
  const std::string grid = s.text("grid");
  DatasetSpec spec;
  if (grid == "regular") {
    spec = DatasetSpec::regular(s.count("nB"), s.count("nS"), s.number("n"), s.solver());
  } else if (grid == "random") {
    spec = DatasetSpec::random(s.count("count"), s.seed(), s.number("n"), s.solver());
  } else {
    throw UsageError("--grid must be regular or random");
  }
  const auto br = s.numbers("B_range");
  const auto sr = s.numbers("S_range");
  if (br.size() != 2 || sr.size() != 2) throw UsageError("B_range and S_range take two values");
  spec.B_min = br[0];
  spec.B_max = br[1];
  spec.S_min = sr[0];
  spec.S_max = sr[1];
  spec.validate();
  return spec;
}

int cmd_dataset(const Settings& s) {
  const DatasetSpec spec = dataset_spec(s);
  const fs::path dir = s.text("out");
  const bool quiet = s.flag("quiet");
  Manifest manifest("dataset", s);
  const auto result = generate_dataset(spec, dir, s.workers(), [&](const DatasetProgress& pr) {
    if (quiet) return;
    std::fprintf(stderr, "[%zu/%zu] B=%s S=%s %s %.1fs, eta %.0fs\n", pr.done, pr.total,
                 fmt(pr.record->params.B).c_str(), fmt(pr.record->params.S).c_str(),
                 pr.record->ok ? "ok" : "FAILED", pr.seconds, pr.eta_seconds);
  });
  for (const auto& t : result.timings) manifest.add_task(t.id, t.seconds, t.resumed);
  const std::size_t failed = result.index.failures();
  manifest.note("couples", result.index.couples.size());
  manifest.note("failures", failed);
  manifest.write(dir);
  std::cout << "couples " << result.index.couples.size() << ", failures " << failed << "\n";
  for (const auto& c : result.index.couples) {
    if (!c.ok) std::cerr << "failed: " << c.file << " B=" << fmt(c.params.B) << " S=" << fmt(c.params.S) << ": " << c.error << "\n";
  }
  return failed == 0 ? kOk : kNumerical;
}

int cmd_train(const Settings& s) {
  const TrainingSet training = load_dataset(s.text("data"));
  const DatasetSpec spec = read_index(s.text("data")).spec;
  SurrogateOptions opt;
  if (spec.B_min != kDefaultDomain.B_min || spec.B_max != kDefaultDomain.B_max || spec.S_min != kDefaultDomain.S_min ||
      spec.S_max != kDefaultDomain.S_max) {
    opt.domain = ParamDomain::from_bounds(spec.B_min, spec.B_max, spec.S_min, spec.S_max);
  }
  opt.beta = static_cast<int>(s.count("beta"));
  opt.p = static_cast<int>(s.count("p"));
  opt.use_pca = s.flag("use_pca");
  const fs::path out = s.text("out");
  Manifest manifest("train", s);
  const Surrogate model = train_surrogate(training, opt);
  save_surrogate(model, out);
  const auto& rms = model.pce.train_rms;
  manifest.note("samples", training.size());
  manifest.note("condition_number", format_double(model.pce.condition_number));
  manifest.write(parent_or_cwd(out));
  std::cout << "samples " << training.size() << ", nx " << model.nx << ", beta " << opt.beta << ", basis "
            << basis_size(opt.beta) << ", targets " << model.pce.coefficients.rows() << "\n"
            << "design condition number " << fmt(model.pce.condition_number, 4) << "\n"
            << "train rms per target: max " << fmt(rms.size() ? rms.maxCoeff() : 0.0, 4) << ", mean "
            << fmt(rms.size() ? rms.mean() : 0.0, 4) << "\n";
  if (model.uses_pca && model.pca.explained_variance.size() > 0) {
    const auto ratio = model.pca.cumulative_explained_ratio();
    std::cout << "explained variance of retained PCs " << fmt(ratio(model.pca.p), 8) << "\n";
  }
  return kOk;
}

std::string stats_table(const std::vector<std::pair<std::string, ErrorStats>>& rows, const std::string& head) {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof line, "%-10s %8s %12s %12s %12s %12s\n", head.c_str(), "count", "median", "q3", "max",
                "variance");
  os << line;
  for (const auto& [label, st] : rows) {
    std::snprintf(line, sizeof line, "%-10s %8zu %12.5g %12.5g %12.5g %12.5g\n", label.c_str(), st.count, st.median,
                  st.q3, st.max, st.variance);
    os << line;
  }
  return os.str();
}

int cmd_validate(const Settings& s) {
  const Surrogate model = load_surrogate(s.text("model"));
  const TrainingSet validation = load_dataset(s.text("data"));
  const fs::path dir = s.text("out");
  Manifest manifest("validate", s);
  const ValidationReport rep = validate(model, validation);

  std::string csv = "B,S,error\n";
  for (std::size_t j = 0; j < rep.errors.size(); ++j) {
    csv += format_double(rep.params[j].B) + "," + format_double(rep.params[j].S) + "," + format_double(rep.errors[j]) + "\n";
  }
  write_text(dir / "errors.csv", csv);

  // Where the worst errors sit in the domain.
  std::vector<std::size_t> order(rep.errors.size());
  for (std::size_t j = 0; j < order.size(); ++j) order[j] = j;
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return rep.errors[a] > rep.errors[b]; });
  Json worst = Json::array();
  for (std::size_t k = 0; k < std::max<std::size_t>(1, order.size() / 10) && k < order.size(); ++k) {
    const std::size_t j = order[k];
    worst.push_back({{"B", format_double(rep.params[j].B)}, {"S", format_double(rep.params[j].S)},
                     {"error", format_double(rep.errors[j])}});
  }

  const std::size_t shown = std::min<std::size_t>(3, validation.size());
  std::string ov = "x";
  for (std::size_t k = 0; k < shown; ++k) ov += ",pde_" + std::to_string(k) + ",surrogate_" + std::to_string(k);
  ov += "\n";
  std::vector<HeightProfile> fitted;
  for (std::size_t k = 0; k < shown; ++k) fitted.push_back(model.evaluate(validation.inputs[k]));
  for (std::size_t i = 0; i < model.nx; ++i) {
    ov += format_double(static_cast<double>(i) / static_cast<double>(model.nx - 1));
    for (std::size_t k = 0; k < shown; ++k) {
      ov += "," + format_double(validation.outputs[k].h[i]) + "," + format_double(fitted[k].h[i]);
    }
    ov += "\n";
  }
  write_text(dir / "overlays.csv", ov);

  Json overlay_params = Json::array();
  for (std::size_t k = 0; k < shown; ++k) overlay_params.push_back(to_json(validation.inputs[k]));
  const Json report{{"stats", stats_json(rep.stats)},
                    {"beta", model.pce.beta},
                    {"p", model.pca.p},
                    {"uses_pca", model.uses_pca},
                    {"top_decile", worst},
                    {"overlay_params", overlay_params}};
  write_text(dir / "report.json", report.dump(2) + "\n");
  const std::string table = stats_table({{"L2", rep.stats}}, "error");
  write_text(dir / "report.txt", table);
  manifest.write(dir);
  std::cout << table;
  return kOk;
}

std::vector<double> observed_on_grid(const LoadedProfile& lp, std::size_t nx) {
  bool uniform = lp.x.size() == nx;
  for (std::size_t i = 0; uniform && i < nx; ++i) {
    uniform = lp.x[i] == static_cast<double>(i) / static_cast<double>(nx - 1);
  }
  return uniform ? lp.h : resample_uniform(lp.x, lp.h, nx);
}

EstimateOptions estimate_options(const Settings& s) {
  EstimateOptions opt;
  opt.multi_start = s.flag("multi_start");
  opt.nm.max_iter = static_cast<int>(s.count("max_iter"));
  opt.nm.initial_step = s.number("initial_step");
  return opt;
}

int cmd_invert(const Settings& s) {
  const Surrogate model = load_surrogate(s.text("model"));
  const LoadedProfile lp = read_profile(s.text("obs"));
  const fs::path dir = s.text("out");
  Manifest manifest("invert", s);

  Observation obs;
  obs.profile.h = observed_on_grid(lp, model.nx);
  obs.profile.params.n = model.n;
  if (s.has("truth_B") || s.has("truth_S")) {
    obs.known_truth = RheoParams{s.number("truth_B"), s.number("truth_S"), model.n};
  } else if (lp.sidecar && lp.sidecar->provenance == Provenance::pde) {
    obs.known_truth = lp.sidecar->params;
  }
  const double alpha = s.number("noise");
  if (alpha > 0.0) obs.profile = add_noise(obs.profile, {alpha, s.seed()});

  EstimateOptions opt = estimate_options(s);
  opt.nm.record_trace = true;
  const InversionResult r = estimate_params(obs, model, opt);

  Json out{{"B", format_double(r.estimate.B)},
           {"S", format_double(r.estimate.S)},
           {"n", format_double(r.estimate.n)},
           {"objective", format_double(r.objective)},
           {"iterations", r.iterations},
           {"total_iterations", r.total_iterations},
           {"converged", r.converged},
           {"at_domain_boundary", r.at_domain_boundary},
           {"low_slope", r.low_slope}};
  if (r.relative_error) out["relative_error"] = format_double(*r.relative_error);
  if (alpha > 0.0) {
    out["noise"] = format_double(alpha);
    out["noise_convention"] = "standard deviation = alpha * h";
    out["seed"] = s.seed();
  }
  write_text(dir / "result.json", out.dump(2) + "\n");

  const HeightProfile fitted = model.evaluate(r.estimate);
  std::string ov = "x,h_observed,h_fitted\n";
  for (std::size_t i = 0; i < model.nx; ++i) {
    ov += format_double(static_cast<double>(i) / static_cast<double>(model.nx - 1)) + "," +
          format_double(obs.profile.h[i]) + "," + format_double(fitted.h[i]) + "\n";
  }
  write_text(dir / "overlay.csv", ov);
  std::string tr = "iteration,Bt,St,objective\n";
  for (std::size_t k = 0; k < r.trace.size(); ++k) {
    tr += std::to_string(k + 1) + "," + format_double(r.trace[k].x) + "," + format_double(r.trace[k].y) + "," +
          format_double(r.trace[k].f) + "\n";
  }
  write_text(dir / "trace.csv", tr);
  manifest.write(dir);

  std::cout << out.dump(2) << "\n";
  if (r.at_domain_boundary) {
    std::cerr << "warning: estimate lies on the edge of the trained (B, S) domain; treat it with caution\n";
  }
  if (r.low_slope) std::cerr << "warning: estimated S < 0.1, where estimates are poorly constrained\n";
  return kOk;
}

int cmd_noise_study(const Settings& s) {
  const Surrogate model = load_surrogate(s.text("model"));
  const TrainingSet validation = load_dataset(s.text("data"));
  const fs::path dir = s.text("out");
  Manifest manifest("noise-study", s);

  NoiseStudyOptions opt;
  opt.alphas = s.numbers("alphas");
  opt.couples = s.count("couples");
  opt.seed = s.seed();
  if (s.has("inner_fraction")) opt.inner_fraction = s.number("inner_fraction");
  opt.workers = s.workers();
  opt.overlay_couples = s.count("overlay_couples");
  opt.estimate = estimate_options(s);
  const NoiseStudyReport rep = noise_study(model, validation, opt);

  Json rows = Json::array();
  std::vector<std::pair<std::string, ErrorStats>> table;
  for (const auto& row : rep.rows) {
    Json errs = Json::array();
    for (double e : row.errors) errs.push_back(format_double(e));
    rows.push_back({{"alpha", format_double(row.alpha)},
                    {"stats", stats_json(row.stats)},
                    {"failures", row.failures},
                    {"not_converged", row.not_converged},
                    {"errors", errs}});
    table.emplace_back(fmt(100.0 * row.alpha, 4) + "%", row.stats);
  }
  const Json report{{"seed", rep.seed},
                    {"noise_convention", "standard deviation = alpha * h"},
                    {"couples", rep.couples},
                    {"rows", rows}};
  write_text(dir / "report.json", report.dump(2) + "\n");
  std::string txt = stats_table(table, "noise");
  for (const auto& row : rep.rows) {
    if (row.failures || row.not_converged) {
      txt += "alpha " + fmt(row.alpha) + ": " + std::to_string(row.failures) + " failed, " +
             std::to_string(row.not_converged) + " not converged\n";
    }
  }
  write_text(dir / "report.txt", txt);

  for (const auto& ov : rep.overlays) {
    std::string csv = "x,h_clean,h_noisy,h_fitted\n";
    for (std::size_t i = 0; i < ov.clean.size(); ++i) {
      csv += format_double(static_cast<double>(i) / static_cast<double>(ov.clean.size() - 1)) + "," +
             format_double(ov.clean[i]) + "," + format_double(ov.noisy[i]) + "," + format_double(ov.fitted[i]) + "\n";
    }
    char name[96];
    std::snprintf(name, sizeof name, "overlay_couple%zu_alpha%s.csv", ov.couple, format_double(ov.alpha).c_str());
    write_text(dir / "overlays" / name, csv);
  }
  manifest.write(dir);
  std::cout << txt;
  return kOk;
}

int cmd_convergence(const Settings& s) {
  const RheoParams p{s.number("B"), s.number("S"), s.number("n")};
  const auto nx_list = s.counts("nx_list");
  const std::size_t nx_ref = s.count("nx_ref");
  const double threshold = s.number("order_threshold");
  const fs::path dir = s.text("out");
  Manifest manifest("convergence", s);
  const ConvergenceTable t = convergence_study(p, nx_list, nx_ref, s.solver());

  std::string csv = "nx,dx,l2_error,wall_touch_time,steps\n";
  for (const auto& r : t.rows) {
    csv += std::to_string(r.nx) + "," + format_double(r.dx) + "," + format_double(r.l2_error) + "," +
           format_double(r.wall_touch_time) + "," + std::to_string(r.steps) + "\n";
  }
  write_text(dir / "convergence.csv", csv);
  const bool pass = std::isfinite(t.order) && t.order >= threshold;
  const Json summary{{"order", format_double(t.order)},
                     {"nx_ref", t.nx_ref},
                     {"ref_wall_touch_time", format_double(t.ref_wall_touch_time)},
                     {"threshold", format_double(threshold)},
                     {"pass", pass}};
  write_text(dir / "summary.json", summary.dump(2) + "\n");
  manifest.note("order", format_double(t.order));
  manifest.write(dir);

  std::cout << csv << "order " << fmt(t.order, 4) << " (threshold " << fmt(threshold) << ")\n";
  if (!pass) throw ThresholdFailure("fitted order " + fmt(t.order, 4) + " is below " + fmt(threshold));
  return kOk;
}

}  // namespace

Json profile_defaults(const std::string& name) {
  Json j{{"profile", name},
         {"n", "1"},
         {"Cd", "0.5"},
         {"wall_touch_threshold", "1e-8"},
         {"max_steps", "2e9"},
         {"seed", 1},
         {"workers", std::max(1u, std::thread::hardware_concurrency())},
         {"grid", "regular"},
         {"nB", 20},
         {"nS", 20},
         {"B_range", {"0.5", "250"}},
         {"S_range", {"0.05", "120"}},
         {"beta", 15},
         {"p", 9},
         {"use_pca", true},
         {"multi_start", true},
         {"max_iter", 400},
         {"initial_step", "0.1"},
         {"noise", "0"},
         {"alphas", {"0", "0.02", "0.05", "0.1"}},
         {"overlay_couples", 3},
         {"nx_list", {76, 151, 301, 601, 1201}},
         {"nx_ref", 2401},
         {"order_threshold", "0.6"},
         {"quiet", false}};
  if (name == "desk") {
    j["nx"] = 151;
    j["count"] = 200;
    j["couples"] = 50;
  } else if (name == "production") {
    j["nx"] = 301;
    j["count"] = 500;
    j["couples"] = 500;
  } else {
    throw UsageError("unknown profile '" + name + "' (expected desk or production)");
  }
  return j;
}

int run(const std::vector<std::string>& args) {
  CLI::App app{"Herschel-Bulkley cavity filling: forward solver, PCE-PCA surrogate and (B, S) inversion", "hbfill"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", kToolVersion);

  // Every value is captured as text; typed parsing happens on access so
  // decimal and scientific spellings are accepted alike.
  std::vector<std::pair<std::string, std::string>> given;
  std::vector<std::pair<CLI::Option*, std::string>> bound;
  std::vector<std::unique_ptr<std::string>> storage;
  auto opt = [&](CLI::App* a, const std::string& flag, const std::string& key, const std::string& help) {
    storage.push_back(std::make_unique<std::string>());
    CLI::Option* o = a->add_option(flag, *storage.back(), help);
    bound.emplace_back(o, key);
    return o;
  };
  std::string config_path, profile;
  app.add_option("--config", config_path, "JSON settings file (a previous manifest.json also works)");
  app.add_option("--profile", profile, "desk (default) or production");
  opt(&app, "--seed", "seed", "master random seed");
  opt(&app, "--workers", "workers", "worker threads");
  opt(&app, "--out", "out", "output path");
  opt(&app, "--nx", "nx", "grid nodes");
  opt(&app, "--Cd", "Cd", "diffusive time-step factor");
  opt(&app, "--dt-max", "dt_max", "time-step cap (default dx)");

  auto* sim = app.add_subcommand("simulate", "solve to wall-touch and write the profile (CSV + JSON sidecar)");
  opt(sim, "--B", "B", "Bingham number");
  opt(sim, "--S", "S", "slope parameter");
  opt(sim, "--n", "n", "power index");

  auto* ds = app.add_subcommand("dataset", "solve a grid of (B, S) couples into a directory (resumable)");
  opt(ds, "--grid", "grid", "regular or random");
  opt(ds, "--nB", "nB", "regular grid: B values");
  opt(ds, "--nS", "nS", "regular grid: S values");
  opt(ds, "--count", "count", "random grid: couples");
  opt(ds, "--n", "n", "power index");
  opt(ds, "--B-range", "B_range", "min,max");
  opt(ds, "--S-range", "S_range", "min,max");
  bool quiet = false;
  auto* quiet_flag = ds->add_flag("--quiet", quiet, "no per-couple progress");

  auto* tr = app.add_subcommand("train", "fit a PCE-PCA surrogate on a dataset directory");
  opt(tr, "--data", "data", "dataset directory");
  opt(tr, "--beta", "beta", "total polynomial degree");
  opt(tr, "--p", "p", "retained principal components minus one");
  bool no_pca = false;
  auto* no_pca_flag = tr->add_flag("--no-pca", no_pca, "one PCE per grid node instead of per component");

  auto* va = app.add_subcommand("validate", "reconstruction error statistics on a validation dataset");
  opt(va, "--model", "model", "surrogate JSON");
  opt(va, "--data", "data", "validation dataset directory");

  bool single_start = false;
  auto* inv = app.add_subcommand("invert", "estimate (B, S) from an observed profile");
  opt(inv, "--model", "model", "surrogate JSON");
  opt(inv, "--obs", "obs", "profile CSV (x,h)");
  opt(inv, "--noise", "noise", "perturb the observation with relative noise alpha first");
  opt(inv, "--truth-B", "truth_B", "known B, for the relative error");
  opt(inv, "--truth-S", "truth_S", "known S, for the relative error");
  opt(inv, "--max-iter", "max_iter", "Nelder-Mead iterations per start");
  auto* single_inv = inv->add_flag("--single-start", single_start, "start only from the domain center");

  auto* ns = app.add_subcommand("noise-study", "estimation error statistics under synthetic noise");
  opt(ns, "--model", "model", "surrogate JSON");
  opt(ns, "--data", "data", "validation dataset directory");
  opt(ns, "--alphas", "alphas", "comma-separated noise intensities");
  opt(ns, "--couples", "couples", "validation couples to sample");
  opt(ns, "--inner-fraction", "inner_fraction", "restrict to the central fraction of each range");
  opt(ns, "--max-iter", "max_iter", "Nelder-Mead iterations per start");
  auto* single_ns = ns->add_flag("--single-start", single_start, "start only from the domain center");

  auto* cv = app.add_subcommand("convergence", "L2 error against a fine reference and fitted order");
  opt(cv, "--B", "B", "Bingham number");
  opt(cv, "--S", "S", "slope parameter");
  opt(cv, "--n", "n", "power index");
  opt(cv, "--nx-list", "nx_list", "comma-separated coarse grids");
  opt(cv, "--nx-ref", "nx_ref", "reference grid");
  opt(cv, "--threshold", "order_threshold", "minimum accepted order (exit 3 below)");

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  try {
    app.parse(argv_rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  CLI::App* cmd = app.get_subcommands().front();
  const std::string name = cmd->get_name();
  try {
    Json base;
    Json file_cfg;
    if (!config_path.empty()) {
      file_cfg = Json::parse(read_text(config_path));
      if (file_cfg.contains("config") && file_cfg.contains("command")) file_cfg = file_cfg.at("config");
      if (!file_cfg.is_object()) throw UsageError(config_path + ": expected a JSON object");
    }
    std::string prof = profile;
    if (prof.empty()) prof = file_cfg.is_object() ? file_cfg.value("profile", std::string("desk")) : "desk";
    base = profile_defaults(prof);
    if (!file_cfg.is_null()) base.merge_patch(file_cfg);
    base["profile"] = prof;
    for (std::size_t k = 0; k < bound.size(); ++k) {
      if (bound[k].first->count() > 0) base[bound[k].second] = *storage[k];
    }
    if (quiet_flag->count()) base["quiet"] = true;
    if (no_pca_flag->count()) base["use_pca"] = false;
    if (single_inv->count() || single_ns->count()) base["multi_start"] = false;
    if (name == "dataset" && base.contains("out") && !base.contains("data")) base["data"] = base["out"];
    const Settings s(std::move(base));

    if (name == "simulate") return cmd_simulate(s);
    if (name == "dataset") return cmd_dataset(s);
    if (name == "train") return cmd_train(s);
    if (name == "validate") return cmd_validate(s);
    if (name == "invert") return cmd_invert(s);
    if (name == "noise-study") return cmd_noise_study(s);
    if (name == "convergence") return cmd_convergence(s);
    throw UsageError("unknown command " + name);
  } catch (const ThresholdFailure& e) {
    std::cerr << "hbfill " << name << ": " << e.what() << "\n";
    return kThreshold;
  } catch (const NumericalError& e) {
    std::cerr << "hbfill " << name << ": numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const Error& e) {
    std::cerr << "hbfill " << name << ": " << e.what() << "\n";
    return kUsage;
  } catch (const Json::exception& e) {
    std::cerr << "hbfill " << name << ": malformed JSON: " << e.what() << "\n";
    return kUsage;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "hbfill " << name << ": " << e.what() << "\n";
    return kUsage;
  }
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args);
}

}  // namespace hbfill::cli
