#include "hbfill/dataset.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <mutex>
#include <numeric>
#include <random>

#include "hbfill/error.hpp"
#include "hbfill/inversion.hpp"

namespace hbfill {

void DatasetSpec::validate() const {
  solver.validate();
  if (!(n >= kMinPowerIndex && n <= kMaxPowerIndex)) throw DomainError("dataset: n outside the supported range");
  if (!(B_min <= B_max && S_min <= S_max)) throw DomainError("dataset: inverted B or S range");
  const ParamDomain& d = kDefaultDomain;
  if (B_min < d.B_min || B_max > d.B_max || S_min < d.S_min || S_max > d.S_max) {
    throw DomainError("dataset: ranges must lie inside the global domain");
  }
  if (grid.kind == GridDescriptor::Kind::regular) {
    if (grid.nB < 2 || grid.nS < 2) throw DomainError("dataset: regular grids need nB, nS >= 2");
  } else if (grid.count == 0) {
    throw DomainError("dataset: random grid needs count >= 1");
  }
}

DatasetSpec DatasetSpec::regular(std::size_t nB, std::size_t nS, double n, const SolverConfig& solver) {
  DatasetSpec s;
  s.grid = {GridDescriptor::Kind::regular, nB, nS, nB * nS, 0};
  s.n = n;
  s.solver = solver;
  return s;
}

DatasetSpec DatasetSpec::random(std::size_t count, std::uint64_t seed, double n, const SolverConfig& solver) {
  DatasetSpec s;
  s.grid = {GridDescriptor::Kind::random, 0, 0, count, seed};
  s.n = n;
  s.solver = solver;
  return s;
}

namespace {

double linspace(double lo, double hi, std::size_t i, std::size_t count) {
  if (i + 1 == count) return hi;
  return lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
}

// 53 random bits in [0, 1); avoids the implementation-defined
// uniform_real_distribution so files match across standard libraries.
double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::string stem_for(std::size_t id) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "couple_%05zu", id);
  return buf;
}

bool finished_on_disk(const std::filesystem::path& dir, const CoupleRecord& rec, const DatasetSpec& spec,
                      CoupleRecord& out) {
  const auto side = dir / (rec.file + ".json");
  const auto csv = dir / (rec.file + ".csv");
  if (!std::filesystem::exists(side) || !std::filesystem::exists(csv)) return false;
  try {
    const ProfileSidecar s = read_sidecar(side);
    if (!(s.params == rec.params) || s.nx != spec.solver.nx) return false;
    out.ok = true;
    out.wall_touch_time = s.wall_touch_time;
    out.steps = s.steps;
    return true;
  } catch (const std::exception&) {
    return false;
  }
}

}  // namespace

std::vector<RheoParams> dataset_couples(const DatasetSpec& spec) {
  std::vector<RheoParams> out;
  if (spec.grid.kind == GridDescriptor::Kind::regular) {
    out.reserve(spec.grid.nB * spec.grid.nS);
    for (std::size_t i = 0; i < spec.grid.nB; ++i) {
      for (std::size_t j = 0; j < spec.grid.nS; ++j) {
        out.push_back({linspace(spec.B_min, spec.B_max, i, spec.grid.nB),
                       linspace(spec.S_min, spec.S_max, j, spec.grid.nS), spec.n});
      }
    }
  } else {
    std::mt19937_64 rng(spec.grid.seed);
    out.reserve(spec.grid.count);
    for (std::size_t k = 0; k < spec.grid.count; ++k) {
      const double B = spec.B_min + (spec.B_max - spec.B_min) * unit(rng);
      const double S = spec.S_min + (spec.S_max - spec.S_min) * unit(rng);
      out.push_back({B, S, spec.n});
    }
  }
  return out;
}

double predicted_cost(const RheoParams& p) { return p.B / std::max(p.S, 0.05); }

std::size_t DatasetIndex::failures() const {
  return static_cast<std::size_t>(std::count_if(couples.begin(), couples.end(), [](const auto& c) { return !c.ok; }));
}

DatasetRunResult generate_dataset(const DatasetSpec& spec, const std::filesystem::path& dir, std::size_t workers,
                                  const std::function<void(const DatasetProgress&)>& progress) {
  spec.validate();
  std::filesystem::create_directories(dir);
  const auto params = dataset_couples(spec);

  DatasetRunResult result;
  result.index.spec = spec;
  result.index.couples.resize(params.size());
  result.timings.resize(params.size());
  std::vector<std::size_t> pending;
  for (std::size_t id = 0; id < params.size(); ++id) {
    CoupleRecord& rec = result.index.couples[id];
    rec.id = id;
    rec.params = params[id];
    rec.file = stem_for(id);
    result.timings[id].id = id;
    if (finished_on_disk(dir, rec, spec, rec)) {
      result.timings[id].resumed = true;
    } else {
      pending.push_back(id);
    }
  }
  std::stable_sort(pending.begin(), pending.end(), [&](std::size_t a, std::size_t b) {
    return predicted_cost(params[a]) > predicted_cost(params[b]);
  });

  double remaining_cost = 0.0;
  for (std::size_t id : pending) remaining_cost += 1.0 + predicted_cost(params[id]);
  double done_cost = 0.0, done_seconds = 0.0;
  std::size_t done = params.size() - pending.size();
  std::mutex mutex;

  parallel_for(pending.size(), workers, [&](std::size_t k) {
    const std::size_t id = pending[k];
    CoupleRecord& rec = result.index.couples[id];
    const auto t0 = std::chrono::steady_clock::now();
    try {
      SolverRun run = run_to_wall_touch(rec.params, spec.solver);
      write_profile(run.final, dir / rec.file, run.steps_taken);
      rec.ok = true;
      rec.wall_touch_time = run.wall_touch_time;
      rec.steps = run.steps_taken;
    } catch (const Error& e) {
      rec.ok = false;
      rec.error = e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.timings[id].seconds = secs;
    std::lock_guard lock(mutex);
    ++done;
    const double cost = 1.0 + predicted_cost(rec.params);
    done_cost += cost;
    done_seconds += secs;
    remaining_cost -= cost;
    if (progress) {
      DatasetProgress pr;
      pr.done = done;
      pr.total = params.size();
      pr.record = &rec;
      pr.seconds = secs;
      pr.eta_seconds = done_cost > 0.0 ? remaining_cost * done_seconds / done_cost / static_cast<double>(std::max<std::size_t>(workers, 1)) : 0.0;
      progress(pr);
    }
  });

  write_index(result.index, dir);
  return result;
}

Json to_json(const DatasetSpec& spec) {
  return Json{{"grid", to_json(spec.grid)},
              {"B_range", {format_double(spec.B_min), format_double(spec.B_max)}},
              {"S_range", {format_double(spec.S_min), format_double(spec.S_max)}},
              {"n", format_double(spec.n)},
              {"solver", to_json(spec.solver)}};
}

DatasetSpec dataset_spec_from_json(const Json& j) {
  DatasetSpec s;
  s.grid = grid_from_json(j.at("grid"));
  if (j.contains("B_range")) {
    s.B_min = parse_double(j.at("B_range").at(0));
    s.B_max = parse_double(j.at("B_range").at(1));
  }
  if (j.contains("S_range")) {
    s.S_min = parse_double(j.at("S_range").at(0));
    s.S_max = parse_double(j.at("S_range").at(1));
  }
  if (j.contains("n")) s.n = parse_double(j.at("n"));
  if (j.contains("solver")) s.solver = solver_config_from_json(j.at("solver"));
  if (s.grid.kind == GridDescriptor::Kind::regular) s.grid.count = s.grid.nB * s.grid.nS;
  return s;
}

void write_index(const DatasetIndex& index, const std::filesystem::path& dir) {
  Json couples = Json::array();
  for (const auto& c : index.couples) {
    Json e{{"id", c.id}, {"B", format_double(c.params.B)}, {"S", format_double(c.params.S)},
           {"file", c.file}, {"status", c.ok ? "ok" : "failed"}};
    if (c.ok) {
      e["wall_touch_time"] = format_double(c.wall_touch_time);
      e["steps"] = c.steps;
    } else {
      e["error"] = c.error;
    }
    couples.push_back(std::move(e));
  }
  const Json j{{"format_version", DatasetIndex::kFormatVersion}, {"spec", to_json(index.spec)}, {"couples", couples}};
  write_text(dir / "index.json", j.dump(2) + "\n");
}

DatasetIndex read_index(const std::filesystem::path& dir) {
  const Json j = Json::parse(read_text(dir / "index.json"));
  if (j.at("format_version").get<int>() != DatasetIndex::kFormatVersion) {
    throw FormatError("unsupported dataset index version");
  }
  DatasetIndex idx;
  idx.spec = dataset_spec_from_json(j.at("spec"));
  for (const auto& e : j.at("couples")) {
    CoupleRecord c;
    c.id = e.at("id").get<std::size_t>();
    c.params = {parse_double(e.at("B")), parse_double(e.at("S")), idx.spec.n};
    c.file = e.at("file").get<std::string>();
    c.ok = e.at("status").get<std::string>() == "ok";
    if (c.ok) {
      c.wall_touch_time = parse_double(e.at("wall_touch_time"));
      c.steps = e.value("steps", std::uint64_t{0});
    } else {
      c.error = e.value("error", std::string{});
    }
    idx.couples.push_back(std::move(c));
  }
  return idx;
}

TrainingSet load_dataset(const std::filesystem::path& dir) {
  const DatasetIndex idx = read_index(dir);
  if (const std::size_t f = idx.failures()) {
    throw FormatError(dir.string() + ": " + std::to_string(f) + " couple(s) failed; regenerate before use");
  }
  TrainingSet ts;
  ts.grid = idx.spec.grid;
  ts.solver = idx.spec.solver;
  for (const auto& c : idx.couples) {
    const LoadedProfile lp = read_profile(dir / (c.file + ".csv"));
    if (lp.h.size() != idx.spec.solver.nx) throw FormatError(c.file + ": node count differs from the index");
    HeightProfile hp;
    hp.h = lp.h;
    hp.t = c.wall_touch_time;
    hp.params = c.params;
    hp.provenance = Provenance::pde;
    ts.inputs.push_back(c.params);
    ts.outputs.push_back(std::move(hp));
  }
  return ts;
}

}  // namespace hbfill
