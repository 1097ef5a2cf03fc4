#include "hbfill/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "hbfill/error.hpp"

namespace hbfill {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(const Json& j) {
  if (j.is_number()) return j.get<double>();
  if (!j.is_string()) throw FormatError("expected a number or decimal string, got " + j.dump());
  const auto& s = j.get_ref<const std::string&>();
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    // from_chars rejects "inf"/"nan" spellings some writers use.
    if (s == "inf") return HUGE_VAL;
    if (s == "-inf") return -HUGE_VAL;
    throw FormatError("malformed number '" + s + "'");
  }
  return v;
}

Json to_json(const SolverConfig& c) {
  Json j;
  j["nx"] = c.nx;
  j["Cd"] = format_double(c.Cd);
  j["dt_max"] = format_double(c.resolved_dt_max());
  j["wall_touch_threshold"] = format_double(c.wall_touch_threshold);
  j["max_steps"] = c.max_steps;
  return j;
}

SolverConfig solver_config_from_json(const Json& j) {
  SolverConfig c;
  c.nx = j.at("nx").get<std::size_t>();
  c.Cd = parse_double(j.at("Cd"));
  if (j.contains("dt_max")) c.dt_max = parse_double(j.at("dt_max"));
  c.wall_touch_threshold = parse_double(j.at("wall_touch_threshold"));
  if (j.contains("max_steps")) c.max_steps = j.at("max_steps").get<std::uint64_t>();
  return c;
}

Json to_json(const RheoParams& p) {
  return Json{{"B", format_double(p.B)}, {"S", format_double(p.S)}, {"n", format_double(p.n)}};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  // Write-then-rename so an interrupted run never leaves a truncated file.
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open " + tmp.string() + " for writing");
    out << text;
    if (!out) throw FormatError("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_profile(const HeightProfile& profile, const std::filesystem::path& stem, std::uint64_t steps) {
  const std::size_t nx = profile.h.size();
  if (nx < 2) throw DomainError("profile needs at least 2 nodes");
  const Grid grid{nx, 1.0 / static_cast<double>(nx - 1)};
  std::string csv = "x,h\n";
  csv.reserve(nx * 48);
  for (std::size_t i = 0; i < nx; ++i) {
    csv += format_double(grid.x(i));
    csv += ',';
    csv += format_double(profile.h[i]);
    csv += '\n';
  }
  Json side;
  side["B"] = format_double(profile.params.B);
  side["S"] = format_double(profile.params.S);
  side["n"] = format_double(profile.params.n);
  side["nx"] = nx;
  side["wall_touch_time"] = format_double(profile.t);
  side["provenance"] = std::string(to_string(profile.provenance));
  side["steps"] = steps;
  write_text(std::filesystem::path(stem.string() + ".csv"), csv);
  write_text(std::filesystem::path(stem.string() + ".json"), side.dump(2) + "\n");
}

ProfileSidecar read_sidecar(const std::filesystem::path& path) {
  const Json j = Json::parse(read_text(path));
  ProfileSidecar s;
  s.params.B = parse_double(j.at("B"));
  s.params.S = parse_double(j.at("S"));
  s.params.n = parse_double(j.at("n"));
  s.nx = j.at("nx").get<std::size_t>();
  s.wall_touch_time = parse_double(j.at("wall_touch_time"));
  s.provenance = provenance_from_string(j.at("provenance").get<std::string>());
  s.steps = j.value("steps", std::uint64_t{0});
  return s;
}

LoadedProfile read_profile(const std::filesystem::path& path) {
  std::filesystem::path csv = path;
  if (csv.extension() != ".csv") csv = std::filesystem::path(path.string() + ".csv");
  std::istringstream in(read_text(csv));
  LoadedProfile out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw FormatError(csv.string() + ":" + std::to_string(lineno) + ": expected two comma-separated columns");
    }
    const std::string a = line.substr(0, comma);
    const std::string b = line.substr(comma + 1);
    double xv = 0.0, hv = 0.0;
    const auto ra = std::from_chars(a.data(), a.data() + a.size(), xv);
    const auto rb = std::from_chars(b.data(), b.data() + b.size(), hv);
    if (ra.ec != std::errc() || rb.ec != std::errc()) {
      if (out.x.empty() && lineno == 1) continue;  // header
      throw FormatError(csv.string() + ":" + std::to_string(lineno) + ": malformed number");
    }
    out.x.push_back(xv);
    out.h.push_back(hv);
  }
  if (out.x.size() < 2) throw FormatError(csv.string() + ": fewer than two data rows");
  auto side = csv;
  side.replace_extension(".json");
  if (std::filesystem::exists(side)) {
    out.sidecar = read_sidecar(side);
    if (out.sidecar->nx != out.h.size()) {
      throw FormatError(side.string() + ": nx does not match the CSV row count");
    }
  }
  return out;
}

std::vector<double> resample_uniform(std::span<const double> x, std::span<const double> h, std::size_t nx) {
  if (x.size() != h.size() || x.size() < 2) throw DomainError("resample: need matching x/h with >= 2 points");
  if (nx < 2) throw DomainError("resample: target grid needs >= 2 nodes");
  for (std::size_t i = 1; i < x.size(); ++i) {
    if (!(x[i] > x[i - 1])) throw DomainError("resample: x must be strictly increasing");
  }
  constexpr double tol = 1e-9;
  if (std::abs(x.front()) > tol || std::abs(x.back() - 1.0) > tol) {
    throw DomainError("resample: x must span [0, 1]");
  }
  std::vector<double> out(nx);
  std::size_t seg = 0;
  for (std::size_t i = 0; i < nx; ++i) {
    const double xi = static_cast<double>(i) / static_cast<double>(nx - 1);
    while (seg + 2 < x.size() && x[seg + 1] < xi) ++seg;
    const double t = std::clamp((xi - x[seg]) / (x[seg + 1] - x[seg]), 0.0, 1.0);
    out[i] = h[seg] + t * (h[seg + 1] - h[seg]);
  }
  return out;
}

}  // namespace hbfill
