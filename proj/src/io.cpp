#include "sdsm/io.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <ostream>

#include "sdsm/errors.hpp"

namespace sdsm::io {

const char* build_id() { return SDSM_BUILD_ID; }

Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw ConfigError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

namespace {

template <class T>
T get_or(const Json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception&) {
    throw ConfigError(std::string("bad value for \"") + key + "\"");
  }
}

template <class T>
T need(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key))
    throw ConfigError(std::string("missing field \"") + key + "\"");
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception&) {
    throw ConfigError(std::string("bad value for \"") + key + "\"");
  }
}

const Json& section(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key))
    throw ConfigError(std::string("missing field \"") + key + "\"");
  return j.at(key);
}

std::vector<double> flat_points(const Json& pts, int& dim) {
  std::vector<double> out;
  dim = 0;
  for (const auto& p : pts) {
    auto v = p.get<std::vector<double>>();
    if (dim == 0) dim = static_cast<int>(v.size());
    if (static_cast<int>(v.size()) != dim || dim == 0)
      throw ConfigError("points must share one dimension");
    out.insert(out.end(), v.begin(), v.end());
  }
  return out;
}

}  // namespace

ModelCoefficients model_from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("model must be a JSON object");
  std::optional<OffspringLaw> law;
  if (j.contains("offspring")) law.emplace(need<std::vector<double>>(j, "offspring"));

  if (j.contains("preset")) {
    auto name = need<std::string>(j, "preset");
    if (name != "reference") throw ConfigError("unknown model preset: " + name);
    auto m = reference_model();
    if (j.contains("gamma")) m = m.with_gamma(need<double>(j, "gamma"));
    if (law) m = m.with_offspring(*law);
    return m;
  }

  const int d = need<int>(j, "dim");
  if (d < 1 || d > kMaxDim) throw ConfigError("model dim must be in 1..4");
  const auto& cj = section(j, "c");
  if (need<std::string>(cj, "family") != "constant_c")
    throw ConfigError("unknown c family: " + cj.at("family").get<std::string>());
  auto rows = need<std::vector<std::vector<double>>>(cj, "matrix");
  if (static_cast<int>(rows.size()) != d) throw ConfigError("c matrix must be d x d");
  Eigen::MatrixXd c(d, d);
  for (int r = 0; r < d; ++r) {
    if (static_cast<int>(rows[r].size()) != d) throw ConfigError("c matrix must be d x d");
    for (int s = 0; s < d; ++s) c(r, s) = rows[r][s];
  }

  std::variant<ZeroH, GaussianH> h = ZeroH{};
  const auto& hj = section(j, "h");
  auto hf = need<std::string>(hj, "family");
  if (hf == "gaussian_h") {
    GaussianH g{need<std::vector<double>>(hj, "amplitude"), need<double>(hj, "scale")};
    if (static_cast<int>(g.amplitude.size()) != d) throw ConfigError("h amplitude needs d entries");
    h = g;
  } else if (hf != "zero_h") {
    throw ConfigError("unknown h family: " + hf);
  }
  return make_model(d, ConstantC{c}, h, need<double>(j, "gamma"),
                    law ? *law : OffspringLaw::critical_binary());
}

InitialMeasure initial_from_json(const Json& j) {
  auto kind = need<std::string>(j, "kind");
  if (kind == "point_mass")
    return InitialMeasure::point_mass(need<std::vector<double>>(j, "x"), get_or(j, "mass", 1.0));
  if (kind == "point_masses") {
    int dim = 0;
    auto pts = flat_points(section(j, "points"), dim);
    return InitialMeasure::point_masses(dim, pts, need<std::vector<double>>(j, "weights"));
  }
  if (kind == "gaussian")
    return InitialMeasure::gaussian(need<std::vector<double>>(j, "mean"), need<double>(j, "sd"),
                                    get_or(j, "mass", 1.0));
  if (kind == "uniform_box")
    return InitialMeasure::uniform_box(need<std::vector<double>>(j, "lo"),
                                       need<std::vector<double>>(j, "hi"), get_or(j, "mass", 1.0));
  throw ConfigError("unknown initial measure kind: " + kind);
}

TestFunction observable_from_json(const Json& j, const ModelCoefficients& model) {
  auto family = need<std::string>(j, "family");
  const int d = model.dim();
  auto center = [&] {
    auto c = get_or(j, "center", std::vector<double>(d, 0.0));
    if (static_cast<int>(c.size()) != d) throw ConfigError("observable center has wrong dimension");
    return c;
  };
  std::optional<TestFunction> f;
  if (family == "constant") {
    f = TestFunction::constant(d, get_or(j, "value", 1.0));
  } else if (family == "linear") {
    f = TestFunction::linear(need<std::vector<double>>(j, "coefficients"));
  } else if (family == "gaussian_bump") {
    f = TestFunction::gaussian_bump(center(), need<double>(j, "width"), get_or(j, "amplitude", 1.0));
  } else if (family == "compact_bump") {
    f = TestFunction::compact_bump(center(), need<double>(j, "radius"), get_or(j, "amplitude", 1.0));
  } else if (family == "weighted_polynomial") {
    f = TestFunction::weighted_polynomial(d, need<double>(j, "a"), need<double>(j, "c0"),
                                          need<double>(j, "c2"));
  } else if (family == "resolvent_kernel" || family == "heat_mollifier") {
    auto s0 = constant_effective_diffusion(model);
    if (!s0) throw ConfigError(family + " needs a constant scalar effective diffusion");
    KernelSpec spec;
    spec.dim = d;
    spec.sigma0_sq = *s0;
    spec.eps = need<double>(j, "eps");
    spec.lambda = get_or(j, "lambda", 1.0);
    spec.validate();
    auto x = need<std::vector<double>>(j, "x");
    if (static_cast<int>(x.size()) != d) throw ConfigError("observable x has wrong dimension");
    f = family == "resolvent_kernel" ? TestFunction::resolvent_kernel(x, spec)
                                     : TestFunction::heat_mollifier(x, spec);
  } else {
    throw ConfigError("unknown observable family: " + family);
  }
  if (j.contains("name")) f->set_name(need<std::string>(j, "name"));
  return *f;
}

std::vector<TestFunction> observables_from_json(const Json& j, const ModelCoefficients& model) {
  std::vector<TestFunction> out;
  if (j.is_null()) return out;
  if (!j.is_array()) throw ConfigError("observables must be a list");
  for (const auto& o : j) out.push_back(observable_from_json(o, model));
  return out;
}

SimulationConfig simulation_from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("simulation must be a JSON object");
  SimulationConfig c;
  c.horizon = need<double>(j, "horizon");
  c.dt = need<double>(j, "dt");
  c.theta = get_or(j, "theta", c.theta);
  c.n = get_or(j, "n", c.n);
  c.snapshot_stride = get_or(j, "snapshot_stride", 0);
  auto mode = get_or<std::string>(j, "branching", "bernoulli");
  if (mode == "bernoulli")
    c.branching = BranchingMode::bernoulli;
  else if (mode == "exact_events")
    c.branching = BranchingMode::exact_events;
  else
    throw ConfigError("unknown branching mode: " + mode);
  c.track_martingales = get_or(j, "track_martingales", true);
  c.log_events = get_or(j, "log_events", false);
  c.lineage = get_or(j, "lineage", false);
  return c;
}

Json load_manifest(const std::filesystem::path& path) {
  Json j = read_json(path);
  if (!j.is_object()) throw ConfigError("manifest must be a JSON object: " + path.string());
  if (j.contains("model") && j["model"].is_string()) {
    auto ref = path.parent_path() / j["model"].get<std::string>();
    Json model = read_json(ref);
    j["model_source"] = j["model"];
    j["model"] = std::move(model);
  }
  return j;
}

std::string format_number(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char ch : field) {
    if (ch == '"') out += '"';
    out += ch;
  }
  out += '"';
  return out;
}

void CsvWriter::row(const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) *out_ << ',';
    *out_ << csv_escape(fields[i]);
  }
  *out_ << "\r\n";
}

void write_series_csv(std::ostream& out, const std::vector<PathRecord>& records) {
  CsvWriter csv(out);
  csv.row({"replicate", "time", "observable", "value", "generator", "X", "U", "M", "Qd",
           "generator_integral", "square_integral", "occupation", "alive"});
  for (const auto& rec : records) {
    for (std::size_t k = 0; k < rec.times.size(); ++k) {
      for (const auto& s : rec.series) {
        auto at = [&](const std::vector<double>& v) {
          return k < v.size() ? format_number(v[k]) : std::string();
        };
        csv.row({std::to_string(rec.replicate), format_number(rec.times[k]), s.name, at(s.value),
                 at(s.generator), at(s.X), at(s.U), at(s.M), at(s.Qd), at(s.generator_integral),
                 at(s.square_integral), at(s.occupation), std::to_string(rec.alive[k])});
      }
    }
  }
}

namespace {

void put_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 8);
}

void put_f64(std::ostream& out, double x) { put_u64(out, std::bit_cast<std::uint64_t>(x)); }

std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw ConfigError("snapshot file is truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace

void write_snapshots(const std::filesystem::path& path, const PathRecord& record) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out.write(kSnapshotMagic, 8);
  out.put(static_cast<char>(kSnapshotVersion));
  const auto dim = static_cast<std::uint32_t>(record.dim);
  for (int i = 0; i < 4; ++i) out.put(static_cast<char>((dim >> (8 * i)) & 0xff));
  put_u64(out, record.snapshots.size());
  for (const auto& s : record.snapshots) {
    put_f64(out, s.time);
    put_u64(out, s.positions.size() / record.dim);
    for (double x : s.positions) put_f64(out, x);
  }
}

SnapshotFile read_snapshots(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open snapshot file: " + path.string());
  char magic[8];
  if (!in.read(magic, 8) || !std::equal(magic, magic + 8, kSnapshotMagic))
    throw ConfigError("not a snapshot file: " + path.string());
  int version = in.get();
  if (version != kSnapshotVersion)
    throw ConfigError("unsupported snapshot version " + std::to_string(version));
  unsigned char db[4];
  if (!in.read(reinterpret_cast<char*>(db), 4)) throw ConfigError("snapshot file is truncated");
  SnapshotFile f;
  f.dim = static_cast<int>(db[0] | db[1] << 8 | db[2] << 16 | db[3] << 24);
  if (f.dim < 1 || f.dim > kMaxDim) throw ConfigError("snapshot file has a bad dimension");
  const auto count = get_u64(in);
  for (std::uint64_t s = 0; s < count; ++s) {
    Snapshot snap;
    snap.time = std::bit_cast<double>(get_u64(in));
    const auto m = get_u64(in);
    snap.positions.resize(m * f.dim);
    for (auto& x : snap.positions) x = std::bit_cast<double>(get_u64(in));
    f.snapshots.push_back(std::move(snap));
  }
  return f;
}

}  // namespace sdsm::io
