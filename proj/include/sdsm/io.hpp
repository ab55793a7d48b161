#ifndef SDSM_IO_HPP
#define SDSM_IO_HPP

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "sdsm/model.hpp"
#include "sdsm/particles.hpp"
#include "sdsm/test_function.hpp"

namespace sdsm::io {

using Json = nlohmann::ordered_json;

/// git-describe-style identifier fixed at configure time.
const char* build_id();

/// Parses a JSON file; ConfigError naming the path when it is missing or
/// malformed.
Json read_json(const std::filesystem::path& path);

/// {"preset": "reference"} or
/// {"dim": d, "c": {"family": "constant_c", "matrix": [[..]]},
///  "h": {"family": "gaussian_h", "amplitude": [..], "scale": s} | {"family": "zero_h"},
///  "gamma": g, "offspring": [p0, p1, ...]}.
/// A preset may override gamma and offspring.
ModelCoefficients model_from_json(const Json& j);

/// {"kind": "point_mass", "x": [..], "mass": m} | "point_masses" with
/// "points" (list of points) and "weights" | "gaussian" with "mean", "sd",
/// "mass" | "uniform_box" with "lo", "hi", "mass".
InitialMeasure initial_from_json(const Json& j);

/// {"family": ..., "name": optional, family parameters}. The resolvent and
/// mollifier families take "x", "eps" (and "lambda") and read sigma_0^2 from
/// the model.
TestFunction observable_from_json(const Json& j, const ModelCoefficients& model);
std::vector<TestFunction> observables_from_json(const Json& j, const ModelCoefficients& model);

/// {"horizon", "dt", "theta", "n", "snapshot_stride", "branching":
/// "bernoulli" | "exact_events", "track_martingales", "log_events", "lineage"}.
SimulationConfig simulation_from_json(const Json& j);

/// Loads a run manifest and inlines a "model" given as a file path (relative
/// to the manifest). The result is what gets written back for replay.
Json load_manifest(const std::filesystem::path& path);

/// %.17g, so values round-trip.
std::string format_number(double x);

/// RFC 4180: fields quoted when they contain a comma, quote, CR or LF;
/// records end in CRLF.
class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& out) : out_(&out) {}
  void row(const std::vector<std::string>& fields);

 private:
  std::ostream* out_;
};

std::string csv_escape(std::string_view field);

/// One row per (replicate, step, observable).
void write_series_csv(std::ostream& out, const std::vector<PathRecord>& records);

/// "SDSMSNAP", version byte, then little-endian u32 dim, u64 snapshot
/// count and per snapshot f64 time, u64 particle count, f64 positions.
inline constexpr char kSnapshotMagic[8] = {'S', 'D', 'S', 'M', 'S', 'N', 'A', 'P'};
inline constexpr unsigned char kSnapshotVersion = 1;

void write_snapshots(const std::filesystem::path& path, const PathRecord& record);

struct SnapshotFile {
  int dim = 0;
  std::vector<Snapshot> snapshots;
};

/// ConfigError on a bad magic, unknown version or truncated file.
SnapshotFile read_snapshots(const std::filesystem::path& path);

}  // namespace sdsm::io

#endif  // SDSM_IO_HPP
