#ifndef SDSM_VALIDATE_HPP
#define SDSM_VALIDATE_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "sdsm/io.hpp"
#include "sdsm/particles.hpp"

namespace sdsm {

/// One entry of a suite run.
///
/// `statistical` checks carry score = |z| and pass iff score <= 3.
/// `tolerance` checks carry score = max over their parts of value / bound
/// (|z| / gate for statistical parts) and pass iff score <= 1.
/// `flag` checks pass or fail on a yes/no condition; score is 0 or 1.
struct CheckReport {
  std::string id;
  std::string kind;
  double statistic = 0.0;
  double expected = 0.0;
  double se = 0.0;
  double score = 0.0;
  bool pass = false;
  bool skipped = false;
  std::string error;
  std::int64_t reps = 0;
  std::vector<std::uint64_t> seeds;
  /// Per-part values, thresholds and anything needed to read the result.
  io::Json detail = io::Json::object();
  /// Wall clock seconds; not part of the replayable report.
  double runtime_s = 0.0;
};

io::Json to_json(const CheckReport& report, bool with_runtime = false);

/// Check ids understood by run_suite, in the order they are documented.
const std::vector<std::string>& known_checks();

/// Runs manifest["checks"] in order. Each entry is {"id": ..., overrides}.
/// When any check is listed, model validation of manifest["model"] (default
/// the reference preset) is reported first. Errors inside a check are
/// recorded in that check and the suite continues.
std::vector<CheckReport> run_suite(const io::Json& manifest, int workers = 0);

/// Occupation of the box [lo, hi] integrated over the recorded snapshots.
/// Skipped when the box contains an initial particle or no snapshots exist.
CheckReport null_set_check(const PathRecord& record, const std::vector<double>& lo,
                           const std::vector<double>& hi);

/// Fraction of honest z-checks on synthetic Gaussian nulls that pass the
/// 3-sigma gate; passes iff it is at least 0.99.
CheckReport calibration_self_test(std::uint64_t seed, int checks = 2000, int samples = 64);

/// Fixed-width table, one line per report.
std::string format_table(const std::vector<CheckReport>& reports);

}  // namespace sdsm

#endif  // SDSM_VALIDATE_HPP
