// sdsm: simulate | dual | green | localtime | check

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "sdsm/dual.hpp"
#include "sdsm/errors.hpp"
#include "sdsm/green.hpp"
#include "sdsm/io.hpp"
#include "sdsm/localtime.hpp"
#include "sdsm/parallel.hpp"
#include "sdsm/particles.hpp"
#include "sdsm/validate.hpp"

namespace fs = std::filesystem;
using namespace sdsm;
using io::Json;

namespace {

struct Options {
  std::string config;
  std::string manifest;
  std::optional<std::uint64_t> seed;
  int workers = 0;
  std::string out;
};

fs::path output_dir(const Options& opt, const std::string& sub) {
  fs::path dir;
  if (!opt.out.empty()) {
    dir = opt.out;
  } else {
    const char* root = std::getenv("SDSM_OUTPUT_ROOT");
    dir = fs::path(root && *root ? root : "sdsm_out") / sub;
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

Json load_input(const Options& opt, const std::string& sub) {
  const std::string& path = opt.manifest.empty() ? opt.config : opt.manifest;
  if (path.empty()) throw ConfigError(sub + " needs --config or --manifest");
  return io::load_manifest(path);
}

std::uint64_t seed_of(const Options& opt, Json& j) {
  if (opt.seed) j["seed"] = *opt.seed;
  if (!j.contains("seed")) throw ConfigError("a seed is required (config \"seed\" or --seed)");
  try {
    return j["seed"].get<std::uint64_t>();
  } catch (const Json::exception&) {
    throw ConfigError("seed must be a non-negative integer");
  }
}

void write_manifest(const fs::path& dir, Json j, const std::string& sub, Json seeds) {
  j["subcommand"] = sub;
  j["build_id"] = io::build_id();
  j["seeds"] = std::move(seeds);
  std::ofstream out(dir / "manifest.json", std::ios::binary);
  out << j.dump(2) << "\n";
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  return out;
}

Json model_json(const Json& j) {
  return j.contains("model") ? j["model"] : Json{{"preset", "reference"}};
}

int run_simulate(const Options& opt) {
  Json j = load_input(opt, "simulate");
  const auto seed = seed_of(opt, j);
  auto model = io::model_from_json(model_json(j));
  auto mu0 = io::initial_from_json(j.at("initial"));
  auto config = io::simulation_from_json(j.at("simulation"));
  config.seed = seed;
  config.validate(model);
  auto obs = io::observables_from_json(j.contains("observables") ? j["observables"] : Json(), model);
  const auto reps = j.contains("replicates") ? j["replicates"].get<std::size_t>() : 1;

  auto records = parallel_map(reps, opt.workers, [&](std::size_t r) {
    SimulationConfig c = config;
    c.replicate = r;
    return simulate(c, model, mu0, obs);
  });

  auto dir = output_dir(opt, "simulate");
  auto csv = open_out(dir / "series.csv");
  io::write_series_csv(csv, records);
  Json streams = Json::array();
  for (const auto& rec : records) {
    streams.push_back(rec.replicate);
    if (config.snapshot_stride > 0)
      io::write_snapshots(dir / ("snapshots_" + std::to_string(rec.replicate) + ".bin"), rec);
  }
  write_manifest(dir, j, "simulate", {{"seed", seed}, {"replicate_streams", streams}});
  std::cout << "wrote " << reps << " replicate(s) to " << dir.string() << "\n";
  return 0;
}

int run_dual(const Options& opt) {
  Json j = load_input(opt, "dual");
  const auto seed = seed_of(opt, j);
  auto model = io::model_from_json(model_json(j));
  auto mu0 = io::initial_from_json(j.at("initial"));
  auto obs = io::observables_from_json(j.at("observables"), model);
  auto ms = j.at("m").get<std::vector<int>>();

  auto dir = output_dir(opt, "dual");
  auto out = open_out(dir / "dual.csv");
  io::CsvWriter csv(out);
  csv.row({"m", "observable", "estimate", "se", "reps", "rejected"});
  Json seeds = Json::array();
  for (std::size_t o = 0; o < obs.size(); ++o) {
    for (int m : ms) {
      DualMomentConfig c;
      c.m = m;
      c.t = j.at("t").get<double>();
      c.dt = j.contains("dt") ? j["dt"].get<double>() : c.dt;
      c.reps = j.contains("reps") ? j["reps"].get<std::size_t>() : c.reps;
      // one seed per (observable, m) so entries are independent
      c.seed = seed + 1000 * o + static_cast<std::uint64_t>(m);
      c.workers = opt.workers;
      auto res = dual_moment(tensor_power(obs[o], m), mu0, model, c);
      csv.row({std::to_string(m), obs[o].name(), io::format_number(res.estimate),
               io::format_number(res.se), std::to_string(res.reps), std::to_string(res.rejected)});
      seeds.push_back({{"observable", obs[o].name()}, {"m", m}, {"seed", c.seed}});
    }
  }
  write_manifest(dir, j, "dual", {{"seed", seed}, {"entries", seeds}});
  std::cout << "wrote " << (dir / "dual.csv").string() << "\n";
  return 0;
}

int run_green(const Options& opt) {
  Json j = load_input(opt, "green");
  auto dims = j.contains("dims") ? j["dims"].get<std::vector<int>>() : std::vector<int>{1, 2, 3, 4};
  const double lambda = j.value("lambda", 1.0), eps = j.value("eps", 0.1);
  const double s0 = j.value("sigma0_sq", 2.0), chi_t = j.value("chi_t", 1.0);
  auto dir = output_dir(opt, "green");

  auto norms = open_out(dir / "norms.csv");
  io::CsvWriter ncsv(norms), ncout(std::cout);
  std::vector<std::string> nhead{"dim", "norm", "value", "claimed_finite", "stable", "divergent", "pass"};
  ncsv.row(nhead);
  ncout.row(nhead);
  for (int d : dims) {
    KernelSpec s{lambda, 0.0, s0, d};
    for (const auto& e : norm_report(s)) {
      std::vector<std::string> row{std::to_string(d), e.name, io::format_number(e.value),
                                   e.claimed_finite ? "1" : "0", e.stable ? "1" : "0",
                                   e.divergent ? "1" : "0", e.pass ? "1" : "0"};
      ncsv.row(row);
      ncout.row(row);
    }
  }
  std::cout << "\r\n";
  auto chi = open_out(dir / "chi.csv");
  io::CsvWriter ccsv(chi), ccout(std::cout);
  std::vector<std::string> chead{"dim", "t", "lambda", "chi", "bound", "divergent", "pass"};
  ccsv.row(chead);
  ccout.row(chead);
  for (int d : dims) {
    auto c = chi_bound_check(d, chi_t, lambda);
    std::vector<std::string> row{std::to_string(d), io::format_number(c.t), io::format_number(c.lambda),
                                 io::format_number(c.chi), io::format_number(c.bound),
                                 c.divergent ? "1" : "0", c.pass ? "1" : "0"};
    ccsv.row(row);
    ccout.row(row);
  }
  if (j.contains("grid")) {
    const auto& g = j["grid"];
    const double lo = g.at("r_min").get<double>(), hi = g.at("r_max").get<double>();
    const double step = g.at("step").get<double>();
    if (!(step > 0) || !(lo > 0) || hi < lo) throw ConfigError("grid needs 0 < r_min <= r_max, step > 0");
    auto kern = open_out(dir / "kernel.csv");
    io::CsvWriter kcsv(kern);
    kcsv.row({"dim", "r", "Q_lambda", "Q_lambda_eps", "q_eps"});
    for (int d : dims) {
      KernelSpec bare{lambda, 0.0, s0, d}, mol{lambda, eps, s0, d};
      ResolventKernel smooth(mol);
      for (int i = 0; lo + i * step <= hi + 1e-12; ++i) {
        const double r = lo + i * step;
        kcsv.row({std::to_string(d), io::format_number(r), io::format_number(q_lambda_radial(bare, r)),
                  io::format_number(smooth.profile(r).f),
                  io::format_number(heat_kernel_radial(d, s0, eps, r))});
      }
    }
  }
  write_manifest(dir, j, "green", Json::object());
  return 0;
}

int run_localtime(const Options& opt) {
  Json j = load_input(opt, "localtime");
  const auto seed = seed_of(opt, j);
  auto model = io::model_from_json(model_json(j));
  auto mu0 = io::initial_from_json(j.at("initial"));
  auto config = io::simulation_from_json(j.at("simulation"));
  config.seed = seed;
  config.track_martingales = true;
  config.validate(model);
  const auto& lt = j.at("localtime");
  auto xs = lt.at("x").get<std::vector<std::vector<double>>>();
  auto eps = lt.at("eps").get<std::vector<double>>();
  const double lambda = lt.value("lambda", 1.0);
  auto s0 = constant_effective_diffusion(model);
  if (!s0) throw ConfigError("localtime needs a constant scalar effective diffusion");

  std::vector<TestFunction> obs;
  for (const auto& x : xs) {
    if (static_cast<int>(x.size()) != model.dim()) throw ConfigError("localtime x has the wrong dimension");
    for (double e : eps) {
      KernelSpec s{lambda, e, *s0, model.dim()};
      obs.push_back(tanaka_observable(x, s));
      obs.push_back(mollifier_observable(x, s));
    }
  }
  const auto reps = j.contains("replicates") ? j["replicates"].get<std::size_t>() : 1;
  auto rows = parallel_map(reps, opt.workers, [&](std::size_t r) {
    SimulationConfig c = config;
    c.replicate = r;
    auto rec = simulate(c, model, mu0, obs);
    std::vector<std::vector<std::string>> out;
    for (const auto& x : xs) {
      std::string xl;
      for (std::size_t p = 0; p < x.size(); ++p) xl += (p ? " " : "") + io::format_number(x[p]);
      for (double e : eps) {
        auto est = tanaka_rhs(rec, model, x, e, lambda);
        out.push_back({std::to_string(r), xl, io::format_number(e), io::format_number(lambda),
                       io::format_number(est.value), io::format_number(est.initial_mass),
                       io::format_number(est.terminal_mass), io::format_number(est.lambda_integral),
                       io::format_number(est.common_noise), io::format_number(est.branching),
                       io::format_number(est.individual_noise), io::format_number(est.discrete_qv),
                       io::format_number(est.value - est.rhs)});
      }
    }
    return out;
  });
  auto dir = output_dir(opt, "localtime");
  auto out = open_out(dir / "localtime.csv");
  io::CsvWriter csv(out);
  csv.row({"replicate", "x", "eps", "lambda", "Lambda", "psi_initial", "psi_terminal",
           "lambda_integral", "X", "M", "U", "Qd", "residual"});
  for (const auto& block : rows)
    for (const auto& row : block) csv.row(row);
  write_manifest(dir, j, "localtime", {{"seed", seed}, {"replicates", reps}});
  std::cout << "wrote " << (dir / "localtime.csv").string() << "\n";
  return 0;
}

int run_check(const Options& opt) {
  Json j = load_input(opt, "check");
  if (opt.seed) j["seed"] = *opt.seed;
  auto reports = run_suite(j, opt.workers);
  auto dir = output_dir(opt, "check");
  Json arr = Json::array(), timing = Json::object();
  bool ok = true;
  for (const auto& r : reports) {
    arr.push_back(to_json(r));
    timing[r.id] = r.runtime_s;
    ok = ok && (r.pass || r.skipped);
  }
  {
    auto out = open_out(dir / "report.json");
    out << Json{{"build_id", io::build_id()}, {"pass", ok}, {"checks", arr}}.dump(2) << "\n";
  }
  {
    auto out = open_out(dir / "timing.json");
    out << timing.dump(2) << "\n";
  }
  Json seeds = Json::object();
  for (const auto& r : reports) seeds[r.id] = r.seeds;
  write_manifest(dir, j, "check", seeds);
  std::cout << format_table(reports);
  std::cout << (ok ? "all checks passed" : "some checks FAILED") << "\n";
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monte Carlo simulator and validation suite for superprocesses with dependent spatial motion"};
  app.require_subcommand(1);
  Options opt;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config, "configuration JSON");
    sub->add_option("--manifest", opt.manifest, "run or check manifest JSON");
    sub->add_option("--seed", opt.seed, "seed (overrides the file)");
    sub->add_option("--workers", opt.workers, "worker threads (default: available cores)");
    sub->add_option("--out", opt.out, "output directory (default: $SDSM_OUTPUT_ROOT/<subcommand>)");
  };
  auto* sim = app.add_subcommand("simulate", "run particle-system replicates");
  auto* dual = app.add_subcommand("dual", "estimate moments through the dual process");
  auto* green = app.add_subcommand("green", "kernel norm and bound reports");
  auto* lt = app.add_subcommand("localtime", "local time and Tanaka terms");
  auto* check = app.add_subcommand("check", "run a validation manifest");
  for (auto* s : {sim, dual, green, lt, check}) add_common(s);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  try {
    if (*sim) return run_simulate(opt);
    if (*dual) return run_dual(opt);
    if (*green) return run_green(opt);
    if (*lt) return run_localtime(opt);
    if (*check) return run_check(opt);
  } catch (const ConfigError& e) {
    std::cerr << "sdsm: configuration error: " << e.what() << "\n";
    return 3;
  } catch (const ModelError& e) {
    std::cerr << "sdsm: model error: " << e.what() << "\n";
    return 3;
  } catch (const Json::exception& e) {
    std::cerr << "sdsm: configuration error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "sdsm: error: " << e.what() << "\n";
    return 3;
  }
  return 2;
}
