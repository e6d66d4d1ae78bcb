#include "ee/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <optional>
#include <ostream>

#include "CLI11.hpp"
#include "ee/config.hpp"
#include "ee/diagnostics.hpp"
#include "ee/error.hpp"
#include "ee/numeric.hpp"

namespace ee {

namespace {

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> replicates;
  bool abort_on_stability = false;
};

void add_common(CLI::App& cmd, Options& o) {
  cmd.add_option("--config", o.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  cmd.add_option("--out", o.out, "output directory")->required();
  cmd.add_option("--seed", o.seed, "master seed, overrides the config");
  cmd.add_option("--replicates", o.replicates, "replicate count, overrides the config");
  cmd.add_flag("--abort-on-stability", o.abort_on_stability, "abort when a feeder ring mass drops below theta");
}

ExperimentConfig load(const Options& o) {
  nlohmann::json doc = read_config_file(o.config);
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  if (o.seed) doc["seed"] = *o.seed;
  if (o.replicates) doc["replicates"] = *o.replicates;
  if (o.abort_on_stability) doc["stability"]["policy"] = "abort";
  return parse_config(doc);
}

int dispatch(const std::string& verb, const Options& o, std::ostream& out) {
  // Everything is validated before the output directory is touched.
  const ExperimentConfig cfg = load(o);
  const std::filesystem::path dir(o.out);
  if (verb == "run") {
    const auto meta = run_experiment(cfg, dir);
    out << "run: " << cfg.replicates << " replicate(s), min ring mass "
        << format_double(meta.at("min_ring_mass").get<double>()) << ", "
        << meta.at("stability_violations").get<std::size_t>() << " stability violation(s)\n";
    return kExitOk;
  }
  if (verb == "rate-study") {
    const auto report = slln_rate_study(cfg);
    write_rate_report(report, cfg, dir);
    for (const auto& f : report.fits)
      out << "rate " << f.function << ": slope "
          << (f.degenerate ? std::string("n/a (constant)") : format_double(f.slope))
          << (f.passed ? " PASS" : " FAIL") << '\n';
    return report.passed ? kExitOk : kExitFailed;
  }
  if (verb == "bias-study") {
    const auto report = bias_study(cfg);
    write_bias_report(report, cfg, dir);
    std::size_t ok = 0;
    for (const auto& r : report.replicates) ok += r.passed;
    out << "bias (" << report.mode << "): " << ok << '/' << report.replicates.size() << " replicate(s) agree\n";
    return report.passed ? kExitOk : kExitFailed;
  }
  const auto report = verify_suite(cfg);
  write_verification_report(report, cfg, dir);
  for (const auto& c : report.checks)
    if (!c.passed) out << "FAIL " << c.name << ": " << format_double(c.value) << " (" << c.detail << ")\n";
  out << "verify: " << report.checks.size() << " check(s), " << (report.passed() ? "all passed" : "FAILED")
      << '\n';
  return report.passed() ? kExitOk : kExitFailed;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Equi-energy sampler: staged non-linear MCMC with exact finite-state checks", "ee_cli"};
  app.require_subcommand(1);
  Options opts;
  const std::vector<std::pair<std::string, std::string>> verbs{
      {"run", "simulate the chain ensemble and write traces"},
      {"rate-study", "empirical convergence rate of the top chain over replicates"},
      {"bias-study", "frozen-feeder bias against the exact prediction"},
      {"verify", "check every exact identity and bound on a finite model"}};
  for (const auto& [name, help] : verbs) add_common(*app.add_subcommand(name, help), opts);

  try {
    // CLI11 consumes a reversed argument list without the program name.
    std::vector<std::string> rest;
    if (args.size() > 1) rest.assign(args.rbegin(), args.rend() - 1);
    app.parse(rest);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }
  const auto verb = app.get_subcommands().front()->get_name();

  try {
    return dispatch(verb, opts, out);
  } catch (const StabilityError& e) {
    err << "stability: " << e.what() << '\n';
    return kExitStability;
  } catch (const NumericalError& e) {
    err << "numerical: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const ConfigError& e) {
    err << "config: " << e.what() << '\n';
  } catch (const DomainError& e) {
    err << "domain: " << e.what() << '\n';
  } catch (const ContractError& e) {
    err << "contract: " << e.what() << '\n';
  } catch (const nlohmann::json::exception& e) {
    err << "config: " << e.what() << '\n';
  } catch (const std::filesystem::filesystem_error& e) {
    err << "io: " << e.what() << '\n';
  }
  return kExitConfig;
}

}  // namespace ee
