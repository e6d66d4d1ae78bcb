#include <cmath>
#include <fstream>
#include <sstream>

#include "ee/diagnostics.hpp"
#include "ee/error.hpp"
#include "ee/numeric.hpp"
#include "ee/sampler.hpp"

namespace ee {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  return out;
}

void write_json(const fs::path& path, const json& doc) {
  auto out = open_out(path);
  out << doc.dump(2) << '\n';
}

std::string state_header(const StateSpace& space) {
  if (space.is_finite()) return "state";
  std::string h;
  for (std::size_t j = 0; j < space.dimension(); ++j) h += (j ? ",state_" : "state_") + std::to_string(j);
  return h;
}

std::string state_cells(const StateSpace& space, const State& x) {
  if (space.is_finite()) return std::to_string(space.index_of(x));
  std::string s;
  for (std::size_t j = 0; j < x.size(); ++j) s += (j ? "," : "") + format_double(x[j]);
  return s;
}

json base_metadata(const ExperimentConfig& cfg, const std::string& command) {
  json meta;
  meta["command"] = command;
  meta["config_hash"] = hex64(cfg.hash);
  meta["config"] = cfg.document;
  meta["master_seed"] = cfg.sampler.seed;
  meta["replicates"] = cfg.replicates;
  json seeds = json::array();
  for (std::size_t i = 0; i < cfg.replicates; ++i) seeds.push_back(derive_seed(cfg.sampler.seed, i));
  meta["replicate_seeds"] = seeds;
  meta["seed_derivation"] = "replicate = splitmix64(splitmix64(master) ^ i); chain k = same rule on (replicate, k)";
  return meta;
}

json numeric_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

struct ReplicateResult {
  Trace trace;
  std::vector<std::vector<double>> estimates;  // [chain][function]
  std::vector<std::size_t> atoms;              // per chain
};

}  // namespace

json run_experiment(const ExperimentConfig& cfg, const fs::path& out) {
  const KernelSet& kernels = *cfg.kernels;
  const auto& space = kernels.space();
  const std::size_t r = kernels.levels();
  fs::create_directories(out);

  std::vector<ReplicateResult> results(cfg.replicates);
  parallel_for(cfg.replicates, [&](std::size_t rep) {
    SamplerConfig sc = cfg.sampler;
    sc.seed = derive_seed(cfg.sampler.seed, rep);
    ChainEnsemble e(kernels, sc);
    while (e.round() < sc.total_rounds) e.step_round();

    ReplicateResult& res = results[rep];
    for (std::size_t k = 0; k < r; ++k) {
      const auto& m = e.measure(k);
      std::vector<double> est(cfg.functions.size(), 0.0);
      for (std::size_t a = 0; a < m.total(); ++a)
        for (std::size_t f = 0; f < est.size(); ++f) est[f] += cfg.functions[f].eval(m.atom(a));
      for (auto& v : est) v /= static_cast<double>(m.total());
      res.estimates.push_back(std::move(est));
      res.atoms.push_back(m.total());

      auto dump = open_out(out / ("measure_c" + std::to_string(k) + "_r" + std::to_string(rep) + ".csv"));
      m.write_dump(dump);
    }
    res.trace = e.take_trace();

    const std::string suffix = "_r" + std::to_string(rep) + ".csv";
    if (sc.record_trace) {
      auto t = open_out(out / ("trace" + suffix));
      t << "chain,round," << state_header(space) << ",ring,branch,swap_accept,holds\n";
      for (const auto& rec : res.trace.records)
        t << rec.chain << ',' << rec.round << ',' << state_cells(space, rec.state) << ',' << rec.ring << ','
          << to_string(rec.branch) << ',' << int(rec.swap_accepted) << ',' << int(rec.holds) << '\n';
    }
    auto rm = open_out(out / ("ring_masses" + suffix));
    rm << "round,chain,ring,count,total,mass\n";
    for (const auto& snap : res.trace.snapshots)
      for (std::size_t j = 0; j < snap.counts.size(); ++j)
        rm << snap.round << ',' << snap.chain << ',' << j << ',' << snap.counts[j] << ',' << snap.total << ','
           << format_double(static_cast<double>(snap.counts[j]) / static_cast<double>(snap.total)) << '\n';
  });

  // Exact targets where the space allows it.
  std::vector<std::vector<double>> exact(r);
  if (space.is_finite())
    for (std::size_t k = 0; k < r; ++k) {
      const auto p = kernels.ladder().probabilities(k);
      for (const auto& f : cfg.functions) {
        const auto t = tabulate(f, space);
        double v = 0.0;
        for (std::size_t s = 0; s < t.size(); ++s) v += p[s] * t[s];
        exact[k].push_back(v);
      }
    }

  {
    auto s = open_out(out / "summary.csv");
    s << "replicate,chain,function,estimate,exact,abs_error,atoms\n";
    for (std::size_t rep = 0; rep < cfg.replicates; ++rep)
      for (std::size_t k = 0; k < r; ++k)
        for (std::size_t f = 0; f < cfg.functions.size(); ++f) {
          const double est = results[rep].estimates[k][f];
          s << rep << ',' << k << ',' << cfg.functions[f].name << ',' << format_double(est) << ',';
          if (exact[k].empty())
            s << ",";
          else
            s << format_double(exact[k][f]) << ',' << format_double(std::abs(est - exact[k][f]));
          s << ',' << results[rep].atoms[k] << '\n';
        }
  }

  json meta = base_metadata(cfg, "run");
  json per = json::array();
  double min_mass = 1.0;
  std::size_t violations = 0, fallbacks = 0;
  for (std::size_t rep = 0; rep < cfg.replicates; ++rep) {
    const Trace& t = results[rep].trace;
    min_mass = std::min(min_mass, t.min_ring_mass);
    violations += t.violations.size();
    fallbacks += t.fallbacks;
    json v = json::array();
    for (const auto& viol : t.violations)
      v.push_back({{"round", viol.step}, {"chain", viol.chain}, {"ring", viol.ring}, {"mass", viol.mass}});
    per.push_back({{"replicate", rep},
                   {"seed", derive_seed(cfg.sampler.seed, rep)},
                   {"min_ring_mass", t.min_ring_mass},
                   {"fallbacks", t.fallbacks},
                   {"moves_per_chain", t.moves},
                   {"stability_violations", v}});
  }
  meta["rounds"] = cfg.sampler.total_rounds;
  meta["chains"] = r;
  meta["theta"] = cfg.sampler.theta;
  meta["min_ring_mass"] = min_mass;
  meta["stability_violations"] = violations;
  meta["fallbacks"] = fallbacks;
  meta["per_replicate"] = per;
  write_json(out / "metadata.json", meta);
  return meta;
}

json to_json(const RateReport& report) {
  json fits = json::array();
  for (const auto& f : report.fits) {
    json pts = json::array();
    for (const auto& p : f.points)
      pts.push_back({{"n", p.n},
                     {"averaged", p.averaged},
                     {"mean_abs_error", p.mean_abs_error},
                     {"standard_error", p.standard_error},
                     {"rms_error", p.rms_error}});
    fits.push_back({{"function", f.function},
                    {"exact", f.exact},
                    {"points", pts},
                    {"slope", numeric_or_null(f.slope)},
                    {"slope_ci", {numeric_or_null(f.slope_ci_low), numeric_or_null(f.slope_ci_high)}},
                    {"degenerate", f.degenerate},
                    {"decreasing", f.decreasing},
                    {"passed", f.passed}});
  }
  return {{"replicates", report.replicates},
          {"burn_in", report.burn_in},
          {"slope_band", {kSlopeBandLow, kSlopeBandHigh}},
          {"fits", fits},
          {"passed", report.passed}};
}

json to_json(const BiasReport& report) {
  json reps = json::array();
  for (const auto& r : report.replicates)
    reps.push_back({{"feeder", r.feeder},
                    {"occupancy", r.occupancy},
                    {"standard_error", r.standard_error},
                    {"predicted", r.predicted},
                    {"predicted_bias", r.predicted_bias},
                    {"simulated_bias", r.simulated_bias},
                    {"max_z", numeric_or_null(r.max_z)},
                    {"frozen", r.frozen},
                    {"passed", r.passed}});
  return {{"mode", report.mode},
          {"target", report.target},
          {"agreement_z", kAgreementZ},
          {"replicates", reps},
          {"passed", report.passed}};
}

json to_json(const VerificationReport& report) {
  json checks = json::array();
  for (const auto& c : report.checks)
    checks.push_back({{"name", c.name},
                      {"value", numeric_or_null(c.value)},
                      {"tolerance", c.tolerance},
                      {"passed", c.passed},
                      {"detail", c.detail}});
  return {{"checks", checks}, {"passed", report.passed()}};
}

void write_rate_report(const RateReport& report, const ExperimentConfig& cfg, const fs::path& out) {
  fs::create_directories(out);
  {
    auto csv = open_out(out / "rate_report.csv");
    csv << "function,n,averaged,mean_abs_error,standard_error,rms_error\n";
    for (const auto& f : report.fits)
      for (const auto& p : f.points)
        csv << f.function << ',' << p.n << ',' << p.averaged << ',' << format_double(p.mean_abs_error) << ','
            << format_double(p.standard_error) << ',' << format_double(p.rms_error) << '\n';
  }
  json meta = base_metadata(cfg, "rate-study");
  meta["result"] = to_json(report);
  write_json(out / "metadata.json", meta);
}

void write_bias_report(const BiasReport& report, const ExperimentConfig& cfg, const fs::path& out) {
  fs::create_directories(out);
  {
    auto csv = open_out(out / "bias_report.csv");
    csv << "replicate,state,feeder,occupancy,standard_error,predicted,target\n";
    for (std::size_t i = 0; i < report.replicates.size(); ++i) {
      const auto& r = report.replicates[i];
      for (std::size_t s = 0; s < r.occupancy.size(); ++s)
        csv << i << ',' << s << ',' << format_double(r.feeder[s]) << ',' << format_double(r.occupancy[s]) << ','
            << format_double(r.standard_error[s]) << ',' << format_double(r.predicted[s]) << ','
            << format_double(report.target[s]) << '\n';
    }
  }
  json meta = base_metadata(cfg, "bias-study");
  meta["result"] = to_json(report);
  write_json(out / "metadata.json", meta);
}

void write_verification_report(const VerificationReport& report, const ExperimentConfig& cfg,
                               const fs::path& out) {
  fs::create_directories(out);
  write_json(out / "verification_report.json", to_json(report));
  json meta = base_metadata(cfg, "verify");
  meta["passed"] = report.passed();
  meta["checks"] = report.checks.size();
  write_json(out / "metadata.json", meta);
}

}  // namespace ee
