#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "ee/diagnostics.hpp"
#include "ee/error.hpp"
#include "ee/exact_oracle.hpp"
#include "ee/measures.hpp"
#include "ee/sampler.hpp"

namespace ee {

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& job) {
  const std::size_t workers =
      std::min<std::size_t>(count, std::max(1u, std::thread::hardware_concurrency()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) job(i);
    return;
  }
  std::vector<std::exception_ptr> errors(count);
  std::size_t next = 0;
  std::mutex mutex;
  auto worker = [&] {
    for (;;) {
      std::size_t i;
      {
        std::lock_guard lock(mutex);
        if (next == count) return;
        i = next++;
      }
      try {
        job(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  // Lowest failing index wins so the reported error does not depend on timing.
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

namespace {

std::size_t burn_in(const SamplerConfig& s) {
  std::size_t total = 0;
  for (auto n : s.schedule) total += n;
  return total;
}

const StateSpace& require_finite(const ExperimentConfig& cfg, const char* what) {
  const auto& space = cfg.kernels->space();
  if (!space.is_finite()) throw ConfigError(std::string(what) + " needs a finite state space");
  return space;
}

struct LineFit {
  double slope;
  double slope_se;
};

LineFit least_squares(const std::vector<double>& xs, const std::vector<double>& ys) {
  const auto k = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= k;
  my /= k;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  const double slope = sxy / sxx;
  double ssr = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = ys[i] - my - slope * (xs[i] - mx);
    ssr += r * r;
  }
  const double se = xs.size() > 2 ? std::sqrt(ssr / (k - 2.0) / sxx) : 0.0;
  return {slope, se};
}

}  // namespace

RateReport slln_rate_study(const ExperimentConfig& cfg) {
  const auto& space = require_finite(cfg, "rate study");
  const KernelSet& kernels = *cfg.kernels;
  if (cfg.replicates < kMinRateReplicates)
    throw ConfigError("rate study needs at least " + std::to_string(kMinRateReplicates) +
                      " replicates, got " + std::to_string(cfg.replicates));
  if (cfg.functions.empty()) throw ConfigError("rate study needs at least one test function");
  const std::size_t burn = burn_in(cfg.sampler);
  const auto& grid = cfg.rate_grid;
  if (grid.front() < burn) throw ConfigError("rate_study.grid must start at or after N_{1:r-1}");

  const std::size_t top = kernels.levels() - 1;
  const auto target = kernels.ladder().probabilities(top);
  std::vector<std::vector<double>> tables;
  std::vector<double> exact;
  for (const auto& f : cfg.functions) {
    tables.push_back(tabulate(f, space));
    double e = 0.0;
    for (std::size_t s = 0; s < target.size(); ++s) e += target[s] * tables.back()[s];
    exact.push_back(e);
  }
  const std::size_t nf = tables.size();

  // errors[replicate][function * grid + g]
  std::vector<std::vector<double>> errors(cfg.replicates, std::vector<double>(nf * grid.size()));
  parallel_for(cfg.replicates, [&](std::size_t rep) {
    SamplerConfig sc = cfg.sampler;
    sc.seed = derive_seed(cfg.sampler.seed, rep);
    sc.record_trace = false;
    ChainEnsemble e(kernels, sc);
    std::vector<double> sums(nf, 0.0);
    std::size_t count = 0, g = 0;
    auto absorb = [&] {
      if (e.round() >= burn) {
        const std::size_t s = space.index_of(e.state(top));
        for (std::size_t f = 0; f < nf; ++f) sums[f] += tables[f][s];
        ++count;
      }
      while (g < grid.size() && grid[g] == e.round()) {
        for (std::size_t f = 0; f < nf; ++f)
          errors[rep][f * grid.size() + g] =
              std::abs(sums[f] / static_cast<double>(count) - exact[f]);
        ++g;
      }
    };
    absorb();
    while (e.round() < grid.back()) {
      e.step_round();
      absorb();
    }
  });

  RateReport report{cfg.replicates, burn, {}, true};
  const auto reps = static_cast<double>(cfg.replicates);
  bool any_informative = false;
  for (std::size_t f = 0; f < nf; ++f) {
    RateFit fit{cfg.functions[f].name, exact[f], {}, 0.0, 0.0, 0.0, false, false, false};
    std::vector<double> xs, ys;
    bool all_zero = true;
    for (std::size_t g = 0; g < grid.size(); ++g) {
      double sum = 0.0, sq = 0.0;
      for (std::size_t rep = 0; rep < cfg.replicates; ++rep) {
        const double err = errors[rep][f * grid.size() + g];
        sum += err;
        sq += err * err;
      }
      const double mean = sum / reps;
      const double var = std::max(0.0, (sq - reps * mean * mean) / (reps - 1.0));
      RatePoint p{grid[g], grid[g] - burn + 1, mean, std::sqrt(var / reps), std::sqrt(sq / reps)};
      if (mean > 1e-14) all_zero = false;
      if (grid[g] >= 2 * burn && mean > 0.0) {
        xs.push_back(std::log(static_cast<double>(p.averaged)));
        ys.push_back(std::log(mean));
      }
      fit.points.push_back(p);
    }
    fit.degenerate = all_zero;
    fit.decreasing = fit.points.back().mean_abs_error < fit.points.front().mean_abs_error;
    if (fit.degenerate) {
      fit.slope = fit.slope_ci_low = fit.slope_ci_high = std::nan("");
      fit.passed = true;
    } else if (xs.size() < 2) {
      throw ConfigError("rate study needs at least two grid points with n >= 2 N_{1:r-1}");
    } else {
      any_informative = true;
      const LineFit lf = least_squares(xs, ys);
      fit.slope = lf.slope;
      fit.slope_ci_low = lf.slope - 1.96 * lf.slope_se;
      fit.slope_ci_high = lf.slope + 1.96 * lf.slope_se;
      fit.passed = fit.slope >= kSlopeBandLow && fit.slope <= kSlopeBandHigh && fit.decreasing;
    }
    report.passed = report.passed && fit.passed;
    report.fits.push_back(std::move(fit));
  }
  report.passed = report.passed && any_informative;
  return report;
}

BiasReport bias_study(const ExperimentConfig& cfg) {
  const auto& space = require_finite(cfg, "bias study");
  const KernelSet& kernels = *cfg.kernels;
  if (kernels.levels() != 2) throw ConfigError("bias study needs exactly two ladder levels");
  const auto& spec = cfg.bias;
  const std::size_t total = cfg.sampler.total_rounds;

  BiasReport report;
  report.mode = spec.feeder_atoms ? "atoms" : spec.freeze_at ? "freeze" : "none";
  report.target = kernels.ladder().probabilities(1);
  report.replicates.resize(cfg.replicates);
  const std::size_t n = space.size();
  const double eps = cfg.sampler.epsilon[1];

  parallel_for(cfg.replicates, [&](std::size_t rep) {
    SamplerConfig sc = cfg.sampler;
    sc.seed = derive_seed(cfg.sampler.seed, rep);
    sc.record_trace = false;

    std::optional<ChainEnsemble> ensemble;
    bool frozen = false;
    std::size_t start = 0;
    if (spec.feeder_atoms) {
      EmpiricalMeasure feeder(kernels.partition());
      for (const auto& a : *spec.feeder_atoms) feeder.insert(a);
      ensemble.emplace(ChainEnsemble::with_fixed_feeder(kernels, sc, std::move(feeder)));
      frozen = true;
    } else {
      ensemble.emplace(kernels, sc);
      if (spec.freeze_at && *spec.freeze_at < total) {
        ensemble->freeze_feeders_after(*spec.freeze_at);
        frozen = true;
        start = *spec.freeze_at;
      }
    }
    ChainEnsemble& e = *ensemble;
    start = std::max(start, e.activation_round(1)) + spec.burn_in;
    if (total <= start || total - start < spec.batches)
      throw ConfigError("bias study: too few rounds after freeze and burn-in for the batch count");
    const std::size_t batch_len = (total - start) / spec.batches;
    const std::size_t first = total - batch_len * spec.batches + 1;  // rounds first..total

    std::vector<std::vector<double>> batch_counts(spec.batches, std::vector<double>(n, 0.0));
    while (e.round() < total) {
      e.step_round();
      if (e.round() < first) continue;
      const std::size_t b = (e.round() - first) / batch_len;
      batch_counts[b][space.index_of(e.state(1))] += 1.0;
    }

    BiasReplicate out;
    out.frozen = frozen;
    out.feeder = e.measure(0).view().probability_vector();
    out.occupancy.assign(n, 0.0);
    out.standard_error.assign(n, 0.0);
    const auto nb = static_cast<double>(spec.batches);
    for (std::size_t s = 0; s < n; ++s) {
      double sum = 0.0, sq = 0.0;
      for (const auto& bc : batch_counts) {
        const double m = bc[s] / static_cast<double>(batch_len);
        sum += m;
        sq += m * m;
      }
      const double mean = sum / nb;
      out.occupancy[s] = mean;
      out.standard_error[s] = std::sqrt(std::max(0.0, (sq - nb * mean * mean) / (nb - 1.0)) / nb);
    }

    if (frozen) {
      const oracle::Vector mu = Eigen::Map<const oracle::Vector>(out.feeder.data(), n);
      const auto matrix = sc.variant == KernelVariant::selection_mutation
                              ? oracle::nonlinear_matrix(kernels, 1, mu, eps, oracle::EmptyRing::local_move)
                              : oracle::ee_jump_matrix(kernels, 1, mu, eps, oracle::EmptyRing::local_move);
      const oracle::Vector w = oracle::stationary(matrix);
      out.predicted.assign(w.data(), w.data() + n);
    } else {
      out.predicted = report.target;
    }
    out.predicted_bias = tv_distance(out.predicted, report.target);
    out.simulated_bias = tv_distance(out.occupancy, report.target);
    out.max_z = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
      const double diff = std::abs(out.occupancy[s] - out.predicted[s]);
      const double z = out.standard_error[s] > 0.0 ? diff / out.standard_error[s]
                       : diff < 1e-12             ? 0.0
                                                  : std::numeric_limits<double>::infinity();
      out.max_z = std::max(out.max_z, z);
    }
    out.passed = out.max_z <= kAgreementZ;
    if (report.mode == "freeze" && frozen) out.passed = out.passed && out.predicted_bias > spec.min_predicted_bias;
    report.replicates[rep] = std::move(out);
  });

  report.passed = std::all_of(report.replicates.begin(), report.replicates.end(),
                              [](const BiasReplicate& r) { return r.passed; });
  return report;
}

}  // namespace ee
