#include "ee/sampler.hpp"

#include <algorithm>
#include <string>

#include "ee/error.hpp"

namespace ee {

void SamplerConfig::validate(const KernelSet& kernels) const {
  const std::size_t r = kernels.levels();
  if (r < 2) throw ConfigError("the sampler needs at least two ladder levels");
  if (epsilon.size() != r) throw ConfigError("epsilon needs one entry per ladder level");
  for (double e : epsilon) MixtureSpec{e}.validate();
  if (schedule.size() != r - 1) throw ConfigError("schedule needs N_1..N_{r-1}");
  if (initial_states.size() != r) throw ConfigError("one initial state per chain is required");
  for (const auto& x : initial_states)
    if (!kernels.space().contains(x)) throw ConfigError("initial state outside the state space");
  if (!(theta > 0.0) || theta > 1.0) throw ConfigError("stability theta must lie in (0, 1]");
}

ChainEnsemble::ChainEnsemble(const KernelSet& kernels, SamplerConfig config)
    : kernels_(&kernels), config_(std::move(config)) {
  config_.validate(kernels);
  const std::size_t r = kernels.levels();
  states_ = config_.initial_states;
  measures_.reserve(r);
  activation_.assign(r, 0);
  for (std::size_t k = 0; k < r; ++k) {
    measures_.emplace_back(kernels.partition(), states_[k]);
    rngs_.emplace_back(derive_seed(config_.seed, k));
    if (k > 0) activation_[k] = activation_[k - 1] + config_.schedule[k - 1];
  }
  for (std::size_t k = 0; k + 1 < r; ++k) monitors_.emplace_back(config_.theta, config_.policy);
  trace_.chains = r;
  trace_.moves.assign(r, 0);
  for (std::size_t k = 0; k < r; ++k) record(k, Branch::none, false, false);
  snapshot();
  monitor();
}

ChainEnsemble ChainEnsemble::with_fixed_feeder(const KernelSet& kernels, SamplerConfig config,
                                               EmpiricalMeasure feeder) {
  if (kernels.levels() != 2) throw ConfigError("a fixed feeder needs exactly two levels");
  if (&feeder.partition() != &kernels.partition())
    throw ConfigError("fixed feeder must be built on the kernels' partition");
  if (feeder.total() == 0) throw ConfigError("fixed feeder measure is empty");
  config.schedule.assign(1, 0);
  ChainEnsemble e(kernels, std::move(config));
  e.measures_[0] = std::move(feeder);
  e.fixed_feeder_ = true;
  e.trace_.snapshots.clear();
  e.trace_.violations.clear();
  e.monitors_.assign(1, StabilityMonitor(e.config_.theta, e.config_.policy));
  e.snapshot();
  e.monitor();
  return e;
}

bool ChainEnsemble::moves_at(std::size_t k, std::size_t round) const {
  if (k == 0 && fixed_feeder_) return false;
  if (round <= activation_[k]) return false;
  if (freeze_after_ && k + 1 < chains() && round > *freeze_after_) return false;
  return true;
}

void ChainEnsemble::step_round() {
  ++round_;
  const std::size_t r = chains();
  std::vector<std::size_t> start_totals(r);
  for (std::size_t k = 0; k < r; ++k) start_totals[k] = measures_[k].total();

  for (std::size_t k = 0; k < r; ++k) {
    if (!moves_at(k, round_)) {
      record(k, Branch::none, false, true);
      continue;
    }
    Rng& rng = rngs_[k];
    StepOutcome out;
    if (k == 0) {
      out = {kernels_->mh_step(0, states_[0], rng), Branch::local, false};
    } else {
      const MeasureView feeder = config_.ordering == RoundOrdering::sequential
                                     ? measures_[k - 1].view()
                                     : measures_[k - 1].prefix(start_totals[k - 1]);
      const MixtureSpec mix{config_.epsilon[k]};
      out = config_.variant == KernelVariant::selection_mutation
                ? kernels_->nonlinear_step(k, states_[k], feeder, mix, rng)
                : kernels_->ee_jump_step(k, states_[k], feeder, mix, rng);
    }
    if (out.branch == Branch::fallback) ++trace_.fallbacks;
    states_[k] = std::move(out.state);
    measures_[k].insert(states_[k]);
    ++trace_.moves[k];
    record(k, out.branch, out.swap_accepted, false);
  }
  if (config_.snapshot_every > 0 && round_ % config_.snapshot_every == 0) snapshot();
  monitor();
}

void ChainEnsemble::record(std::size_t k, Branch branch, bool swap_accepted, bool holds) {
  trace_.rounds = round_;
  if (!config_.record_trace) return;
  trace_.records.push_back({k, round_, states_[k], kernels_->partition().assign(states_[k]),
                            branch, swap_accepted, holds});
}

void ChainEnsemble::snapshot() {
  if (!config_.record_trace) return;
  for (std::size_t k = 0; k < chains(); ++k) {
    const MeasureView v = measures_[k].view();
    RingSnapshot s{round_, k, std::vector<std::size_t>(v.partition().ring_count()), v.total()};
    for (std::size_t j = 0; j < s.counts.size(); ++j) s.counts[j] = v.ring_size(j);
    trace_.snapshots.push_back(std::move(s));
  }
}

void ChainEnsemble::monitor() {
  for (std::size_t k = 0; k < monitors_.size(); ++k) {
    // Stability is assumed once the chain fed by k has been switched on.
    if (round_ < activation_[k + 1] && !fixed_feeder_) continue;
    auto& m = monitors_[k];
    const std::size_t before = m.violations().size();
    const bool ok = m.check(measures_[k].view(), round_, k);
    trace_.violations.insert(trace_.violations.end(), m.violations().begin() + before,
                             m.violations().end());
    trace_.min_ring_mass = std::min(trace_.min_ring_mass, m.min_observed_mass());
    if (!ok && m.policy() == StabilityPolicy::abort) {
      const auto& v = m.violations().back();
      throw StabilityError("stability violated at round " + std::to_string(v.step) + ": chain " +
                           std::to_string(v.chain) + " ring " + std::to_string(v.ring) +
                           " has mass " + std::to_string(v.mass) + " < theta");
    }
  }
}

Trace ChainEnsemble::take_trace() {
  if (config_.record_trace &&
      (trace_.snapshots.empty() || trace_.snapshots.back().round != round_))
    snapshot();
  return std::move(trace_);
}

namespace {

Trace drive(ChainEnsemble& e, std::size_t rounds) {
  while (e.round() < rounds) e.step_round();
  return e.take_trace();
}

}  // namespace

Trace run(const KernelSet& kernels, const SamplerConfig& config) {
  ChainEnsemble e(kernels, config);
  return drive(e, config.total_rounds);
}

Trace run_frozen_feeder(const KernelSet& kernels, const SamplerConfig& config,
                        std::size_t freeze_at) {
  if (kernels.levels() != 2) throw ConfigError("frozen-feeder runs need exactly two levels");
  if (freeze_at < 1) throw ConfigError("freeze_at must be at least 1");
  ChainEnsemble e(kernels, config);
  e.freeze_feeders_after(freeze_at);
  return drive(e, config.total_rounds);
}

Trace run_with_fixed_feeder(const KernelSet& kernels, const SamplerConfig& config,
                            EmpiricalMeasure feeder) {
  auto e = ChainEnsemble::with_fixed_feeder(kernels, config, std::move(feeder));
  return drive(e, config.total_rounds);
}

}  // namespace ee
