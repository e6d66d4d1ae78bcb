#ifndef EE_SAMPLER_HPP
#define EE_SAMPLER_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "ee/kernels.hpp"
#include "ee/measures.hpp"
#include "ee/rng.hpp"

namespace ee {

enum class KernelVariant { selection_mutation, ee_jump };

/// Which feeder measure chain k reads inside a round.
enum class RoundOrdering {
  sequential,  ///< S^{k-1} after chain k-1 already moved this round (as printed)
  snapshot,    ///< S^{k-1} as it stood when the round began
};

struct SamplerConfig {
  KernelVariant variant = KernelVariant::selection_mutation;
  /// Mixture weight per level; entry 0 is unused because chain 0 only runs K_0.
  std::vector<double> epsilon;
  /// N_1, ..., N_{r-1}: chain k starts moving once chain k-1 has made N_k
  /// further rounds, i.e. after round N_1 + ... + N_k.
  std::vector<std::size_t> schedule;
  std::size_t total_rounds = 0;
  std::vector<State> initial_states;
  std::uint64_t seed = 0;
  RoundOrdering ordering = RoundOrdering::sequential;
  double theta = 0.01;
  StabilityPolicy policy = StabilityPolicy::warn;
  /// Record ring counts every this many rounds (0: only first and last).
  std::size_t snapshot_every = 0;
  bool record_trace = true;

  /// Throws ConfigError on any inconsistency with the kernels.
  void validate(const KernelSet& kernels) const;
};

struct TraceRecord {
  std::size_t chain;
  std::size_t round;
  State state;
  std::size_t ring;
  Branch branch;
  bool swap_accepted;
  bool holds;
};

struct RingSnapshot {
  std::size_t round;
  std::size_t chain;
  std::vector<std::size_t> counts;
  std::size_t total;
};

struct Trace {
  std::size_t chains = 0;
  std::size_t rounds = 0;
  std::vector<TraceRecord> records;
  std::vector<RingSnapshot> snapshots;
  std::vector<StabilityViolation> violations;
  std::size_t fallbacks = 0;
  /// Smallest monitored feeder ring mass (1 when nothing was monitored).
  double min_ring_mass = 1.0;
  std::vector<std::size_t> moves;
};

/// The staged multi-chain process: chain 0 runs its MH kernel from round 1,
/// chain k >= 1 joins after round N_{1:k} and moves by the non-linear kernel
/// fed by chain k-1's empirical measure. Inactive chains hold exactly.
class ChainEnsemble {
 public:
  /// All chains at x_0, S^k = delta_{x_0^k}, round 0.
  ChainEnsemble(const KernelSet& kernels, SamplerConfig config);

  /// r = 2 only: chain 0 never moves and chain 1 reads `feeder` from round 1.
  static ChainEnsemble with_fixed_feeder(const KernelSet& kernels, SamplerConfig config,
                                         EmpiricalMeasure feeder);

  ChainEnsemble(const ChainEnsemble&) = delete;
  ChainEnsemble& operator=(const ChainEnsemble&) = delete;
  ChainEnsemble(ChainEnsemble&&) = default;

  void step_round();

  /// Feeder chains 0..r-2 stop moving (and stop updating S) after `round`.
  void freeze_feeders_after(std::size_t round) { freeze_after_ = round; }

  std::size_t round() const { return round_; }
  std::size_t chains() const { return states_.size(); }
  const State& state(std::size_t k) const { return states_[k]; }
  const EmpiricalMeasure& measure(std::size_t k) const { return measures_[k]; }
  /// Last round at which chain k still holds by schedule (N_{1:k}; 0 for k = 0).
  std::size_t activation_round(std::size_t k) const { return activation_[k]; }
  bool moves_at(std::size_t k, std::size_t round) const;
  const Trace& trace() const { return trace_; }
  Trace take_trace();

 private:
  void record(std::size_t k, Branch branch, bool swap_accepted, bool holds);
  void snapshot();
  void monitor();

  const KernelSet* kernels_;
  SamplerConfig config_;
  std::vector<State> states_;
  std::vector<EmpiricalMeasure> measures_;
  std::vector<Rng> rngs_;
  std::vector<std::size_t> activation_;
  std::vector<StabilityMonitor> monitors_;
  std::optional<std::size_t> freeze_after_;
  bool fixed_feeder_ = false;
  std::size_t round_ = 0;
  Trace trace_;
};

/// Full staged run for config.total_rounds rounds.
Trace run(const KernelSet& kernels, const SamplerConfig& config);

/// r = 2: chain 0 and S^0 stop updating after `freeze_at` rounds; chain 1
/// keeps running against the frozen feeder.
Trace run_frozen_feeder(const KernelSet& kernels, const SamplerConfig& config,
                        std::size_t freeze_at);

/// r = 2: chain 1 runs against a given, never-updated feeder measure.
Trace run_with_fixed_feeder(const KernelSet& kernels, const SamplerConfig& config,
                            EmpiricalMeasure feeder);

}  // namespace ee

#endif  // EE_SAMPLER_HPP
