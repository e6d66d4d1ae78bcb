#ifndef EE_KERNELS_HPP
#define EE_KERNELS_HPP

#include <cstddef>
#include <string_view>
#include <utility>
#include <vector>

#include "ee/measures.hpp"
#include "ee/rng.hpp"
#include "ee/state_space.hpp"

namespace ee {

enum class ProposalKind {
  uniform_independent,  ///< finite: y uniform over all states (x included)
  random_neighbor,      ///< finite: y = x +- 1 on the cycle, each with prob 1/2
  gaussian_walk,        ///< box: y = x + sigma_i * N(0, I); outside the box rejects
};

/// Local Metropolis-Hastings kernels K_i, one proposal family shared by all
/// levels with a per-level step size for the Gaussian walk.
struct LocalKernelSpec {
  ProposalKind kind = ProposalKind::uniform_independent;
  std::vector<double> step_sizes;
};

/// Weight of the selection branch in K_{mu,i} = (1-eps) K_i + eps Q_{mu_x,i}.
struct MixtureSpec {
  double epsilon = 0.0;
  void validate() const;
};

enum class Branch { none, local, selection, fallback };
std::string_view to_string(Branch b);

struct SwapOutcome {
  State first;
  State second;
  bool accepted;
};

/// Result of one step of a level-i kernel. `fallback` marks a selection
/// branch whose feeder ring was empty and which moved by K_i instead.
struct StepOutcome {
  State state;
  Branch branch = Branch::local;
  bool swap_accepted = false;
};

/// Every transition mechanism of the sampler for one ladder and partition.
///
/// Random draws are consumed in a fixed order so runs replay bit for bit:
/// branch coin, feeder draw, swap coin, proposal, MH coin. Coins are always
/// drawn, even when the outcome is forced.
class KernelSet {
 public:
  KernelSet(DensityLadder ladder, RingPartition partition, LocalKernelSpec local);
  virtual ~KernelSet() = default;

  const DensityLadder& ladder() const { return ladder_; }
  const RingPartition& partition() const { return partition_; }
  const StateSpace& space() const { return ladder_.space(); }
  const LocalKernelSpec& local_spec() const { return local_; }
  std::size_t levels() const { return ladder_.size(); }

  /// One MH transition targeting level `level`.
  State mh_step(std::size_t level, const State& x, Rng& rng) const;

  /// Probability that the proposal moves `from` to `to` (finite spaces).
  double proposal_probability(std::size_t from, std::size_t to) const;

  /// log[pi_i(y) pi_{i-1}(x) / (pi_i(x) pi_{i-1}(y))] for level i >= 1.
  virtual double swap_log_ratio(std::size_t level, const State& x, const State& y) const;

  /// alpha_i(x, y) = 1 ^ exp(swap_log_ratio); -inf maps to 0.
  double swap_accept_prob(std::size_t level, const State& x, const State& y) const;

  /// Exchange (x, y) -> (y, x) with probability alpha_i(x, y).
  SwapOutcome swap_step(std::size_t level, const State& x, const State& y, Rng& rng) const;

  /// Draw z from the feeder restricted to ring(x), swap (x, z), then move the
  /// first coordinate of the swapped pair by K_i. Falls back to K_i alone
  /// when ring(x) is empty in the feeder.
  StepOutcome selection_step(std::size_t level, const State& x, const MeasureView& feeder,
                             Rng& rng) const;

  /// K_{mu,i}: K_i with probability 1-eps, otherwise selection_step.
  StepOutcome nonlinear_step(std::size_t level, const State& x, const MeasureView& feeder,
                             const MixtureSpec& mixture, Rng& rng) const;

  /// Original equi-energy jump: K_i with probability 1-eps, otherwise an
  /// independence proposal z from the feeder ring accepted with alpha_i(x, z)
  /// and no trailing local move.
  StepOutcome ee_jump_step(std::size_t level, const State& x, const MeasureView& feeder,
                           const MixtureSpec& mixture, Rng& rng) const;

 private:
  State propose(std::size_t level, const State& x, Rng& rng) const;

  DensityLadder ladder_;
  RingPartition partition_;
  LocalKernelSpec local_;
};

}  // namespace ee

#endif  // EE_KERNELS_HPP
