#include "ee/kernels.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "ee/error.hpp"

namespace ee {

void MixtureSpec::validate() const {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ConfigError("epsilon must lie in [0, 1]");
}

std::string_view to_string(Branch b) {
  switch (b) {
    case Branch::none: return "none";
    case Branch::local: return "local";
    case Branch::selection: return "selection";
    case Branch::fallback: return "fallback";
  }
  return "?";
}

KernelSet::KernelSet(DensityLadder ladder, RingPartition partition, LocalKernelSpec local)
    : ladder_(std::move(ladder)), partition_(std::move(partition)), local_(std::move(local)) {
  const bool finite = ladder_.space().is_finite();
  if (finite != partition_.space().is_finite())
    throw ConfigError("ladder and partition live on different kinds of state space");
  if (finite && partition_.space().size() != ladder_.space().size())
    throw ConfigError("ladder and partition disagree on the number of states");
  if (local_.kind == ProposalKind::gaussian_walk) {
    if (finite) throw ConfigError("gaussian_walk proposals need a box state space");
    if (local_.step_sizes.size() != ladder_.size())
      throw ConfigError("gaussian_walk needs one step size per ladder level");
    for (double s : local_.step_sizes)
      if (!(s > 0.0) || !std::isfinite(s)) throw ConfigError("step sizes must be positive");
  } else if (!finite) {
    throw ConfigError("uniform_independent and random_neighbor proposals need a finite space");
  }
}

State KernelSet::propose(std::size_t level, const State& x, Rng& rng) const {
  const auto& space = ladder_.space();
  switch (local_.kind) {
    case ProposalKind::uniform_independent:
      return space.state_at(rng.uniform_index(space.size()));
    case ProposalKind::random_neighbor: {
      const std::size_t s = space.index_of(x);
      const std::size_t n = space.size();
      return space.state_at(rng.uniform_index(2) == 0 ? (s + 1) % n : (s + n - 1) % n);
    }
    case ProposalKind::gaussian_walk: {
      State y = x;
      for (double& c : y) c += local_.step_sizes[level] * rng.normal();
      return y;
    }
  }
  return x;
}

double KernelSet::proposal_probability(std::size_t from, std::size_t to) const {
  const auto& space = ladder_.space();
  const std::size_t n = space.size();
  switch (local_.kind) {
    case ProposalKind::uniform_independent:
      return 1.0 / static_cast<double>(n);
    case ProposalKind::random_neighbor: {
      double p = 0.0;
      if (to == (from + 1) % n) p += 0.5;
      if (to == (from + n - 1) % n) p += 0.5;
      return p;
    }
    case ProposalKind::gaussian_walk:
      break;
  }
  throw ConfigError("proposal_probability needs a finite proposal");
}

State KernelSet::mh_step(std::size_t level, const State& x, Rng& rng) const {
  State y = propose(level, x, rng);
  const double coin = rng.uniform();
  if (!ladder_.space().contains(y)) return x;
  const double log_ratio = ladder_.log_density(level, y) - ladder_.log_density(level, x);
  const double accept = log_ratio >= 0.0 ? 1.0 : std::exp(log_ratio);
  return coin < accept ? y : x;
}

double KernelSet::swap_log_ratio(std::size_t level, const State& x, const State& y) const {
  if (level == 0 || level >= ladder_.size())
    throw ConfigError("swap acceptance needs a level with a feeder below it");
  // Grouped per state so equal levels cancel exactly and give alpha = 1.
  const double r = (ladder_.log_density(level, y) - ladder_.log_density(level - 1, y)) -
                   (ladder_.log_density(level, x) - ladder_.log_density(level - 1, x));
  if (std::isnan(r)) throw NumericalError("swap acceptance ratio is NaN");
  return r;
}

double KernelSet::swap_accept_prob(std::size_t level, const State& x, const State& y) const {
  if (x == y) return 1.0;
  const double r = swap_log_ratio(level, x, y);
  if (r >= 0.0) return 1.0;
  return std::exp(r);  // exp(-inf) == 0
}

SwapOutcome KernelSet::swap_step(std::size_t level, const State& x, const State& y,
                                 Rng& rng) const {
  const double alpha = swap_accept_prob(level, x, y);
  const double coin = rng.uniform();
  if (coin < alpha) return {y, x, true};
  return {x, y, false};
}

StepOutcome KernelSet::selection_step(std::size_t level, const State& x,
                                      const MeasureView& feeder, Rng& rng) const {
  const std::size_t ring = partition_.assign(x);
  if (feeder.ring_size(ring) == 0) return {mh_step(level, x, rng), Branch::fallback, false};
  const State& z = feeder.draw(ring, rng);
  SwapOutcome swapped = swap_step(level, x, z, rng);
  return {mh_step(level, swapped.first, rng), Branch::selection, swapped.accepted};
}

StepOutcome KernelSet::nonlinear_step(std::size_t level, const State& x,
                                      const MeasureView& feeder, const MixtureSpec& mixture,
                                      Rng& rng) const {
  const double coin = rng.uniform();
  if (coin < mixture.epsilon) return selection_step(level, x, feeder, rng);
  return {mh_step(level, x, rng), Branch::local, false};
}

StepOutcome KernelSet::ee_jump_step(std::size_t level, const State& x, const MeasureView& feeder,
                                    const MixtureSpec& mixture, Rng& rng) const {
  const double coin = rng.uniform();
  if (!(coin < mixture.epsilon)) return {mh_step(level, x, rng), Branch::local, false};
  const std::size_t ring = partition_.assign(x);
  if (feeder.ring_size(ring) == 0) return {mh_step(level, x, rng), Branch::fallback, false};
  const State& z = feeder.draw(ring, rng);
  const double alpha = swap_accept_prob(level, x, z);
  if (rng.uniform() < alpha) return {z, Branch::selection, true};
  return {x, Branch::selection, false};
}

}  // namespace ee
