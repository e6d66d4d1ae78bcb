#ifndef EE_STATE_SPACE_HPP
#define EE_STATE_SPACE_HPP

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace ee {

/// A point of the state space. Finite spaces store the state index as a
/// single coordinate; box spaces store one coordinate per dimension.
using State = std::vector<double>;

/// Log of an unnormalized density. Densities are taken with respect to
/// counting measure on finite spaces and Lebesgue measure on boxes.
using LogDensity = std::function<double(const State&)>;

/// Either an enumerated finite space {0, ..., S-1} or a bounded box in R^k.
class StateSpace {
 public:
  static StateSpace finite(std::size_t size);
  static StateSpace box(std::vector<double> lower, std::vector<double> upper);

  bool is_finite() const { return finite_; }
  /// Number of states; only meaningful for finite spaces.
  std::size_t size() const { return size_; }
  /// 1 for finite spaces.
  std::size_t dimension() const { return finite_ ? 1 : lower_.size(); }
  const std::vector<double>& lower() const { return lower_; }
  const std::vector<double>& upper() const { return upper_; }

  bool contains(const State& x) const;
  /// Index of a finite state; throws DomainError when x is not a state.
  std::size_t index_of(const State& x) const;
  State state_at(std::size_t index) const { return State{static_cast<double>(index)}; }

 private:
  StateSpace() = default;

  bool finite_ = true;
  std::size_t size_ = 0;
  std::vector<double> lower_;
  std::vector<double> upper_;
};

/// The targets pi_1, ..., pi_r as log densities over one space. Level 0 is
/// the hottest feeder and the last level is the target.
class DensityLadder {
 public:
  /// On finite spaces every level is checked to be finite at every state.
  DensityLadder(StateSpace space, std::vector<LogDensity> levels);

  std::size_t size() const { return levels_.size(); }
  const StateSpace& space() const { return space_; }
  double log_density(std::size_t level, const State& x) const;

  /// Normalized probability vector of a level (finite spaces only).
  std::vector<double> probabilities(std::size_t level) const;

 private:
  StateSpace space_;
  std::vector<LogDensity> levels_;
};

/// pi_i proportional to base^(1/T_i). Temperatures must be positive,
/// non-increasing, and end at 1.
DensityLadder build_tempered_ladder(StateSpace space, LogDensity base,
                                    std::span<const double> temperatures);

/// Finite ladder from explicit positive (unnormalized) weight tables.
DensityLadder ladder_from_weights(StateSpace space,
                                  const std::vector<std::vector<double>>& weights);

/// Partition of the state space into energy rings E_0, ..., E_{d-1}.
///
/// Finite spaces carry an explicit ring label per state. Box spaces use
/// energy level sets: ring j = {x : c_j <= H(x) < c_{j+1}} with c_0 = -inf
/// and c_d = +inf, so d - 1 interior thresholds give d rings.
class RingPartition {
 public:
  static RingPartition from_labels(StateSpace space, std::vector<std::size_t> labels);
  static RingPartition from_energy(StateSpace space, std::function<double(const State&)> energy,
                                   std::vector<double> thresholds);

  std::size_t ring_count() const { return ring_count_; }
  const StateSpace& space() const { return space_; }

  /// Ring of x in 0..d-1. Throws DomainError when x is outside the space.
  std::size_t assign(const State& x) const;

  /// Ring label per finite state.
  const std::vector<std::size_t>& labels() const { return labels_; }

 private:
  explicit RingPartition(StateSpace space) : space_(std::move(space)) {}

  StateSpace space_;
  std::size_t ring_count_ = 1;
  std::vector<std::size_t> labels_;
  std::function<double(const State&)> energy_;
  std::vector<double> thresholds_;
};

/// r x d matrix of pi_i(E_j).
using RingMasses = std::vector<std::vector<double>>;

/// Exact ring masses on a finite space. Any zero entry is a ConfigError.
RingMasses ladder_masses(const DensityLadder& ladder, const RingPartition& partition);

/// Ring masses on a box from a quadrature rule (nodes and weights).
RingMasses ladder_masses(const DensityLadder& ladder, const RingPartition& partition,
                         std::span<const State> nodes, std::span<const double> weights);

}  // namespace ee

#endif  // EE_STATE_SPACE_HPP
