#ifndef EE_MEASURES_HPP
#define EE_MEASURES_HPP

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <limits>
#include <span>
#include <vector>

#include "ee/rng.hpp"
#include "ee/state_space.hpp"

namespace ee {

class MeasureView;

/// Running empirical measure S_n = (n+1)^-1 sum_k delta_{x_k} of one chain.
///
/// Atoms are stored with multiplicity in insertion order and indexed by the
/// ring they fell in at insertion time, so draws from a ring are O(1) and
/// every count is an exact integer. Memory grows linearly with the run.
class EmpiricalMeasure {
 public:
  explicit EmpiricalMeasure(const RingPartition& partition);
  EmpiricalMeasure(const RingPartition& partition, const State& first);

  /// Append one atom (the recursive S_{n} = S_{n-1} + (delta_x - S_{n-1})/(n+1)).
  void insert(const State& x);

  std::size_t total() const { return atoms_.size(); }
  std::size_t ring_count() const { return by_ring_.size(); }
  const State& atom(std::size_t k) const { return atoms_[k]; }
  std::size_t atom_ring(std::size_t k) const { return rings_[k]; }
  const RingPartition& partition() const { return *partition_; }

  /// Read-only view of the whole measure.
  MeasureView view() const;
  /// View of the measure as it stood after its first `atoms` insertions.
  MeasureView prefix(std::size_t atoms) const;

  /// Columnar dump: one line `step,state...,ring` per atom.
  void write_dump(std::ostream& out) const;

 private:
  friend class MeasureView;

  const RingPartition* partition_;
  std::vector<State> atoms_;
  std::vector<std::size_t> rings_;
  std::vector<std::vector<std::size_t>> by_ring_;  // atom indices, increasing
};

/// A prefix of an EmpiricalMeasure. The feeder a chain reads from during a
/// round is a view, so a strict round-start snapshot costs nothing.
class MeasureView {
 public:
  MeasureView(const EmpiricalMeasure& measure, std::size_t limit);

  std::size_t total() const { return limit_; }
  std::size_t ring_size(std::size_t ring) const { return ring_sizes_[ring]; }
  double ring_mass(std::size_t ring) const;
  /// k-th atom (in insertion order) among those in `ring`.
  const State& ring_atom(std::size_t ring, std::size_t k) const;
  const RingPartition& partition() const { return measure_->partition(); }

  /// Uniform draw among the stored atoms of a ring (with multiplicity).
  /// Throws StabilityError when the ring is empty.
  const State& draw(std::size_t ring, Rng& rng) const;

  /// Weight per state (finite spaces only).
  std::vector<double> probability_vector() const;

 private:
  const EmpiricalMeasure* measure_;
  std::size_t limit_;
  std::vector<std::size_t> ring_sizes_;
};

/// mu_x: the view conditioned on the ring containing x.
class RestrictedMeasure {
 public:
  std::size_t ring() const { return ring_; }
  std::size_t size() const { return view_.ring_size(ring_); }

  /// mu_x(A) for A given as an indicator.
  double probability(const std::function<bool(const State&)>& in_set) const;
  double expectation(const std::function<double(const State&)>& f) const;
  /// Finite spaces: expectation of a function given as a table over states.
  double expectation(std::span<const double> f) const;
  std::vector<double> probability_vector() const;

 private:
  friend RestrictedMeasure restrict_to_ring(const MeasureView&, const State&);
  RestrictedMeasure(MeasureView view, std::size_t ring) : view_(std::move(view)), ring_(ring) {}

  MeasureView view_;
  std::size_t ring_;
};

/// Throws StabilityError when ring(x) holds no atoms.
RestrictedMeasure restrict_to_ring(const MeasureView& view, const State& x);

enum class StabilityPolicy { warn, abort };

struct StabilityViolation {
  std::size_t step;
  std::size_t chain;
  std::size_t ring;
  double mass;
};

/// Monitors the lower bound S(E_j) >= theta on feeder measures.
class StabilityMonitor {
 public:
  explicit StabilityMonitor(double theta, StabilityPolicy policy = StabilityPolicy::warn);

  double theta() const { return theta_; }
  StabilityPolicy policy() const { return policy_; }

  /// Records every ring below theta. Returns true when no ring violated.
  bool check(const MeasureView& view, std::size_t step, std::size_t chain = 0);

  const std::vector<StabilityViolation>& violations() const { return violations_; }
  /// Smallest ring mass seen across all checks (1 before any check).
  double min_observed_mass() const { return min_mass_; }

 private:
  double theta_;
  StabilityPolicy policy_;
  std::vector<StabilityViolation> violations_;
  double min_mass_ = 1.0;
};

/// (1/2) sum |mu(s) - xi(s)| for probability vectors on one finite space.
double tv_distance(std::span<const double> mu, std::span<const double> xi);

}  // namespace ee

#endif  // EE_MEASURES_HPP
