#include "ee/measures.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>

#include "ee/error.hpp"
#include "ee/numeric.hpp"

namespace ee {

EmpiricalMeasure::EmpiricalMeasure(const RingPartition& partition)
    : partition_(&partition), by_ring_(partition.ring_count()) {}

EmpiricalMeasure::EmpiricalMeasure(const RingPartition& partition, const State& first)
    : EmpiricalMeasure(partition) {
  insert(first);
}

void EmpiricalMeasure::insert(const State& x) {
  const std::size_t ring = partition_->assign(x);
  by_ring_[ring].push_back(atoms_.size());
  atoms_.push_back(x);
  rings_.push_back(ring);
}

MeasureView EmpiricalMeasure::view() const { return MeasureView(*this, atoms_.size()); }

MeasureView EmpiricalMeasure::prefix(std::size_t atoms) const {
  return MeasureView(*this, std::min(atoms, atoms_.size()));
}

void EmpiricalMeasure::write_dump(std::ostream& out) const {
  const auto dim = partition_->space().dimension();
  out << "step";
  if (dim == 1) {
    out << ",state";
  } else {
    for (std::size_t c = 0; c < dim; ++c) out << ",state_" << c;
  }
  out << ",ring\n";
  for (std::size_t k = 0; k < atoms_.size(); ++k) {
    out << k;
    for (double v : atoms_[k]) out << ',' << format_double(v);
    out << ',' << rings_[k] << '\n';
  }
}

MeasureView::MeasureView(const EmpiricalMeasure& measure, std::size_t limit)
    : measure_(&measure), limit_(limit), ring_sizes_(measure.by_ring_.size()) {
  for (std::size_t j = 0; j < ring_sizes_.size(); ++j) {
    const auto& idx = measure.by_ring_[j];
    ring_sizes_[j] = static_cast<std::size_t>(std::lower_bound(idx.begin(), idx.end(), limit) -
                                              idx.begin());
  }
}

double MeasureView::ring_mass(std::size_t ring) const {
  if (limit_ == 0) return 0.0;
  return static_cast<double>(ring_sizes_[ring]) / static_cast<double>(limit_);
}

const State& MeasureView::ring_atom(std::size_t ring, std::size_t k) const {
  return measure_->atoms_[measure_->by_ring_[ring][k]];
}

const State& MeasureView::draw(std::size_t ring, Rng& rng) const {
  const std::size_t n = ring_sizes_.at(ring);
  if (n == 0) throw StabilityError("feeder ring " + std::to_string(ring) + " is empty");
  return ring_atom(ring, rng.uniform_index(n));
}

std::vector<double> MeasureView::probability_vector() const {
  const auto& space = partition().space();
  if (!space.is_finite()) throw ConfigError("probability_vector needs a finite state space");
  if (limit_ == 0) throw StabilityError("empty measure has no probability vector");
  std::vector<double> p(space.size(), 0.0);
  for (std::size_t k = 0; k < limit_; ++k) p[space.index_of(measure_->atoms_[k])] += 1.0;
  for (double& v : p) v /= static_cast<double>(limit_);
  return p;
}

double RestrictedMeasure::probability(const std::function<bool(const State&)>& in_set) const {
  std::size_t hits = 0;
  for (std::size_t k = 0; k < size(); ++k) hits += in_set(view_.ring_atom(ring_, k)) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(size());
}

double RestrictedMeasure::expectation(const std::function<double(const State&)>& f) const {
  double sum = 0.0;
  for (std::size_t k = 0; k < size(); ++k) sum += f(view_.ring_atom(ring_, k));
  return sum / static_cast<double>(size());
}

double RestrictedMeasure::expectation(std::span<const double> f) const {
  const auto& space = view_.partition().space();
  double sum = 0.0;
  for (std::size_t k = 0; k < size(); ++k) sum += f[space.index_of(view_.ring_atom(ring_, k))];
  return sum / static_cast<double>(size());
}

std::vector<double> RestrictedMeasure::probability_vector() const {
  const auto& space = view_.partition().space();
  std::vector<double> p(space.size(), 0.0);
  for (std::size_t k = 0; k < size(); ++k) p[space.index_of(view_.ring_atom(ring_, k))] += 1.0;
  for (double& v : p) v /= static_cast<double>(size());
  return p;
}

RestrictedMeasure restrict_to_ring(const MeasureView& view, const State& x) {
  const std::size_t ring = view.partition().assign(x);
  if (view.ring_size(ring) == 0)
    throw StabilityError("cannot restrict to empty ring " + std::to_string(ring));
  return RestrictedMeasure(view, ring);
}

StabilityMonitor::StabilityMonitor(double theta, StabilityPolicy policy)
    : theta_(theta), policy_(policy) {
  if (!(theta > 0.0) || theta > 1.0) throw ConfigError("stability theta must lie in (0, 1]");
}

bool StabilityMonitor::check(const MeasureView& view, std::size_t step, std::size_t chain) {
  bool ok = true;
  const std::size_t d = view.partition().ring_count();
  for (std::size_t j = 0; j < d; ++j) {
    const double mass = view.ring_mass(j);
    min_mass_ = std::min(min_mass_, mass);
    if (mass < theta_) {
      violations_.push_back({step, chain, j, mass});
      ok = false;
    }
  }
  return ok;
}

double tv_distance(std::span<const double> mu, std::span<const double> xi) {
  if (mu.size() != xi.size()) throw ContractError("tv_distance: length mismatch");
  auto check = [](std::span<const double> p) {
    double total = 0.0;
    for (double v : p) {
      if (!(v >= 0.0)) throw ContractError("tv_distance: negative or NaN entry");
      total += v;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ContractError("tv_distance: entries do not sum to 1");
  };
  check(mu);
  check(xi);
  double sum = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) sum += std::abs(mu[i] - xi[i]);
  return std::min(1.0, 0.5 * sum);
}

}  // namespace ee
