#include "ee/state_space.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ee/error.hpp"
#include "ee/numeric.hpp"

namespace ee {

StateSpace StateSpace::finite(std::size_t size) {
  if (size < 2) throw ConfigError("finite state space needs at least 2 states");
  StateSpace s;
  s.finite_ = true;
  s.size_ = size;
  return s;
}

StateSpace StateSpace::box(std::vector<double> lower, std::vector<double> upper) {
  if (lower.empty() || lower.size() != upper.size())
    throw ConfigError("box bounds must be non-empty and of equal length");
  for (std::size_t i = 0; i < lower.size(); ++i) {
    if (!std::isfinite(lower[i]) || !std::isfinite(upper[i]) || !(lower[i] < upper[i]))
      throw ConfigError("box coordinate " + std::to_string(i) +
                        " needs finite bounds with lower < upper");
  }
  StateSpace s;
  s.finite_ = false;
  s.lower_ = std::move(lower);
  s.upper_ = std::move(upper);
  return s;
}

bool StateSpace::contains(const State& x) const {
  if (finite_) {
    if (x.size() != 1) return false;
    const double v = x[0];
    return v >= 0.0 && v < static_cast<double>(size_) && v == std::floor(v);
  }
  if (x.size() != lower_.size()) return false;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (!(x[i] >= lower_[i] && x[i] <= upper_[i])) return false;
  return true;
}

std::size_t StateSpace::index_of(const State& x) const {
  if (!finite_) throw DomainError("index_of called on a box state space");
  if (!contains(x)) throw DomainError("state is not an index of the finite space");
  return static_cast<std::size_t>(x[0]);
}

DensityLadder::DensityLadder(StateSpace space, std::vector<LogDensity> levels)
    : space_(std::move(space)), levels_(std::move(levels)) {
  if (levels_.empty()) throw ConfigError("density ladder needs at least one level");
  if (!space_.is_finite()) return;
  for (std::size_t l = 0; l < levels_.size(); ++l) {
    for (std::size_t s = 0; s < space_.size(); ++s) {
      if (!std::isfinite(levels_[l](space_.state_at(s))))
        throw ConfigError("level " + std::to_string(l) + " has a non-finite log density at state " +
                          std::to_string(s));
    }
  }
}

double DensityLadder::log_density(std::size_t level, const State& x) const {
  return levels_.at(level)(x);
}

std::vector<double> DensityLadder::probabilities(std::size_t level) const {
  if (!space_.is_finite()) throw ConfigError("probabilities() needs a finite state space");
  std::vector<double> logs(space_.size());
  for (std::size_t s = 0; s < logs.size(); ++s) logs[s] = log_density(level, space_.state_at(s));
  return normalize_log_weights(logs);
}

DensityLadder build_tempered_ladder(StateSpace space, LogDensity base,
                                    std::span<const double> temperatures) {
  if (temperatures.empty()) throw ConfigError("temperature list is empty");
  for (std::size_t i = 0; i < temperatures.size(); ++i) {
    if (!(temperatures[i] > 0.0) || !std::isfinite(temperatures[i]))
      throw ConfigError("temperatures must be finite and strictly positive");
    if (i > 0 && temperatures[i] > temperatures[i - 1])
      throw ConfigError("temperatures must be non-increasing");
  }
  if (temperatures.back() != 1.0) throw ConfigError("the last temperature must be 1");

  std::vector<LogDensity> levels;
  levels.reserve(temperatures.size());
  for (double t : temperatures) {
    levels.emplace_back([base, t](const State& x) { return base(x) / t; });
  }
  return DensityLadder(std::move(space), std::move(levels));
}

DensityLadder ladder_from_weights(StateSpace space,
                                  const std::vector<std::vector<double>>& weights) {
  if (!space.is_finite()) throw ConfigError("weight tables need a finite state space");
  std::vector<LogDensity> levels;
  for (const auto& row : weights) {
    if (row.size() != space.size())
      throw ConfigError("weight table length does not match the state count");
    std::vector<double> logs(row.size());
    for (std::size_t s = 0; s < row.size(); ++s) {
      if (!(row[s] > 0.0) || !std::isfinite(row[s]))
        throw ConfigError("density weights must be finite and strictly positive");
      logs[s] = std::log(row[s]);
    }
    levels.emplace_back([logs, space](const State& x) { return logs[space.index_of(x)]; });
  }
  return DensityLadder(std::move(space), std::move(levels));
}

RingPartition RingPartition::from_labels(StateSpace space, std::vector<std::size_t> labels) {
  if (!space.is_finite()) throw ConfigError("ring labels need a finite state space");
  if (labels.size() != space.size()) throw ConfigError("one ring label per state is required");
  const std::size_t d = *std::max_element(labels.begin(), labels.end()) + 1;
  std::vector<bool> seen(d, false);
  for (auto l : labels) seen[l] = true;
  if (std::find(seen.begin(), seen.end(), false) != seen.end())
    throw ConfigError("ring labels must cover 0..d-1 with every ring non-empty");
  RingPartition p(std::move(space));
  p.ring_count_ = d;
  p.labels_ = std::move(labels);
  return p;
}

RingPartition RingPartition::from_energy(StateSpace space,
                                         std::function<double(const State&)> energy,
                                         std::vector<double> thresholds) {
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    if (!std::isfinite(thresholds[i])) throw ConfigError("energy thresholds must be finite");
    if (i > 0 && !(thresholds[i] > thresholds[i - 1]))
      throw ConfigError("energy thresholds must be strictly increasing");
  }
  RingPartition p(std::move(space));
  p.ring_count_ = thresholds.size() + 1;
  p.energy_ = std::move(energy);
  p.thresholds_ = std::move(thresholds);
  if (p.space_.is_finite()) {
    // assign() consults labels_ once it is non-empty, so fill a local table first.
    std::vector<std::size_t> labels(p.space_.size());
    for (std::size_t s = 0; s < labels.size(); ++s) labels[s] = p.assign(p.space_.state_at(s));
    p.labels_ = std::move(labels);
  }
  return p;
}

std::size_t RingPartition::assign(const State& x) const {
  if (!space_.contains(x)) throw DomainError("state outside the state space");
  if (!labels_.empty()) return labels_[space_.index_of(x)];
  if (thresholds_.empty()) return 0;
  const double h = energy_(x);
  // Number of thresholds c with c <= h.
  return static_cast<std::size_t>(
      std::upper_bound(thresholds_.begin(), thresholds_.end(), h) - thresholds_.begin());
}

namespace {

void require_positive(const RingMasses& masses) {
  for (std::size_t i = 0; i < masses.size(); ++i)
    for (std::size_t j = 0; j < masses[i].size(); ++j)
      if (!(masses[i][j] > 0.0))
        throw ConfigError("ring " + std::to_string(j) + " has zero mass under level " +
                          std::to_string(i));
}

}  // namespace

RingMasses ladder_masses(const DensityLadder& ladder, const RingPartition& partition) {
  const auto& space = ladder.space();
  if (!space.is_finite())
    throw ConfigError("exact ring masses need a finite space; supply a quadrature rule");
  RingMasses masses(ladder.size(), std::vector<double>(partition.ring_count(), 0.0));
  for (std::size_t i = 0; i < ladder.size(); ++i) {
    const auto p = ladder.probabilities(i);
    for (std::size_t s = 0; s < p.size(); ++s) masses[i][partition.assign(space.state_at(s))] += p[s];
  }
  require_positive(masses);
  return masses;
}

RingMasses ladder_masses(const DensityLadder& ladder, const RingPartition& partition,
                         std::span<const State> nodes, std::span<const double> weights) {
  if (nodes.size() != weights.size() || nodes.empty())
    throw ConfigError("quadrature nodes and weights must be non-empty and of equal length");
  RingMasses masses(ladder.size(), std::vector<double>(partition.ring_count(), 0.0));
  std::vector<std::size_t> rings(nodes.size());
  for (std::size_t k = 0; k < nodes.size(); ++k) rings[k] = partition.assign(nodes[k]);
  for (std::size_t i = 0; i < ladder.size(); ++i) {
    std::vector<double> logs(nodes.size());
    for (std::size_t k = 0; k < nodes.size(); ++k)
      logs[k] = ladder.log_density(i, nodes[k]) + std::log(weights[k]);
    const auto p = normalize_log_weights(logs);
    for (std::size_t k = 0; k < nodes.size(); ++k) masses[i][rings[k]] += p[k];
  }
  require_positive(masses);
  return masses;
}

}  // namespace ee
