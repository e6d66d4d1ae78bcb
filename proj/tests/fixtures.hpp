#ifndef EE_TEST_FIXTURES_HPP
#define EE_TEST_FIXTURES_HPP

#include <cmath>
#include <memory>
#include <vector>

#include "ee/kernels.hpp"
#include "ee/measures.hpp"
#include "ee/state_space.hpp"

namespace ee::test {

/// pi_0 uniform, pi_1 ~ (1,1,2,4), rings {0,1} and {2,3}.
inline std::shared_ptr<KernelSet> four_state(ProposalKind kind = ProposalKind::uniform_independent) {
  auto space = StateSpace::finite(4);
  return std::make_shared<KernelSet>(ladder_from_weights(space, {{1, 1, 1, 1}, {1, 1, 2, 4}}),
                                     RingPartition::from_labels(space, {0, 0, 1, 1}),
                                     LocalKernelSpec{kind, {}});
}

/// pi_0 uniform on {0,1}, pi_1 = (1/3, 2/3), a single ring.
inline std::shared_ptr<KernelSet> two_state() {
  auto space = StateSpace::finite(2);
  return std::make_shared<KernelSet>(ladder_from_weights(space, {{1, 1}, {1, 2}}),
                                     RingPartition::from_labels(space, {0, 0}),
                                     LocalKernelSpec{ProposalKind::uniform_independent, {}});
}

inline EmpiricalMeasure measure_of(const RingPartition& p, const std::vector<int>& atoms) {
  EmpiricalMeasure m(p);
  for (int a : atoms) m.insert(State{static_cast<double>(a)});
  return m;
}

inline State st(int i) { return State{static_cast<double>(i)}; }

/// |observed - expected| within z binomial standard errors.
inline bool within_se(double hits, double trials, double p, double z = 3.0) {
  const double se = std::sqrt(std::max(p * (1.0 - p), 1e-300) / trials);
  return std::abs(hits / trials - p) <= z * se + 1e-12;
}

}  // namespace ee::test

#endif  // EE_TEST_FIXTURES_HPP
