#include "ee/exact_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "ee/error.hpp"
#include "ee/measures.hpp"

namespace ee::oracle {

namespace {

constexpr double kRowTolerance = 1e-12;
constexpr double kStationaryTolerance = 1e-10;

const StateSpace& finite_space(const KernelSet& kernels) {
  const auto& space = kernels.space();
  if (!space.is_finite()) throw ConfigError("exact oracle needs a finite state space");
  return space;
}

void check_measure(const KernelSet& kernels, const Vector& mu) {
  if (static_cast<std::size_t>(mu.size()) != finite_space(kernels).size())
    throw ContractError("measure length does not match the state count");
  if ((mu.array() < 0.0).any()) throw ContractError("measure has negative entries");
  if (std::abs(mu.sum() - 1.0) > 1e-9) throw ContractError("measure does not sum to 1");
}

/// Ring masses mu(E_j).
std::vector<double> ring_masses(const RingPartition& partition, const Vector& mu) {
  std::vector<double> m(partition.ring_count(), 0.0);
  for (Eigen::Index s = 0; s < mu.size(); ++s) m[partition.labels()[s]] += mu(s);
  return m;
}

/// alpha_i(x, z) for all finite pairs.
Matrix swap_matrix(const KernelSet& kernels, std::size_t level) {
  const auto& space = finite_space(kernels);
  const auto n = static_cast<Eigen::Index>(space.size());
  Matrix a(n, n);
  for (Eigen::Index x = 0; x < n; ++x)
    for (Eigen::Index z = 0; z < n; ++z)
      a(x, z) = kernels.swap_accept_prob(level, space.state_at(x), space.state_at(z));
  return a;
}

double sup_norm(const Vector& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

}  // namespace

TransitionMatrix::TransitionMatrix(Matrix m) : m_(std::move(m)) {
  if (m_.rows() != m_.cols() || m_.rows() == 0)
    throw ContractError("transition matrix must be square and non-empty");
  if ((m_.array() < 0.0).any() || !m_.allFinite())
    throw NumericalError("transition matrix has negative or non-finite entries");
  for (Eigen::Index x = 0; x < m_.rows(); ++x) {
    const double sum = m_.row(x).sum();
    if (std::abs(sum - 1.0) > kRowTolerance)
      throw NumericalError("row " + std::to_string(x) + " sums to " + std::to_string(sum));
  }
}

TransitionMatrix k_matrix(const KernelSet& kernels, std::size_t level) {
  const auto& space = finite_space(kernels);
  const auto n = static_cast<Eigen::Index>(space.size());
  const auto& ladder = kernels.ladder();
  Matrix m = Matrix::Zero(n, n);
  for (Eigen::Index x = 0; x < n; ++x) {
    const double lx = ladder.log_density(level, space.state_at(x));
    double moved = 0.0;
    for (Eigen::Index y = 0; y < n; ++y) {
      if (y == x) continue;
      const double q = kernels.proposal_probability(x, y);
      if (q == 0.0) continue;
      const double r = ladder.log_density(level, space.state_at(y)) - lx;
      m(x, y) = q * (r >= 0.0 ? 1.0 : std::exp(r));
      moved += m(x, y);
    }
    m(x, x) = 1.0 - moved;
  }
  return TransitionMatrix(std::move(m));
}

Matrix restricted_rows(const RingPartition& partition, const Vector& mu) {
  const auto n = mu.size();
  const auto masses = ring_masses(partition, mu);
  const auto& labels = partition.labels();
  Matrix r = Matrix::Zero(n, n);
  for (Eigen::Index x = 0; x < n; ++x) {
    const double mass = masses[labels[x]];
    if (mass <= 0.0) continue;
    for (Eigen::Index z = 0; z < n; ++z)
      if (labels[z] == labels[x]) r(x, z) = mu(z) / mass;
  }
  return r;
}

TransitionMatrix q_matrix(const KernelSet& kernels, std::size_t level, const Vector& mu,
                          EmptyRing policy) {
  check_measure(kernels, mu);
  const auto& partition = kernels.partition();
  const auto masses = ring_masses(partition, mu);
  const Matrix k = k_matrix(kernels, level).matrix();
  const Matrix alpha = swap_matrix(kernels, level);
  const Matrix mu_x = restricted_rows(partition, mu);
  const auto n = k.rows();
  Matrix q = Matrix::Zero(n, n);
  for (Eigen::Index x = 0; x < n; ++x) {
    if (masses[partition.labels()[x]] <= 0.0) {
      if (policy == EmptyRing::error)
        throw StabilityError("feeder measure has no mass on ring " +
                             std::to_string(partition.labels()[x]));
      q.row(x) = k.row(x);
      continue;
    }
    for (Eigen::Index z = 0; z < n; ++z) {
      if (mu_x(x, z) == 0.0) continue;
      q.row(x) += mu_x(x, z) * (alpha(x, z) * k.row(z) + (1.0 - alpha(x, z)) * k.row(x));
    }
  }
  return TransitionMatrix(std::move(q));
}

TransitionMatrix nonlinear_matrix(const KernelSet& kernels, std::size_t level, const Vector& mu,
                                  double epsilon, EmptyRing policy) {
  MixtureSpec{epsilon}.validate();
  const Matrix k = k_matrix(kernels, level).matrix();
  const Matrix q = q_matrix(kernels, level, mu, policy).matrix();
  return TransitionMatrix((1.0 - epsilon) * k + epsilon * q);
}

TransitionMatrix ee_jump_matrix(const KernelSet& kernels, std::size_t level, const Vector& mu,
                                double epsilon, EmptyRing policy) {
  MixtureSpec{epsilon}.validate();
  check_measure(kernels, mu);
  const auto& partition = kernels.partition();
  const auto masses = ring_masses(partition, mu);
  const Matrix k = k_matrix(kernels, level).matrix();
  const Matrix alpha = swap_matrix(kernels, level);
  const Matrix mu_x = restricted_rows(partition, mu);
  const auto n = k.rows();
  Matrix jump = Matrix::Zero(n, n);
  for (Eigen::Index x = 0; x < n; ++x) {
    if (masses[partition.labels()[x]] <= 0.0) {
      if (policy == EmptyRing::error)
        throw StabilityError("feeder measure has no mass on ring " +
                             std::to_string(partition.labels()[x]));
      jump.row(x) = k.row(x);
      continue;
    }
    for (Eigen::Index z = 0; z < n; ++z) {
      const double w = mu_x(x, z);
      if (w == 0.0) continue;
      jump(x, z) += w * alpha(x, z);
      jump(x, x) += w * (1.0 - alpha(x, z));
    }
  }
  return TransitionMatrix((1.0 - epsilon) * k + epsilon * jump);
}

Vector stationary(const TransitionMatrix& p) {
  const auto n = static_cast<Eigen::Index>(p.size());
  Matrix a = p.matrix().transpose() - Matrix::Identity(n, n);
  a.row(n - 1).setOnes();
  Vector rhs = Vector::Zero(n);
  rhs(n - 1) = 1.0;
  Eigen::FullPivLU<Matrix> lu(a);
  if (!lu.isInvertible()) throw NumericalError("stationary solve is singular (chain not irreducible?)");
  Vector w = lu.solve(rhs);
  const double residual = sup_norm(p.matrix().transpose() * w - w);
  if (residual > kStationaryTolerance || std::abs(w.sum() - 1.0) > kStationaryTolerance)
    throw NumericalError("stationary residual " + std::to_string(residual) + " above tolerance");
  return w;
}

PoissonSolution poisson_solve(const TransitionMatrix& p, const Vector& f) {
  const auto n = static_cast<Eigen::Index>(p.size());
  if (f.size() != n) throw ContractError("poisson_solve: f has the wrong length");
  const Vector w = stationary(p);
  const double mean = w.dot(f);
  const Vector centred = f - Vector::Constant(n, mean);
  Matrix a = Matrix::Identity(n, n) - p.matrix() + Vector::Ones(n) * w.transpose();
  Eigen::FullPivLU<Matrix> lu(a);
  if (!lu.isInvertible()) throw NumericalError("fundamental matrix is singular");
  Vector fhat = lu.solve(centred);
  const double residual = sup_norm(fhat - p.matrix() * fhat - centred);
  if (residual > kStationaryTolerance)
    throw NumericalError("Poisson residual " + std::to_string(residual) + " above tolerance");
  return {std::move(fhat), f, mean, residual};
}

Vector poisson_series(const TransitionMatrix& p, const Vector& f, std::size_t terms) {
  const Vector w = stationary(p);
  const double mean = w.dot(f);
  Vector term = f;
  Vector sum = Vector::Zero(f.size());
  for (std::size_t k = 0; k < terms; ++k) {
    sum += term - Vector::Constant(f.size(), mean);
    term = p.matrix() * term;
  }
  return sum;
}

RateEstimate geometric_rate_estimate(const TransitionMatrix& p, std::size_t horizon) {
  const Matrix& m = p.matrix();
  const auto n = m.rows();
  RateEstimate est{};
  est.doeblin_phi = std::min(1.0, m.colwise().minCoeff().sum());
  est.doeblin_rho = 1.0 - est.doeblin_phi;

  const Vector w = stationary(p);
  Matrix power = m;
  for (std::size_t k = 1; k <= horizon; ++k) {
    double worst = 0.0;
    for (Eigen::Index x = 0; x < n; ++x)
      worst = std::max(worst, 0.5 * (power.row(x).transpose() - w).cwiseAbs().sum());
    est.tv.push_back(worst);
    power = power * m;
  }

  // Below this, rounding in P^n (~n * 1e-16) distorts ratios by more than 1e-8.
  constexpr double kResolvable = 1e-7;
  est.monotone = true;
  est.max_step_ratio = 0.0;
  std::vector<double> xs, ys;
  for (std::size_t k = 0; k < est.tv.size(); ++k) {
    if (k > 0 && est.tv[k] > est.tv[k - 1] + 1e-15) est.monotone = false;
    if (est.tv[k] <= kResolvable) continue;
    xs.push_back(static_cast<double>(k + 1));
    ys.push_back(std::log(est.tv[k]));
    if (k > 0 && est.tv[k - 1] > kResolvable)
      est.max_step_ratio = std::max(est.max_step_ratio, est.tv[k] / est.tv[k - 1]);
  }
  est.fitted_rho = 0.0;
  if (xs.size() >= 2) {
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
    const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / ys.size();
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
      sxy += (xs[k] - mx) * (ys[k] - my);
      sxx += (xs[k] - mx) * (xs[k] - mx);
    }
    est.fitted_rho = std::exp(sxy / sxx);
  }
  return est;
}

double composition_identity_check(const KernelSet& kernels, std::size_t level, const Vector& mu,
                                  const Vector& f, std::size_t q) {
  const auto& space = finite_space(kernels);
  const auto& partition = kernels.partition();
  const std::size_t s = space.size();
  const std::size_t d = partition.ring_count();
  if (q < 1 || q > 3 || s > 8 || d > 3)
    throw ConfigError("composition identity enumeration needs q in 1..3, S <= 8, d <= 3");
  check_measure(kernels, mu);
  const auto n = static_cast<Eigen::Index>(s);

  // LHS: Q^q f.
  const Matrix qm = q_matrix(kernels, level, mu).matrix();
  Vector lhs = f;
  for (std::size_t k = 0; k < q; ++k) lhs = qm * lhs;

  // RHS: explicit sum over ring tuples (i_1..i_q) and atom tuples (x_1..x_q).
  const Matrix k = k_matrix(kernels, level).matrix();
  const Matrix alpha = swap_matrix(kernels, level);
  const auto masses = ring_masses(partition, mu);
  const auto& labels = partition.labels();

  // pair_kernel[z](y, .) = alpha(y, z) K(z, .) + (1 - alpha(y, z)) K(y, .)
  std::vector<Matrix> pair_kernel(s, Matrix(n, n));
  for (Eigen::Index z = 0; z < n; ++z)
    for (Eigen::Index y = 0; y < n; ++y)
      pair_kernel[z].row(y) = alpha(y, z) * k.row(z) + (1.0 - alpha(y, z)) * k.row(y);

  std::size_t ring_tuples = 1, atom_tuples = 1;
  for (std::size_t j = 0; j < q; ++j) {
    ring_tuples *= d;
    atom_tuples *= s;
  }
  Vector rhs = Vector::Zero(n);
  std::vector<std::size_t> rings(q), atoms(q);
  for (std::size_t ri = 0; ri < ring_tuples; ++ri) {
    for (std::size_t j = 0, c = ri; j < q; ++j, c /= d) rings[j] = c % d;
    double ring_norm = 1.0;
    for (std::size_t j = 0; j < q; ++j) ring_norm *= masses[rings[j]];
    if (ring_norm == 0.0) continue;
    for (std::size_t ai = 0; ai < atom_tuples; ++ai) {
      for (std::size_t j = 0, c = ai; j < q; ++j, c /= s) atoms[j] = c % s;
      double weight = 1.0;
      for (std::size_t j = 0; j < q; ++j)
        weight *= labels[atoms[j]] == rings[j] ? mu(atoms[j]) : 0.0;
      if (weight == 0.0) continue;
      Vector v = f;
      for (std::size_t j = q; j-- > 0;) {
        v = pair_kernel[atoms[j]] * v;
        if (j > 0)
          for (Eigen::Index y = 0; y < n; ++y)
            if (labels[y] != rings[j]) v(y) = 0.0;
      }
      for (Eigen::Index x = 0; x < n; ++x)
        if (labels[x] == rings[0]) rhs(x) += weight / ring_norm * v(x);
    }
  }
  return sup_norm(lhs - rhs);
}

double mixture_expansion_check(const TransitionMatrix& k, const TransitionMatrix& p, double eps,
                               std::size_t n) {
  if (n < 1 || n > 6) throw ConfigError("mixture expansion enumeration needs 1 <= n <= 6");
  if (k.size() != p.size()) throw ContractError("kernels of different sizes");
  const auto s = static_cast<Eigen::Index>(k.size());
  const Matrix mix = (1.0 - eps) * k.matrix() + eps * p.matrix();
  Matrix direct = Matrix::Identity(s, s);
  for (std::size_t j = 0; j < n; ++j) direct = direct * mix;

  Matrix words = Matrix::Zero(s, s);
  for (std::size_t w = 0; w < (std::size_t{1} << n); ++w) {
    Matrix prod = Matrix::Identity(s, s);
    int ones = 0;
    for (std::size_t j = 0; j < n; ++j) {
      const bool take_p = (w >> j) & 1u;
      ones += take_p ? 1 : 0;
      prod = prod * (take_p ? p.matrix() : k.matrix());
    }
    words += std::pow(eps, ones) * std::pow(1.0 - eps, static_cast<int>(n) - ones) * prod;
  }
  return (direct - words).cwiseAbs().maxCoeff();
}

double restricted_tv(const RingPartition& partition, const Vector& mu, const Vector& xi) {
  const Matrix a = restricted_rows(partition, mu);
  const Matrix b = restricted_rows(partition, xi);
  double worst = 0.0;
  for (Eigen::Index x = 0; x < a.rows(); ++x)
    worst = std::max(worst, 0.5 * (a.row(x) - b.row(x)).cwiseAbs().sum());
  return worst;
}

double lipschitz_check(const KernelSet& kernels, std::size_t level, const Vector& mu,
                       const Vector& xi, std::size_t trials, Rng& rng) {
  const Matrix qa = q_matrix(kernels, level, mu).matrix();
  const Matrix qb = q_matrix(kernels, level, xi).matrix();
  const double tv = restricted_tv(kernels.partition(), mu, xi);
  const auto n = qa.rows();
  double worst = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    Vector f(n);
    // Alternate between sign vectors (extremal for the bound) and uniform draws.
    for (Eigen::Index y = 0; y < n; ++y)
      f(y) = t % 2 == 0 ? (rng.uniform() < 0.5 ? -1.0 : 1.0) : 2.0 * rng.uniform() - 1.0;
    const double fnorm = sup_norm(f);
    const double lhs = sup_norm(qa * f - qb * f);
    const double denom = 2.0 * fnorm * tv;
    if (denom == 0.0) {
      if (lhs > 1e-15) return std::numeric_limits<double>::infinity();
      continue;
    }
    worst = std::max(worst, lhs / denom);
  }
  return worst;
}

ContinuityReport invariant_continuity_check(const KernelSet& kernels, std::size_t level,
                                            const Vector& mu, const Vector& xi, double epsilon) {
  const TransitionMatrix a = nonlinear_matrix(kernels, level, mu, epsilon);
  const TransitionMatrix b = nonlinear_matrix(kernels, level, xi, epsilon);
  const Vector wa = stationary(a);
  const Vector wb = stationary(b);
  ContinuityReport r{};
  r.tv_invariant = 0.5 * (wa - wb).cwiseAbs().sum();
  r.kernel_norm = (a.matrix() - b.matrix()).cwiseAbs().rowwise().sum().maxCoeff();
  // Rounding in the two solves leaves ~1e-16 residue when the kernels coincide.
  r.ratio = r.kernel_norm > 1e-14 ? r.tv_invariant / r.kernel_norm : 0.0;
  return r;
}

FluctuationReport fluctuation_check(const RingPartition& partition, const Vector& sampling_law,
                                    std::size_t steps, double theta, Rng& rng) {
  const auto& space = partition.space();
  if (!space.is_finite()) throw ConfigError("fluctuation check needs a finite space");
  if (!(theta > 0.0 && theta <= 1.0)) throw ConfigError("theta must lie in (0, 1]");
  const std::size_t n = space.size();
  const std::size_t d = partition.ring_count();

  std::vector<double> f(n);
  for (double& v : f) v = 2.0 * rng.uniform() - 1.0;
  std::vector<double> cdf(n);
  double acc = 0.0;
  for (std::size_t s = 0; s < n; ++s) cdf[s] = acc += sampling_law(static_cast<Eigen::Index>(s));

  auto draw = [&] {
    const double u = rng.uniform() * acc;
    const auto k = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
    return std::min(k, n - 1);
  };
  // Ring sums are kept incrementally; the measure's own restriction is
  // consulted periodically as a cross-check, since a full pass per step is
  // quadratic in the run length.
  std::vector<double> sums(d, 0.0), counts(d, 0.0);
  auto absorb = [&](std::size_t s) {
    const std::size_t j = partition.labels()[s];
    sums[j] += f[s];
    counts[j] += 1.0;
  };
  auto means = [&](std::vector<double>& out) {
    for (std::size_t j = 0; j < d; ++j)
      out[j] = counts[j] > 0.0 ? sums[j] / counts[j] : std::numeric_limits<double>::quiet_NaN();
  };
  auto min_mass = [&](double total) {
    return *std::min_element(counts.begin(), counts.end()) / total;
  };

  const double bound_constant = 1.0 / theta + 1.0 / (theta * theta);
  FluctuationReport report;
  const std::size_t first = draw();
  EmpiricalMeasure measure(partition, space.state_at(first));
  absorb(first);
  std::vector<double> before(d), after(d);
  means(before);
  double mass_before = min_mass(1.0);
  for (std::size_t m = 0; m < steps; ++m) {
    const std::size_t s = draw();
    measure.insert(space.state_at(s));
    absorb(s);
    means(after);
    const double mass_after = min_mass(static_cast<double>(m + 2));
    if (m % 64 == 0) {
      const MeasureView view = measure.view();
      for (std::size_t j = 0; j < d; ++j) {
        if (view.ring_size(j) == 0) continue;
        const double direct = restrict_to_ring(view, view.ring_atom(j, 0)).expectation(std::span<const double>(f));
        if (std::abs(direct - after[j]) > 1e-12)
          throw NumericalError("restricted empirical mean disagrees with running sum");
      }
    }
    if (mass_before >= theta && mass_after >= theta) {
      report.observed_min_mass = std::min({report.observed_min_mass, mass_before, mass_after});
      ++report.checked_steps;
      for (std::size_t j = 0; j < d; ++j) {
        const double jump = std::abs(after[j] - before[j]);
        report.max_ratio =
            std::max(report.max_ratio, jump * static_cast<double>(m + 2) / bound_constant);
      }
    }
    before.swap(after);
    mass_before = mass_after;
  }
  return report;
}

TransitionMatrix random_chain(std::size_t size, Rng& rng) {
  const auto n = static_cast<Eigen::Index>(size);
  Matrix m(n, n);
  for (Eigen::Index x = 0; x < n; ++x) {
    for (Eigen::Index y = 0; y < n; ++y) m(x, y) = 0.05 + rng.uniform();
    m.row(x) /= m.row(x).sum();
  }
  return TransitionMatrix(std::move(m));
}

}  // namespace ee::oracle
