#ifndef EE_EXACT_ORACLE_HPP
#define EE_EXACT_ORACLE_HPP

#include <Eigen/Dense>
#include <cstddef>
#include <vector>

#include "ee/kernels.hpp"
#include "ee/rng.hpp"

namespace ee::oracle {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Row-stochastic S x S matrix. Construction checks non-negativity and
/// unit row sums to 1e-12.
class TransitionMatrix {
 public:
  explicit TransitionMatrix(Matrix m);

  const Matrix& matrix() const { return m_; }
  std::size_t size() const { return static_cast<std::size_t>(m_.rows()); }
  double operator()(std::size_t x, std::size_t y) const { return m_(x, y); }
  /// P(f)(x) = sum_y P(x, y) f(y).
  Vector apply(const Vector& f) const { return m_ * f; }

 private:
  Matrix m_;
};

/// What q_matrix does with a row whose ring has no feeder mass.
enum class EmptyRing {
  error,       ///< StabilityError, the measure must live in P_d(E)
  local_move,  ///< use the K_i row, mirroring the sampler's fallback
};

/// Exact MH matrix of K_i for the configured finite proposal.
TransitionMatrix k_matrix(const KernelSet& kernels, std::size_t level);

/// Exact matrix of the selection kernel Q_{mu_x,i}:
/// row x = sum_z mu_x(z) [alpha_i(x,z) K_i(z,.) + (1 - alpha_i(x,z)) K_i(x,.)].
TransitionMatrix q_matrix(const KernelSet& kernels, std::size_t level, const Vector& mu,
                          EmptyRing policy = EmptyRing::error);

/// (1 - eps) K_i + eps Q_{mu_x,i}.
TransitionMatrix nonlinear_matrix(const KernelSet& kernels, std::size_t level, const Vector& mu,
                                  double epsilon, EmptyRing policy = EmptyRing::error);

/// Exact matrix of the equi-energy jump variant:
/// (1 - eps) K_i(x,.) + eps sum_z mu_x(z) [alpha_i(x,z) delta_z + (1 - alpha_i(x,z)) delta_x].
TransitionMatrix ee_jump_matrix(const KernelSet& kernels, std::size_t level, const Vector& mu,
                                double epsilon, EmptyRing policy = EmptyRing::error);

/// mu_x as a matrix: row x is mu conditioned on ring(x).
Matrix restricted_rows(const RingPartition& partition, const Vector& mu);

/// Unique w with wP = w, sum w = 1. Throws NumericalError when the solve is
/// singular or the residual exceeds 1e-10.
Vector stationary(const TransitionMatrix& p);

struct PoissonSolution {
  Vector fhat;     ///< centred so that w(fhat) = 0
  Vector f;
  double mean;     ///< w(f)
  double residual; ///< ||(I - P) fhat - (f - w(f) 1)||_inf
};

/// Fundamental-matrix solve fhat = (I - P + 1 w^T)^-1 (f - w(f) 1).
PoissonSolution poisson_solve(const TransitionMatrix& p, const Vector& f);

/// Partial sum sum_{n < terms} [P^n f - w(f)] of the series form of fhat.
Vector poisson_series(const TransitionMatrix& p, const Vector& f, std::size_t terms);

struct RateEstimate {
  double doeblin_phi;   ///< sum_y min_x P(x, y)
  double doeblin_rho;   ///< 1 - phi, with M = 1
  double fitted_rho;    ///< exp of the least-squares slope of log tv_n
  double max_step_ratio;///< max_n tv_{n+1} / tv_n over resolvable terms
  bool monotone;        ///< tv_n non-increasing
  std::vector<double> tv; ///< sup_x tv(P^n(x,.), w), n = 1..horizon
};

/// Doeblin bound and the observed decay of sup_x tv(P^n(x,.), w).
RateEstimate geometric_rate_estimate(const TransitionMatrix& p, std::size_t horizon = 50);

/// Max over x of |LHS(x) - RHS(x)| for the q-fold selection-kernel identity.
/// LHS applies q_matrix(mu)^q to f; RHS enumerates ring tuples and feeder
/// tuples explicitly and composes the pair kernels
/// P(g)(y, z) = alpha(y, z) K g(z) + (1 - alpha(y, z)) K g(y).
/// Requires q in {1, 2, 3}, S <= 8 and d <= 3.
double composition_identity_check(const KernelSet& kernels, std::size_t level, const Vector& mu,
                                  const Vector& f, std::size_t q);

/// Max entrywise |((1-eps)K + eps P)^n - word sum| with the word sum taken
/// over all 2^n binary words weighted eps^l (1-eps)^(n-l). n <= 6.
double mixture_expansion_check(const TransitionMatrix& k, const TransitionMatrix& p, double eps,
                               std::size_t n);

/// Largest ratio |Q_mu f(x) - Q_xi f(x)| / (2 ||f||_inf sup_x tv(mu_x, xi_x))
/// over `trials` random f with ||f||_inf <= 1. Identical restrictions give 0.
double lipschitz_check(const KernelSet& kernels, std::size_t level, const Vector& mu,
                       const Vector& xi, std::size_t trials, Rng& rng);

/// sup_x tv(mu_x, xi_x).
double restricted_tv(const RingPartition& partition, const Vector& mu, const Vector& xi);

struct ContinuityReport {
  double tv_invariant;  ///< tv(w(mu), w(xi))
  double kernel_norm;   ///< max_x sum_y |K_mu(x,y) - K_xi(x,y)|
  double ratio;         ///< tv_invariant / kernel_norm, 0 when both vanish
};

ContinuityReport invariant_continuity_check(const KernelSet& kernels, std::size_t level,
                                            const Vector& mu, const Vector& xi, double epsilon);

/// Largest |S_{m+1,x}(f) - S_{m,x}(f)| (m + 2) / (1/theta + 1/theta^2) over a
/// run of random insertions, taken only at steps where every ring mass of
/// both S_m and S_{m+1} is at least theta.
struct FluctuationReport {
  double max_ratio = 0.0;
  std::size_t checked_steps = 0;
  double observed_min_mass = 1.0;
};

FluctuationReport fluctuation_check(const RingPartition& partition, const Vector& sampling_law,
                                    std::size_t steps, double theta, Rng& rng);

/// A random row-stochastic matrix with strictly positive entries.
TransitionMatrix random_chain(std::size_t size, Rng& rng);

}  // namespace ee::oracle

#endif  // EE_EXACT_ORACLE_HPP
