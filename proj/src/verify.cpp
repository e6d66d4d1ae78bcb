#include <algorithm>
#include <cmath>
#include <sstream>

#include "ee/diagnostics.hpp"
#include "ee/error.hpp"
#include "ee/exact_oracle.hpp"
#include "ee/numeric.hpp"

namespace ee {

using oracle::Matrix;
using oracle::TransitionMatrix;
using oracle::Vector;

bool VerificationReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

namespace {

constexpr double kIdentityTol = 1e-10;
constexpr double kExactTol = 1e-12;
// Step ratios are only formed from tv terms >= 1e-7, where rounding moves them by < 1e-7.
constexpr double kRateSlack = 1e-6;

class Recorder {
 public:
  explicit Recorder(VerificationReport& r) : report_(r) {}

  /// value <= tolerance passes.
  void bound(std::string name, double value, double tolerance, std::string detail = {}) {
    report_.checks.push_back({std::move(name), value, tolerance, value <= tolerance, std::move(detail)});
  }
  void flag(std::string name, bool ok, double value, std::string detail) {
    report_.checks.push_back({std::move(name), value, 0.0, ok, std::move(detail)});
  }

  /// Runs `body`; numerical or stability failures become a failed check.
  template <typename F>
  void guarded(const std::string& name, F&& body) {
    try {
      body();
    } catch (const NumericalError& e) {
      flag(name, false, std::nan(""), e.what());
    } catch (const StabilityError& e) {
      flag(name, false, std::nan(""), e.what());
    }
  }

 private:
  VerificationReport& report_;
};

std::string tag(std::size_t level, double eps) {
  return "[level=" + std::to_string(level) + ",eps=" + format_double(eps) + "]";
}

Vector random_positive_measure(std::size_t n, Rng& rng) {
  Vector mu(static_cast<Eigen::Index>(n));
  for (Eigen::Index s = 0; s < mu.size(); ++s) mu(s) = 0.05 + rng.uniform();
  return mu / mu.sum();
}

/// Small integer weights, normalized.
Vector random_rational_measure(std::size_t n, Rng& rng) {
  Vector mu(static_cast<Eigen::Index>(n));
  for (Eigen::Index s = 0; s < mu.size(); ++s) mu(s) = static_cast<double>(1 + rng.uniform_index(5));
  return mu / mu.sum();
}

Vector random_function(std::size_t n, Rng& rng) {
  Vector f(static_cast<Eigen::Index>(n));
  for (Eigen::Index s = 0; s < f.size(); ++s) f(s) = 2.0 * rng.uniform() - 1.0;
  return f;
}

double oscillation(const Vector& f) { return f.maxCoeff() - f.minCoeff(); }

/// Tail bound of the series form beyond `terms` terms: osc(f) rho^terms / (1 - rho).
double series_envelope(const Vector& f, double rho, std::size_t terms) {
  if (rho >= 1.0) return std::numeric_limits<double>::infinity();
  return oscillation(f) * std::pow(rho, static_cast<double>(terms)) / (1.0 - rho);
}

/// Worst (series gap - envelope) and worst residual for one chain.
std::pair<double, double> poisson_worst(const TransitionMatrix& p, const std::vector<Vector>& fs) {
  constexpr std::size_t kTerms = 50;
  const double rho = oracle::geometric_rate_estimate(p, 1).doeblin_rho;
  double excess = -std::numeric_limits<double>::infinity();
  double residual = 0.0;
  for (const auto& f : fs) {
    const auto sol = oracle::poisson_solve(p, f);
    residual = std::max(residual, sol.residual);
    const double gap = (oracle::poisson_series(p, f, kTerms) - sol.fhat).cwiseAbs().maxCoeff();
    excess = std::max(excess, gap - series_envelope(f, rho, kTerms));
  }
  return {excess, residual};
}

}  // namespace

VerificationReport verify_kernels(const KernelSet& kernels, const VerifyOptions& opt) {
  const auto& space = kernels.space();
  if (!space.is_finite()) throw ConfigError("verification needs a finite state space");
  VerificationReport report;
  Recorder rec(report);
  Rng rng(derive_seed(opt.seed, 0x5e1f));
  const std::size_t n = space.size();
  const std::size_t r = kernels.levels();
  const std::size_t d = kernels.partition().ring_count();

  try {
    const auto masses = ladder_masses(kernels.ladder(), kernels.partition());
    double lowest = 1.0;
    for (const auto& row : masses)
      for (double m : row) lowest = std::min(lowest, m);
    rec.flag("ring_masses_positive", true, lowest, "min_{i,j} pi_i(E_j)");
  } catch (const ConfigError& e) {
    rec.flag("ring_masses_positive", false, 0.0, e.what());
  }

  std::vector<Vector> pi;
  for (std::size_t l = 0; l < r; ++l) {
    const auto p = kernels.ladder().probabilities(l);
    pi.emplace_back(Eigen::Map<const Vector>(p.data(), static_cast<Eigen::Index>(n)));
  }
  auto level_eps = [&](std::size_t l) {
    return l < opt.epsilons.size() ? opt.epsilons[l] : 0.5;
  };

  std::vector<Vector> functions;
  for (const auto& t : opt.functions) functions.emplace_back(Eigen::Map<const Vector>(t.data(), static_cast<Eigen::Index>(n)));
  for (int k = 0; k < 3; ++k) functions.push_back(random_function(n, rng));

  // Local kernels: pi_l-invariance and reversibility.
  for (std::size_t l = 0; l < r; ++l) {
    rec.guarded("local_kernel[level=" + std::to_string(l) + "]", [&] {
      const Matrix k = oracle::k_matrix(kernels, l).matrix();
      rec.bound("k_invariance[level=" + std::to_string(l) + "]",
                (pi[l].transpose() * k - pi[l].transpose()).cwiseAbs().maxCoeff(), kExactTol);
      const Matrix flow = pi[l].asDiagonal() * k;
      rec.bound("k_reversibility[level=" + std::to_string(l) + "]",
                (flow - flow.transpose()).cwiseAbs().maxCoeff(), kExactTol);
    });
  }

  for (std::size_t l = 1; l < r; ++l) {
    // Min-form detailed balance of the swap move.
    double db = 0.0;
    for (std::size_t x = 0; x < n; ++x)
      for (std::size_t y = 0; y < n; ++y) {
        const double lhs = pi[l](x) * pi[l - 1](y) *
                           kernels.swap_accept_prob(l, space.state_at(x), space.state_at(y));
        const double rhs = pi[l](y) * pi[l - 1](x) *
                           kernels.swap_accept_prob(l, space.state_at(y), space.state_at(x));
        db = std::max(db, std::abs(lhs - rhs));
      }
    rec.bound("swap_detailed_balance[level=" + std::to_string(l) + "]", db, kExactTol);

    // Fixed point: feeding the exact lower level gives the next level.
    std::vector<double> eps_list{0.0, 0.25, 0.5, 1.0};
    if (std::find(eps_list.begin(), eps_list.end(), level_eps(l)) == eps_list.end())
      eps_list.push_back(level_eps(l));
    for (double eps : eps_list) {
      rec.guarded("fixed_point" + tag(l, eps), [&] {
        const Vector w = oracle::stationary(oracle::nonlinear_matrix(kernels, l, pi[l - 1], eps));
        rec.bound("fixed_point" + tag(l, eps), (w - pi[l]).cwiseAbs().maxCoeff(), kIdentityTol,
                  "|w(K_{pi_{l-1},l}) - pi_l|_inf");
      });
      rec.guarded("fixed_point_ee_jump" + tag(l, eps), [&] {
        const auto p = oracle::ee_jump_matrix(kernels, l, pi[l - 1], eps);
        if (eps < 1.0) {
          const Vector w = oracle::stationary(p);
          rec.bound("fixed_point_ee_jump" + tag(l, eps), (w - pi[l]).cwiseAbs().maxCoeff(), kIdentityTol);
        } else {
          // Pure jumps never leave a ring: pi_l is invariant but not the unique stationary law.
          rec.bound("fixed_point_ee_jump" + tag(l, eps),
                    (pi[l].transpose() * p.matrix() - pi[l].transpose()).cwiseAbs().maxCoeff(), kIdentityTol,
                    "invariance only: reducible when eps = 1");
        }
      });
    }

    const double eps = level_eps(l);

    rec.guarded("poisson" + tag(l, eps), [&] {
      const auto p = oracle::nonlinear_matrix(kernels, l, pi[l - 1], eps);
      const auto [excess, residual] = poisson_worst(p, functions);
      rec.bound("poisson_residual" + tag(l, eps), residual, kIdentityTol);
      rec.bound("poisson_series" + tag(l, eps), excess, kIdentityTol,
                "50-term series minus direct solve, in excess of the Doeblin envelope");
    });

    if (n <= 8 && d <= 3) {
      double worst = 0.0;
      rec.guarded("composition_identity[level=" + std::to_string(l) + "]", [&] {
        std::vector<Vector> mus{pi[l - 1], random_rational_measure(n, rng), random_positive_measure(n, rng)};
        for (std::size_t q = 1; q <= 3; ++q)
          for (const auto& mu : mus)
            for (const auto& f : functions)
              worst = std::max(worst, oracle::composition_identity_check(kernels, l, mu, f, q));
        rec.bound("composition_identity[level=" + std::to_string(l) + "]", worst, kIdentityTol,
                  "q = 1..3, |Q^q f - ring/tensor enumeration|_inf");
      });
    } else {
      rec.flag("composition_identity[level=" + std::to_string(l) + "]", true, 0.0,
               "skipped: enumeration needs S <= 8 and d <= 3");
    }

    rec.guarded("mixture_expansion[level=" + std::to_string(l) + "]", [&] {
      const auto k = oracle::k_matrix(kernels, l);
      const auto q = oracle::q_matrix(kernels, l, pi[l - 1]);
      double worst = 0.0;
      for (double e : {0.3, 0.5, 1.0, eps})
        for (std::size_t steps = 1; steps <= 6; ++steps)
          worst = std::max(worst, oracle::mixture_expansion_check(k, q, e, steps));
      rec.bound("mixture_expansion[level=" + std::to_string(l) + "]", worst, kIdentityTol,
                "n = 1..6, eps in {0.3, 0.5, 1, configured}");
    });

    rec.guarded("lipschitz[level=" + std::to_string(l) + "]", [&] {
      double worst = 0.0;
      for (std::size_t t = 0; t < opt.lipschitz_pairs; ++t) {
        const Vector mu = random_positive_measure(n, rng);
        const Vector xi = random_positive_measure(n, rng);
        worst = std::max(worst, oracle::lipschitz_check(kernels, l, mu, xi, opt.lipschitz_trials, rng));
      }
      rec.bound("lipschitz[level=" + std::to_string(l) + "]", worst, 1.0 + 1e-9,
                "max |Q_mu f - Q_xi f| / (2 |f|_inf sup_x tv(mu_x, xi_x))");
    });

    rec.guarded("invariant_continuity[level=" + std::to_string(l) + "]", [&] {
      const double e = eps > 0.0 ? eps : 0.5;
      double worst = 0.0;
      for (std::size_t t = 0; t < opt.lipschitz_pairs; ++t) {
        const Vector mu = random_positive_measure(n, rng);
        const Vector xi = random_positive_measure(n, rng);
        worst = std::max(worst, oracle::invariant_continuity_check(kernels, l, mu, xi, e).ratio);
      }
      rec.flag("invariant_continuity[level=" + std::to_string(l) + "]", std::isfinite(worst), worst,
               "empirical M = max tv(w(mu), w(xi)) / |K_mu - K_xi|_inf (reported, not bounded)");
    });

    rec.guarded("geometric_rate" + tag(l, eps), [&] {
      for (const auto& [label, p] :
           {std::pair{std::string("local"), oracle::k_matrix(kernels, l)},
            std::pair{std::string("nonlinear"), oracle::nonlinear_matrix(kernels, l, pi[l - 1], eps)}}) {
        const auto est = oracle::geometric_rate_estimate(p);
        const double excess = std::max(est.max_step_ratio, est.fitted_rho) - est.doeblin_rho;
        std::ostringstream detail;
        detail << "doeblin rho " << format_double(est.doeblin_rho) << ", fitted "
               << format_double(est.fitted_rho) << (est.monotone ? "" : ", tv not monotone");
        report.checks.push_back({"geometric_rate_" + label + tag(l, eps), excess, kRateSlack,
                                 excess <= kRateSlack && est.monotone, detail.str()});
      }
    });
  }

  // Empirical-measure fluctuation bound, sampling from each level.
  for (std::size_t l = 0; l < r; ++l) {
    const auto masses = ladder_masses(kernels.ladder(), kernels.partition());
    const double theta = 0.5 * *std::min_element(masses[l].begin(), masses[l].end());
    double worst = 0.0;
    std::size_t checked = 0;
    for (std::size_t run = 0; run < opt.fluctuation_runs; ++run) {
      const auto rep = oracle::fluctuation_check(kernels.partition(), pi[l], opt.fluctuation_steps, theta, rng);
      worst = std::max(worst, rep.max_ratio);
      checked += rep.checked_steps;
    }
    report.checks.push_back({"fluctuation_bound[level=" + std::to_string(l) + "]", worst, 1.0,
                             worst <= 1.0 && checked > 0,
                             "max |S_{m+1,x}f - S_{m,x}f| (m+2) / (1/theta + 1/theta^2), theta = " +
                                 format_double(theta) + ", " + std::to_string(checked) + " steps"});
  }

  // Poisson equation on random dense chains.
  {
    double excess = -std::numeric_limits<double>::infinity();
    double residual = 0.0;
    for (std::size_t c = 0; c < opt.random_chains; ++c) {
      const auto p = oracle::random_chain(8, rng);
      const auto [e, res] = poisson_worst(p, {random_function(8, rng)});
      excess = std::max(excess, e);
      residual = std::max(residual, res);
    }
    rec.bound("poisson_random_chains_residual", residual, kIdentityTol);
    rec.bound("poisson_random_chains_series", excess, kIdentityTol);
  }
  return report;
}

VerificationReport verify_suite(const ExperimentConfig& cfg) {
  VerifyOptions opt;
  opt.epsilons = cfg.sampler.epsilon;
  opt.seed = cfg.sampler.seed;
  if (cfg.kernels->space().is_finite())
    for (const auto& f : cfg.functions) opt.functions.push_back(tabulate(f, cfg.kernels->space()));
  return verify_kernels(*cfg.kernels, opt);
}

}  // namespace ee
