#ifndef EE_DIAGNOSTICS_HPP
#define EE_DIAGNOSTICS_HPP

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "ee/config.hpp"
#include "ee/kernels.hpp"
#include "json.hpp"

namespace ee {

/// Run `count` independent jobs on a small thread pool. Results are written
/// by index, so aggregation order never depends on scheduling.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& job);

// ---------------------------------------------------------------- rate study

struct RatePoint {
  std::size_t n;            ///< round index
  std::size_t averaged;     ///< n - N_{1:r-1} + 1 terms in the average
  double mean_abs_error;    ///< E|S_n^r(f) - pi_r(f)| over replicates
  double standard_error;    ///< of mean_abs_error
  double rms_error;         ///< (E|.|^2)^(1/2)
};

struct RateFit {
  std::string function;
  double exact;             ///< pi_r(f)
  std::vector<RatePoint> points;
  double slope;             ///< log-log slope of mean_abs_error vs averaged
  double slope_ci_low;
  double slope_ci_high;
  bool degenerate;          ///< f constant: error identically 0, no slope
  bool decreasing;          ///< terminal error below initial error
  bool passed;
};

struct RateReport {
  std::size_t replicates;
  std::size_t burn_in;      ///< N_{1:r-1}
  std::vector<RateFit> fits;
  bool passed;
};

inline constexpr double kSlopeBandLow = -0.65;
inline constexpr double kSlopeBandHigh = -0.35;
inline constexpr std::size_t kMinRateReplicates = 50;

/// E|S_n^r(f) - pi_r(f)| over independent replicates on a finite space.
RateReport slln_rate_study(const ExperimentConfig& config);

// ---------------------------------------------------------------- bias study

struct BiasReplicate {
  std::vector<double> feeder;      ///< frozen feeder probability vector
  std::vector<double> occupancy;   ///< chain-r occupation frequencies
  std::vector<double> standard_error;  ///< batch-means s.e. per state
  std::vector<double> predicted;   ///< stationary law of the frozen kernel
  double predicted_bias;           ///< tv(predicted, pi_r)
  double simulated_bias;           ///< tv(occupancy, pi_r)
  double max_z;                    ///< max_s |occupancy - predicted| / se
  bool frozen;
  bool passed;
};

struct BiasReport {
  std::string mode;  ///< "freeze", "atoms" or "none"
  std::vector<double> target;
  std::vector<BiasReplicate> replicates;
  bool passed;
};

inline constexpr double kAgreementZ = 3.0;

/// Frozen-feeder experiment against the exact oracle prediction.
BiasReport bias_study(const ExperimentConfig& config);

// ------------------------------------------------------------- verification

struct CheckResult {
  std::string name;
  double value;
  double tolerance;
  bool passed;
  std::string detail;
};

struct VerificationReport {
  std::vector<CheckResult> checks;
  bool passed() const;
};

struct VerifyOptions {
  std::vector<double> epsilons;          ///< extra mixture weights to test
  std::vector<std::vector<double>> functions;  ///< tables over the states
  std::uint64_t seed = 0;
  std::size_t lipschitz_pairs = 100;
  std::size_t lipschitz_trials = 5;
  std::size_t fluctuation_runs = 3;
  std::size_t fluctuation_steps = 10000;
  std::size_t random_chains = 20;
};

/// Every exact identity and bound on a finite model.
VerificationReport verify_kernels(const KernelSet& kernels, const VerifyOptions& options);
VerificationReport verify_suite(const ExperimentConfig& config);

// ---------------------------------------------------------------- artifacts

/// Writes traces, measure dumps, summary.csv and metadata.json into `out`.
/// Returns the metadata record.
nlohmann::json run_experiment(const ExperimentConfig& config, const std::filesystem::path& out);

nlohmann::json to_json(const RateReport& report);
nlohmann::json to_json(const BiasReport& report);
nlohmann::json to_json(const VerificationReport& report);

void write_rate_report(const RateReport& report, const ExperimentConfig& config,
                       const std::filesystem::path& out);
void write_bias_report(const BiasReport& report, const ExperimentConfig& config,
                       const std::filesystem::path& out);
void write_verification_report(const VerificationReport& report, const ExperimentConfig& config,
                               const std::filesystem::path& out);

}  // namespace ee

#endif  // EE_DIAGNOSTICS_HPP
