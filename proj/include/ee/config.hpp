#ifndef EE_CONFIG_HPP
#define EE_CONFIG_HPP

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ee/kernels.hpp"
#include "ee/sampler.hpp"
#include "json.hpp"

namespace ee {

/// A bounded test function f, named so reports can refer to it.
struct TestFunction {
  std::string name;
  std::function<double(const State&)> eval;
};

struct BiasStudySpec {
  std::optional<std::size_t> freeze_at;
  std::optional<std::vector<State>> feeder_atoms;
  std::size_t batches = 50;
  std::size_t burn_in = 0;
  double min_predicted_bias = 0.0;
};

/// Everything an experiment needs, resolved from one JSON document.
/// See configs/README.md for the schema.
struct ExperimentConfig {
  nlohmann::json document;  ///< the parsed document after CLI overrides
  std::uint64_t hash = 0;   ///< FNV-1a of the canonical dump of `document`

  std::shared_ptr<const KernelSet> kernels;
  SamplerConfig sampler;
  std::size_t replicates = 1;
  std::vector<TestFunction> functions;
  std::vector<std::size_t> rate_grid;
  BiasStudySpec bias;

  std::size_t chains() const { return kernels->levels(); }
};

/// Throws ConfigError (or DomainError) with a readable message on any
/// missing, mistyped or inconsistent field.
ExperimentConfig parse_config(const nlohmann::json& document);
nlohmann::json read_config_file(const std::filesystem::path& path);

/// 64-bit FNV-1a over a string.
std::uint64_t fnv1a(const std::string& text);
std::string hex64(std::uint64_t v);

/// Table of f over a finite space.
std::vector<double> tabulate(const TestFunction& f, const StateSpace& space);

}  // namespace ee

#endif  // EE_CONFIG_HPP
