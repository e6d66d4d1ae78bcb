#include "ee/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>

#include "ee/error.hpp"

namespace ee {

using nlohmann::json;

namespace {

const json& require(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key))
    throw ConfigError(where + ": missing required field '" + key + "'");
  return obj.at(key);
}

template <typename T>
T get_as(const json& v, const std::string& what) {
  try {
    return v.get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(what + ": " + e.what());
  }
}

StateSpace parse_space(const json& doc) {
  const json& s = require(doc, "state_space", "config");
  const auto kind = get_as<std::string>(require(s, "kind", "state_space"), "state_space.kind");
  if (kind == "finite") return StateSpace::finite(get_as<std::size_t>(require(s, "size", "state_space"), "state_space.size"));
  if (kind == "box")
    return StateSpace::box(get_as<std::vector<double>>(require(s, "lower", "state_space"), "state_space.lower"),
                           get_as<std::vector<double>>(require(s, "upper", "state_space"), "state_space.upper"));
  throw ConfigError("state_space.kind must be 'finite' or 'box'");
}

/// Unnormalized log density from a base-density spec.
LogDensity parse_base_density(const json& spec, const StateSpace& space) {
  const auto kind = get_as<std::string>(require(spec, "kind", "ladder.base"), "ladder.base.kind");
  if (kind == "table") {
    if (!space.is_finite()) throw ConfigError("ladder.base table needs a finite space");
    auto w = get_as<std::vector<double>>(require(spec, "weights", "ladder.base"), "ladder.base.weights");
    if (w.size() != space.size()) throw ConfigError("ladder.base.weights length != state count");
    std::vector<double> logs(w.size());
    for (std::size_t s = 0; s < w.size(); ++s) {
      if (!(w[s] > 0.0)) throw ConfigError("ladder.base.weights must be strictly positive");
      logs[s] = std::log(w[s]);
    }
    return [logs, space](const State& x) { return logs[space.index_of(x)]; };
  }
  if (kind == "gaussian_mixture") {
    if (space.is_finite()) throw ConfigError("gaussian_mixture needs a box space");
    struct Component {
      double log_weight;
      std::vector<double> mean;
      double sd;
    };
    std::vector<Component> comps;
    for (const auto& c : require(spec, "components", "ladder.base")) {
      Component comp{std::log(get_as<double>(require(c, "weight", "component"), "component.weight")),
                     get_as<std::vector<double>>(require(c, "mean", "component"), "component.mean"),
                     get_as<double>(require(c, "sd", "component"), "component.sd")};
      if (!(comp.sd > 0.0) || !std::isfinite(comp.log_weight))
        throw ConfigError("mixture components need positive weight and sd");
      if (comp.mean.size() != space.dimension())
        throw ConfigError("mixture component mean has the wrong dimension");
      comps.push_back(std::move(comp));
    }
    if (comps.empty()) throw ConfigError("gaussian_mixture needs at least one component");
    return [comps](const State& x) {
      // log-sum-exp over components of w_c N(x; m_c, sd_c^2 I)
      double top = -std::numeric_limits<double>::infinity();
      std::vector<double> terms;
      terms.reserve(comps.size());
      for (const auto& c : comps) {
        double q = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
          const double z = (x[i] - c.mean[i]) / c.sd;
          q += z * z;
        }
        const double t = c.log_weight - 0.5 * q - static_cast<double>(x.size()) * std::log(c.sd);
        terms.push_back(t);
        top = std::max(top, t);
      }
      double sum = 0.0;
      for (double t : terms) sum += std::exp(t - top);
      return top + std::log(sum);
    };
  }
  throw ConfigError("ladder.base.kind must be 'table' or 'gaussian_mixture'");
}

struct Model {
  DensityLadder ladder;
  LogDensity target;
};

Model parse_ladder(const json& doc, const StateSpace& space) {
  const json& l = require(doc, "ladder", "config");
  if (l.contains("weights")) {
    auto tables = get_as<std::vector<std::vector<double>>>(l.at("weights"), "ladder.weights");
    if (tables.empty()) throw ConfigError("ladder.weights is empty");
    DensityLadder ladder = ladder_from_weights(space, tables);
    const std::size_t top = ladder.size() - 1;
    auto target = [ladder, top](const State& x) { return ladder.log_density(top, x); };
    return {std::move(ladder), std::move(target)};
  }
  auto temps = get_as<std::vector<double>>(require(l, "temperatures", "ladder"), "ladder.temperatures");
  LogDensity base = parse_base_density(require(l, "base", "ladder"), space);
  return {build_tempered_ladder(space, base, temps), base};
}

RingPartition parse_partition(const json& doc, const StateSpace& space, const LogDensity& target) {
  const json& p = require(doc, "partition", "config");
  if (p.contains("labels"))
    return RingPartition::from_labels(space, get_as<std::vector<std::size_t>>(p.at("labels"), "partition.labels"));
  // Energy level sets of H = -log(target density).
  auto thresholds = p.contains("thresholds")
                        ? get_as<std::vector<double>>(p.at("thresholds"), "partition.thresholds")
                        : std::vector<double>{};
  return RingPartition::from_energy(space, [target](const State& x) { return -target(x); },
                                    std::move(thresholds));
}

LocalKernelSpec parse_local(const json& k, std::size_t levels) {
  LocalKernelSpec spec;
  const auto proposal = k.contains("proposal") ? get_as<std::string>(k.at("proposal"), "kernel.proposal")
                                               : std::string("uniform");
  if (proposal == "uniform") {
    spec.kind = ProposalKind::uniform_independent;
  } else if (proposal == "neighbor") {
    spec.kind = ProposalKind::random_neighbor;
  } else if (proposal == "gaussian") {
    spec.kind = ProposalKind::gaussian_walk;
    const json& s = require(k, "step_sizes", "kernel");
    spec.step_sizes = s.is_array() ? get_as<std::vector<double>>(s, "kernel.step_sizes")
                                   : std::vector<double>(levels, get_as<double>(s, "kernel.step_sizes"));
  } else {
    throw ConfigError("kernel.proposal must be 'uniform', 'neighbor' or 'gaussian'");
  }
  return spec;
}

State parse_state(const json& v, const StateSpace& space) {
  State x = v.is_array() ? get_as<std::vector<double>>(v, "state") : State{get_as<double>(v, "state")};
  if (!space.contains(x)) throw ConfigError("state outside the state space");
  return x;
}

TestFunction parse_function(const json& f, const KernelSet& kernels) {
  const auto kind = get_as<std::string>(require(f, "kind", "test_functions[]"), "test_functions.kind");
  std::string name = f.contains("name") ? get_as<std::string>(f.at("name"), "test_functions.name") : kind;
  const auto& space = kernels.space();
  if (kind == "ring_indicator") {
    const auto ring = get_as<std::size_t>(require(f, "ring", "ring_indicator"), "ring_indicator.ring");
    if (ring >= kernels.partition().ring_count()) throw ConfigError("ring_indicator.ring out of range");
    const RingPartition* partition = &kernels.partition();
    return {name, [partition, ring](const State& x) { return partition->assign(x) == ring ? 1.0 : 0.0; }};
  }
  if (kind == "coordinate") {
    const auto index = f.contains("index") ? get_as<std::size_t>(f.at("index"), "coordinate.index") : 0;
    if (index >= space.dimension()) throw ConfigError("coordinate.index out of range");
    return {name, [index](const State& x) { return x[index]; }};
  }
  if (kind == "table") {
    if (!space.is_finite()) throw ConfigError("table test functions need a finite space");
    auto values = get_as<std::vector<double>>(require(f, "values", "table"), "table.values");
    if (values.size() != space.size()) throw ConfigError("table test function length != state count");
    for (double v : values)
      if (!std::isfinite(v)) throw ConfigError("table test function values must be finite");
    return {name, [values, space](const State& x) { return values[space.index_of(x)]; }};
  }
  throw ConfigError("test function kind must be 'ring_indicator', 'coordinate' or 'table'");
}

}  // namespace

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::vector<double> tabulate(const TestFunction& f, const StateSpace& space) {
  std::vector<double> t(space.size());
  for (std::size_t s = 0; s < t.size(); ++s) t[s] = f.eval(space.state_at(s));
  return t;
}

ExperimentConfig parse_config(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  ExperimentConfig cfg;
  cfg.document = doc;
  cfg.hash = fnv1a(doc.dump());

  StateSpace space = parse_space(doc);
  Model model = parse_ladder(doc, space);
  RingPartition partition = parse_partition(doc, space, model.target);
  const std::size_t r = model.ladder.size();
  const json& k = require(doc, "kernel", "config");
  LocalKernelSpec local = parse_local(k, r);
  cfg.kernels = std::make_shared<const KernelSet>(std::move(model.ladder), std::move(partition), std::move(local));
  if (space.is_finite()) ladder_masses(cfg.kernels->ladder(), cfg.kernels->partition());

  SamplerConfig& s = cfg.sampler;
  const auto variant = k.contains("variant") ? get_as<std::string>(k.at("variant"), "kernel.variant")
                                             : std::string("selection-mutation");
  if (variant == "selection-mutation") {
    s.variant = KernelVariant::selection_mutation;
  } else if (variant == "ee-jump") {
    s.variant = KernelVariant::ee_jump;
  } else {
    throw ConfigError("kernel.variant must be 'selection-mutation' or 'ee-jump'");
  }
  const json& eps = require(k, "epsilon", "kernel");
  s.epsilon.assign(r, 0.0);
  if (eps.is_array()) {
    auto e = get_as<std::vector<double>>(eps, "kernel.epsilon");
    if (e.size() != r - 1) throw ConfigError("kernel.epsilon needs one value per level above the first");
    std::copy(e.begin(), e.end(), s.epsilon.begin() + 1);
  } else {
    std::fill(s.epsilon.begin() + 1, s.epsilon.end(), get_as<double>(eps, "kernel.epsilon"));
  }

  const json& sched = require(doc, "schedule", "config");
  s.schedule = get_as<std::vector<std::size_t>>(require(sched, "N", "schedule"), "schedule.N");
  s.total_rounds = get_as<std::size_t>(require(sched, "total_rounds", "schedule"), "schedule.total_rounds");
  if (sched.contains("ordering")) {
    const auto o = get_as<std::string>(sched.at("ordering"), "schedule.ordering");
    if (o == "sequential") s.ordering = RoundOrdering::sequential;
    else if (o == "snapshot") s.ordering = RoundOrdering::snapshot;
    else throw ConfigError("schedule.ordering must be 'sequential' or 'snapshot'");
  }
  std::size_t burn = 0;
  for (auto n : s.schedule) burn += n;
  if (s.total_rounds <= burn) throw ConfigError("schedule.total_rounds must exceed N_1 + ... + N_{r-1}");

  for (const auto& x : require(doc, "initial_states", "config")) s.initial_states.push_back(parse_state(x, space));
  s.seed = doc.contains("seed") ? get_as<std::uint64_t>(doc.at("seed"), "seed") : 0;
  cfg.replicates = doc.contains("replicates") ? get_as<std::size_t>(doc.at("replicates"), "replicates") : 1;
  if (cfg.replicates < 1) throw ConfigError("replicates must be at least 1");

  if (doc.contains("stability")) {
    const json& st = doc.at("stability");
    if (st.contains("theta")) s.theta = get_as<double>(st.at("theta"), "stability.theta");
    if (st.contains("policy")) {
      const auto p = get_as<std::string>(st.at("policy"), "stability.policy");
      if (p == "warn") s.policy = StabilityPolicy::warn;
      else if (p == "abort") s.policy = StabilityPolicy::abort;
      else throw ConfigError("stability.policy must be 'warn' or 'abort'");
    }
  }
  if (doc.contains("output") && doc.at("output").contains("snapshot_every"))
    s.snapshot_every = get_as<std::size_t>(doc.at("output").at("snapshot_every"), "output.snapshot_every");
  s.validate(*cfg.kernels);

  if (doc.contains("test_functions"))
    for (const auto& f : doc.at("test_functions")) cfg.functions.push_back(parse_function(f, *cfg.kernels));
  std::vector<std::string> names;
  for (const auto& f : cfg.functions) {
    if (std::find(names.begin(), names.end(), f.name) != names.end())
      throw ConfigError("duplicate test function name '" + f.name + "'");
    names.push_back(f.name);
  }

  if (doc.contains("rate_study") && doc.at("rate_study").contains("grid")) {
    cfg.rate_grid = get_as<std::vector<std::size_t>>(doc.at("rate_study").at("grid"), "rate_study.grid");
  } else {
    for (std::size_t e = 7; e <= 14; ++e) cfg.rate_grid.push_back(std::size_t{1} << e);
  }
  if (!std::is_sorted(cfg.rate_grid.begin(), cfg.rate_grid.end()) || cfg.rate_grid.empty())
    throw ConfigError("rate_study.grid must be non-empty and increasing");

  if (doc.contains("bias_study")) {
    const json& b = doc.at("bias_study");
    if (b.contains("freeze_at")) cfg.bias.freeze_at = get_as<std::size_t>(b.at("freeze_at"), "bias_study.freeze_at");
    if (b.contains("feeder_atoms")) {
      std::vector<State> atoms;
      for (const auto& a : b.at("feeder_atoms")) atoms.push_back(parse_state(a, space));
      if (atoms.empty()) throw ConfigError("bias_study.feeder_atoms is empty");
      cfg.bias.feeder_atoms = std::move(atoms);
    }
    if (cfg.bias.freeze_at && cfg.bias.feeder_atoms)
      throw ConfigError("bias_study takes either freeze_at or feeder_atoms, not both");
    if (cfg.bias.freeze_at && *cfg.bias.freeze_at < 1) throw ConfigError("bias_study.freeze_at must be >= 1");
    if (b.contains("batches")) cfg.bias.batches = get_as<std::size_t>(b.at("batches"), "bias_study.batches");
    if (b.contains("burn_in")) cfg.bias.burn_in = get_as<std::size_t>(b.at("burn_in"), "bias_study.burn_in");
    if (b.contains("min_predicted_bias"))
      cfg.bias.min_predicted_bias = get_as<double>(b.at("min_predicted_bias"), "bias_study.min_predicted_bias");
    if (cfg.bias.batches < 2) throw ConfigError("bias_study.batches must be at least 2");
  }
  return cfg;
}

json read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
}

}  // namespace ee
