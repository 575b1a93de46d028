#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "brdsgd/engine.hpp"

namespace brdsgd {

struct TopologySpec {
  std::string kind = "erdos_renyi";  // erdos_renyi | complete | file
  int agents = 10;
  double p = 0.7;
  int byzantine = 2;
  std::optional<std::uint64_t> seed;  // defaults to the run seed
  std::vector<int> byzantine_ids;     // explicit placement; overrides random choice
  std::string file;                   // graph text file when kind == "file"
};

struct DataSpec {
  std::string source = "synthetic";  // synthetic | idx
  SynthSpec synth;                   // honest_count is filled in at resolve time
  std::optional<std::uint64_t> seed; // defaults to the run seed
  std::string images;
  std::string labels;
  std::string test_images;
  std::string test_labels;
};

struct InitSpec {
  std::string kind = "auto";  // auto | zeros | normal
  double scale = 0.1;
};

// Declarative description of one experiment, as read from a config file.
// resolve() turns it into a concrete RunConfig.
struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::int64_t steps = 2000;
  std::int64_t record_every = 10;
  int batch_size = 256;
  TopologySpec topology;
  RuleSpec rule = RuleSpec::ios(RuleSpec::kLocal);
  AttackSpec attack;
  LossSpec loss;              // features/classes are taken from the data
  StepSchedule schedule;
  std::optional<double> mu;   // defaults to the loss's strong-convexity modulus
  std::optional<double> L;    // estimated from data when absent and needed
  DataSpec data;
  InitSpec init;
};

RunConfig resolve(const ExperimentConfig& cfg);

// Replacement sample for stability probes: a fresh population draw for
// synthetic data, a test-set sample for IDX data.
Sample replacement_sample(const ExperimentConfig& cfg, const RunConfig& run, std::uint64_t which);

enum class SweepAxis { Rule, Attack, HonestCount, Z, Seed };

SweepAxis parse_sweep_axis(const std::string& name);
std::string to_string(SweepAxis axis);

// Applies one axis value ("ios:2", "alie:1.5", "20", ...) to a copy of base.
ExperimentConfig apply_axis(const ExperimentConfig& base, SweepAxis axis, const std::string& value);

struct PairSpec {
  int agent = 0;
  int index = 0;
  std::uint64_t replacement = 0;
};

struct SweepEntry {
  std::string value;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  RunTrace trace;             // base run (pair mode: the unperturbed run)
  StabilityTrace stability;   // filled in pair mode only
};

// Independent runs per axis value. Run i uses seed base.seed + i, except on
// the seed axis where the value is the seed. Failures are recorded per entry
// and do not stop the sweep. workers == 0 picks the hardware concurrency.
std::vector<SweepEntry> sweep(const ExperimentConfig& base, SweepAxis axis,
                              std::span<const std::string> values,
                              const std::optional<PairSpec>& pair = {}, unsigned workers = 0);

}  // namespace brdsgd
