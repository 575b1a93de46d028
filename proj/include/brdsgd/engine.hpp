#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "brdsgd/aggregation.hpp"
#include "brdsgd/attacks.hpp"
#include "brdsgd/learner.hpp"
#include "brdsgd/topology.hpp"

namespace brdsgd {

// A fully resolved simulation: concrete graph, roles and data.
struct RunConfig {
  Graph graph;
  RoleAssignment roles;
  RuleSpec rule;
  AttackSpec attack;
  LossSpec loss;
  StepSchedule schedule;
  std::vector<Dataset> local;  // one per honest agent, in roles.honest_ids() order
  Dataset test;
  int batch_size = 1;
  std::int64_t steps = 1;
  std::uint64_t seed = 1;
  std::int64_t record_every = 10;
  ParamVector init;  // shared initialization; empty means zeros

  // Throws DisconnectedHonestSubgraph or InvalidArgument.
  void validate() const;
  int honest_count() const { return static_cast<int>(roles.honest_ids().size()); }
};

struct TraceRow {
  std::int64_t k = 0;
  double train_loss = 0.0;
  double test_loss = 0.0;
  double test_acc = 0.0;
  double H = 0.0;
  ParamVector mean_model;
  std::vector<double> model_norms;
};

struct RunTrace {
  std::vector<TraceRow> rows;
};

struct StabilityRow {
  std::int64_t k = 0;
  double delta = 0.0;
  double eta = 0.0;
};

struct StabilityTrace {
  std::vector<StabilityRow> rows;
};

struct Perturbation {
  int agent = 0;  // global agent id; must be honest
  int index = 0;  // sample position in that agent's local dataset
  Sample replacement;
};

struct PairResult {
  RunTrace base;
  RunTrace perturbed;
  StabilityTrace stability;
};

// Mean squared distance of the models to their average.
double disagreement(std::span<const ParamVector> models);
ParamVector average(std::span<const ParamVector> models);

// Batch indices drawn by honest agent `agent` (global id) at step k. Keyed by
// (seed, agent, step) only, so paired runs select identical positions.
std::vector<int> sample_indices(const RunConfig& cfg, int agent, std::int64_t k);

// Synchronous-round executor for Byzantine-resilient DSGD.
class Simulator {
 public:
  explicit Simulator(RunConfig cfg);

  // Advances one round: local SGD half-step, message exchange (Byzantine
  // messages crafted per target after every honest half-step is formed),
  // aggregation. Throws NonFiniteModelError on divergence.
  void step();
  void run_until(std::int64_t k);

  std::int64_t step_index() const { return k_; }
  const std::vector<ParamVector>& models() const { return models_; }
  const RunConfig& config() const { return cfg_; }
  int victim() const { return victim_; }

  TraceRow measure() const;

  struct Snapshot {
    std::int64_t k = 0;
    std::vector<ParamVector> models;
  };
  Snapshot snapshot() const { return {k_, models_}; }
  void restore(const Snapshot& s);

 private:
  struct Neighborhood {
    std::vector<int> honest;     // honest neighbor positions (honest-order indices)
    std::vector<int> byzantine;  // Byzantine neighbor global ids
    std::vector<int> senders;    // all senders in ascending global id
    std::vector<double> weights; // own weight first, then one per sender
    RuleSpec rule;               // counts resolved for this agent
  };

  RunConfig cfg_;
  std::vector<Neighborhood> hoods_;
  std::vector<ParamVector> models_;
  std::int64_t k_ = 0;
  int victim_ = -1;
};

// True when step k lands on the recording grid {0, stride, 2*stride, ..., K}.
bool is_recorded(std::int64_t k, std::int64_t stride, std::int64_t steps);

RunTrace run(const RunConfig& cfg);
PairResult run_pair(const RunConfig& cfg, const Perturbation& perturb);

}  // namespace brdsgd
