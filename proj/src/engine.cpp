#include "brdsgd/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "brdsgd/error.hpp"
#include "brdsgd/random.hpp"

namespace brdsgd {

void RunConfig::validate() const {
  if (steps < 1) throw Error(ErrorCode::InvalidArgument, "steps must be >= 1");
  if (batch_size < 1) throw Error(ErrorCode::InvalidArgument, "batch size must be >= 1");
  if (record_every < 1) throw Error(ErrorCode::InvalidArgument, "record stride must be >= 1");
  if (roles.size() != graph.size()) {
    throw Error(ErrorCode::InvalidArgument, "role assignment does not cover the graph");
  }
  if (!honest_subgraph_connected(graph, roles)) {
    throw Error(ErrorCode::DisconnectedHonestSubgraph, "honest agents are not connected");
  }
  if (static_cast<int>(local.size()) != honest_count()) {
    throw Error(ErrorCode::InvalidArgument, "need one local dataset per honest agent");
  }
  for (const auto& d : local) {
    if (d.empty()) throw Error(ErrorCode::InvalidArgument, "empty local dataset");
    if (d.size() != local.front().size()) {
      throw Error(ErrorCode::InvalidArgument, "local datasets must share the same size Z");
    }
    if (d.dim() != loss.features) {
      throw Error(ErrorCode::DimensionMismatch, "data dimension does not match the loss");
    }
  }
  if (init.size() != 0 && init.size() != loss.param_count()) {
    throw Error(ErrorCode::DimensionMismatch, "initialization has the wrong dimension");
  }
  if (attack.kind == AttackKind::Duplicate && attack.victim && !roles.is_honest(*attack.victim)) {
    throw Error(ErrorCode::InvalidArgument, "duplicate-attack victim must be honest");
  }
}

ParamVector average(std::span<const ParamVector> models) {
  ParamVector acc = ParamVector::Zero(models.front().size());
  for (const auto& m : models) acc += m;
  return acc / static_cast<double>(models.size());
}

// Pairwise form of (1/n) sum ||x_i - mean||^2: exactly zero at consensus,
// where going through the rounded mean leaves residue.
double disagreement(std::span<const ParamVector> models) {
  const auto n = models.size();
  if (n == 0) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) total += (models[i] - models[j]).squaredNorm();
  }
  return total / static_cast<double>(n * n);
}

std::vector<int> sample_indices(const RunConfig& cfg, int agent, std::int64_t k) {
  const int pos = cfg.roles.honest_index(agent);
  if (pos < 0) throw Error(ErrorCode::InvalidArgument, "agent is not honest");
  const int z = cfg.local[static_cast<std::size_t>(pos)].size();
  auto gen = make_stream(cfg.seed, StreamPurpose::Sampling,
                         {static_cast<std::uint64_t>(agent), static_cast<std::uint64_t>(k)});
  std::uniform_int_distribution<int> pick(0, z - 1);
  std::vector<int> out(static_cast<std::size_t>(cfg.batch_size));
  for (auto& i : out) i = pick(gen);
  return out;
}

Simulator::Simulator(RunConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  const auto& honest = cfg_.roles.honest_ids();

  // Silent Byzantine agents (no attack) are equivalent to their absence, so
  // the weights are then computed over the honest subgraph only.
  std::vector<int> members;
  for (int a = 0; a < cfg_.graph.size(); ++a) {
    if (cfg_.attack.kind != AttackKind::None || cfg_.roles.is_honest(a)) members.push_back(a);
  }
  const Eigen::MatrixXd w = metropolis_matrix(cfg_.graph, members);
  std::vector<int> member_pos(static_cast<std::size_t>(cfg_.graph.size()), -1);
  for (std::size_t i = 0; i < members.size(); ++i) member_pos[static_cast<std::size_t>(members[i])] = static_cast<int>(i);

  hoods_.resize(honest.size());
  for (std::size_t i = 0; i < honest.size(); ++i) {
    const int n = honest[i];
    auto& h = hoods_[i];
    const int row = member_pos[static_cast<std::size_t>(n)];
    h.weights.push_back(w(row, row));
    for (int m : cfg_.graph.neighbors(n)) {
      const int col = member_pos[static_cast<std::size_t>(m)];
      if (col < 0) continue;
      h.senders.push_back(m);
      h.weights.push_back(w(row, col));
      if (cfg_.roles.is_honest(m)) {
        h.honest.push_back(cfg_.roles.honest_index(m));
      } else {
        h.byzantine.push_back(m);
      }
    }
    // Reject impossible counts now rather than at the first step.
    h.rule = cfg_.rule.sized_for(static_cast<int>(h.byzantine.size()));
    const int senders = static_cast<int>(h.senders.size());
    const bool ok = h.rule.kind == RuleKind::TrimmedMean ? senders + 1 > 2 * h.rule.count
                    : h.rule.kind == RuleKind::Ios       ? h.rule.count == 0 || h.rule.count < senders
                                                         : true;
    if (!ok) {
      throw Error(ErrorCode::TooFewInputs, "agent " + std::to_string(n) + " has " + std::to_string(senders) +
                                               " neighbors, too few for " + h.rule.name());
    }
  }

  const ParamVector init =
      cfg_.init.size() ? cfg_.init : ParamVector::Zero(cfg_.loss.param_count());
  models_.assign(honest.size(), init);

  if (cfg_.attack.kind == AttackKind::Duplicate) {
    if (cfg_.attack.victim) {
      victim_ = *cfg_.attack.victim;
    } else {
      auto gen = make_stream(cfg_.seed, StreamPurpose::Victim);
      std::uniform_int_distribution<std::size_t> pick(0, honest.size() - 1);
      victim_ = honest[pick(gen)];
    }
  }
}

void Simulator::restore(const Snapshot& s) {
  if (s.models.size() != models_.size()) throw Error(ErrorCode::InvalidArgument, "snapshot size");
  k_ = s.k;
  models_ = s.models;
}

void Simulator::step() {
  const auto& honest = cfg_.roles.honest_ids();
  const double alpha = step_size(cfg_.schedule, k_);

  std::vector<ParamVector> half(models_.size());
  for (std::size_t i = 0; i < honest.size(); ++i) {
    const auto idx = sample_indices(cfg_, honest[i], k_);
    half[i] = models_[i] - alpha * batch_grad(cfg_.loss, models_[i], cfg_.local[i], idx);
  }

  std::vector<ParamVector> next(models_.size());
  for (std::size_t i = 0; i < honest.size(); ++i) {
    const int n = honest[i];
    const auto& h = hoods_[i];

    std::vector<Message> view;
    if (!h.byzantine.empty()) {
      if (cfg_.attack.kind == AttackKind::Duplicate) {
        // The coalition always knows the victim's half-step.
        view.push_back({victim_, half[static_cast<std::size_t>(cfg_.roles.honest_index(victim_))]});
      } else {
        for (int pos : h.honest) view.push_back({honest[static_cast<std::size_t>(pos)], half[static_cast<std::size_t>(pos)]});
        if (cfg_.attack.include_target || view.empty()) view.push_back({n, half[i]});
      }
    }

    InboundSet in;
    in.own_id = n;
    in.own = half[i];
    in.weights = h.weights;
    in.messages.reserve(h.senders.size());
    for (int m : h.senders) {
      const int pos = cfg_.roles.honest_index(m);
      if (pos >= 0) {
        in.messages.push_back({m, half[static_cast<std::size_t>(pos)]});
        continue;
      }
      AttackContext ctx;
      ctx.target = n;
      ctx.honest_msgs = view;
      ctx.step = k_;
      ctx.dim = static_cast<int>(half[i].size());
      ctx.stream = stream_seed(cfg_.seed, StreamPurpose::Attack,
                               {static_cast<std::uint64_t>(m), static_cast<std::uint64_t>(k_),
                                static_cast<std::uint64_t>(n)});
      in.messages.push_back({m, craft_message(cfg_.attack, ctx, victim_)});
    }

    next[i] = aggregate(h.rule, in);
    if (!next[i].allFinite()) throw NonFiniteModelError(k_, n);
  }
  models_ = std::move(next);
  ++k_;
}

void Simulator::run_until(std::int64_t k) {
  while (k_ < k) step();
}

TraceRow Simulator::measure() const {
  TraceRow row;
  row.k = k_;
  row.mean_model = average(models_);
  row.H = disagreement(models_);
  double train = 0.0;
  for (const auto& d : cfg_.local) train += mean_loss(cfg_.loss, row.mean_model, d);
  row.train_loss = train / static_cast<double>(cfg_.local.size());
  if (cfg_.test.empty()) {
    row.test_loss = std::numeric_limits<double>::quiet_NaN();
    row.test_acc = std::numeric_limits<double>::quiet_NaN();
  } else {
    row.test_loss = mean_loss(cfg_.loss, row.mean_model, cfg_.test);
    row.test_acc = accuracy(cfg_.loss, row.mean_model, cfg_.test);
  }
  for (const auto& m : models_) row.model_norms.push_back(m.norm());
  return row;
}

bool is_recorded(std::int64_t k, std::int64_t stride, std::int64_t steps) {
  return k == 0 || k == steps || (k % stride == 0 && k < steps);
}

RunTrace run(const RunConfig& cfg) {
  Simulator sim(cfg);
  RunTrace trace;
  trace.rows.push_back(sim.measure());
  while (sim.step_index() < cfg.steps) {
    sim.step();
    if (is_recorded(sim.step_index(), cfg.record_every, cfg.steps)) trace.rows.push_back(sim.measure());
  }
  return trace;
}

PairResult run_pair(const RunConfig& cfg, const Perturbation& perturb) {
  const int pos = perturb.agent >= 0 && perturb.agent < cfg.roles.size()
                      ? cfg.roles.honest_index(perturb.agent)
                      : -1;
  if (pos < 0) throw Error(ErrorCode::InvalidArgument, "perturbed agent must be honest");
  RunConfig other = cfg;
  auto& data = other.local[static_cast<std::size_t>(pos)];
  data = data.with_replaced(perturb.index, perturb.replacement);

  Simulator a(cfg);
  Simulator b(std::move(other));
  PairResult out;
  auto record = [&] {
    out.base.rows.push_back(a.measure());
    out.perturbed.rows.push_back(b.measure());
    StabilityRow s;
    s.k = a.step_index();
    s.delta = (out.base.rows.back().mean_model - out.perturbed.rows.back().mean_model).norm();
    double eta = 0.0;
    for (std::size_t i = 0; i < a.models().size(); ++i) eta += (a.models()[i] - b.models()[i]).norm();
    s.eta = eta / static_cast<double>(a.models().size());
    out.stability.rows.push_back(s);
  };
  record();
  while (a.step_index() < cfg.steps) {
    a.step();
    b.step();
    if (is_recorded(a.step_index(), cfg.record_every, cfg.steps)) record();
  }
  return out;
}

}  // namespace brdsgd
