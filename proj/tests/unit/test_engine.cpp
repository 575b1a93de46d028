#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "brdsgd/error.hpp"
#include "brdsgd/experiment.hpp"

using namespace brdsgd;

namespace {

ExperimentConfig small(std::uint64_t seed = 3) {
  ExperimentConfig c;
  c.seed = seed;
  c.steps = 60;
  c.record_every = 5;
  c.batch_size = 4;
  c.topology.kind = "complete";
  c.topology.agents = 6;
  c.topology.byzantine = 0;
  c.rule = RuleSpec::weighted_mean();
  c.loss.kind = LossKind::SoftmaxL2;
  c.loss.lambda = 0.1;
  c.schedule.kind = ScheduleKind::PaperExp;
  c.schedule.s = 0.5;
  c.data.synth.dim = 5;
  c.data.synth.Z = 20;
  c.data.synth.test_count = 50;
  return c;
}

double max_diff(const RunTrace& a, const RunTrace& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    d = std::max(d, std::abs(a.rows[i].train_loss - b.rows[i].train_loss));
    d = std::max(d, (a.rows[i].mean_model - b.rows[i].mean_model).cwiseAbs().maxCoeff());
  }
  return d;
}

}  // namespace

TEST_CASE("full averaging keeps consensus") {
  const auto t = run(resolve(small()));
  CHECK(t.rows.size() == 13);
  for (const auto& r : t.rows) CHECK(r.H < 1e-24);
}

TEST_CASE("runs are bit-deterministic") {
  auto c = small();
  c.topology.kind = "erdos_renyi";
  c.topology.agents = 9;
  c.topology.byzantine = 2;
  c.rule = RuleSpec::ios(RuleSpec::kLocal);
  c.attack.kind = AttackKind::Gaussian;
  const auto a = run(resolve(c));
  const auto b = run(resolve(c));
  CHECK(max_diff(a, b) == 0.0);
  for (std::size_t i = 0; i < a.rows.size(); ++i) CHECK(a.rows[i].H == b.rows[i].H);
}

TEST_CASE("recorded steps are strictly increasing and end at K") {
  auto c = small();
  c.steps = 23;
  c.record_every = 10;
  const auto t = run(resolve(c));
  std::vector<std::int64_t> ks;
  for (const auto& r : t.rows) ks.push_back(r.k);
  CHECK(ks == std::vector<std::int64_t>{0, 10, 20, 23});
}

TEST_CASE("sign flip defeats plain averaging") {
  auto c = small();
  c.topology.agents = 10;
  c.steps = 500;
  c.record_every = 500;
  c.batch_size = 8;
  c.loss.lambda = 0.01;
  c.data.synth.dim = 20;
  c.data.synth.Z = 200;
  c.data.synth.separation = 2.0;
  double clean = 0.0, attacked = 0.0;
  for (std::uint64_t s = 1; s <= 3; ++s) {
    c.seed = s;
    c.topology.byzantine = 2;
    c.attack.kind = AttackKind::None;
    clean += run(resolve(c)).rows.back().train_loss;
    c.attack.kind = AttackKind::SignFlip;
    attacked += run(resolve(c)).rows.back().train_loss;
  }
  CHECK(attacked >= 2.0 * clean);
}

TEST_CASE("checkpoint and resume match a straight run") {
  auto c = small();
  c.topology.kind = "erdos_renyi";
  c.topology.p = 0.9;
  c.topology.agents = 8;
  c.topology.byzantine = 1;
  c.rule = RuleSpec::trimmed_mean(RuleSpec::kLocal);
  c.attack.kind = AttackKind::Alie;
  const RunConfig rc = resolve(c);
  Simulator straight(rc);
  straight.run_until(40);

  Simulator first(rc);
  first.run_until(20);
  const auto snap = first.snapshot();
  Simulator resumed(rc);
  resumed.restore(snap);
  resumed.run_until(40);
  for (std::size_t i = 0; i < straight.models().size(); ++i) {
    CHECK((straight.models()[i] - resumed.models()[i]).norm() == 0.0);
  }
}

TEST_CASE("average model follows the mean gradient without attack") {
  auto c = small();
  c.topology.kind = "erdos_renyi";
  c.topology.agents = 7;
  c.init.kind = "normal";
  const RunConfig rc = resolve(c);
  Simulator sim(rc);
  const auto& honest = rc.roles.honest_ids();
  for (int k = 0; k < 15; ++k) {
    const auto before = sim.models();
    ParamVector g = ParamVector::Zero(before[0].size());
    for (std::size_t i = 0; i < honest.size(); ++i) {
      const auto idx = sample_indices(rc, honest[i], sim.step_index());
      g += batch_grad(rc.loss, before[i], rc.local[i], idx);
    }
    const double alpha = step_size(rc.schedule, sim.step_index());
    const ParamVector expect = average(before) - alpha / static_cast<double>(honest.size()) * g;
    sim.step();
    CHECK((average(sim.models()) - expect).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("disagreement ignores agent order") {
  auto c = small();
  c.topology.kind = "erdos_renyi";
  c.init.kind = "normal";
  Simulator sim(resolve(c));
  sim.run_until(10);
  auto models = sim.models();
  const double h = disagreement(models);
  CHECK(h > 0.0);
  std::reverse(models.begin(), models.end());
  CHECK(disagreement(models) == doctest::Approx(h).epsilon(1e-12));
  std::rotate(models.begin(), models.begin() + 2, models.end());
  CHECK(disagreement(models) == doctest::Approx(h).epsilon(1e-12));
}

TEST_CASE("identical local data keeps agents identical") {
  RunConfig rc = resolve(small());
  for (auto& d : rc.local) d = rc.local.front();
  Simulator sim(rc);
  for (int k = 0; k < 30; ++k) {
    sim.step();
    for (const auto& m : sim.models()) CHECK((m - sim.models().front()).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("pair runs") {
  auto c = small();
  c.topology.kind = "erdos_renyi";
  c.topology.p = 0.9;
  c.topology.agents = 8;
  c.topology.byzantine = 2;
  c.rule = RuleSpec::ios(RuleSpec::kLocal);
  c.attack.kind = AttackKind::Gaussian;
  c.record_every = 1;
  const RunConfig rc = resolve(c);
  const int agent = rc.roles.honest_ids()[1];
  const int pos = rc.roles.honest_index(agent);

  const auto same = run_pair(rc, {agent, 4, rc.local[static_cast<std::size_t>(pos)][4]});
  for (const auto& s : same.stability.rows) CHECK(s.delta == 0.0);

  const auto diff = run_pair(rc, {agent, 4, replacement_sample(c, rc, 1)});
  std::int64_t first = c.steps;
  for (std::int64_t k = 0; k < c.steps; ++k) {
    const auto idx = sample_indices(rc, agent, k);
    if (std::find(idx.begin(), idx.end(), 4) != idx.end()) {
      first = k;
      break;
    }
  }
  bool moved = false;
  for (const auto& s : diff.stability.rows) {
    CHECK(s.delta <= s.eta + 1e-15);
    if (s.k <= first) CHECK(s.delta == 0.0);
    if (s.delta > 0.0) moved = true;
  }
  CHECK(moved);
  CHECK(max_diff(diff.base, run(rc)) == 0.0);
  CHECK_THROWS_AS(run_pair(rc, {rc.roles.byzantine_ids()[0], 0, {}}), Error);
}

TEST_CASE("impossible configurations are rejected up front") {
  auto c = small();
  c.topology.kind = "complete";
  c.topology.agents = 4;
  c.topology.byzantine = 1;
  c.attack.kind = AttackKind::Gaussian;
  c.rule = RuleSpec::ios(3);
  try {
    Simulator sim(resolve(c));
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TooFewInputs);
  }
  c.rule = RuleSpec::trimmed_mean(2);
  CHECK_THROWS_AS(Simulator(resolve(c)), Error);

  RunConfig rc = resolve(small());
  rc.graph = path_graph(rc.graph.size());
  rc.roles = RoleAssignment::with_byzantine(rc.graph.size(), std::vector<int>{2});
  rc.local.pop_back();
  try {
    Simulator sim(rc);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DisconnectedHonestSubgraph);
  }
}

TEST_CASE("divergence is reported with its step") {
  auto c = small();
  c.schedule.s = 1e306;
  try {
    run(resolve(c));
    CHECK(false);
  } catch (const NonFiniteModelError& e) {
    CHECK(e.code() == ErrorCode::NonFiniteModel);
    CHECK(e.step() >= 0);
  }
}

TEST_CASE("duplicate coalition sends the victim's model") {
  auto c = small();
  c.topology.agents = 7;
  c.topology.byzantine = 2;
  c.attack.kind = AttackKind::Duplicate;
  c.rule = RuleSpec::weighted_mean();
  const RunConfig rc = resolve(c);
  Simulator sim(rc);
  CHECK(rc.roles.is_honest(sim.victim()));
  auto fixed = c;
  fixed.attack.victim = rc.roles.honest_ids().back();
  Simulator pinned(resolve(fixed));
  CHECK(pinned.victim() == rc.roles.honest_ids().back());
}
