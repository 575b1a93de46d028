#include "brdsgd/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <thread>

#include "brdsgd/error.hpp"
#include "brdsgd/random.hpp"

namespace brdsgd {
namespace {

SynthSpec resolved_synth(const ExperimentConfig& cfg, int honest_count) {
  SynthSpec s = cfg.data.synth;
  s.honest_count = honest_count;
  s.seed = cfg.data.seed.value_or(cfg.seed);
  return s;
}

int parse_int(const std::string& text, const char* what) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::InvalidArgument, std::string("bad ") + what + " '" + text + "'");
  }
}

double parse_double(const std::string& text, const char* what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::InvalidArgument, std::string("bad ") + what + " '" + text + "'");
  }
}

}  // namespace

RunConfig resolve(const ExperimentConfig& cfg) {
  RunConfig run;
  const std::uint64_t topo_seed = cfg.topology.seed.value_or(cfg.seed);
  const auto& t = cfg.topology;
  if (t.kind == "complete") {
    run.graph = complete_graph(t.agents);
  } else if (t.kind == "erdos_renyi") {
    run.graph = gen_erdos_renyi(t.agents, t.p, topo_seed);
  } else if (t.kind == "file") {
    std::ifstream in(t.file);
    if (!in) throw Error(ErrorCode::IoError, "cannot open graph file " + t.file);
    run.graph = read_graph(in);
  } else {
    throw Error(ErrorCode::ConfigError, "unknown topology kind '" + t.kind + "'");
  }
  if (!t.byzantine_ids.empty()) {
    run.roles = RoleAssignment::with_byzantine(run.graph.size(), t.byzantine_ids);
  } else {
    run.roles = RoleAssignment::random(run.graph.size(), t.byzantine, topo_seed);
  }
  const int honest = run.honest_count();

  if (cfg.data.source == "synthetic") {
    auto data = synth_dataset(resolved_synth(cfg, honest));
    run.local = std::move(data.local);
    run.test = std::move(data.test);
  } else if (cfg.data.source == "idx") {
    const Dataset train = load_idx(cfg.data.images, cfg.data.labels);
    const int z = cfg.data.synth.Z;
    run.local = allocate_evenly(train, honest, z, cfg.data.seed.value_or(cfg.seed));
    if (!cfg.data.test_images.empty()) {
      run.test = load_idx(cfg.data.test_images, cfg.data.test_labels).head(cfg.data.synth.test_count);
    }
  } else {
    throw Error(ErrorCode::ConfigError, "unknown data source '" + cfg.data.source + "'");
  }

  run.loss = cfg.loss;
  run.loss.features = run.local.front().dim();
  run.loss.classes = run.local.front().classes();
  if (!run.test.empty()) run.loss.classes = std::max(run.loss.classes, run.test.classes());

  run.schedule = cfg.schedule;
  run.schedule.mu = cfg.mu.value_or(run.loss.mu());
  if (run.schedule.kind == ScheduleKind::StronglyConvex && !(run.schedule.mu > 0.0)) {
    throw Error(ErrorCode::ConfigError, "the 'sc' schedule needs mu > 0 (set loss.lambda or schedule.mu)");
  }
  run.rule = cfg.rule;
  run.attack = cfg.attack;
  run.batch_size = cfg.batch_size;
  run.steps = cfg.steps;
  run.seed = cfg.seed;
  run.record_every = cfg.record_every;

  const int p = run.loss.param_count();
  std::string init_kind = cfg.init.kind;
  if (init_kind == "auto") init_kind = run.loss.kind == LossKind::Mlp ? "normal" : "zeros";
  if (init_kind == "zeros") {
    run.init = ParamVector::Zero(p);
  } else if (init_kind == "normal") {
    auto gen = make_stream(cfg.seed, StreamPurpose::Init);
    std::normal_distribution<double> normal(0.0, cfg.init.scale);
    run.init.resize(p);
    for (int i = 0; i < p; ++i) run.init[i] = normal(gen);
  } else {
    throw Error(ErrorCode::ConfigError, "unknown init kind '" + cfg.init.kind + "'");
  }

  if (cfg.L) {
    run.schedule.L = *cfg.L;
  } else if (run.schedule.kind == ScheduleKind::NonConvex) {
    const auto est = estimate_M_L(run.loss, run.local.front(), 8, cfg.seed, 1.0);
    run.schedule.L = est.L > 0.0 ? est.L : 1.0;
  }
  return run;
}

Sample replacement_sample(const ExperimentConfig& cfg, const RunConfig& run, std::uint64_t which) {
  if (cfg.data.source == "synthetic") {
    return synth_sample(resolved_synth(cfg, run.honest_count()), which);
  }
  if (run.test.empty()) throw Error(ErrorCode::ConfigError, "no test set to draw a replacement from");
  return run.test[static_cast<int>(which % static_cast<std::uint64_t>(run.test.size()))];
}

SweepAxis parse_sweep_axis(const std::string& name) {
  if (name == "rule") return SweepAxis::Rule;
  if (name == "attack") return SweepAxis::Attack;
  if (name == "honest_count") return SweepAxis::HonestCount;
  if (name == "Z" || name == "z") return SweepAxis::Z;
  if (name == "seed") return SweepAxis::Seed;
  throw Error(ErrorCode::InvalidArgument, "unknown sweep axis '" + name + "'");
}

std::string to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::Rule: return "rule";
    case SweepAxis::Attack: return "attack";
    case SweepAxis::HonestCount: return "honest_count";
    case SweepAxis::Z: return "Z";
    case SweepAxis::Seed: return "seed";
  }
  return "unknown";
}

ExperimentConfig apply_axis(const ExperimentConfig& base, SweepAxis axis, const std::string& value) {
  ExperimentConfig cfg = base;
  const auto colon = value.find(':');
  const std::string head = value.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : value.substr(colon + 1);
  switch (axis) {
    case SweepAxis::Rule: {
      cfg.rule.kind = parse_rule_kind(head);
      cfg.rule.count = RuleSpec::kLocal;
      if (!arg.empty() && arg != "local") {
        if (cfg.rule.kind == RuleKind::Scc) {
          cfg.rule.tau = parse_double(arg, "clipping radius");
        } else {
          cfg.rule.count = parse_int(arg, "rule parameter");
        }
      }
      break;
    }
    case SweepAxis::Attack:
      cfg.attack.kind = parse_attack_kind(head);
      if (!arg.empty()) cfg.attack.r = parse_double(arg, "ALIE scale");
      break;
    case SweepAxis::HonestCount: {
      const int honest = parse_int(value, "honest count");
      if (honest < 1) throw Error(ErrorCode::InvalidArgument, "honest count must be >= 1");
      cfg.topology.agents = honest + cfg.topology.byzantine;
      cfg.topology.byzantine_ids.clear();
      break;
    }
    case SweepAxis::Z:
      cfg.data.synth.Z = parse_int(value, "Z");
      break;
    case SweepAxis::Seed:
      cfg.seed = static_cast<std::uint64_t>(std::stoull(value));
      break;
  }
  return cfg;
}

std::vector<SweepEntry> sweep(const ExperimentConfig& base, SweepAxis axis,
                              std::span<const std::string> values,
                              const std::optional<PairSpec>& pair, unsigned workers) {
  std::vector<SweepEntry> out(values.size());
  if (values.empty()) return out;

  auto run_one = [&](std::size_t i) {
    SweepEntry& e = out[i];
    e.value = values[i];
    try {
      ExperimentConfig cfg = apply_axis(base, axis, values[i]);
      if (axis != SweepAxis::Seed) cfg.seed = base.seed + i;
      e.seed = cfg.seed;
      const RunConfig run_cfg = resolve(cfg);
      if (pair) {
        Perturbation p{pair->agent, pair->index, replacement_sample(cfg, run_cfg, pair->replacement)};
        auto result = run_pair(run_cfg, p);
        e.trace = std::move(result.base);
        e.stability = std::move(result.stability);
      } else {
        e.trace = run(run_cfg);
      }
      e.ok = true;
    } catch (const std::exception& ex) {
      e.ok = false;
      e.error = ex.what();
    }
  };

  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(values.size()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < values.size(); ++i) run_one(i);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < values.size(); i = next++) run_one(i);
    });
  }
  for (auto& th : pool) th.join();
  return out;
}

}  // namespace brdsgd
