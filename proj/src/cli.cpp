#include "brdsgd/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <Eigen/Core>

#include "brdsgd/analysis.hpp"
#include "brdsgd/config.hpp"
#include "brdsgd/error.hpp"
#include "brdsgd/experiment.hpp"

namespace brdsgd::cli {
namespace {

const char* const kTraceHeader = "k,avg_loss_train,avg_loss_test,acc_test,H,delta,eta";

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_trace_csv(std::ostream& out, const RunTrace& trace, const StabilityTrace* stab) {
  out << kTraceHeader << "\n";
  for (std::size_t i = 0; i < trace.rows.size(); ++i) {
    const auto& r = trace.rows[i];
    out << r.k << "," << fmt(r.train_loss) << "," << fmt(r.test_loss) << "," << fmt(r.test_acc) << ","
        << fmt(r.H) << ",";
    if (stab && i < stab->rows.size()) {
      out << fmt(stab->rows[i].delta) << "," << fmt(stab->rows[i].eta);
    } else {
      out << ",";
    }
    out << "\n";
  }
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  f << text;
  if (!f) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::stringstream buf;
  buf << f.rdbuf();
  return buf.str();
}

std::filesystem::path output_root(const Command& cmd) {
  if (!cmd.out_root.empty()) return cmd.out_root;
  if (const char* env = std::getenv("BRDSGD_OUT"); env && *env) return env;
  return "out";
}

std::string manifest(const std::string& command, const std::string& hash, std::uint64_t seed,
                     const std::vector<std::string>& extra) {
  std::ostringstream o;
  o << "command = \"" << command << "\"\n";
  o << "config_hash = \"" << hash << "\"\n";
  o << "seed = " << seed << "\n";
  o << "brdsgd_version = \"" << BRDSGD_VERSION << "\"\n";
  o << "eigen_version = \"" << EIGEN_WORLD_VERSION << "." << EIGEN_MAJOR_VERSION << "."
    << EIGEN_MINOR_VERSION << "\"\n";
#if defined(__clang__)
  o << "compiler = \"clang " << __clang_major__ << "." << __clang_minor__ << "\"\n";
#elif defined(__GNUC__)
  o << "compiler = \"gcc " << __GNUC__ << "." << __GNUC_MINOR__ << "." << __GNUC_PATCHLEVEL__ << "\"\n";
#endif
  for (const auto& line : extra) o << line << "\n";
  return o.str();
}

std::filesystem::path prepare_dir(const Command& cmd, const std::string& name) {
  const auto dir = output_root(cmd) / name;
  std::filesystem::create_directories(dir);
  return dir;
}

std::string sanitize(const std::string& s) {
  std::string out;
  for (char c : s) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-') ? c : '_';
  return out;
}

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

int do_run(const Command& cmd, std::ostream& out) {
  const ExperimentConfig cfg = load_experiment(cmd.config);
  const std::string canon = canonical_text(cfg);
  const std::string hash = hex64(fnv1a64(canon));
  const RunTrace trace = run(resolve(cfg));

  const auto dir = prepare_dir(cmd, hash + "-s" + std::to_string(cfg.seed));
  std::ostringstream csv;
  write_trace_csv(csv, trace, nullptr);
  write_file(dir / "trace.csv", csv.str());
  write_file(dir / "config.toml", canon);
  write_file(dir / "manifest", manifest("run", hash, cfg.seed, {"trace = \"trace.csv\""}));

  const auto& last = trace.rows.back();
  out << dir.string() << "\n";
  out << "k=" << last.k << " train=" << fmt(last.train_loss) << " test=" << fmt(last.test_loss)
      << " acc=" << fmt(last.test_acc) << " H=" << fmt(last.H) << "\n";
  return 0;
}

int do_pair(const Command& cmd, std::ostream& out) {
  const ExperimentConfig cfg = load_experiment(cmd.config);
  const RunConfig rc = resolve(cfg);
  const Perturbation p{*cmd.agent, *cmd.index, replacement_sample(cfg, rc, cmd.replacement)};
  const std::string canon = canonical_text(cfg);
  const std::string pair_line = "pair = { agent = " + std::to_string(p.agent) +
                                ", index = " + std::to_string(p.index) +
                                ", replacement = " + std::to_string(cmd.replacement) + " }";
  const std::string hash = hex64(fnv1a64(canon + pair_line));
  const PairResult result = run_pair(rc, p);

  const auto dir = prepare_dir(cmd, hash + "-s" + std::to_string(cfg.seed));
  std::ostringstream base;
  write_trace_csv(base, result.base, &result.stability);
  std::ostringstream perturbed;
  write_trace_csv(perturbed, result.perturbed, &result.stability);
  write_file(dir / "trace.csv", base.str());
  write_file(dir / "trace_perturbed.csv", perturbed.str());
  write_file(dir / "config.toml", canon);
  write_file(dir / "manifest", manifest("pair", hash, cfg.seed,
                                        {pair_line, "trace = \"trace.csv\"",
                                         "trace_perturbed = \"trace_perturbed.csv\""}));

  const auto& last = result.stability.rows.back();
  out << dir.string() << "\n";
  out << "k=" << last.k << " delta=" << fmt(last.delta) << " eta=" << fmt(last.eta) << "\n";
  return 0;
}

int do_sweep(const Command& cmd, std::ostream& out) {
  const ExperimentConfig cfg = load_experiment(cmd.config);
  const SweepAxis axis = parse_sweep_axis(cmd.axis);
  std::optional<PairSpec> pair;
  if (cmd.agent && cmd.index) pair = PairSpec{*cmd.agent, *cmd.index, cmd.replacement};

  std::string key = canonical_text(cfg) + "sweep = \"" + to_string(axis) + "\"\nvalues = [";
  for (const auto& v : cmd.values) key += "\"" + v + "\",";
  key += "]\n";
  if (pair) {
    key += "pair = { agent = " + std::to_string(pair->agent) + ", index = " + std::to_string(pair->index) +
           ", replacement = " + std::to_string(pair->replacement) + " }\n";
  }
  const std::string hash = hex64(fnv1a64(key));
  const auto entries = sweep(cfg, axis, cmd.values, pair, cmd.workers);

  const auto dir = prepare_dir(cmd, hash + "-sweep-" + to_string(axis));
  std::ostringstream summary;
  summary << "value,seed,status,k,avg_loss_train,avg_loss_test,acc_test,gap,H,delta,eta,error\n";
  std::vector<std::string> files;
  int failures = 0;
  for (const auto& e : entries) {
    summary << csv_quote(e.value) << "," << e.seed << ",";
    if (!e.ok) {
      ++failures;
      summary << "failed,,,,,,,,,," << csv_quote(e.error) << "\n";
      out << to_string(axis) << "=" << e.value << " failed: " << e.error << "\n";
      continue;
    }
    const std::string name = to_string(axis) + "_" + sanitize(e.value) + ".csv";
    std::ostringstream csv;
    write_trace_csv(csv, e.trace, pair ? &e.stability : nullptr);
    write_file(dir / name, csv.str());
    files.push_back(name);

    const auto& r = e.trace.rows.back();
    summary << "ok," << r.k << "," << fmt(r.train_loss) << "," << fmt(r.test_loss) << ","
            << fmt(r.test_acc) << "," << fmt(r.test_loss - r.train_loss) << "," << fmt(r.H) << ",";
    if (pair && !e.stability.rows.empty()) {
      summary << fmt(e.stability.rows.back().delta) << "," << fmt(e.stability.rows.back().eta);
    } else {
      summary << ",";
    }
    summary << ",\n";
    out << to_string(axis) << "=" << e.value << " -> " << (dir / name).string() << "\n";
  }
  write_file(dir / "summary.csv", summary.str());
  write_file(dir / "config.toml", canonical_text(cfg));
  std::vector<std::string> extra{"axis = \"" + to_string(axis) + "\"", "summary = \"summary.csv\""};
  for (const auto& f : files) extra.push_back("trace = \"" + f + "\"");
  write_file(dir / "manifest", manifest("sweep", hash, cfg.seed, extra));
  out << (dir / "summary.csv").string() << "\n";
  return !entries.empty() && failures == static_cast<int>(entries.size()) ? 1 : 0;
}

int do_bounds(const Command& cmd, std::ostream& out) {
  // Precedence: weights matrix, then the inputs file, then flags.
  BoundFile bf;
  if (!cmd.weights.empty()) {
    std::istringstream in(read_file(cmd.weights));
    const Eigen::MatrixXd w = read_matrix_csv(in);
    bf.inputs.beta = spectral_beta(w);
    bf.inputs.chi = skewness_chi(w);
    bf.inputs.honest_count = static_cast<int>(w.rows());
  }
  if (!cmd.inputs.empty()) bf = parse_bound_inputs(read_file(cmd.inputs), bf);
  auto& in = bf.inputs;
  for (const auto& [name, v] : cmd.overrides) {
    if (name == "rho") in.rho = v;
    else if (name == "chi") in.chi = v;
    else if (name == "beta") in.beta = v;
    else if (name == "M") in.M = v;
    else if (name == "L") in.L = v;
    else if (name == "mu") in.mu = v;
    else if (name == "Z") in.Z = v;
    else if (name == "R") in.honest_count = static_cast<int>(v);
    else if (name == "B") in.byz_count = static_cast<int>(v);
    else if (name == "k0") in.k0 = v;
    else if (name == "a") in.a = v;
    else if (name == "c1") in.c1 = v;
    else if (name == "c2") in.c2 = v;
    else if (name == "c") bf.c = v;
  }

  const std::int64_t k_end = cmd.k_max.value_or(cmd.k);
  std::ostringstream csv;
  if (cmd.theorem == "lemma3") {
    if (cmd.k_step < 1 || k_end < cmd.k) throw Error(ErrorCode::InvalidArgument, "bad k range");
    csv << "k,bound\n";
    for (std::int64_t k = cmd.k; k <= k_end; k += cmd.k_step) {
      csv << k << "," << fmt(consensus_bound(bf.c, in.M, static_cast<double>(k), in.k0)) << "\n";
    }
  } else {
    write_bound_csv(csv, parse_bound_kind(cmd.theorem), in, cmd.k, k_end, cmd.k_step);
  }
  if (cmd.output.empty()) {
    out << csv.str();
  } else {
    write_file(cmd.output, csv.str());
  }
  return 0;
}

RuleSpec parse_rule_arg(const std::string& text) {
  const auto colon = text.find(':');
  RuleSpec rule;
  rule.kind = parse_rule_kind(text.substr(0, colon));
  const std::string arg = colon == std::string::npos ? "" : text.substr(colon + 1);
  switch (rule.kind) {
    case RuleKind::WeightedMean: return RuleSpec::weighted_mean();
    case RuleKind::TrimmedMean: return RuleSpec::trimmed_mean(arg.empty() || arg == "local" ? RuleSpec::kLocal : std::stoi(arg));
    case RuleKind::Ios: return RuleSpec::ios(arg.empty() || arg == "local" ? RuleSpec::kLocal : std::stoi(arg));
    case RuleKind::Scc: return RuleSpec::scc(arg.empty() ? 1.0 : std::stod(arg));
  }
  return rule;
}

int do_check(const Command& cmd, std::ostream& out) {
  if (cmd.honest < 1 || cmd.byzantine < 0) throw Error(ErrorCode::InvalidArgument, "bad agent counts");
  const int n = cmd.honest + cmd.byzantine;
  const RuleSpec rule = parse_rule_arg(cmd.rule);
  Graph g;
  const bool complete = cmd.graph == "complete";
  if (complete) {
    g = complete_graph(n);
  } else if (cmd.graph == "erdos_renyi") {
    g = gen_erdos_renyi(n, cmd.p, cmd.seed);
  } else {
    throw Error(ErrorCode::InvalidArgument, "unknown graph '" + cmd.graph + "'");
  }
  const RoleAssignment roles = RoleAssignment::random(n, cmd.byzantine, cmd.seed);
  const bool analytic = complete && rule.kind == RuleKind::Ios;
  const MixingMatrix w = analytic ? uniform_mixing(roles) : build_metropolis_weights(g, roles);
  const SpectralSummary spec = summarize(w);
  const ContractionEstimate est = estimate_contraction(rule, g, roles, w, cmd.trials, cmd.seed, cmd.dim);

  out << "rule=" << rule.name() << " graph=" << cmd.graph << " honest=" << cmd.honest
      << " byzantine=" << cmd.byzantine << " trials=" << cmd.trials << " valid=" << est.valid_trials << "\n";
  out << "rho_hat=" << fmt(est.rho_hat) << "\n";
  if (analytic) {
    out << "rho_ref=" << fmt(static_cast<double>(cmd.byzantine) / cmd.honest)
        << " (IOS, fully connected: |B|/|R|)\n";
  }
  out << "beta=" << fmt(spec.beta) << " chi=" << fmt(spec.chi) << " rho_star=" << fmt(spec.rho_star) << "\n";
  out << (est.rho_hat < spec.rho_star ? "PASS" : "FAIL") << " rho_hat < rho_star\n";
  return 0;
}

}  // namespace

Command parse_args(int argc, const char* const* argv) {
  Command cmd;
  CLI::App app{"Byzantine-resilient decentralized SGD simulator", "brdsgd"};
  app.require_subcommand(1, 1);
  std::string out_root;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", cmd.config, "experiment TOML file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out_root, "output root (default $BRDSGD_OUT or ./out)");
  };

  auto* run = app.add_subcommand("run", "run one experiment and write its trace");
  add_common(run);

  auto* pair = app.add_subcommand("pair", "paired run on datasets differing in one sample");
  add_common(pair);
  pair->add_option("--agent", cmd.agent, "honest agent id owning the replaced sample")->required();
  pair->add_option("--index", cmd.index, "sample position in that agent's dataset")->required();
  pair->add_option("--replacement", cmd.replacement, "stream id of the replacement draw");

  auto* sw = app.add_subcommand("sweep", "independent runs over one axis");
  add_common(sw);
  sw->add_option("--axis", cmd.axis, "rule | attack | honest_count | Z | seed")
      ->required()
      ->check(CLI::IsMember({"rule", "attack", "honest_count", "Z", "z", "seed"}));
  sw->add_option("--values", cmd.values, "comma-separated axis values")->required()->delimiter(',');
  sw->add_option("--workers", cmd.workers, "worker threads (0 = hardware)");
  auto* sw_agent = sw->add_option("--agent", cmd.agent, "pair mode: perturbed agent");
  auto* sw_index = sw->add_option("--index", cmd.index, "pair mode: perturbed sample");
  sw_agent->needs(sw_index);
  sw_index->needs(sw_agent);
  sw->add_option("--replacement", cmd.replacement, "pair mode: replacement stream id");

  auto* bounds = app.add_subcommand("bounds", "evaluate a generalization or consensus bound");
  bounds->add_option("--theorem", cmd.theorem, "1 | 2 | 3 | 4 | lemma3")
      ->required()
      ->check(CLI::IsMember({"1", "2", "3", "4", "lemma3"}));
  bounds->add_option("--inputs", cmd.inputs, "TOML file with bound inputs")->check(CLI::ExistingFile);
  bounds->add_option("--weights", cmd.weights, "mixing matrix CSV (sets beta, chi)")->check(CLI::ExistingFile);
  const std::vector<std::string> names{"rho", "chi", "beta", "M", "L", "mu", "Z",
                                       "R", "B", "k0", "a", "c1", "c2", "c"};
  std::vector<double> values(names.size());
  std::vector<CLI::Option*> opts;
  for (std::size_t i = 0; i < names.size(); ++i) opts.push_back(bounds->add_option("--" + names[i], values[i]));
  bounds->add_option("--k", cmd.k, "first step (or the only one)")->check(CLI::NonNegativeNumber);
  bounds->add_option("--k-max", cmd.k_max, "last step");
  bounds->add_option("--k-step", cmd.k_step, "stride")->check(CLI::PositiveNumber);
  bounds->add_option("--output", cmd.output, "CSV path (default stdout)");

  auto* check = app.add_subcommand("check", "estimate the contraction constant of a rule");
  check->add_option("--rule", cmd.rule, "mean | tm[:b] | ios[:q] | scc[:tau]");
  check->add_option("--trials", cmd.trials)->check(CLI::PositiveNumber);
  check->add_option("--seed", cmd.seed);
  check->add_option("--honest", cmd.honest);
  check->add_option("--byzantine", cmd.byzantine);
  check->add_option("--graph", cmd.graph, "complete | erdos_renyi")
      ->check(CLI::IsMember({"complete", "erdos_renyi"}));
  check->add_option("--p", cmd.p);
  check->add_option("--dim", cmd.dim)->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o;
    std::ostringstream er;
    const int code = app.exit(e, o, er);
    throw UsageError(o.str() + er.str(), code == 0 ? 0 : 2);
  }

  if (run->parsed()) cmd.kind = CommandKind::Run;
  if (pair->parsed()) cmd.kind = CommandKind::Pair;
  if (sw->parsed()) cmd.kind = CommandKind::Sweep;
  if (bounds->parsed()) {
    cmd.kind = CommandKind::Bounds;
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (opts[i]->count() > 0) cmd.overrides.emplace_back(names[i], values[i]);
    }
  }
  if (check->parsed()) cmd.kind = CommandKind::Check;
  cmd.out_root = out_root;
  return cmd;
}

int execute(const Command& cmd, std::ostream& out, std::ostream& err) {
  try {
    switch (cmd.kind) {
      case CommandKind::Run: return do_run(cmd, out);
      case CommandKind::Pair: return do_pair(cmd, out);
      case CommandKind::Sweep: return do_sweep(cmd, out);
      case CommandKind::Bounds: return do_bounds(cmd, out);
      case CommandKind::Check: return do_check(cmd, out);
    }
  } catch (const std::exception& e) {
    err << "brdsgd: error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Command cmd;
  try {
    cmd = parse_args(argc, argv);
  } catch (const UsageError& e) {
    (e.exit_code() == 0 ? out : err) << e.what();
    return e.exit_code();
  }
  return execute(cmd, out, err);
}

}  // namespace brdsgd::cli
