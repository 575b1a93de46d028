#include "brdsgd/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <toml.hpp>

#include "brdsgd/error.hpp"

namespace brdsgd {
namespace {

// Typed access to one TOML table that remembers which keys were consumed,
// so leftovers can be reported as typos.
class Section {
 public:
  Section(const toml::table* table, std::string name) : table_(table), name_(std::move(name)) {}

  template <typename T>
  void read(const char* key, T& out) {
    const toml::node* node = find(key);
    if (!node) return;
    if constexpr (std::is_same_v<T, double>) {
      if (auto v = node->value<double>()) {
        out = *v;
        return;
      }
    } else if constexpr (std::is_same_v<T, bool>) {
      if (auto v = node->as_boolean()) {
        out = v->get();
        return;
      }
    } else if constexpr (std::is_integral_v<T>) {
      if (auto v = node->as_integer()) {
        out = static_cast<T>(v->get());
        return;
      }
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (auto v = node->as_string()) {
        out = v->get();
        return;
      }
    }
    fail(key, "has the wrong type");
  }

  template <typename T>
  void read(const char* key, std::optional<T>& out) {
    if (!find(key)) return;
    T v{};
    read(key, v);
    out = v;
  }

  void read(const char* key, std::vector<int>& out) {
    const toml::node* node = find(key);
    if (!node) return;
    const auto* arr = node->as_array();
    if (!arr) fail(key, "must be an array of integers");
    out.clear();
    for (const auto& item : *arr) {
      const auto* v = item.as_integer();
      if (!v) fail(key, "must be an array of integers");
      out.push_back(static_cast<int>(v->get()));
    }
  }

  bool has(const char* key) const { return table_ && table_->contains(key); }
  bool is_string(const char* key) const {
    const toml::node* node = table_ ? table_->get(key) : nullptr;
    return node && node->is_string();
  }

  void finish() const {
    if (!table_) return;
    for (const auto& [key, value] : *table_) {
      if (!seen_.count(std::string(key.str()))) {
        throw Error(ErrorCode::ConfigError, "unknown key '" + qualified(std::string(key.str())) + "'");
      }
    }
  }

  void mark(const char* key) { seen_.insert(key); }

 private:
  const toml::node* find(const char* key) {
    seen_.insert(key);
    if (!table_) return nullptr;
    return table_->get(key);
  }

  [[noreturn]] void fail(const char* key, const char* why) const {
    throw Error(ErrorCode::ConfigError, "key '" + qualified(key) + "' " + why);
  }

  std::string qualified(const std::string& key) const { return name_.empty() ? key : name_ + "." + key; }

  const toml::table* table_;
  std::string name_;
  std::set<std::string> seen_;
};

const toml::table* subtable(const toml::table& root, const char* name) {
  const toml::node* node = root.get(name);
  if (!node) return nullptr;
  const auto* t = node->as_table();
  if (!t) throw Error(ErrorCode::ConfigError, std::string("'") + name + "' must be a table");
  return t;
}

std::string resolve_path(const std::string& p, const std::filesystem::path& base) {
  if (p.empty() || base.empty()) return p;
  const std::filesystem::path path(p);
  return path.is_absolute() ? p : (base / path).string();
}

std::string num(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  std::string s(buf);
  if (s.find_first_of(".en") == std::string::npos) s += ".0";
  return s;
}

std::string quoted(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

}  // namespace

ExperimentConfig parse_experiment(std::string_view toml_text, const std::filesystem::path& base_dir) {
  toml::table root;
  try {
    root = toml::parse(toml_text);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << e.description() << " at line " << e.source().begin.line;
    throw Error(ErrorCode::ConfigError, msg.str());
  }

  ExperimentConfig cfg;
  Section top(&root, "");
  top.read("seed", cfg.seed);
  top.read("steps", cfg.steps);
  top.read("record_every", cfg.record_every);
  top.read("batch_size", cfg.batch_size);
  for (const char* name : {"topology", "aggregation", "attack", "loss", "schedule", "data", "init"}) {
    top.mark(name);
  }
  top.finish();

  Section topo(subtable(root, "topology"), "topology");
  topo.read("kind", cfg.topology.kind);
  topo.read("agents", cfg.topology.agents);
  topo.read("p", cfg.topology.p);
  topo.read("byzantine", cfg.topology.byzantine);
  topo.read("seed", cfg.topology.seed);
  topo.read("byzantine_ids", cfg.topology.byzantine_ids);
  topo.read("file", cfg.topology.file);
  cfg.topology.file = resolve_path(cfg.topology.file, base_dir);
  if (!cfg.topology.byzantine_ids.empty()) {
    cfg.topology.byzantine = static_cast<int>(cfg.topology.byzantine_ids.size());
  }
  topo.finish();

  Section agg(subtable(root, "aggregation"), "aggregation");
  std::string rule = "ios";
  agg.read("rule", rule);
  cfg.rule.kind = parse_rule_kind(rule);
  cfg.rule.count = RuleSpec::kLocal;
  cfg.rule.tau = 1.0;
  // b/q: an integer, or "local" for the agent's own Byzantine neighbor count.
  auto read_count = [&](const char* key) {
    if (agg.is_string(key)) {
      std::string text;
      agg.read(key, text);
      if (text != "local") {
        throw Error(ErrorCode::ConfigError, std::string("key 'aggregation.") + key + "' must be an integer or \"local\"");
      }
      return;
    }
    if (!agg.has(key)) return;
    agg.read(key, cfg.rule.count);
    if (cfg.rule.count < 0) throw Error(ErrorCode::ConfigError, std::string("aggregation.") + key + " must be >= 0");
  };
  if (cfg.rule.kind == RuleKind::TrimmedMean) read_count("b");
  if (cfg.rule.kind == RuleKind::Ios) read_count("q");
  if (cfg.rule.kind == RuleKind::Scc) agg.read("tau", cfg.rule.tau);
  if (cfg.rule.kind == RuleKind::WeightedMean) cfg.rule.count = 0;
  if (cfg.rule.kind != RuleKind::Scc) cfg.rule.tau = std::numeric_limits<double>::infinity();
  agg.finish();

  Section atk(subtable(root, "attack"), "attack");
  std::string attack = "none";
  atk.read("kind", attack);
  cfg.attack.kind = parse_attack_kind(attack);
  atk.read("r", cfg.attack.r);
  atk.read("std", cfg.attack.gaussian_std);
  atk.read("victim", cfg.attack.victim);
  atk.read("include_target", cfg.attack.include_target);
  atk.finish();

  Section loss(subtable(root, "loss"), "loss");
  std::string loss_kind = "softmax";
  loss.read("kind", loss_kind);
  cfg.loss.kind = parse_loss_kind(loss_kind);
  loss.read("lambda", cfg.loss.lambda);
  loss.read("hidden", cfg.loss.hidden);
  loss.finish();

  Section sched(subtable(root, "schedule"), "schedule");
  std::string schedule = "paper_exp";
  sched.read("kind", schedule);
  cfg.schedule.kind = parse_schedule_kind(schedule);
  sched.read("k0", cfg.schedule.k0);
  sched.read("a", cfg.schedule.a);
  sched.read("s", cfg.schedule.s);
  sched.read("mu", cfg.mu);
  sched.read("L", cfg.L);
  sched.finish();

  Section data(subtable(root, "data"), "data");
  data.read("source", cfg.data.source);
  data.read("classes", cfg.data.synth.classes);
  data.read("dim", cfg.data.synth.dim);
  data.read("Z", cfg.data.synth.Z);
  data.read("test_count", cfg.data.synth.test_count);
  data.read("separation", cfg.data.synth.separation);
  data.read("noise", cfg.data.synth.noise);
  data.read("seed", cfg.data.seed);
  data.read("images", cfg.data.images);
  data.read("labels", cfg.data.labels);
  data.read("test_images", cfg.data.test_images);
  data.read("test_labels", cfg.data.test_labels);
  for (auto* p : {&cfg.data.images, &cfg.data.labels, &cfg.data.test_images, &cfg.data.test_labels}) {
    *p = resolve_path(*p, base_dir);
  }
  data.finish();

  Section init(subtable(root, "init"), "init");
  init.read("kind", cfg.init.kind);
  init.read("scale", cfg.init.scale);
  init.finish();
  return cfg;
}

ExperimentConfig load_experiment(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_experiment(buf.str(), path.parent_path());
}

static std::string count_text(const RuleSpec& rule) {
  return rule.local() ? std::string("\"local\"") : std::to_string(rule.count);
}

std::string canonical_text(const ExperimentConfig& cfg) {
  std::ostringstream o;
  o << "seed = " << cfg.seed << "\n";
  o << "steps = " << cfg.steps << "\n";
  o << "record_every = " << cfg.record_every << "\n";
  o << "batch_size = " << cfg.batch_size << "\n";

  const auto& t = cfg.topology;
  o << "\n[topology]\nkind = " << quoted(t.kind) << "\nagents = " << t.agents << "\np = " << num(t.p)
    << "\nbyzantine = " << t.byzantine << "\n";
  if (t.seed) o << "seed = " << *t.seed << "\n";
  if (!t.byzantine_ids.empty()) {
    o << "byzantine_ids = [";
    for (std::size_t i = 0; i < t.byzantine_ids.size(); ++i) o << (i ? ", " : "") << t.byzantine_ids[i];
    o << "]\n";
  }
  if (!t.file.empty()) o << "file = " << quoted(t.file) << "\n";

  o << "\n[aggregation]\nrule = " << quoted(to_string(cfg.rule.kind)) << "\n";
  switch (cfg.rule.kind) {
    case RuleKind::TrimmedMean: o << "b = " << count_text(cfg.rule) << "\n"; break;
    case RuleKind::Ios: o << "q = " << count_text(cfg.rule) << "\n"; break;
    case RuleKind::Scc: o << "tau = " << num(cfg.rule.tau) << "\n"; break;
    case RuleKind::WeightedMean: break;
  }

  const auto& a = cfg.attack;
  o << "\n[attack]\nkind = " << quoted(to_string(a.kind)) << "\nr = " << num(a.r)
    << "\nstd = " << num(a.gaussian_std) << "\ninclude_target = " << (a.include_target ? "true" : "false")
    << "\n";
  if (a.victim) o << "victim = " << *a.victim << "\n";

  o << "\n[loss]\nkind = " << quoted(to_string(cfg.loss.kind)) << "\nlambda = " << num(cfg.loss.lambda)
    << "\nhidden = " << cfg.loss.hidden << "\n";

  const auto& s = cfg.schedule;
  o << "\n[schedule]\nkind = " << quoted(to_string(s.kind)) << "\nk0 = " << num(s.k0)
    << "\na = " << num(s.a) << "\ns = " << num(s.s) << "\n";
  if (cfg.mu) o << "mu = " << num(*cfg.mu) << "\n";
  if (cfg.L) o << "L = " << num(*cfg.L) << "\n";

  const auto& d = cfg.data;
  o << "\n[data]\nsource = " << quoted(d.source) << "\nclasses = " << d.synth.classes
    << "\ndim = " << d.synth.dim << "\nZ = " << d.synth.Z << "\ntest_count = " << d.synth.test_count
    << "\nseparation = " << num(d.synth.separation) << "\nnoise = " << num(d.synth.noise) << "\n";
  if (d.seed) o << "seed = " << *d.seed << "\n";
  for (const auto& [key, value] : {std::pair<const char*, const std::string*>{"images", &d.images},
                                   {"labels", &d.labels},
                                   {"test_images", &d.test_images},
                                   {"test_labels", &d.test_labels}}) {
    if (!value->empty()) o << key << " = " << quoted(*value) << "\n";
  }

  o << "\n[init]\nkind = " << quoted(cfg.init.kind) << "\nscale = " << num(cfg.init.scale) << "\n";
  return o.str();
}

BoundFile parse_bound_inputs(std::string_view toml_text, BoundFile base) {
  toml::table root;
  try {
    root = toml::parse(toml_text);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << e.description() << " at line " << e.source().begin.line;
    throw Error(ErrorCode::ConfigError, msg.str());
  }
  Section s(&root, "");
  auto& in = base.inputs;
  s.read("rho", in.rho);
  s.read("chi", in.chi);
  s.read("beta", in.beta);
  s.read("M", in.M);
  s.read("L", in.L);
  s.read("mu", in.mu);
  s.read("Z", in.Z);
  s.read("R", in.honest_count);
  s.read("B", in.byz_count);
  s.read("k0", in.k0);
  s.read("a", in.a);
  s.read("c1", in.c1);
  s.read("c2", in.c2);
  s.read("c", base.c);
  s.finish();
  return base;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
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

}  // namespace brdsgd
