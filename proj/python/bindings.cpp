// Python module: thin wrappers over the C++ core. Vectors and matrices cross
// as numpy arrays; traces come back as dicts of columns.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "brdsgd/analysis.hpp"
#include "brdsgd/attacks.hpp"
#include "brdsgd/cli.hpp"
#include "brdsgd/config.hpp"
#include "brdsgd/error.hpp"
#include "brdsgd/experiment.hpp"
#include "brdsgd/topology.hpp"

namespace py = pybind11;
using namespace brdsgd;

namespace {

RuleSpec make_rule(const std::string& name, std::optional<int> count, std::optional<double> tau) {
  switch (parse_rule_kind(name)) {
    case RuleKind::WeightedMean: return RuleSpec::weighted_mean();
    case RuleKind::TrimmedMean: return RuleSpec::trimmed_mean(count.value_or(RuleSpec::kLocal));
    case RuleKind::Ios: return RuleSpec::ios(count.value_or(RuleSpec::kLocal));
    case RuleKind::Scc: return RuleSpec::scc(tau.value_or(1.0));
  }
  return {};
}

InboundSet inbound(const ParamVector& own, const std::vector<ParamVector>& msgs,
                   const std::optional<std::vector<double>>& weights) {
  std::vector<Message> m;
  for (std::size_t i = 0; i < msgs.size(); ++i) m.push_back({static_cast<int>(i) + 1, msgs[i]});
  InboundSet in = InboundSet::uniform(0, own, std::move(m));
  if (weights) in.weights = *weights;
  return in;
}

py::dict trace_dict(const RunTrace& t, const StabilityTrace* s = nullptr) {
  std::vector<std::int64_t> k;
  std::vector<double> train, test, acc, h, delta, eta;
  for (const auto& r : t.rows) {
    k.push_back(r.k);
    train.push_back(r.train_loss);
    test.push_back(r.test_loss);
    acc.push_back(r.test_acc);
    h.push_back(r.H);
  }
  py::dict d;
  d["k"] = k;
  d["avg_loss_train"] = train;
  d["avg_loss_test"] = test;
  d["acc_test"] = acc;
  d["H"] = h;
  if (s) {
    for (const auto& r : s->rows) {
      delta.push_back(r.delta);
      eta.push_back(r.eta);
    }
    d["delta"] = delta;
    d["eta"] = eta;
  }
  return d;
}

BoundInputs bound_inputs(const py::kwargs& kw) {
  BoundInputs in;
  for (auto [key, value] : kw) {
    const auto name = key.cast<std::string>();
    if (name == "rho") in.rho = value.cast<double>();
    else if (name == "chi") in.chi = value.cast<double>();
    else if (name == "beta") in.beta = value.cast<double>();
    else if (name == "R") in.honest_count = value.cast<int>();
    else if (name == "B") in.byz_count = value.cast<int>();
    else if (name == "M") in.M = value.cast<double>();
    else if (name == "L") in.L = value.cast<double>();
    else if (name == "mu") in.mu = value.cast<double>();
    else if (name == "Z") in.Z = value.cast<double>();
    else if (name == "k0") in.k0 = value.cast<double>();
    else if (name == "a") in.a = value.cast<double>();
    else if (name == "c1") in.c1 = value.cast<double>();
    else if (name == "c2") in.c2 = value.cast<double>();
    else throw py::type_error("unknown bound input '" + name + "'");
  }
  return in;
}

ExperimentConfig experiment(const std::string& toml_text) { return parse_experiment(toml_text); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Byzantine-resilient decentralized SGD simulator";
  m.attr("__version__") = BRDSGD_VERSION;

  static py::exception<Error> error(m, "Error", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      PyErr_SetString(error.ptr(), e.what());
    }
  });

  // topology
  py::class_<Graph>(m, "Graph")
      .def(py::init<int>(), py::arg("n"))
      .def("add_edge", &Graph::add_edge)
      .def("has_edge", &Graph::has_edge)
      .def("neighbors", &Graph::neighbors)
      .def("edges", &Graph::edges)
      .def_property_readonly("size", &Graph::size)
      .def("__len__", &Graph::size)
      .def("__eq__", [](const Graph& a, const Graph& b) { return a == b; });
  m.def("complete_graph", &complete_graph, py::arg("n"));
  m.def("path_graph", &path_graph, py::arg("n"));
  m.def("erdos_renyi", &gen_erdos_renyi, py::arg("n"), py::arg("p"), py::arg("seed"));
  m.def("honest_connected", [](const Graph& g, const std::vector<int>& byz) {
    return honest_subgraph_connected(g, RoleAssignment::with_byzantine(g.size(), byz));
  }, py::arg("graph"), py::arg("byzantine") = std::vector<int>{});
  m.def("metropolis_weights", [](const Graph& g, const std::vector<int>& byz) {
    return build_metropolis_weights(g, RoleAssignment::with_byzantine(g.size(), byz)).weights;
  }, py::arg("graph"), py::arg("byzantine") = std::vector<int>{});
  m.def("spectral_beta", &spectral_beta, py::arg("w"));
  m.def("skewness_chi", &skewness_chi, py::arg("w"));
  m.def("rho_star", [](const Eigen::MatrixXd& w) {
    return spectral_beta(w) / (8.0 * std::sqrt(static_cast<double>(w.rows())));
  }, py::arg("w"));
  m.def("estimate_contraction",
        [](const std::string& rule, std::optional<int> count, std::optional<double> tau, const Graph& g,
           const std::vector<int>& byz, int trials, std::uint64_t seed, int dim, bool uniform) {
          const auto roles = RoleAssignment::with_byzantine(g.size(), byz);
          const auto w = uniform ? uniform_mixing(roles) : build_metropolis_weights(g, roles);
          const auto est = estimate_contraction(make_rule(rule, count, tau), g, roles, w, trials, seed, dim);
          return py::make_tuple(est.rho_hat, est.valid_trials);
        },
        py::arg("rule"), py::arg("count") = py::none(), py::arg("tau") = py::none(), py::arg("graph"),
        py::arg("byzantine"), py::arg("trials") = 10000, py::arg("seed") = 1, py::arg("dim") = 3,
        py::arg("uniform") = false);

  // aggregation
  m.def("aggregate",
        [](const std::string& rule, const ParamVector& own, const std::vector<ParamVector>& msgs,
           std::optional<int> count, std::optional<double> tau, std::optional<std::vector<double>> weights) {
          auto spec = make_rule(rule, count, tau);
          if (spec.local()) spec.count = 0;
          return aggregate(spec, inbound(own, msgs, weights));
        },
        py::arg("rule"), py::arg("own"), py::arg("messages"), py::arg("count") = py::none(),
        py::arg("tau") = py::none(), py::arg("weights") = py::none());

  // attacks
  m.def("craft_attack",
        [](const std::string& kind, const std::vector<ParamVector>& honest, int dim, double r,
           std::uint64_t stream, int victim) {
          std::vector<Message> msgs;
          for (std::size_t i = 0; i < honest.size(); ++i) msgs.push_back({static_cast<int>(i), honest[i]});
          AttackSpec spec;
          spec.kind = parse_attack_kind(kind);
          spec.r = r;
          AttackContext ctx;
          ctx.honest_msgs = msgs;
          ctx.dim = dim > 0 ? dim : (honest.empty() ? 0 : static_cast<int>(honest[0].size()));
          ctx.stream = stream;
          return craft_message(spec, ctx, victim);
        },
        py::arg("kind"), py::arg("honest"), py::arg("dim") = 0, py::arg("r") = 1.0, py::arg("stream") = 0,
        py::arg("victim") = 0);

  // learner
  m.def("loss_and_grad",
        [](const std::string& kind, const ParamVector& x, const Eigen::VectorXd& features, int label,
           int classes, int hidden, double lam) {
          LossSpec spec{parse_loss_kind(kind), static_cast<int>(features.size()), classes, hidden, lam};
          const auto lg = loss_and_grad(spec, x, {features, label});
          return py::make_tuple(lg.loss, lg.grad);
        },
        py::arg("kind"), py::arg("x"), py::arg("features"), py::arg("label"), py::arg("classes") = 2,
        py::arg("hidden") = 16, py::arg("lam") = 0.0);
  m.def("param_count", [](const std::string& kind, int features, int classes, int hidden) {
    return LossSpec{parse_loss_kind(kind), features, classes, hidden, 0.0}.param_count();
  }, py::arg("kind"), py::arg("features"), py::arg("classes") = 2, py::arg("hidden") = 16);
  m.def("step_size",
        [](const std::string& kind, std::int64_t k, double k0, double a, double s, double mu, double L) {
          return step_size({parse_schedule_kind(kind), k0, a, s, mu, L}, k);
        },
        py::arg("kind"), py::arg("k"), py::arg("k0") = 1.0, py::arg("a") = 1.0, py::arg("s") = 1.0,
        py::arg("mu") = 1.0, py::arg("L") = 1.0);

  // engine
  m.def("canonical_config", [](const std::string& text) { return canonical_text(experiment(text)); },
        py::arg("toml"));
  m.def("run", [](const std::string& text) {
    const RunConfig rc = resolve(experiment(text));
    py::gil_scoped_release release;
    RunTrace t = run(rc);
    py::gil_scoped_acquire acquire;
    return trace_dict(t);
  }, py::arg("toml"));
  m.def("run_pair",
        [](const std::string& text, std::optional<int> agent, int index, std::uint64_t replacement) {
          const ExperimentConfig cfg = experiment(text);
          const RunConfig rc = resolve(cfg);
          const int a = agent.value_or(rc.roles.honest_ids().front());
          const Perturbation p{a, index, replacement_sample(cfg, rc, replacement)};
          PairResult r;
          {
            py::gil_scoped_release release;
            r = run_pair(rc, p);
          }
          py::dict d;
          d["base"] = trace_dict(r.base, &r.stability);
          d["perturbed"] = trace_dict(r.perturbed);
          return d;
        },
        py::arg("toml"), py::arg("agent") = py::none(), py::arg("index") = 0, py::arg("replacement") = 0);

  // analysis
  m.def("bound", [](const std::string& theorem, double k, const py::kwargs& kw) {
    return evaluate_bound(parse_bound_kind(theorem), bound_inputs(kw), k);
  }, py::arg("theorem"), py::arg("k"));
  m.def("consensus_bound", &consensus_bound, py::arg("c"), py::arg("M"), py::arg("k"), py::arg("k0"));

  // cli
  m.def("main", [](const std::vector<std::string>& args) {
    std::vector<std::string> full{"brdsgd"};
    full.insert(full.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& a : full) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::main(static_cast<int>(argv.size()), argv.data(), out, err);
    return py::make_tuple(code, out.str(), err.str());
  }, py::arg("args"));
}
