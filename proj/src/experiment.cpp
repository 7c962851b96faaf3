#include "idlegrad/experiment.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "idlegrad/data.hpp"
#include "idlegrad/rng.hpp"

namespace idlegrad {

using nlohmann::json;

namespace {

[[noreturn]] void fail_field(const std::string& path, const std::string& why) {
  throw std::invalid_argument(path + ": " + why);
}

// --- JSON <-> config -------------------------------------------------------

json graph_to_json(const GraphSpec& g) {
  json j{{"kind", g.kind}, {"n", g.n}};
  if (g.kind == "geometric") j["radius"] = g.radius;
  if (g.kind == "edge_list") j["edges"] = g.edges;
  return j;
}

json weights_to_json(const WeightSpec& w) {
  json j{{"rule", w.rule}, {"pd_fix", w.pd_fix}, {"kappa", w.kappa}};
  if (w.rule == "laplacian") j["c0"] = w.c0;
  return j;
}

json dataset_to_json(const DatasetSpec& d) {
  json j{{"kind", d.kind}};
  if (d.kind == "synthetic") {
    j["samples_per_node"] = d.samples_per_node;
    j["feature_dim"] = d.feature_dim;
    j["noise_sd"] = d.noise_sd;
  } else if (d.kind == "libsvm") {
    j["path"] = d.path;
    j["densify_dim"] = d.densify_dim;
  } else {
    j["lo"] = d.lo;
    j["hi"] = d.hi;
    j["dim"] = d.dim;
  }
  return j;
}

json cost_to_json(const CostSpec& c) {
  json j{{"kind", c.kind}};
  if (c.kind == "logistic") {
    j["regularizer"] = c.regularizer;
    j["lipschitz_rule"] = c.lipschitz_rule;
  }
  return j;
}

json constraint_to_json(const ConstraintSpec& c) {
  json j{{"kind", c.kind}};
  if (c.kind == "ball") {
    j["radius"] = c.radius;
  } else {
    j["lo"] = c.lo;
    j["hi"] = c.hi;
  }
  return j;
}

json step_to_json(const StepSpec& s) {
  json j{{"rule", s.rule}};
  if (s.rule == "inverse_l") j["factor"] = s.factor;
  if (s.rule == "absolute") j["value"] = s.value;
  if (s.rule == "grid") j["values"] = s.values;
  return j;
}

json schedule_to_json(const ScheduleSpec& s) {
  json j{{"kind", s.kind}};
  if (s.kind == "geometric" || s.kind == "half_geometric" ||
      s.kind == "capped_geometric") {
    j["delta_rule"] = s.delta_rule;
    if (s.delta_rule == "absolute") j["delta"] = s.delta;
    if (s.delta_rule == "from_theta") j["theta"] = s.theta;
  }
  if (s.kind == "capped_geometric") {
    j["floor"] = s.floor;
    j["cap"] = s.cap;
  }
  if (s.kind == "sublinear") {
    j["cu"] = s.cu;
    j["zeta"] = s.zeta;
  }
  return j;
}

json algorithm_to_json(const AlgorithmChoice& a) {
  json j{{"name", a.name.empty() ? a.kind : a.name}, {"kind", a.kind}};
  if (a.kind == "async") {
    json groups = json::array();
    for (const auto& [count, p] : a.async.grad_groups)
      groups.push_back(json{{"count", count}, {"p", p}});
    j["async"] = json{{"link_up", a.async.link_up},
                      {"grad_groups", std::move(groups)}};
  }
  return j;
}

json run_to_json(const RunSpec& r) {
  json j{{"budget", r.budget},
         {"eps_rule", r.eps_rule},
         {"stop_metric", r.stop_metric},
         {"replicas", r.replicas},
         {"seed", r.seed},
         {"trace_replicas", r.trace_replicas}};
  j["target_eps"] = r.target_eps ? json(*r.target_eps) : json(nullptr);
  return j;
}

template <typename T>
T field(const json& j, const std::string& path, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    fail_field(path + "." + key, e.what());
  }
}

GraphSpec graph_from_json(const json& j) {
  GraphSpec g;
  g.kind = field<std::string>(j, "graph", "kind", g.kind);
  g.n = field<int>(j, "graph", "n", g.n);
  g.radius = field<double>(j, "graph", "radius", g.radius);
  g.edges = field<std::string>(j, "graph", "edges", g.edges);
  return g;
}

WeightSpec weights_from_json(const json& j) {
  WeightSpec w;
  w.rule = field<std::string>(j, "weights", "rule", w.rule);
  w.pd_fix = field<std::string>(j, "weights", "pd_fix", w.pd_fix);
  w.kappa = field<double>(j, "weights", "kappa", w.kappa);
  w.c0 = field<double>(j, "weights", "c0", w.c0);
  return w;
}

DatasetSpec dataset_from_json(const json& j) {
  DatasetSpec d;
  d.kind = field<std::string>(j, "dataset", "kind", d.kind);
  d.samples_per_node = field<int>(j, "dataset", "samples_per_node",
                                  d.samples_per_node);
  d.feature_dim = field<int>(j, "dataset", "feature_dim", d.feature_dim);
  d.noise_sd = field<double>(j, "dataset", "noise_sd", d.noise_sd);
  d.path = field<std::string>(j, "dataset", "path", d.path);
  d.densify_dim = field<int>(j, "dataset", "densify_dim", d.densify_dim);
  d.lo = field<double>(j, "dataset", "lo", d.lo);
  d.hi = field<double>(j, "dataset", "hi", d.hi);
  d.dim = field<int>(j, "dataset", "dim", d.dim);
  return d;
}

CostSpec cost_from_json(const json& j) {
  CostSpec c;
  c.kind = field<std::string>(j, "cost", "kind", c.kind);
  c.regularizer = field<double>(j, "cost", "regularizer", c.regularizer);
  c.lipschitz_rule =
      field<std::string>(j, "cost", "lipschitz_rule", c.lipschitz_rule);
  return c;
}

ConstraintSpec constraint_from_json(const json& j) {
  ConstraintSpec c;
  c.kind = field<std::string>(j, "constraint", "kind", c.kind);
  c.radius = field<double>(j, "constraint", "radius", c.radius);
  c.lo = field<double>(j, "constraint", "lo", c.lo);
  c.hi = field<double>(j, "constraint", "hi", c.hi);
  return c;
}

StepSpec step_from_json(const json& j) {
  StepSpec s;
  s.rule = field<std::string>(j, "step", "rule", s.rule);
  s.factor = field<double>(j, "step", "factor", s.factor);
  s.value = field<double>(j, "step", "value", s.value);
  s.values = field<std::vector<double>>(j, "step", "values", s.values);
  return s;
}

ScheduleSpec schedule_from_json(const json& j) {
  ScheduleSpec s;
  s.kind = field<std::string>(j, "schedule", "kind", s.kind);
  s.delta_rule = field<std::string>(j, "schedule", "delta_rule", s.delta_rule);
  s.delta = field<double>(j, "schedule", "delta", s.delta);
  s.theta = field<double>(j, "schedule", "theta", s.theta);
  s.floor = field<double>(j, "schedule", "floor", s.floor);
  s.cap = field<double>(j, "schedule", "cap", s.cap);
  s.cu = field<double>(j, "schedule", "cu", s.cu);
  s.zeta = field<double>(j, "schedule", "zeta", s.zeta);
  return s;
}

AlgorithmChoice algorithm_from_json(const json& j, size_t index) {
  const std::string path = "algorithms[" + std::to_string(index) + "]";
  AlgorithmChoice a;
  if (j.is_string()) {
    a.kind = j.get<std::string>();
    a.name = a.kind;
    return a;
  }
  a.kind = field<std::string>(j, path, "kind", a.kind);
  a.name = field<std::string>(j, path, "name", a.kind);
  if (j.contains("async")) {
    const json& aj = j.at("async");
    a.async.link_up = field<double>(aj, path + ".async", "link_up",
                                    a.async.link_up);
    if (aj.contains("grad_groups")) {
      for (const json& gj : aj.at("grad_groups"))
        a.async.grad_groups.emplace_back(
            field<int>(gj, path + ".async.grad_groups", "count", 0),
            field<double>(gj, path + ".async.grad_groups", "p", 1.0));
    }
  }
  return a;
}

RunSpec run_from_json(const json& j) {
  RunSpec r;
  r.budget = field<long>(j, "run", "budget", r.budget);
  if (j.contains("target_eps") && !j.at("target_eps").is_null())
    r.target_eps = field<double>(j, "run", "target_eps", 0.0);
  r.eps_rule = field<std::string>(j, "run", "eps_rule", r.eps_rule);
  r.stop_metric = field<std::string>(j, "run", "stop_metric", r.stop_metric);
  r.replicas = field<int>(j, "run", "replicas", r.replicas);
  r.seed = field<std::uint64_t>(j, "run", "seed", r.seed);
  r.trace_replicas =
      field<std::string>(j, "run", "trace_replicas", r.trace_replicas);
  return r;
}

// --- enum parsing ----------------------------------------------------------

Algorithm parse_algorithm(const std::string& kind) {
  if (kind == "standard") return Algorithm::standard;
  if (kind == "idling") return Algorithm::idling;
  if (kind == "async") return Algorithm::async;
  if (kind == "gossip") return Algorithm::gossip;
  fail_field("algorithms.kind", "unknown value '" + kind + "'");
}

InitKind parse_init(const std::string& init) {
  if (init == "zero") return InitKind::zero;
  if (init == "constant_one") return InitKind::constant_one;
  if (init == "shared_random") return InitKind::shared_random;
  if (init == "per_node_uniform") return InitKind::per_node_uniform;
  fail_field("init", "unknown value '" + init + "'");
}

StopMetric parse_stop_metric(const std::string& metric) {
  if (metric == "rel_err") return StopMetric::rel_err;
  if (metric == "dist_to_consensus_opt")
    return StopMetric::dist_to_consensus_opt;
  fail_field("run.stop_metric", "unknown value '" + metric + "'");
}

// --- file helpers ----------------------------------------------------------

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("missing dataset file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

double metric_of(const TraceRow& row, StopMetric m) {
  return m == StopMetric::rel_err ? row.rel_err : row.dist_to_consensus_opt;
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config is not valid JSON: ") +
                                e.what());
  }
  if (j.contains("preset")) {
    // A preset reference plus overrides for the common knobs.
    ExperimentConfig cfg = preset_config(j.at("preset").get<std::string>());
    if (j.contains("out_dir")) cfg.out_dir = j.at("out_dir").get<std::string>();
    if (j.contains("run")) {
      const json& r = j.at("run");
      cfg.run.budget = field<long>(r, "run", "budget", cfg.run.budget);
      cfg.run.replicas = field<int>(r, "run", "replicas", cfg.run.replicas);
      cfg.run.seed = field<std::uint64_t>(r, "run", "seed", cfg.run.seed);
      cfg.run.trace_replicas = field<std::string>(r, "run", "trace_replicas",
                                                  cfg.run.trace_replicas);
    }
    if (j.contains("dataset") && j.at("dataset").contains("path"))
      cfg.dataset.path = j.at("dataset").at("path").get<std::string>();
    // Everything structural is pinned by the preset.
    for (const char* key : {"graph", "weights", "cost", "constraint", "step",
                            "schedule", "algorithms", "init"})
      if (j.contains(key))
        fail_field(key, "cannot be overridden together with 'preset'");
    return cfg;
  }
  ExperimentConfig cfg;
  cfg.name = field<std::string>(j, "", "name", cfg.name);
  if (j.contains("graph")) cfg.graph = graph_from_json(j.at("graph"));
  if (j.contains("weights")) cfg.weights = weights_from_json(j.at("weights"));
  if (j.contains("dataset")) cfg.dataset = dataset_from_json(j.at("dataset"));
  if (j.contains("cost")) cfg.cost = cost_from_json(j.at("cost"));
  if (j.contains("constraint"))
    cfg.constraint = constraint_from_json(j.at("constraint"));
  if (j.contains("step")) cfg.step = step_from_json(j.at("step"));
  if (j.contains("schedule"))
    cfg.schedule = schedule_from_json(j.at("schedule"));
  if (j.contains("algorithms")) {
    size_t i = 0;
    for (const json& a : j.at("algorithms"))
      cfg.algorithms.push_back(algorithm_from_json(a, i++));
  }
  cfg.init = field<std::string>(j, "", "init", cfg.init);
  if (j.contains("run")) cfg.run = run_from_json(j.at("run"));
  cfg.out_dir = field<std::string>(j, "", "out_dir", cfg.out_dir);
  if (cfg.run.replicas < 1) fail_field("run.replicas", "must be >= 1");
  if (cfg.run.budget < 1) fail_field("run.budget", "must be >= 1");
  if (cfg.algorithms.empty()) fail_field("algorithms", "must be nonempty");
  return cfg;
}

std::string serialize_config(const ExperimentConfig& cfg) {
  json algorithms = json::array();
  for (const auto& a : cfg.algorithms) algorithms.push_back(algorithm_to_json(a));
  const json j{{"name", cfg.name},
               {"graph", graph_to_json(cfg.graph)},
               {"weights", weights_to_json(cfg.weights)},
               {"dataset", dataset_to_json(cfg.dataset)},
               {"cost", cost_to_json(cfg.cost)},
               {"constraint", constraint_to_json(cfg.constraint)},
               {"step", step_to_json(cfg.step)},
               {"schedule", schedule_to_json(cfg.schedule)},
               {"algorithms", algorithms},
               {"init", cfg.init},
               {"run", run_to_json(cfg.run)},
               {"out_dir", cfg.out_dir}};
  return j.dump(2) + "\n";
}

// --- presets ----------------------------------------------------------------

namespace {

ExperimentConfig synthetic_base() {
  ExperimentConfig cfg;
  // Radius 0.26 with seed 33 realizes a 50-node, 212-link connected
  // geometric graph; the resulting savings/iteration profile of the idling
  // schedule sits inside the documented acceptance bands.
  cfg.graph = {"geometric", 50, 0.26, ""};
  cfg.weights.rule = "metropolis";
  cfg.weights.pd_fix = "auto";
  cfg.dataset = {};  // synthetic, J=2, feature_dim=3, sd=0.1
  cfg.cost = {"logistic", 0.1, "global_average"};
  cfg.constraint.kind = "ball";
  cfg.constraint.radius = 100.0;
  cfg.step = {"inverse_l", 50.0, 0.0, {}};
  cfg.schedule.kind = "geometric";
  cfg.schedule.delta_rule = "from_alpha";
  cfg.algorithms = {{"standard", "standard", {}}, {"idling", "idling", {}}};
  cfg.init = "per_node_uniform";
  cfg.run.budget = 2000;
  cfg.run.target_eps = 0.01;
  cfg.run.stop_metric = "rel_err";
  cfg.run.replicas = 100;
  cfg.run.seed = 33;
  return cfg;
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"fig1", "fig2", "fig3ab", "fig3c", "fig3d", "table1", "remark2"};
}

ExperimentConfig preset_config(const std::string& name) {
  if (name == "fig1") {
    ExperimentConfig cfg = synthetic_base();
    cfg.name = name;
    return cfg;
  }
  if (name == "fig2") {
    ExperimentConfig cfg = synthetic_base();
    cfg.name = name;
    cfg.step.factor = 250.0;
    cfg.run.target_eps = 0.005;
    cfg.run.budget = 8000;
    return cfg;
  }
  if (name == "fig3ab") {
    ExperimentConfig cfg = synthetic_base();
    cfg.name = name;
    cfg.dataset.kind = "libsvm";
    cfg.dataset.path = "data/not_a1a.libsvm";
    cfg.dataset.densify_dim = 119;
    cfg.cost.lipschitz_rule = "per_node_max";
    cfg.schedule.kind = "capped_geometric";
    cfg.schedule.floor = 0.1;
    cfg.schedule.cap = 0.99999;
    cfg.init = "zero";
    cfg.run.target_eps.reset();
    cfg.run.budget = 2000;
    cfg.run.replicas = 1;
    return cfg;
  }
  if (name == "fig3c") {
    ExperimentConfig cfg = synthetic_base();
    cfg.name = name;
    AsyncSpec lo{0.5, {{25, 0.9}, {25, 0.5}}};
    AsyncSpec hi{0.5, {{25, 0.9}, {25, 0.1}}};
    cfg.algorithms = {{"idling", "idling", {}},
                      {"async_lo", "async", lo},
                      {"async_hi", "async", hi}};
    cfg.run.target_eps.reset();
    cfg.run.budget = 3000;
    return cfg;
  }
  if (name == "fig3d") {
    ExperimentConfig cfg = synthetic_base();
    cfg.name = name;
    cfg.algorithms = {{"idling", "idling", {}}, {"gossip", "gossip", {}}};
    cfg.run.target_eps.reset();
    cfg.run.budget = 6000;
    cfg.run.replicas = 20;
    return cfg;
  }
  if (name == "table1") {
    ExperimentConfig cfg;
    cfg.name = name;
    cfg.graph = {"star", 4, 0.0, ""};
    cfg.weights.rule = "laplacian";
    cfg.weights.c0 = 1.0 / 8.0;  // 1 / (2N)
    cfg.weights.pd_fix = "never";
    cfg.dataset.kind = "quadratic_uniform";
    cfg.dataset.lo = 0.0;
    cfg.dataset.hi = 5.0;
    cfg.dataset.dim = 1;
    cfg.cost.kind = "quadratic_identity";
    cfg.constraint.kind = "ball";
    cfg.constraint.radius = 1e12;  // effectively unconstrained
    cfg.step.rule = "grid";
    cfg.step.values = {std::pow(10.0, -1.5), 1e-2, std::pow(10.0, -2.5),
                       1e-3, std::pow(10.0, -3.5), 1e-4};
    cfg.schedule.kind = "half_geometric";
    cfg.schedule.delta_rule = "from_theta";
    cfg.schedule.theta = 8.0;  // 1 / (c0 lambda2(L)) for the 4-node star
    cfg.algorithms = {{"standard", "standard", {}}, {"idling", "idling", {}}};
    cfg.init = "zero";
    cfg.run.budget = 200000;
    cfg.run.eps_rule = "from_alpha";
    cfg.run.stop_metric = "dist_to_consensus_opt";
    cfg.run.replicas = 1;
    // At this seed the savings-vs-step-size decay is well inside its
    // documented band across the whole grid (single-path draws at the
    // largest step are only a handful of activations, so the realized
    // first-cell saving matters).
    cfg.run.seed = 5;
    return cfg;
  }
  if (name == "remark2") {
    // Scalar f_i(x) = x^2 / 2 on [-2, 2], all nodes started at 1: the
    // synchronous method contracts to 0 by exactly 1 - alpha per step.
    ExperimentConfig cfg;
    cfg.name = name;
    cfg.graph = {"path", 3, 0.0, ""};
    cfg.weights.rule = "metropolis";
    cfg.weights.pd_fix = "always";
    cfg.dataset.kind = "quadratic_uniform";
    cfg.dataset.lo = 0.0;
    cfg.dataset.hi = 0.0;  // every center at the origin
    cfg.dataset.dim = 1;
    cfg.cost.kind = "quadratic_identity";
    cfg.constraint = {"box", 0.0, -2.0, 2.0};
    cfg.step = {"absolute", 0.0, 0.1, {}};
    cfg.schedule.kind = "always_on";
    cfg.algorithms = {{"standard", "standard", {}}};
    cfg.init = "constant_one";
    cfg.run.budget = 50;
    cfg.run.target_eps.reset();
    cfg.run.stop_metric = "dist_to_consensus_opt";
    cfg.run.replicas = 1;
    return cfg;
  }
  throw std::invalid_argument("unknown preset '" + name + "'");
}

// --- instantiation -----------------------------------------------------------

namespace {

Network make_graph(const ExperimentConfig& cfg) {
  const GraphSpec& g = cfg.graph;
  if (g.kind == "geometric") {
    Rng rng(cfg.run.seed, 0, Stream::graph_gen);
    return random_geometric_graph(g.n, g.radius, rng);
  }
  if (g.kind == "path") return path_graph(g.n);
  if (g.kind == "complete") return complete_graph(g.n);
  if (g.kind == "star") return star_graph(g.n);
  if (g.kind == "edge_list") return parse_edge_list(g.edges);
  fail_field("graph.kind", "unknown value '" + g.kind + "'");
}

CostModel make_model(const ExperimentConfig& cfg, const Network& net,
                     std::string& marker) {
  const DatasetSpec& d = cfg.dataset;
  if (cfg.cost.kind == "quadratic_identity") {
    if (d.kind != "quadratic_uniform")
      fail_field("dataset.kind",
                 "quadratic_identity costs need quadratic_uniform centers");
    Rng rng(cfg.run.seed, 0, Stream::data_gen);
    QuadraticIdentityModel m;
    for (int i = 0; i < net.n; ++i) {
      Eigen::VectorXd b(d.dim);
      for (int t = 0; t < d.dim; ++t) b(t) = rng.uniform(d.lo, d.hi);
      m.centers.push_back(std::move(b));
    }
    marker = "quadratic-uniform";
    return m;
  }
  if (cfg.cost.kind != "logistic")
    fail_field("cost.kind", "unknown value '" + cfg.cost.kind + "'");
  if (d.kind == "synthetic") {
    Rng rng(cfg.run.seed, 0, Stream::data_gen);
    const SyntheticData data = gen_synthetic(net.n, d.samples_per_node,
                                             d.feature_dim, d.noise_sd, rng);
    marker = "synthetic";
    return to_logistic_model(data.shards, cfg.cost.regularizer);
  }
  if (d.kind == "libsvm") {
    const Dataset ds = parse_libsvm(read_file(d.path), d.densify_dim);
    marker = d.path.find("not_a1a") != std::string::npos ? "bundled-fixture"
                                                         : d.path;
    return to_logistic_model(partition(ds, net.n), cfg.cost.regularizer);
  }
  fail_field("dataset.kind", "unknown value '" + d.kind + "'");
}

ConstraintSet make_set(const ExperimentConfig& cfg, int dim) {
  const ConstraintSpec& c = cfg.constraint;
  if (c.kind == "ball") return BallSet{c.radius};
  if (c.kind == "box")
    return BoxSet{Eigen::VectorXd::Constant(dim, c.lo),
                  Eigen::VectorXd::Constant(dim, c.hi)};
  fail_field("constraint.kind", "unknown value '" + c.kind + "'");
}

LipschitzRule parse_lipschitz(const std::string& rule) {
  if (rule == "per_node_max") return LipschitzRule::per_node_max;
  if (rule == "global_average") return LipschitzRule::global_average;
  fail_field("cost.lipschitz_rule", "unknown value '" + rule + "'");
}

}  // namespace

double resolve_alpha(const ExperimentConfig& cfg, const ProblemInstance& prob,
                     size_t grid_index) {
  const StepSpec& s = cfg.step;
  if (s.rule == "inverse_l") {
    if (!(s.factor > 0.0)) fail_field("step.factor", "must be positive");
    return 1.0 / (s.factor * prob.L);
  }
  if (s.rule == "absolute") {
    if (!(s.value > 0.0)) fail_field("step.value", "must be positive");
    return s.value;
  }
  if (s.rule == "grid") {
    if (grid_index >= s.values.size())
      fail_field("step.values", "grid index out of range");
    return s.values[grid_index];
  }
  fail_field("step.rule", "unknown value '" + s.rule + "'");
}

ActivationSchedule resolve_schedule(const ExperimentConfig& cfg,
                                    const ProblemInstance& prob,
                                    double alpha) {
  const ScheduleSpec& s = cfg.schedule;
  if (s.kind == "always_on") return AlwaysOn{};
  if (s.kind == "sublinear") return Sublinear{s.cu, s.zeta};
  double delta = 0.0;
  if (s.delta_rule == "absolute") {
    delta = s.delta;
  } else if (s.delta_rule == "from_alpha") {
    delta = delta_from_alpha(alpha, prob.mu, s.cap);
  } else if (s.delta_rule == "from_theta") {
    if (!(s.theta > 0.0) || alpha * s.theta >= 1.0)
      fail_field("schedule.theta", "needs 0 < alpha*theta < 1");
    delta = 1.0 - alpha * s.theta;
  } else {
    fail_field("schedule.delta_rule", "unknown value '" + s.delta_rule + "'");
  }
  if (s.kind == "geometric") return Geometric{delta};
  if (s.kind == "half_geometric") return HalfGeometric{delta};
  if (s.kind == "capped_geometric")
    return CappedGeometric{delta, s.floor, s.cap};
  fail_field("schedule.kind", "unknown value '" + s.kind + "'");
}

BuiltProblem build_problem(const ExperimentConfig& cfg) {
  BuiltProblem built;
  built.net = make_graph(cfg);
  CostModel model = make_model(cfg, built.net, built.dataset_marker);
  ConstraintSet set = make_set(cfg, dimension(model));
  built.prob = derive_constants(std::move(model), std::move(set),
                                parse_lipschitz(cfg.cost.lipschitz_rule));

  if (cfg.weights.rule == "metropolis") {
    built.c = metropolis_weights(built.net);
  } else if (cfg.weights.rule == "laplacian") {
    built.c = laplacian_weights(built.net, cfg.weights.c0);
  } else {
    fail_field("weights.rule", "unknown value '" + cfg.weights.rule + "'");
  }
  built.spec = spectral_quantities(built.c, built.net);

  // The step-size admissibility condition is alpha * L <= lambda_min(C);
  // "auto" shifts the spectrum only when the largest configured step would
  // violate it (grids share one weight matrix, sized for their largest step).
  bool apply = false;
  if (cfg.weights.pd_fix == "always") {
    apply = true;
  } else if (cfg.weights.pd_fix == "auto") {
    double alpha_max = 0.0;
    const size_t points =
        cfg.step.rule == "grid" ? cfg.step.values.size() : 1;
    for (size_t i = 0; i < points; ++i)
      alpha_max = std::max(alpha_max, resolve_alpha(cfg, built.prob, i));
    apply = built.spec.lambdaN_C <= alpha_max * built.prob.L;
  } else if (cfg.weights.pd_fix != "never") {
    fail_field("weights.pd_fix", "unknown value '" + cfg.weights.pd_fix + "'");
  }
  if (apply) {
    built.c = ensure_positive_definite(built.c, cfg.weights.kappa);
    built.spec = spectral_quantities(built.c, built.net);
    built.pd_fix_applied = true;
  }
  validate_weight_matrix(built.c, built.net);
  return built;
}

// --- execution ---------------------------------------------------------------

namespace {

AsyncConfig make_async_config(const AsyncSpec& spec, const Network& net) {
  AsyncConfig cfg;
  cfg.link_up_prob.assign(net.edges.size(), spec.link_up);
  cfg.grad_success_prob.reserve(net.n);
  for (const auto& [count, p] : spec.grad_groups)
    cfg.grad_success_prob.insert(cfg.grad_success_prob.end(), count, p);
  if (static_cast<int>(cfg.grad_success_prob.size()) != net.n)
    fail_field("algorithms.async.grad_groups",
               "group counts must sum to the node count");
  return cfg;
}

json bounds_to_json(const Bounds& b) {
  return json{{"alpha", b.alpha},
              {"p_min", b.p_min},
              {"delta", b.delta},
              {"eta", b.eta},
              {"lambda2", b.lambda2},
              {"lambda_min", b.lambda_min},
              {"beta_sq", b.beta_sq},
              {"one_minus_beta", b.one_minus_beta},
              {"neighborhood_const", b.neighborhood_const},
              {"grad_error_const", b.grad_error_const},
              {"disagreement_sq_bound", b.disagreement_sq_bound},
              {"rate_constant", b.rate_constant},
              {"penalty_grad_sq", b.penalty_grad_sq},
              {"sum_sqrt_idle", b.sum_sqrt_idle}};
}

}  // namespace

ExperimentSummary run_experiment(const ExperimentConfig& cfg,
                                 std::ostream* log) {
  if (cfg.run.replicas < 1) fail_field("run.replicas", "must be >= 1");
  if (cfg.run.budget < 1) fail_field("run.budget", "must be >= 1");
  if (cfg.algorithms.empty()) fail_field("algorithms", "must be nonempty");
  if (cfg.step.rule == "grid")
    fail_field("step.rule", "grid configs run through run_grid");

  ExperimentSummary s;
  s.cfg = cfg;
  s.built = build_problem(cfg);
  const ProblemInstance& prob = s.built.prob;
  s.alpha = resolve_alpha(cfg, prob);
  const ActivationSchedule sched = resolve_schedule(cfg, prob, s.alpha);
  s.schedule_text = schedule_formula(sched);
  s.bounds = compute_bounds(prob, s.built.spec, sched, s.alpha);
  s.oracle = make_oracle_refs(prob, s.built.net, s.built.c, s.alpha);
  if (s.oracle.centralized_residual > 1e-6 || s.oracle.penalty_residual > 1e-6)
    throw std::runtime_error("oracle did not converge for this instance");

  if (cfg.run.eps_rule == "from_alpha") {
    // Limiting consensus accuracy of the mean trajectory:
    // eps = 2 alpha (N-1) Rsp / (c0 lambda2(L)).
    const auto* qm = std::get_if<QuadraticIdentityModel>(&prob.model);
    if (qm == nullptr || cfg.weights.rule != "laplacian")
      fail_field("run.eps_rule",
                 "from_alpha needs quadratic costs on laplacian weights");
    const Eigen::MatrixXd b = centers_matrix(*qm);
    const double r_spread = (b.rowwise() - b.colwise().mean().eval()).norm();
    s.eps = 2.0 * s.alpha * (prob.n_nodes - 1) * r_spread /
            (cfg.weights.c0 * s.built.spec.laplacian_eigs(1));
  } else if (cfg.run.eps_rule == "absolute") {
    s.eps = cfg.run.target_eps;
  } else {
    fail_field("run.eps_rule", "unknown value '" + cfg.run.eps_rule + "'");
  }
  s.cfg.run.target_eps = s.eps;

  const StopMetric stop = parse_stop_metric(cfg.run.stop_metric);
  const InitKind init = parse_init(cfg.init);

  const bool writing = !cfg.out_dir.empty();
  const std::filesystem::path dir(cfg.out_dir);
  if (writing) std::filesystem::create_directories(dir);

  for (const AlgorithmChoice& choice : cfg.algorithms) {
    AlgorithmSummary a;
    a.name = choice.name.empty() ? choice.kind : choice.name;
    a.kind = parse_algorithm(choice.kind);

    RunConfig rc;
    rc.algorithm = a.kind;
    rc.alpha = s.alpha;
    rc.budget = cfg.run.budget;
    rc.target_eps = s.eps;
    rc.stop_metric = stop;
    rc.init = init;
    rc.schedule = sched;
    if (a.kind == Algorithm::async)
      rc.async = make_async_config(choice.async, s.built.net);
    rc.master_seed = cfg.run.seed;
    // Replicas vary only the activation (and async/gossip) draws; the
    // starting iterate is the same across all of them so the empirical mean
    // estimates an expectation conditioned on the initial point.
    rc.init_replica = 0;

    std::vector<double> metric_sum;
    std::vector<double> cost_sum;
    size_t min_len = std::numeric_limits<size_t>::max();
    for (int r = 0; r < cfg.run.replicas; ++r) {
      rc.replica = static_cast<std::uint64_t>(r);
      const RunResult res =
          run(prob, s.built.net, s.built.c, rc, s.oracle.refs);

      a.replicas += 1;
      a.reached_count += res.reached_target ? 1 : 0;
      a.mean_iterations += static_cast<double>(res.iterations);
      a.mean_total_cost += static_cast<double>(res.total_cost);
      const double final_metric = metric_of(res.trace.back(), stop);
      a.per_replica_final.push_back(final_metric);
      a.mean_final_metric += final_metric;
      a.per_replica_cost.push_back(static_cast<double>(res.total_cost));

      min_len = std::min(min_len, res.trace.size());
      if (r == 0) {
        metric_sum.assign(min_len, 0.0);
        cost_sum.assign(min_len, 0.0);
      } else if (metric_sum.size() > min_len) {
        metric_sum.resize(min_len);  // aggregate rows = shortest trace
        cost_sum.resize(min_len);
      }
      for (size_t t = 0; t < min_len; ++t) {
        metric_sum[t] += metric_of(res.trace[t], stop);
        cost_sum[t] += static_cast<double>(res.trace[t].total_cost);
      }

      const bool trace_this = cfg.run.trace_replicas == "all" ||
                              (cfg.run.trace_replicas == "first" && r == 0);
      if (writing && trace_this) {
        std::ostringstream text;
        text << trace_csv_header() << '\n';
        for (const TraceRow& row : res.trace) text << trace_csv_row(row) << '\n';
        write_file(dir / ("trace_" + a.name + "_rep" + std::to_string(r) +
                          ".csv"),
                   text.str());
      }
    }

    const double n_rep = static_cast<double>(a.replicas);
    a.mean_iterations /= n_rep;
    a.mean_total_cost /= n_rep;
    a.mean_final_metric /= n_rep;
    a.mean_metric_curve = std::move(metric_sum);
    a.mean_cost_curve = std::move(cost_sum);
    for (double& v : a.mean_metric_curve) v /= n_rep;
    for (double& v : a.mean_cost_curve) v /= n_rep;
    const size_t len = a.mean_metric_curve.size();
    const size_t tail = std::min<size_t>(100, len);
    a.steady_state_metric = 0.0;
    for (size_t t = len - tail; t < len; ++t)
      a.steady_state_metric += a.mean_metric_curve[t];
    if (tail > 0) a.steady_state_metric /= static_cast<double>(tail);

    if (log)
      *log << a.name << ": reached " << a.reached_count << "/" << a.replicas
           << ", mean iterations " << a.mean_iterations << ", mean cost "
           << a.mean_total_cost << "\n";

    if (writing) {
      std::ostringstream agg;
      agg << "k,mean_metric,mean_total_cost\n";
      for (size_t t = 0; t < a.mean_metric_curve.size(); ++t) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", t,
                      a.mean_metric_curve[t], a.mean_cost_curve[t]);
        agg << buf;
      }
      write_file(dir / ("aggregate_" + a.name + ".csv"), agg.str());
      const std::vector<double>& hist_src =
          s.eps ? a.per_replica_cost : a.per_replica_final;
      write_file(dir / ("histogram_" + a.name + ".csv"),
                 histogram_csv(histogram(hist_src)));
    }
    s.algorithms.push_back(std::move(a));
  }

  const AlgorithmSummary* standard = nullptr;
  const AlgorithmSummary* idling = nullptr;
  for (const AlgorithmSummary& a : s.algorithms) {
    if (a.kind == Algorithm::standard && standard == nullptr) standard = &a;
    if (a.kind == Algorithm::idling && idling == nullptr) idling = &a;
  }
  if (standard && idling && standard->mean_total_cost > 0.0)
    s.savings_percent =
        100.0 * (1.0 - idling->mean_total_cost / standard->mean_total_cost);

  if (writing) {
    write_file(dir / "config.json", serialize_config(s.cfg));
    write_file(dir / "graph.txt", serialize_edge_list(s.built.net));
    write_file(dir / "report.json", report_json(s));
  }
  return s;
}

std::vector<ExperimentSummary> run_grid(const ExperimentConfig& cfg,
                                        std::ostream* log) {
  if (cfg.step.rule != "grid")
    fail_field("step.rule", "run_grid needs a grid of step sizes");
  if (cfg.step.values.empty()) fail_field("step.values", "must be nonempty");

  std::vector<ExperimentSummary> out;
  for (size_t i = 0; i < cfg.step.values.size(); ++i) {
    ExperimentConfig sub = cfg;
    sub.step.rule = "absolute";
    sub.step.value = cfg.step.values[i];
    sub.step.values.clear();
    sub.name = cfg.name + "_alpha" + std::to_string(i);
    if (!cfg.out_dir.empty())
      sub.out_dir = (std::filesystem::path(cfg.out_dir) /
                     ("alpha_" + std::to_string(i)))
                        .string();
    if (log) *log << "step size " << sub.step.value << ":\n";
    out.push_back(run_experiment(sub, log));
  }

  if (!cfg.out_dir.empty()) {
    std::filesystem::create_directories(cfg.out_dir);
    std::ostringstream table;
    table << std::setprecision(12);
    table << "alpha,epsilon";
    for (const AlgorithmSummary& a : out.front().algorithms)
      table << "," << a.name << "_iterations," << a.name << "_cost";
    table << "\n";
    for (const ExperimentSummary& s : out) {
      table << s.alpha << "," << (s.eps ? *s.eps : kNaN);
      for (const AlgorithmSummary& a : s.algorithms)
        table << "," << a.mean_iterations << "," << a.mean_total_cost;
      table << "\n";
    }
    write_file(std::filesystem::path(cfg.out_dir) / "table.csv", table.str());
  }
  return out;
}

std::string report_json(const ExperimentSummary& s) {
  json algorithms = json::array();
  for (const AlgorithmSummary& a : s.algorithms) {
    algorithms.push_back(json{{"name", a.name},
                              {"kind", algorithm_name(a.kind)},
                              {"replicas", a.replicas},
                              {"reached_target", a.reached_count},
                              {"mean_iterations", a.mean_iterations},
                              {"mean_total_cost", a.mean_total_cost},
                              {"mean_final_metric", a.mean_final_metric},
                              {"steady_state_metric", a.steady_state_metric}});
  }
  const json j{
      {"schema_version", 1},
      {"name", s.cfg.name},
      {"alpha", s.alpha},
      {"epsilon", s.eps ? json(*s.eps) : json(nullptr)},
      {"stop_metric", s.cfg.run.stop_metric},
      {"schedule", s.schedule_text},
      {"init", s.cfg.init},
      {"graph", json{{"nodes", s.built.net.n},
                     {"edges", s.built.net.edge_count()},
                     {"lambda2", s.built.spec.lambda2_C},
                     {"lambda_min", s.built.spec.lambdaN_C}}},
      {"pd_fix_applied", s.built.pd_fix_applied},
      {"dataset", s.built.dataset_marker},
      {"constants", json{{"mu", s.built.prob.mu},
                         {"L", s.built.prob.L},
                         {"G", s.built.prob.G},
                         {"D", s.built.prob.D},
                         {"M_f", s.built.prob.M_f}}},
      {"bounds", bounds_to_json(s.bounds)},
      {"oracle",
       json{{"f_star", s.oracle.refs.f_star},
            {"centralized_residual", s.oracle.centralized_residual},
            {"centralized_iterations", s.oracle.centralized_iterations},
            {"penalty_residual", s.oracle.penalty_residual},
            {"penalty_iterations", s.oracle.penalty_iterations}}},
      {"algorithms", algorithms},
      {"savings_percent",
       std::isnan(s.savings_percent) ? json(nullptr) : json(s.savings_percent)}};
  return j.dump(2) + "\n";
}

// --- histograms ---------------------------------------------------------------

std::vector<HistogramBin> histogram(const std::vector<double>& values,
                                    int bins) {
  if (values.empty()) throw std::invalid_argument("histogram of no values");
  if (bins < 1) throw std::invalid_argument("histogram needs at least one bin");
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it, hi = *hi_it;
  if (lo == hi) {
    HistogramBin bin{lo, hi, static_cast<long>(values.size())};
    return {bin};
  }
  std::vector<HistogramBin> out(static_cast<size_t>(bins));
  const double width = (hi - lo) / bins;
  for (int b = 0; b < bins; ++b) {
    out[b].lo = lo + b * width;
    out[b].hi = b + 1 == bins ? hi : lo + (b + 1) * width;
  }
  for (double v : values) {
    int b = static_cast<int>((v - lo) / width);
    b = std::clamp(b, 0, bins - 1);
    out[static_cast<size_t>(b)].count += 1;
  }
  return out;
}

std::string histogram_csv(const std::vector<HistogramBin>& bins) {
  std::ostringstream out;
  out << "bin_lo,bin_hi,count\n";
  for (const HistogramBin& b : bins) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%ld\n", b.lo, b.hi, b.count);
    out << buf;
  }
  return out.str();
}

// --- invariant sweep ------------------------------------------------------------

namespace {

bool check_line(std::ostream& out, const char* name, bool ok,
                const std::string& detail = "") {
  out << (ok ? "[PASS] " : "[FAIL] ") << name;
  if (!ok && !detail.empty()) out << ": " << detail;
  out << "\n";
  return ok;
}

}  // namespace

int run_check(std::ostream& out) {
  int failures = 0;
  const auto record = [&](const char* name, bool ok,
                          const std::string& detail = "") {
    if (!check_line(out, name, ok, detail)) ++failures;
  };

  try {
    Rng rng(99, 0, Stream::graph_gen);
    const Network net = random_geometric_graph(30, 0.35, rng);
    // Raw pairwise weights may have negative eigenvalues; the shift that
    // build_problem applies on demand restores positive definiteness.
    const Eigen::MatrixXd c =
        ensure_positive_definite(metropolis_weights(net), 0.1);
    validate_weight_matrix(c, net);
    const double row_gap =
        (c.rowwise().sum() - Eigen::VectorXd::Ones(net.n)).cwiseAbs().maxCoeff();
    record("geometric graph yields valid mixing weights", row_gap < 1e-12);
  } catch (const std::exception& e) {
    record("geometric graph yields valid mixing weights", false, e.what());
  }

  try {
    const Network k4 = complete_graph(4);
    const Eigen::MatrixXd c =
        ensure_positive_definite(metropolis_weights(k4), 0.1);
    const Spectrum spec = spectral_quantities(c, k4);
    record("complete-graph weights land on the designed spectrum",
           std::abs(spec.lambda2_C - 0.55) < 1e-9 &&
               std::abs(spec.lambdaN_C - 0.55) < 1e-9);
  } catch (const std::exception& e) {
    record("complete-graph weights land on the designed spectrum", false,
           e.what());
  }

  try {
    Rng rng(7, 1, Stream::scratch);
    bool ok = true;
    const ConstraintSet ball = BallSet{2.0};
    const ConstraintSet box = BoxSet{Eigen::VectorXd::Constant(3, -1.0),
                                     Eigen::VectorXd::Constant(3, 2.0)};
    for (int t = 0; t < 50 && ok; ++t) {
      Eigen::VectorXd y(3);
      for (int i = 0; i < 3; ++i) y(i) = rng.uniform(-10.0, 10.0);
      for (const ConstraintSet& set : {ball, box}) {
        const Eigen::VectorXd p = project(set, y);
        ok = ok && (project(set, p) - p).norm() <= 1e-12 * (1.0 + p.norm());
      }
    }
    record("projections are idempotent", ok);
  } catch (const std::exception& e) {
    record("projections are idempotent", false, e.what());
  }

  try {
    Rng rng(21, 0, Stream::scratch);
    LogisticModel m;
    m.regularizer = 0.1;
    Eigen::MatrixXd rows(2, 3);
    for (int i = 0; i < rows.size(); ++i)
      rows(i / 3, i % 3) = rng.uniform(-1.0, 1.0);
    m.samples.push_back(rows);
    const CostModel model = m;
    Eigen::VectorXd x(3);
    for (int i = 0; i < 3; ++i) x(i) = rng.uniform(-1.0, 1.0);
    const Eigen::VectorXd g = node_gradient(model, 0, x);
    bool ok = true;
    for (int i = 0; i < 3 && ok; ++i) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(3);
      e(i) = 1e-6;
      const double fd =
          (node_value(model, 0, x + e) - node_value(model, 0, x - e)) / 2e-6;
      ok = std::abs(fd - g(i)) <= 1e-5 * (1.0 + std::abs(g(i)));
    }
    record("logistic gradients match finite differences", ok);
  } catch (const std::exception& e) {
    record("logistic gradients match finite differences", false, e.what());
  }

  try {
    const ActivationSchedule sched = Geometric{0.9};
    bool ok = true;
    double prev = 0.0;
    for (long k = 0; k < 1000 && ok; ++k) {
      const double p = probability(sched, k);
      ok = p >= p_min(sched) - 1e-15 && p <= 1.0 && p >= prev;
      prev = p;
    }
    record("activation probabilities increase within [p_min, 1]", ok);
  } catch (const std::exception& e) {
    record("activation probabilities increase within [p_min, 1]", false,
           e.what());
  }

  try {
    const Network net = path_graph(3);
    const Eigen::MatrixXd c = metropolis_weights(net);
    std::vector<Eigen::VectorXd> centers{Eigen::VectorXd::Constant(1, 0.0),
                                         Eigen::VectorXd::Constant(1, 2.0),
                                         Eigen::VectorXd::Constant(1, 1.0)};
    const ProblemInstance prob =
        derive_constants(QuadraticIdentityModel{centers}, BallSet{10.0});
    RunState a, b;
    a.x = Eigen::MatrixXd::Constant(3, 1, 3.0);
    b.x = a.x;
    const ActivationVector all{{1, 1, 1}, 0};
    for (int k = 0; k < 10; ++k) {
      step_standard(a, prob, net, c, 0.2);
      step_idling(b, prob, net, c, 0.2, all, 1.0);
    }
    record("idling with every node active reproduces the synchronous method",
           (a.x - b.x).norm() == 0.0);
  } catch (const std::exception& e) {
    record("idling with every node active reproduces the synchronous method",
           false, e.what());
  }

  try {
    Rng rng(3, 0, Stream::scratch);
    const Network net = star_graph(4);
    const Eigen::MatrixXd c = laplacian_weights(net, 1.0 / 8.0);
    std::vector<Eigen::VectorXd> centers;
    for (int i = 0; i < 4; ++i)
      centers.push_back(Eigen::VectorXd::Constant(1, rng.uniform(0.0, 5.0)));
    const ProblemInstance prob =
        derive_constants(QuadraticIdentityModel{centers}, BallSet{1e12});
    const PenaltySolution sol =
        solve_penalty(prob, net, c, 0.01, Eigen::VectorXd::Zero(1));
    RunState s;
    s.x = sol.x;
    step_standard(s, prob, net, c, 0.01);
    record("quadratic fixed point solves the stationarity system",
           (s.x - sol.x).norm() <= 1e-10);
  } catch (const std::exception& e) {
    record("quadratic fixed point solves the stationarity system", false,
           e.what());
  }

  try {
    Rng rng(5, 0, Stream::scratch);
    const Network net = path_graph(5);
    const Eigen::MatrixXd c = metropolis_weights(net);
    bool ok = true;
    for (int t = 0; t < 20 && ok; ++t) {
      ActivationVector z;
      z.z.resize(5);
      for (auto& zi : z.z) zi = rng.bernoulli(0.6) ? 1 : 0;
      const Eigen::MatrixXd w = build_weight_realization(c, net, z);
      ok = (w - w.transpose()).norm() <= 1e-15 &&
           (w.rowwise().sum() - Eigen::VectorXd::Ones(5)).cwiseAbs()
                   .maxCoeff() <= 1e-12;
    }
    record("weight realizations stay symmetric and stochastic", ok);
  } catch (const std::exception& e) {
    record("weight realizations stay symmetric and stochastic", false,
           e.what());
  }

  return failures;
}

}  // namespace idlegrad
