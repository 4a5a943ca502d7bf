#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "numeraire/constraint_set.hpp"
#include "numeraire/discrete.hpp"
#include "numeraire/errors.hpp"
#include "numeraire/hash.hpp"
#include "numeraire/market.hpp"

namespace numeraire {

using Json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

// ---------------------------------------------------------------------------
// Strict reading helpers: every object is checked against its allowed keys.
// ---------------------------------------------------------------------------

namespace cfg {

inline std::string where(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

inline void allow(const Json& j, const std::string& path, std::initializer_list<const char*> keys) {
  if (!j.is_object()) throw ConfigError(path + ": expected an object");
  std::set<std::string> ok(keys.begin(), keys.end());
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!ok.count(it.key())) throw ConfigError("unknown key '" + where(path, it.key()) + "'");
  }
}

inline const Json& need(const Json& j, const std::string& path, const char* key) {
  if (!j.contains(key)) throw ConfigError("missing key '" + where(path, key) + "'");
  return j.at(key);
}

inline double number(const Json& j, const std::string& path) {
  if (j.is_null()) return kInf;
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return kInf;
    if (s == "-inf") return -kInf;
  }
  if (!j.is_number()) throw ConfigError(path + ": expected a number");
  return j.get<double>();
}

inline double number(const Json& j, const std::string& path, const char* key, double fallback) {
  return j.contains(key) ? number(j.at(key), where(path, key)) : fallback;
}

inline std::int64_t integer(const Json& j, const std::string& path) {
  if (!j.is_number_integer()) throw ConfigError(path + ": expected an integer");
  return j.get<std::int64_t>();
}

inline std::int64_t integer(const Json& j, const std::string& path, const char* key, std::int64_t fallback) {
  return j.contains(key) ? integer(j.at(key), where(path, key)) : fallback;
}

inline std::uint64_t unsigned_integer(const Json& j, const std::string& path) {
  if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<std::int64_t>() >= 0)) {
    throw ConfigError(path + ": expected a nonnegative integer");
  }
  return j.get<std::uint64_t>();
}

inline bool boolean(const Json& j, const std::string& path, const char* key, bool fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_boolean()) throw ConfigError(where(path, key) + ": expected true or false");
  return j.at(key).get<bool>();
}

inline std::string text(const Json& j, const std::string& path) {
  if (!j.is_string()) throw ConfigError(path + ": expected a string");
  return j.get<std::string>();
}

inline std::vector<double> numbers(const Json& j, const std::string& path) {
  if (!j.is_array()) throw ConfigError(path + ": expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

inline std::vector<int> integers(const Json& j, const std::string& path) {
  if (!j.is_array()) throw ConfigError(path + ": expected an array of integers");
  std::vector<int> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.push_back(static_cast<int>(integer(j[i], path + "[" + std::to_string(i) + "]")));
  }
  return out;
}

inline Vector vector(const Json& j, const std::string& path) {
  const auto xs = numbers(j, path);
  return Eigen::Map<const Vector>(xs.data(), static_cast<Eigen::Index>(xs.size()));
}

inline Matrix matrix(const Json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) throw ConfigError(path + ": expected a nonempty array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  Matrix m;
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Vector row = vector(j[static_cast<std::size_t>(r)], path + "[" + std::to_string(r) + "]");
    if (r == 0) m.resize(rows, row.size());
    if (row.size() != m.cols()) throw ConfigError(path + ": rows have different lengths");
    m.row(r) = row.transpose();
  }
  return m;
}

inline Json to_json(const Vector& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::isinf(v(i))) a.push_back(nullptr);
    else a.push_back(v(i));
  }
  return a;
}

inline Json to_json(const Matrix& m) {
  Json a = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) a.push_back(to_json(Vector(m.row(r).transpose())));
  return a;
}

}  // namespace cfg

// ---------------------------------------------------------------------------
// Constraint sets
//   {"type": "full"} | {"type": "ball", "radius": r}
//   {"type": "box", "lower": [..], "upper": [..]}   (null = unbounded)
//   {"type": "polytope", "halfspaces": [{"normal": [..], "offset": b}, ..]}
//   {"type": "orthant"} | {"type": "intersection", "sets": [..]}
// ---------------------------------------------------------------------------

inline ConstraintSet constraint_from_json(const Json& j, const std::string& path = "constraint") {
  if (!j.is_object()) throw ConfigError(path + ": expected an object");
  const std::string type = cfg::text(cfg::need(j, path, "type"), cfg::where(path, "type"));
  if (type == "full") {
    cfg::allow(j, path, {"type"});
    return ConstraintSet::full_space();
  }
  if (type == "ball") {
    cfg::allow(j, path, {"type", "radius"});
    return ConstraintSet::ball(cfg::number(cfg::need(j, path, "radius"), cfg::where(path, "radius")));
  }
  if (type == "box") {
    cfg::allow(j, path, {"type", "lower", "upper"});
    Vector lo = cfg::vector(cfg::need(j, path, "lower"), cfg::where(path, "lower"));
    const Json& lower = j.at("lower");
    for (std::size_t i = 0; i < lower.size(); ++i) {
      if (lower[i].is_null()) lo(static_cast<Eigen::Index>(i)) = -kInf;
    }
    return ConstraintSet::box(lo, cfg::vector(cfg::need(j, path, "upper"), cfg::where(path, "upper")));
  }
  if (type == "polytope") {
    cfg::allow(j, path, {"type", "halfspaces"});
    const Json& hs = cfg::need(j, path, "halfspaces");
    if (!hs.is_array()) throw ConfigError(path + ".halfspaces: expected an array");
    std::vector<Halfspace> out;
    for (std::size_t i = 0; i < hs.size(); ++i) {
      const std::string p = path + ".halfspaces[" + std::to_string(i) + "]";
      cfg::allow(hs[i], p, {"normal", "offset"});
      out.push_back({cfg::vector(cfg::need(hs[i], p, "normal"), p + ".normal"),
                     cfg::number(cfg::need(hs[i], p, "offset"), p + ".offset")});
    }
    return ConstraintSet::polytope(std::move(out));
  }
  if (type == "orthant") {
    cfg::allow(j, path, {"type"});
    return ConstraintSet::orthant();
  }
  if (type == "intersection") {
    cfg::allow(j, path, {"type", "sets"});
    const Json& sets = cfg::need(j, path, "sets");
    if (!sets.is_array() || sets.empty()) throw ConfigError(path + ".sets: expected a nonempty array");
    std::vector<ConstraintSet> out;
    for (std::size_t i = 0; i < sets.size(); ++i) {
      out.push_back(constraint_from_json(sets[i], path + ".sets[" + std::to_string(i) + "]"));
    }
    return ConstraintSet::intersection(std::move(out));
  }
  throw ConfigError(path + ".type: unknown constraint type '" + type + "'");
}

inline Json constraint_to_json(const ConstraintSet& k) {
  return std::visit(
      [](const auto& s) -> Json {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, FullSpace>) return {{"type", "full"}};
        if constexpr (std::is_same_v<T, Ball>) {
          return {{"type", "ball"}, {"radius", std::isinf(s.radius) ? Json(nullptr) : Json(s.radius)}};
        }
        if constexpr (std::is_same_v<T, Box>) {
          return {{"type", "box"}, {"lower", cfg::to_json(s.lower)}, {"upper", cfg::to_json(s.upper)}};
        }
        if constexpr (std::is_same_v<T, Polytope>) {
          Json hs = Json::array();
          for (const auto& h : s.halfspaces) hs.push_back({{"normal", cfg::to_json(h.normal)}, {"offset", h.offset}});
          return {{"type", "polytope"}, {"halfspaces", hs}};
        }
        if constexpr (std::is_same_v<T, NonnegativeOrthant>) return {{"type", "orthant"}};
        if constexpr (std::is_same_v<T, Intersection>) {
          Json sets = Json::array();
          for (const auto& k : s.sets) sets.push_back(constraint_to_json(k));
          return {{"type", "intersection"}, {"sets", sets}};
        }
      },
      k.variant());
}

// ---------------------------------------------------------------------------
// Market
// ---------------------------------------------------------------------------

inline MarketSpec market_from_json(const Json& j, const std::string& path = "market") {
  cfg::allow(j, path,
             {"dim", "horizon", "steps", "times", "covariance", "covariance_end", "base_drift", "initial_price",
              "signal", "tilt", "constraint", "constraints"});
  MarketSpec s;
  s.dim = cfg::integer(cfg::need(j, path, "dim"), path + ".dim");
  if (s.dim < 1) throw ConfigError(path + ".dim must be positive");
  if (j.contains("times")) {
    if (j.contains("horizon") || j.contains("steps")) throw ConfigError(path + ": give either times or horizon/steps");
    s.grid = TimeGrid(cfg::numbers(j.at("times"), path + ".times"));
  } else {
    s.grid = TimeGrid::uniform(cfg::number(j, path, "horizon", 1.0),
                               static_cast<int>(cfg::integer(j, path, "steps", 100)));
  }
  s.covariance = j.contains("covariance") ? cfg::matrix(j.at("covariance"), path + ".covariance")
                                          : Matrix(Matrix::Identity(s.dim, s.dim));
  if (j.contains("covariance_end")) s.covariance_end = cfg::matrix(j.at("covariance_end"), path + ".covariance_end");
  s.base_drift = j.contains("base_drift") ? cfg::vector(j.at("base_drift"), path + ".base_drift")
                                          : Vector(Vector::Zero(s.dim));
  if (j.contains("initial_price")) s.initial_price = cfg::vector(j.at("initial_price"), path + ".initial_price");
  s.signal.direction = Vector::Zero(s.dim);
  if (j.contains("signal")) {
    const Json& g = j.at("signal");
    const std::string p = path + ".signal";
    cfg::allow(g, p, {"kind", "direction", "prior_mean", "prior_sd", "limit_noise"});
    if (g.contains("kind")) s.signal.kind = cfg::text(g.at("kind"), p + ".kind");
    if (g.contains("direction")) s.signal.direction = cfg::vector(g.at("direction"), p + ".direction");
    s.signal.prior_mean = cfg::number(g, p, "prior_mean", 0.0);
    s.signal.prior_sd = cfg::number(g, p, "prior_sd", 1.0);
    s.signal.limit_noise = cfg::number(g, p, "limit_noise", 0.0);
  }
  s.tilt.lambda = Vector::Zero(s.dim);
  if (j.contains("tilt")) {
    const Json& t = j.at("tilt");
    const std::string p = path + ".tilt";
    cfg::allow(t, p, {"lambda", "orthogonal", "orthogonal_vol", "novikov_cap"});
    if (t.contains("lambda")) s.tilt.lambda = cfg::vector(t.at("lambda"), p + ".lambda");
    s.tilt.orthogonal = cfg::boolean(t, p, "orthogonal", false);
    s.tilt.orthogonal_vol = cfg::number(t, p, "orthogonal_vol", 0.0);
    s.tilt.novikov_cap = cfg::number(t, p, "novikov_cap", 25.0);
  }
  if (j.contains("constraint") && j.contains("constraints")) {
    throw ConfigError(path + ": give either constraint or constraints");
  }
  if (j.contains("constraint")) s.constraints = {constraint_from_json(j.at("constraint"), path + ".constraint")};
  if (j.contains("constraints")) {
    const Json& ks = j.at("constraints");
    if (!ks.is_array()) throw ConfigError(path + ".constraints: expected an array");
    s.constraints.clear();
    for (std::size_t i = 0; i < ks.size(); ++i) {
      s.constraints.push_back(constraint_from_json(ks[i], path + ".constraints[" + std::to_string(i) + "]"));
    }
  }
  return s;
}

inline Json market_to_json(const MarketSpec& s) {
  Json j;
  j["dim"] = s.dim;
  j["times"] = s.grid.times;
  j["covariance"] = cfg::to_json(s.covariance);
  if (s.covariance_end) j["covariance_end"] = cfg::to_json(*s.covariance_end);
  j["base_drift"] = cfg::to_json(s.base_drift);
  if (s.initial_price.size() > 0) j["initial_price"] = cfg::to_json(s.initial_price);
  j["signal"] = {{"kind", s.signal.kind},
                 {"direction", cfg::to_json(s.signal.direction)},
                 {"prior_mean", s.signal.prior_mean},
                 {"prior_sd", s.signal.prior_sd},
                 {"limit_noise", s.signal.limit_noise}};
  j["tilt"] = {{"lambda", cfg::to_json(s.tilt.lambda)},
               {"orthogonal", s.tilt.orthogonal},
               {"orthogonal_vol", s.tilt.orthogonal_vol},
               {"novikov_cap", s.tilt.novikov_cap}};
  Json ks = Json::array();
  for (const auto& k : s.constraints) ks.push_back(constraint_to_json(k));
  j["constraints"] = ks;
  return j;
}

/// Hash of everything that determines the simulated paths except the seed.
inline std::uint64_t market_hash(const MarketSpec& s) {
  Fnv1a h;
  h.text("market");
  h.text(market_to_json(s).dump());
  return h.value();
}

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

enum class ExperimentKind {
  Solve,
  Simulate,
  StabilityFiltration,
  StabilityProbability,
  StabilityConstraint,
  Sensitivity,
  Counterexample,
  TreeProjection,
  DensityCheck
};

inline const std::vector<std::pair<std::string, ExperimentKind>>& experiment_names() {
  static const std::vector<std::pair<std::string, ExperimentKind>> names = {
      {"solve", ExperimentKind::Solve},
      {"simulate", ExperimentKind::Simulate},
      {"stability-filtration", ExperimentKind::StabilityFiltration},
      {"stability-probability", ExperimentKind::StabilityProbability},
      {"stability-constraint", ExperimentKind::StabilityConstraint},
      {"sensitivity", ExperimentKind::Sensitivity},
      {"counterexample", ExperimentKind::Counterexample},
      {"tree-projection", ExperimentKind::TreeProjection},
      {"density-check", ExperimentKind::DensityCheck}};
  return names;
}

inline std::string to_string(ExperimentKind k) {
  for (const auto& [name, kind] : experiment_names())
    if (kind == k) return name;
  return "?";
}

inline ExperimentKind experiment_from_string(const std::string& s) {
  for (const auto& [name, kind] : experiment_names())
    if (name == s) return kind;
  throw ConfigError("unknown experiment '" + s + "'");
}

// Ladder values: explicit list or {"start", "ratio", "count"} geometric.
inline std::vector<double> ladder_from_json(const Json& j, const std::string& path) {
  if (j.is_array()) return cfg::numbers(j, path);
  cfg::allow(j, path, {"start", "ratio", "count"});
  const double start = cfg::number(cfg::need(j, path, "start"), path + ".start");
  const double ratio = cfg::number(cfg::need(j, path, "ratio"), path + ".ratio");
  const auto count = cfg::integer(cfg::need(j, path, "count"), path + ".count");
  if (count < 1) throw ConfigError(path + ".count must be positive");
  std::vector<double> out;
  double v = start;
  for (std::int64_t i = 0; i < count; ++i, v *= ratio) out.push_back(v);
  return out;
}

struct SolveSection {
  Matrix covariance;
  Vector drift;
  ConstraintSet constraint;
  bool require_nullspace_in_constraint = true;
};

struct LadderSection {
  std::vector<double> values;          // sigma_n or eps_n
  std::vector<double> paired_noise;    // optional filtration ladder paired with eps_n
  std::vector<ConstraintSet> sets;     // constraint family
  ConstraintSet limit_set;
  std::vector<double> clim_truncations = {1.0, 5.0};
  int hausdorff_net = 4096;
  double event_threshold = 0.0;
};

struct SensitivitySection {
  std::vector<double> eps = {0.2, 0.1, 0.05, 0.025};
  bool second_order = true;
};

struct CounterexampleSection {
  double p = 0.6;
  std::vector<int> n = {1, 2, 3, 4, 5, 6, 7, 8};
  QuadratureSpec quadrature;
  double conditional_mean = 0.0;
  double eps = 1.0;
  std::vector<double> ranges = {2.0, 4.0, 6.0, 8.0};
};

struct TreeSection {
  ScenarioTree tree;
  std::string process = "random_binary";  // random_binary | leaf_indicator | values
  std::uint64_t process_seed = 1;
  std::size_t leaf = 0;
  Matrix values;
  std::vector<int> lookahead;
};

struct DensitySection {
  std::string source = "exponential";  // exponential | tilt
  std::vector<double> ladder;          // volatilities, or eps for the tilt source
  double horizon = 1.0;
  int steps = 50;
};

// Thresholds: "final" caps the finest-index mean of a metric, "negative_slope"
// lists metrics whose log-log slope must be negative with 95% confidence,
// "order" bounds fitted orders, "tolerance" bounds exact identities.
struct Thresholds {
  std::map<std::string, double> final;
  std::vector<std::string> negative_slope;
  std::optional<std::pair<double, double>> order;
  std::optional<double> tolerance;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::Solve;
  std::uint64_t seed = 0;
  std::size_t paths = 1000;
  int threads = 1;
  std::string output_dir = "out";
  std::optional<std::string> path_cache;
  std::optional<MarketSpec> market;
  SolveSection solve;
  LadderSection ladder;
  SensitivitySection sensitivity;
  CounterexampleSection counterexample;
  TreeSection tree;
  DensitySection density;
  Thresholds thresholds;
  Json source;  // the document as read, for hashing

  /// Hash of the experiment-defining content; overrides applied on the CLI
  /// (seed, paths, threads, out) are folded in separately.
  std::uint64_t hash() const {
    Fnv1a h;
    Json j = source;
    j.erase("threads");
    j.erase("output_dir");
    h.text(j.dump());
    h.integer(seed);
    h.integer(paths);
    return h.value();
  }
};

namespace detail {

inline Thresholds thresholds_from_json(const Json& j) {
  const std::string p = "thresholds";
  cfg::allow(j, p, {"final", "negative_slope", "order", "tolerance"});
  Thresholds t;
  if (j.contains("final")) {
    const Json& f = j.at("final");
    if (!f.is_object()) throw ConfigError("thresholds.final: expected an object");
    for (auto it = f.begin(); it != f.end(); ++it) t.final[it.key()] = cfg::number(it.value(), "thresholds.final." + it.key());
  }
  if (j.contains("negative_slope")) {
    const Json& n = j.at("negative_slope");
    if (!n.is_array()) throw ConfigError("thresholds.negative_slope: expected an array");
    for (const auto& x : n) t.negative_slope.push_back(cfg::text(x, "thresholds.negative_slope"));
  }
  if (j.contains("order")) {
    const auto o = cfg::numbers(j.at("order"), "thresholds.order");
    if (o.size() != 2 || !(o[0] <= o[1])) throw ConfigError("thresholds.order: expected [low, high]");
    t.order = std::make_pair(o[0], o[1]);
  }
  if (j.contains("tolerance")) t.tolerance = cfg::number(j.at("tolerance"), "thresholds.tolerance");
  return t;
}

inline ScenarioTree tree_from_json(const Json& j, const std::string& p) {
  ScenarioTree t;
  t.depth = static_cast<int>(cfg::integer(cfg::need(j, p, "depth"), p + ".depth"));
  t.branching = static_cast<int>(cfg::integer(j, p, "branching", 2));
  if (j.contains("leaf_probability")) t.leaf_probability = cfg::numbers(j.at("leaf_probability"), p + ".leaf_probability");
  if (j.contains("clock")) t.clock = cfg::numbers(j.at("clock"), p + ".clock");
  t.validate();
  return t;
}

}  // namespace detail

inline ExperimentConfig config_from_json(const Json& j) {
  cfg::allow(j, "",
             {"schema_version", "experiment", "seed", "paths", "threads", "output_dir", "path_cache", "market",
              "solve", "ladder", "sensitivity", "counterexample", "tree", "density", "thresholds"});
  const auto version = cfg::integer(cfg::need(j, "", "schema_version"), "schema_version");
  if (version != kSchemaVersion) {
    throw ConfigError("unsupported schema_version " + std::to_string(version) + " (expected " +
                      std::to_string(kSchemaVersion) + ")");
  }
  ExperimentConfig c;
  c.source = j;
  c.kind = experiment_from_string(cfg::text(cfg::need(j, "", "experiment"), "experiment"));
  c.seed = cfg::unsigned_integer(cfg::need(j, "", "seed"), "seed");
  if (j.contains("paths")) {
    const auto n = cfg::integer(j.at("paths"), "paths");
    if (n < 1) throw ConfigError("paths must be positive");
    c.paths = static_cast<std::size_t>(n);
  }
  c.threads = static_cast<int>(cfg::integer(j, "", "threads", 1));
  if (c.threads < 1) throw ConfigError("threads must be positive");
  if (j.contains("output_dir")) c.output_dir = cfg::text(j.at("output_dir"), "output_dir");
  if (j.contains("path_cache")) c.path_cache = cfg::text(j.at("path_cache"), "path_cache");
  if (j.contains("market")) {
    c.market = market_from_json(j.at("market"));
    c.market->seed = c.seed;
  }

  if (j.contains("solve")) {
    const Json& s = j.at("solve");
    cfg::allow(s, "solve", {"covariance", "drift", "constraint", "require_nullspace_in_constraint"});
    c.solve.covariance = cfg::matrix(cfg::need(s, "solve", "covariance"), "solve.covariance");
    c.solve.drift = cfg::vector(cfg::need(s, "solve", "drift"), "solve.drift");
    if (s.contains("constraint")) c.solve.constraint = constraint_from_json(s.at("constraint"), "solve.constraint");
    c.solve.require_nullspace_in_constraint = cfg::boolean(s, "solve", "require_nullspace_in_constraint", true);
  }
  if (j.contains("ladder")) {
    const Json& l = j.at("ladder");
    const std::string p = "ladder";
    cfg::allow(l, p, {"values", "paired_noise", "sets", "limit_set", "clim_truncations", "hausdorff_net",
                      "event_threshold"});
    if (l.contains("values")) c.ladder.values = ladder_from_json(l.at("values"), p + ".values");
    if (l.contains("paired_noise")) c.ladder.paired_noise = ladder_from_json(l.at("paired_noise"), p + ".paired_noise");
    if (l.contains("sets")) {
      const Json& sets = l.at("sets");
      if (!sets.is_array()) throw ConfigError("ladder.sets: expected an array");
      for (std::size_t i = 0; i < sets.size(); ++i) {
        c.ladder.sets.push_back(constraint_from_json(sets[i], "ladder.sets[" + std::to_string(i) + "]"));
      }
    }
    if (l.contains("limit_set")) c.ladder.limit_set = constraint_from_json(l.at("limit_set"), "ladder.limit_set");
    if (l.contains("clim_truncations")) c.ladder.clim_truncations = cfg::numbers(l.at("clim_truncations"), p + ".clim_truncations");
    c.ladder.hausdorff_net = static_cast<int>(cfg::integer(l, p, "hausdorff_net", 4096));
    c.ladder.event_threshold = cfg::number(l, p, "event_threshold", 0.0);
  }
  if (j.contains("sensitivity")) {
    const Json& s = j.at("sensitivity");
    cfg::allow(s, "sensitivity", {"eps", "second_order"});
    if (s.contains("eps")) c.sensitivity.eps = ladder_from_json(s.at("eps"), "sensitivity.eps");
    c.sensitivity.second_order = cfg::boolean(s, "sensitivity", "second_order", true);
  }
  if (j.contains("counterexample")) {
    const Json& s = j.at("counterexample");
    const std::string p = "counterexample";
    cfg::allow(s, p, {"p", "n", "nodes", "range_sd", "conditional_mean", "eps", "ranges"});
    c.counterexample.p = cfg::number(s, p, "p", 0.6);
    if (s.contains("n")) c.counterexample.n = cfg::integers(s.at("n"), p + ".n");
    c.counterexample.quadrature.nodes = static_cast<int>(cfg::integer(s, p, "nodes", 201));
    c.counterexample.quadrature.range_sd = cfg::number(s, p, "range_sd", 8.0);
    c.counterexample.conditional_mean = cfg::number(s, p, "conditional_mean", 0.0);
    c.counterexample.eps = cfg::number(s, p, "eps", 1.0);
    if (s.contains("ranges")) c.counterexample.ranges = cfg::numbers(s.at("ranges"), p + ".ranges");
  }
  if (j.contains("tree")) {
    const Json& s = j.at("tree");
    const std::string p = "tree";
    cfg::allow(s, p, {"depth", "branching", "leaf_probability", "clock", "process", "process_seed", "leaf", "values",
                      "lookahead"});
    c.tree.tree = detail::tree_from_json(s, p);
    if (s.contains("process")) c.tree.process = cfg::text(s.at("process"), p + ".process");
    if (s.contains("process_seed")) c.tree.process_seed = cfg::unsigned_integer(s.at("process_seed"), p + ".process_seed");
    if (s.contains("leaf")) c.tree.leaf = cfg::unsigned_integer(s.at("leaf"), p + ".leaf");
    if (s.contains("values")) c.tree.values = cfg::matrix(s.at("values"), p + ".values");
    if (s.contains("lookahead")) {
      c.tree.lookahead = cfg::integers(s.at("lookahead"), p + ".lookahead");
    } else {
      for (int n = 0; n <= c.tree.tree.depth; ++n) c.tree.lookahead.push_back(n);
    }
    if (c.tree.process != "random_binary" && c.tree.process != "leaf_indicator" && c.tree.process != "values") {
      throw ConfigError("tree.process must be random_binary, leaf_indicator or values");
    }
    if (c.tree.process == "values" && c.tree.values.size() == 0) throw ConfigError("tree.values missing");
  }
  if (j.contains("density")) {
    const Json& s = j.at("density");
    const std::string p = "density";
    cfg::allow(s, p, {"source", "ladder", "horizon", "steps"});
    if (s.contains("source")) c.density.source = cfg::text(s.at("source"), p + ".source");
    if (c.density.source != "exponential" && c.density.source != "tilt") {
      throw ConfigError("density.source must be exponential or tilt");
    }
    c.density.ladder = ladder_from_json(cfg::need(s, p, "ladder"), p + ".ladder");
    c.density.horizon = cfg::number(s, p, "horizon", 1.0);
    c.density.steps = static_cast<int>(cfg::integer(s, p, "steps", 50));
  }
  if (j.contains("thresholds")) c.thresholds = detail::thresholds_from_json(j.at("thresholds"));

  // Sections each experiment needs.
  auto require = [&](bool ok, const char* what) {
    if (!ok) throw ConfigError(to_string(c.kind) + " experiment needs " + what);
  };
  switch (c.kind) {
    case ExperimentKind::Solve:
      require(j.contains("solve"), "a solve section");
      break;
    case ExperimentKind::Simulate:
      require(c.market.has_value(), "a market section");
      break;
    case ExperimentKind::StabilityFiltration:
    case ExperimentKind::StabilityProbability:
      require(c.market.has_value(), "a market section");
      require(!c.ladder.values.empty(), "ladder.values");
      break;
    case ExperimentKind::StabilityConstraint:
      require(c.market.has_value(), "a market section");
      require(!c.ladder.sets.empty(), "ladder.sets");
      break;
    case ExperimentKind::Sensitivity:
      require(c.market.has_value(), "a market section");
      break;
    case ExperimentKind::Counterexample:
      break;
    case ExperimentKind::TreeProjection:
      require(j.contains("tree"), "a tree section");
      break;
    case ExperimentKind::DensityCheck:
      require(j.contains("density"), "a density section");
      require(c.density.source == "exponential" || c.market.has_value(), "a market section for the tilt source");
      break;
  }
  return c;
}

inline ExperimentConfig parse_config(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  try {
    return config_from_json(j);
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("config has the wrong shape: ") + e.what());
  }
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace numeraire
