#include "sepic/scenario.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

namespace sepic {
namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& message) {
  throw ConfigError(path + ": " + message);
}

void check_keys(const json& obj, const std::string& path,
                std::initializer_list<const char*> allowed) {
  for (const auto& item : obj.items()) {
    bool ok = false;
    for (const char* k : allowed)
      if (item.key() == k) ok = true;
    if (!ok) {
      std::string keys;
      for (const char* k : allowed) keys += std::string(keys.empty() ? "" : ", ") + k;
      fail(path, "unknown key '" + item.key() + "' (valid keys: " + keys + ")");
    }
  }
}

const json& require(const json& obj, const std::string& path, const char* key) {
  if (!obj.contains(key)) fail(path, std::string("missing required key '") + key + "'");
  return obj.at(key);
}

double as_number(const json& v, const std::string& path) {
  if (!v.is_number()) fail(path, "expected a number");
  return v.get<double>();
}

int as_int(const json& v, const std::string& path) {
  if (!v.is_number_integer()) fail(path, "expected an integer");
  return v.get<int>();
}

std::string as_string(const json& v, const std::string& path) {
  if (!v.is_string()) fail(path, "expected a string");
  return v.get<std::string>();
}

VectorXd as_vector(const json& v, const std::string& path, int expected = -1) {
  if (!v.is_array()) fail(path, "expected an array of numbers");
  if (expected >= 0 && static_cast<int>(v.size()) != expected)
    fail(path, "expected " + std::to_string(expected) + " entries, got " +
                   std::to_string(v.size()));
  VectorXd out(v.size());
  for (std::size_t k = 0; k < v.size(); ++k)
    out[static_cast<Eigen::Index>(k)] = as_number(v[k], path + "[" + std::to_string(k) + "]");
  return out;
}

ScenarioConfig from_json(const json& doc, const std::string& origin) {
  if (!doc.is_object()) fail(origin, "config root must be an object");
  check_keys(doc, origin,
             {"name", "agents", "starts", "goals", "obstacles", "bas", "costs", "terminal",
              "controller", "noise", "horizon", "sampler", "lambda", "penalty", "cbf",
              "n_episodes", "master_seed", "partition_override", "threads"});

  ScenarioConfig cfg;
  if (doc.contains("name")) cfg.name = as_string(doc["name"], origin + ".name");

  {
    const json& agents = require(doc, origin, "agents");
    const std::string path = origin + ".agents";
    check_keys(agents, path, {"n", "edges"});
    const int n = as_int(require(agents, path, "n"), path + ".n");
    std::vector<std::pair<int, int>> edges;
    for (const auto& e : require(agents, path, "edges")) {
      if (!e.is_array() || e.size() != 2) fail(path + ".edges", "each edge is a pair of agent indices");
      edges.emplace_back(as_int(e[0], path + ".edges"), as_int(e[1], path + ".edges"));
    }
    try {
      cfg.graph = AgentGraph::from_edge_list(n, edges);
    } catch (const std::exception& e) {
      fail(path, e.what());
    }
  }

  for (std::size_t i = 0; i < require(doc, origin, "starts").size(); ++i)
    cfg.starts.push_back(as_vector(doc["starts"][i], origin + ".starts[" + std::to_string(i) + "]", 4));
  for (std::size_t i = 0; i < require(doc, origin, "goals").size(); ++i) {
    const VectorXd g = as_vector(doc["goals"][i], origin + ".goals[" + std::to_string(i) + "]", 2);
    cfg.goals.emplace_back(g[0], g[1]);
  }

  {
    const json& obstacles = require(doc, origin, "obstacles");
    for (std::size_t o = 0; o < obstacles.size(); ++o) {
      const std::string path = origin + ".obstacles[" + std::to_string(o) + "]";
      check_keys(obstacles[o], path, {"center", "radius"});
      BarrierConstraint c;
      const VectorXd center = as_vector(require(obstacles[o], path, "center"), path + ".center", 2);
      c.center = {center[0], center[1]};
      c.radius = as_number(require(obstacles[o], path, "radius"), path + ".radius");
      if (c.radius <= 0.0) fail(path + ".radius", "radius must be positive");
      c.id = static_cast<int>(o) + 1;
      cfg.obstacles.push_back(c);
    }
  }

  {
    const json& bas = require(doc, origin, "bas");
    const std::string path = origin + ".bas";
    check_keys(bas, path, {"gamma", "beta0_override"});
    cfg.gamma = as_number(require(bas, path, "gamma"), path + ".gamma");
    if (bas.contains("beta0_override") && !bas["beta0_override"].is_null()) {
      const VectorXd b = as_vector(bas["beta0_override"], path + ".beta0_override",
                                   static_cast<int>(cfg.obstacles.size()));
      cfg.beta0_override = std::vector<double>(b.data(), b.data() + b.size());
    }
  }

  {
    const json& costs = require(doc, origin, "costs");
    for (std::size_t i = 0; i < costs.size(); ++i) {
      const std::string path = origin + ".costs[" + std::to_string(i) + "]";
      check_keys(costs[i], path,
                 {"goal_weight", "coord_weight", "coord_partner", "bas_weight",
                  "indicator_weight", "indicator_threshold", "indicator_mode", "bas_targets"});
      CostSpec spec;
      spec.goal_weight = as_number(require(costs[i], path, "goal_weight"), path + ".goal_weight");
      if (costs[i].contains("coord_weight"))
        spec.coord_weight = as_number(costs[i]["coord_weight"], path + ".coord_weight");
      if (costs[i].contains("coord_partner") && !costs[i]["coord_partner"].is_null())
        spec.coord_partner = as_int(costs[i]["coord_partner"], path + ".coord_partner");
      if (costs[i].contains("bas_weight"))
        spec.bas_weight = as_number(costs[i]["bas_weight"], path + ".bas_weight");
      if (costs[i].contains("indicator_weight"))
        spec.indicator_weight = as_number(costs[i]["indicator_weight"], path + ".indicator_weight");
      if (costs[i].contains("indicator_threshold"))
        spec.indicator_threshold =
            as_number(costs[i]["indicator_threshold"], path + ".indicator_threshold");
      if (costs[i].contains("indicator_mode")) {
        const std::string mode = as_string(costs[i]["indicator_mode"], path + ".indicator_mode");
        if (mode == "product") spec.indicator_mode = IndicatorMode::product;
        else if (mode == "sum") spec.indicator_mode = IndicatorMode::sum;
        else fail(path + ".indicator_mode", "expected 'product' or 'sum'");
      }
      if (costs[i].contains("bas_targets") && !costs[i]["bas_targets"].is_null()) {
        const VectorXd t = as_vector(costs[i]["bas_targets"], path + ".bas_targets",
                                     static_cast<int>(cfg.obstacles.size()));
        spec.bas_targets = std::vector<double>(t.data(), t.data() + t.size());
      }
      cfg.costs.push_back(std::move(spec));
    }
  }

  if (doc.contains("terminal")) {
    const std::string path = origin + ".terminal";
    check_keys(doc["terminal"], path, {"mode", "scale"});
    const std::string mode = as_string(require(doc["terminal"], path, "mode"), path + ".mode");
    if (mode == "zero") cfg.terminal.mode = TerminalMode::zero;
    else if (mode == "goal-distance") cfg.terminal.mode = TerminalMode::goal_distance;
    else fail(path + ".mode", "expected 'zero' or 'goal-distance'");
    if (doc["terminal"].contains("scale"))
      cfg.terminal.scale = as_number(doc["terminal"]["scale"], path + ".scale");
  }

  {
    const std::string name = as_string(require(doc, origin, "controller"), origin + ".controller");
    const auto kind = controller_from_string(name);
    if (!kind)
      fail(origin + ".controller",
           "unknown controller '" + name + "' (valid: bas-pic, penalty-pic, cbf-npo, cbf-po)");
    cfg.controller = *kind;
  }

  {
    const json& noise = require(doc, origin, "noise");
    const std::string path = origin + ".noise";
    check_keys(noise, path, {"sigma", "nu"});
    cfg.sigma = as_number(require(noise, path, "sigma"), path + ".sigma");
    cfg.nu = as_number(require(noise, path, "nu"), path + ".nu");
  }

  {
    const json& horizon = require(doc, origin, "horizon");
    const std::string path = origin + ".horizon";
    check_keys(horizon, path, {"t_f", "dt"});
    cfg.t_f = as_number(require(horizon, path, "t_f"), path + ".t_f");
    cfg.dt = as_number(require(horizon, path, "dt"), path + ".dt");
  }

  {
    const json& sampler = require(doc, origin, "sampler");
    const std::string path = origin + ".sampler";
    check_keys(sampler, path, {"n_samples", "k_max", "horizon_mode"});
    cfg.n_samples = as_int(require(sampler, path, "n_samples"), path + ".n_samples");
    cfg.k_max = as_int(require(sampler, path, "k_max"), path + ".k_max");
    if (sampler.contains("horizon_mode")) {
      const std::string mode = as_string(sampler["horizon_mode"], path + ".horizon_mode");
      if (mode == "shrink-to-tf") cfg.horizon_mode = HorizonMode::shrink_to_tf;
      else if (mode == "fixed") cfg.horizon_mode = HorizonMode::fixed;
      else fail(path + ".horizon_mode", "expected 'shrink-to-tf' or 'fixed'");
    }
  }

  cfg.lambda = as_number(require(doc, origin, "lambda"), origin + ".lambda");

  if (doc.contains("penalty")) {
    const std::string path = origin + ".penalty";
    check_keys(doc["penalty"], path, {"weight", "shape"});
    if (doc["penalty"].contains("weight"))
      cfg.obstacle_penalty_weight = as_number(doc["penalty"]["weight"], path + ".weight");
    if (doc["penalty"].contains("shape")) {
      const std::string shape = as_string(doc["penalty"]["shape"], path + ".shape");
      if (shape == "indicator") cfg.violation_shape = ViolationShape::indicator;
      else if (shape == "hinge") cfg.violation_shape = ViolationShape::hinge;
      else fail(path + ".shape", "expected 'indicator' or 'hinge'");
    }
  }

  if (doc.contains("cbf")) {
    const std::string path = origin + ".cbf";
    check_keys(doc["cbf"], path, {"k1", "k2", "slack_weight", "u_min", "u_max"});
    if (doc["cbf"].contains("k1")) cfg.cbf.k1 = as_number(doc["cbf"]["k1"], path + ".k1");
    if (doc["cbf"].contains("k2")) cfg.cbf.k2 = as_number(doc["cbf"]["k2"], path + ".k2");
    if (doc["cbf"].contains("slack_weight"))
      cfg.cbf.slack_weight = as_number(doc["cbf"]["slack_weight"], path + ".slack_weight");
    if (doc["cbf"].contains("u_min") && !doc["cbf"]["u_min"].is_null()) {
      const VectorXd u = as_vector(doc["cbf"]["u_min"], path + ".u_min", 2);
      cfg.cbf.u_min = Eigen::Vector2d(u[0], u[1]);
    }
    if (doc["cbf"].contains("u_max") && !doc["cbf"]["u_max"].is_null()) {
      const VectorXd u = as_vector(doc["cbf"]["u_max"], path + ".u_max", 2);
      cfg.cbf.u_max = Eigen::Vector2d(u[0], u[1]);
    }
  }

  cfg.n_episodes = as_int(require(doc, origin, "n_episodes"), origin + ".n_episodes");
  if (!doc.contains("master_seed") || !doc["master_seed"].is_number_unsigned())
    fail(origin + ".master_seed", "expected a non-negative integer");
  cfg.master_seed = doc["master_seed"].get<std::uint64_t>();

  if (doc.contains("partition_override") && !doc["partition_override"].is_null()) {
    std::vector<int> rows;
    for (const auto& v : doc["partition_override"])
      rows.push_back(as_int(v, origin + ".partition_override"));
    cfg.partition_override = std::move(rows);
  }
  if (doc.contains("threads")) cfg.threads = as_int(doc["threads"], origin + ".threads");

  try {
    validate_scenario(cfg);
  } catch (const std::exception& e) {
    fail(origin, e.what());
  }
  return cfg;
}

const std::map<std::string, std::string>& bundled() {
  // Scenario parameters transcribed from the two UAV-team experiments;
  // lambda, sampler sizes, penalty/CBF settings and seeds are declared
  // choices, not experiment constants.
  static const std::map<std::string, std::string> scenarios = {
      {"scenario1", R"json({
  "name": "scenario1",
  "agents": {"n": 3, "edges": [[0, 1], [0, 2], [1, 2]]},
  "starts": [[5, 5, 0, 0], [5, 45, 0, 0], [5, 25, 0, 0]],
  "goals": [[45, 25], [45, 25], [45, 25]],
  "obstacles": [
    {"center": [17, 40], "radius": 8},
    {"center": [22, 16], "radius": 7},
    {"center": [35, 30], "radius": 5}
  ],
  "bas": {"gamma": 0.5},
  "costs": [
    {"goal_weight": 3.5, "coord_weight": 1.4, "coord_partner": 1, "bas_weight": 0.5,
     "indicator_weight": 50, "indicator_threshold": 0.01, "indicator_mode": "product"},
    {"goal_weight": 3.5, "coord_weight": 1.4, "coord_partner": 0, "bas_weight": 1.5,
     "indicator_weight": 50, "indicator_threshold": 0.01, "indicator_mode": "product"},
    {"goal_weight": 6.0, "bas_weight": 0.5,
     "indicator_weight": 50, "indicator_threshold": 0.01, "indicator_mode": "product"}
  ],
  "terminal": {"mode": "zero", "scale": 0.0},
  "controller": "bas-pic",
  "noise": {"sigma": 0.1, "nu": 0.05},
  "horizon": {"t_f": 20.0, "dt": 0.05},
  "sampler": {"n_samples": 2000, "k_max": 40, "horizon_mode": "shrink-to-tf"},
  "lambda": 0.1,
  "penalty": {"weight": 50.0, "shape": "indicator"},
  "cbf": {"k1": 0.5, "k2": 1.0, "slack_weight": 100.0},
  "n_episodes": 8,
  "master_seed": 2024
})json"},
      {"scenario2", R"json({
  "name": "scenario2",
  "agents": {"n": 3, "edges": [[0, 1], [0, 2], [1, 2]]},
  "starts": [[2.5, 2.5, 0, 0], [2.5, 70, 0, 0], [2.5, 40, 0, 0]],
  "goals": [[45, 45], [45, 45], [45, 45]],
  "obstacles": [
    {"center": [15, 3], "radius": 8},
    {"center": [16, 27], "radius": 8},
    {"center": [27, 15], "radius": 6},
    {"center": [32.5, 30.5], "radius": 12},
    {"center": [20, 60], "radius": 4}
  ],
  "bas": {"gamma": 0.5},
  "costs": [
    {"goal_weight": 2.0, "coord_weight": 0.5, "coord_partner": 1, "bas_weight": 0.8,
     "indicator_weight": 24, "indicator_threshold": 0.01, "indicator_mode": "product"},
    {"goal_weight": 2.0, "coord_weight": 0.5, "coord_partner": 0, "bas_weight": 0.8,
     "indicator_weight": 24, "indicator_threshold": 0.01, "indicator_mode": "product"},
    {"goal_weight": 3.0, "bas_weight": 0.8,
     "indicator_weight": 48, "indicator_threshold": 0.01, "indicator_mode": "product"}
  ],
  "terminal": {"mode": "zero", "scale": 0.0},
  "controller": "bas-pic",
  "noise": {"sigma": 0.1, "nu": 0.05},
  "horizon": {"t_f": 20.0, "dt": 0.2},
  "sampler": {"n_samples": 2000, "k_max": 40, "horizon_mode": "shrink-to-tf"},
  "lambda": 0.1,
  "penalty": {"weight": 50.0, "shape": "indicator"},
  "cbf": {"k1": 0.5, "k2": 1.0, "slack_weight": 100.0},
  "n_episodes": 5,
  "master_seed": 7
})json"}};
  return scenarios;
}

bool file_exists(const std::string& path) {
  std::ifstream in(path);
  return in.good();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json parse_json(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(origin + ": invalid JSON: " + e.what());
  }
}

}  // namespace

ScenarioConfig parse_config_text(const std::string& text, const std::string& origin) {
  return from_json(parse_json(text, origin), origin);
}

ScenarioConfig parse_config_file(const std::string& path) {
  return parse_config_text(read_file(path), path);
}

std::vector<std::string> bundled_scenarios() {
  std::vector<std::string> names;
  for (const auto& [name, text] : bundled()) names.push_back(name);
  return names;
}

const std::string& bundled_scenario_text(const std::string& name) {
  const auto& scenarios = bundled();
  const auto it = scenarios.find(name);
  if (it == scenarios.end())
    throw ConfigError("unknown bundled scenario '" + name + "' (try: scenario1, scenario2)");
  return it->second;
}

std::string config_text(const std::string& path_or_name) {
  if (file_exists(path_or_name)) return read_file(path_or_name);
  return bundled_scenario_text(path_or_name);
}

ScenarioConfig load_config(const std::string& path_or_name) {
  if (file_exists(path_or_name)) return parse_config_file(path_or_name);
  return parse_config_text(bundled_scenario_text(path_or_name), path_or_name);
}

ScenarioConfig apply_overrides(const std::string& base_text,
                               const std::vector<std::string>& overrides,
                               const std::string& origin) {
  json doc = parse_json(base_text, origin);
  for (const std::string& entry : overrides) {
    const auto eq = entry.find('=');
    if (eq == std::string::npos)
      throw ConfigError("override '" + entry + "': expected key.path=value");
    const std::string path = entry.substr(0, eq);
    const std::string value = entry.substr(eq + 1);

    json parsed;
    try {
      parsed = json::parse(value);
    } catch (const json::parse_error&) {
      parsed = value;  // bare strings (e.g. controller=penalty-pic)
    }

    json* node = &doc;
    std::size_t begin = 0;
    while (true) {
      const auto dot = path.find('.', begin);
      const std::string token = path.substr(begin, dot == std::string::npos ? dot : dot - begin);
      if (token.empty()) throw ConfigError("override '" + entry + "': empty path segment");
      const bool last = dot == std::string::npos;
      if (node->is_array()) {
        std::size_t idx;
        try {
          idx = std::stoul(token);
        } catch (...) {
          throw ConfigError("override '" + entry + "': '" + token + "' is not an array index");
        }
        if (idx >= node->size())
          throw ConfigError("override '" + entry + "': index " + token + " out of range");
        node = &(*node)[idx];
      } else {
        if (last) {
          (*node)[token] = parsed;
          break;
        }
        if (!node->contains(token)) (*node)[token] = json::object();
        node = &(*node)[token];
      }
      if (last) {
        *node = parsed;
        break;
      }
      begin = dot + 1;
    }
  }
  return from_json(doc, origin);
}

}  // namespace sepic
