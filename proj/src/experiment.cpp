#include "lqdg/experiment.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "lqdg/belief.hpp"
#include "lqdg/metrics.hpp"
#include "lqdg/riccati.hpp"

namespace lqdg {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

[[noreturn]] void fail(const std::string& path, const std::string& message) {
  throw ConfigError("config: " + path + ": " + message);
}

// ---------------------------------------------------------------------------
// YAML -> JSON bridge.  Scalars are typed by content: bool / integer /
// floating literals become JSON numbers, everything else (and every quoted
// scalar) stays a string.

ordered_json scalar_to_json(const YAML::Node& node) {
  const std::string& s = node.Scalar();
  if (node.Tag() == "!") return s;  // explicitly quoted
  if (s == "true") return true;
  if (s == "false") return false;
  if (s == "null" || s == "~" || s.empty()) return nullptr;
  const bool negative = s[0] == '-';
  const bool numeric_start =
      std::isdigit(static_cast<unsigned char>(s[0])) || negative || s[0] == '+' || s[0] == '.';
  if (numeric_start) {
    if (s.find_first_of(".eE") == std::string::npos) {
      if (negative) {
        std::int64_t v = 0;
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec == std::errc() && p == s.data() + s.size()) return v;
      } else {
        std::uint64_t v = 0;
        const char* begin = s.data() + (s[0] == '+' ? 1 : 0);
        auto [p, ec] = std::from_chars(begin, s.data() + s.size(), v);
        if (ec == std::errc() && p == s.data() + s.size()) return v;
      }
    }
    char* end = nullptr;
    const double d = std::strtod(s.c_str(), &end);
    if (end == s.c_str() + s.size()) return d;
  }
  return s;
}

ordered_json yaml_to_json(const YAML::Node& node) {
  switch (node.Type()) {
    case YAML::NodeType::Null:
    case YAML::NodeType::Undefined:
      return nullptr;
    case YAML::NodeType::Scalar:
      return scalar_to_json(node);
    case YAML::NodeType::Sequence: {
      ordered_json arr = ordered_json::array();
      for (const auto& item : node) arr.push_back(yaml_to_json(item));
      return arr;
    }
    case YAML::NodeType::Map: {
      ordered_json obj = ordered_json::object();
      for (const auto& kv : node) obj[kv.first.as<std::string>()] = yaml_to_json(kv.second);
      return obj;
    }
  }
  return nullptr;
}

// ---------------------------------------------------------------------------
// Typed JSON accessors with key-path diagnostics.

void require_object(const ordered_json& j, const std::string& path) {
  if (!j.is_object()) fail(path, "expected a mapping");
}

void check_keys(const ordered_json& obj, const std::string& path,
                std::initializer_list<const char*> allowed) {
  for (const auto& kv : obj.items()) {
    bool known = false;
    for (const char* key : allowed)
      if (kv.key() == key) {
        known = true;
        break;
      }
    if (!known) fail(path.empty() ? kv.key() : path + "." + kv.key(), "unknown key");
  }
}

double as_double(const ordered_json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  return j.get<double>();
}

int as_int(const ordered_json& j, const std::string& path) {
  if (!j.is_number_integer() && !j.is_number_unsigned()) fail(path, "expected an integer");
  return j.get<int>();
}

std::uint64_t as_u64(const ordered_json& j, const std::string& path) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer()) {
    const std::int64_t v = j.get<std::int64_t>();
    if (v < 0) fail(path, "expected a non-negative integer");
    return static_cast<std::uint64_t>(v);
  }
  fail(path, "expected an unsigned integer");
}

bool as_bool(const ordered_json& j, const std::string& path) {
  if (j.is_boolean()) return j.get<bool>();
  if (j.is_number_integer() || j.is_number_unsigned()) {
    const auto v = j.get<std::int64_t>();
    if (v == 0 || v == 1) return v == 1;
  }
  fail(path, "expected a boolean");
}

std::string as_string(const ordered_json& j, const std::string& path) {
  if (!j.is_string()) fail(path, "expected a string");
  return j.get<std::string>();
}

// ---------------------------------------------------------------------------
// Matrix / vector / staged-table codecs.
//
// A table is either a bare value (constant over stages and variants) or a
// mapping with exactly one of:
//   per_stage:   [value, ...]            one per stage
//   per_variant: [value, ...]            one per type variant
//   full:        [[value, ...], ...]     [stage][variant]

Matrix parse_matrix(const ordered_json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) fail(path, "expected a non-empty array of rows");
  const int rows = static_cast<int>(j.size());
  if (!j[0].is_array() || j[0].empty()) fail(path, "expected rows to be arrays of numbers");
  const int cols = static_cast<int>(j[0].size());
  Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    if (!j[r].is_array() || static_cast<int>(j[r].size()) != cols)
      fail(path, "rows must all have the same length");
    for (int c = 0; c < cols; ++c)
      m(r, c) = as_double(j[r][c], path + "[" + std::to_string(r) + "]");
  }
  return m;
}

Vector parse_vector(const ordered_json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) fail(path, "expected a non-empty array of numbers");
  Vector v(static_cast<int>(j.size()));
  for (int i = 0; i < v.size(); ++i) v(i) = as_double(j[i], path);
  return v;
}

template <typename T, typename ParseFn>
StagedTable<T> parse_table(const ordered_json& j, const std::string& path, ParseFn parse_one) {
  if (j.is_object()) {
    check_keys(j, path, {"per_stage", "per_variant", "full"});
    if (j.size() != 1) fail(path, "table mapping needs exactly one of per_stage/per_variant/full");
    if (j.contains("per_stage")) {
      const auto& arr = j["per_stage"];
      if (!arr.is_array() || arr.empty()) fail(path + ".per_stage", "expected a non-empty array");
      std::vector<T> items;
      for (std::size_t s = 0; s < arr.size(); ++s)
        items.push_back(parse_one(arr[s], path + ".per_stage[" + std::to_string(s) + "]"));
      return StagedTable<T>::PerStage(std::move(items));
    }
    if (j.contains("per_variant")) {
      const auto& arr = j["per_variant"];
      if (!arr.is_array() || arr.empty()) fail(path + ".per_variant", "expected a non-empty array");
      std::vector<T> items;
      for (std::size_t v = 0; v < arr.size(); ++v)
        items.push_back(parse_one(arr[v], path + ".per_variant[" + std::to_string(v) + "]"));
      return StagedTable<T>::PerVariant(std::move(items));
    }
    const auto& arr = j["full"];
    if (!arr.is_array() || arr.empty()) fail(path + ".full", "expected a non-empty array");
    std::vector<std::vector<T>> items;
    std::size_t variants = 0;
    for (std::size_t s = 0; s < arr.size(); ++s) {
      const std::string spath = path + ".full[" + std::to_string(s) + "]";
      if (!arr[s].is_array() || arr[s].empty()) fail(spath, "expected a non-empty array");
      if (s == 0) variants = arr[s].size();
      if (arr[s].size() != variants) fail(spath, "stages must list the same variant count");
      std::vector<T> row;
      for (std::size_t v = 0; v < arr[s].size(); ++v)
        row.push_back(parse_one(arr[s][v], spath + "[" + std::to_string(v) + "]"));
      items.push_back(std::move(row));
    }
    return StagedTable<T>::Full(std::move(items));
  }
  return StagedTable<T>::Constant(parse_one(j, path));
}

StagedTable<Matrix> parse_matrix_table(const ordered_json& j, const std::string& path) {
  return parse_table<Matrix>(j, path, parse_matrix);
}
StagedTable<Vector> parse_vector_table(const ordered_json& j, const std::string& path) {
  return parse_table<Vector>(j, path, parse_vector);
}
StagedTable<double> parse_scalar_table(const ordered_json& j, const std::string& path) {
  return parse_table<double>(j, path,
                             [](const ordered_json& v, const std::string& p) {
                               return as_double(v, p);
                             });
}

ordered_json matrix_to_json(const Matrix& m) {
  ordered_json rows = ordered_json::array();
  for (int r = 0; r < m.rows(); ++r) {
    ordered_json row = ordered_json::array();
    for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

ordered_json vector_to_json(const Vector& v) {
  ordered_json arr = ordered_json::array();
  for (int i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

template <typename T, typename DumpFn>
ordered_json table_to_json(const StagedTable<T>& table, DumpFn dump_one) {
  const int stages = table.stored_stages();
  const int variants = table.stored_variants();
  if (stages == 1 && variants == 1) return dump_one(table.at(0, 0));
  ordered_json out = ordered_json::object();
  if (variants == 1) {
    ordered_json arr = ordered_json::array();
    for (int s = 0; s < stages; ++s) arr.push_back(dump_one(table.at(s, 0)));
    out["per_stage"] = std::move(arr);
  } else if (stages == 1) {
    ordered_json arr = ordered_json::array();
    for (int v = 0; v < variants; ++v) arr.push_back(dump_one(table.at(0, v)));
    out["per_variant"] = std::move(arr);
  } else {
    ordered_json full = ordered_json::array();
    for (int s = 0; s < stages; ++s) {
      ordered_json row = ordered_json::array();
      for (int v = 0; v < variants; ++v) row.push_back(dump_one(table.at(s, v)));
      full.push_back(std::move(row));
    }
    out["full"] = std::move(full);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Inline game codec.

GameSpec parse_game(const ordered_json& g, const std::string& path) {
  require_object(g, path);
  check_keys(g, path,
             {"horizon", "state_dim", "control_dims", "types", "A", "B", "D", "F", "x_ref",
              "f_ref", "Q"});
  for (const char* key : {"horizon", "state_dim", "control_dims", "types", "A", "B", "D", "F",
                          "x_ref", "f_ref", "Q"})
    if (!g.contains(key)) fail(path + "." + key, "required");

  GameSpec spec;
  spec.horizon = as_int(g["horizon"], path + ".horizon");
  spec.state_dim = as_int(g["state_dim"], path + ".state_dim");
  const auto& types = g["types"];
  if (!types.is_array() || types.empty()) fail(path + ".types", "expected one label list per player");
  std::vector<std::vector<std::string>> labels;
  for (std::size_t i = 0; i < types.size(); ++i) {
    const std::string tpath = path + ".types[" + std::to_string(i) + "]";
    if (!types[i].is_array() || types[i].empty()) fail(tpath, "expected a non-empty label list");
    std::vector<std::string> player_labels;
    for (const auto& label : types[i]) player_labels.push_back(as_string(label, tpath));
    labels.push_back(std::move(player_labels));
  }
  spec.types = TypeSpace(std::move(labels));
  spec.num_players = spec.types.num_players();

  const auto& dims = g["control_dims"];
  if (!dims.is_array() || static_cast<int>(dims.size()) != spec.num_players)
    fail(path + ".control_dims", "expected one entry per player");
  for (std::size_t i = 0; i < dims.size(); ++i)
    spec.control_dims.push_back(as_int(dims[i], path + ".control_dims"));

  auto per_player = [&](const char* key) -> const ordered_json& {
    const auto& node = g[key];
    if (!node.is_array() || static_cast<int>(node.size()) != spec.num_players)
      fail(path + "." + key, "expected one entry per player");
    return node;
  };

  spec.A = parse_matrix_table(g["A"], path + ".A");
  const auto& B = per_player("B");
  const auto& D = per_player("D");
  const auto& xr = per_player("x_ref");
  const auto& fr = per_player("f_ref");
  for (int i = 0; i < spec.num_players; ++i) {
    const std::string idx = "[" + std::to_string(i) + "]";
    spec.B.push_back(parse_matrix_table(B[i], path + ".B" + idx));
    spec.D.push_back(parse_matrix_table(D[i], path + ".D" + idx));
    spec.x_ref.push_back(parse_vector_table(xr[i], path + ".x_ref" + idx));
    spec.f_ref.push_back(parse_scalar_table(fr[i], path + ".f_ref" + idx));
  }
  const auto& F = g["F"];
  if (!F.is_array() || static_cast<int>(F.size()) != spec.num_players)
    fail(path + ".F", "expected one row per player");
  spec.F.resize(spec.num_players);
  for (int i = 0; i < spec.num_players; ++i) {
    if (!F[i].is_array() || static_cast<int>(F[i].size()) != spec.num_players)
      fail(path + ".F[" + std::to_string(i) + "]", "expected one entry per player");
    for (int j = 0; j < spec.num_players; ++j)
      spec.F[i].push_back(parse_matrix_table(
          F[i][j], path + ".F[" + std::to_string(i) + "][" + std::to_string(j) + "]"));
  }
  spec.Q = parse_matrix_table(g["Q"], path + ".Q");

  ValidationReport report = validate_spec(spec);
  if (!report.valid()) {
    std::ostringstream os;
    os << "invalid game:";
    for (const auto& e : report.errors) os << "\n  " << e;
    fail(path, os.str());
  }
  return spec;
}

ordered_json game_to_json(const GameSpec& spec) {
  ordered_json g = ordered_json::object();
  g["horizon"] = spec.horizon;
  g["state_dim"] = spec.state_dim;
  g["control_dims"] = spec.control_dims;
  ordered_json types = ordered_json::array();
  for (int i = 0; i < spec.num_players; ++i) types.push_back(spec.types.labels(i));
  g["types"] = std::move(types);
  g["A"] = table_to_json(spec.A, matrix_to_json);
  ordered_json B = ordered_json::array(), D = ordered_json::array(), xr = ordered_json::array(),
               fr = ordered_json::array();
  for (int i = 0; i < spec.num_players; ++i) {
    B.push_back(table_to_json(spec.B[i], matrix_to_json));
    D.push_back(table_to_json(spec.D[i], matrix_to_json));
    xr.push_back(table_to_json(spec.x_ref[i], vector_to_json));
    fr.push_back(table_to_json(spec.f_ref[i], [](double v) { return ordered_json(v); }));
  }
  g["B"] = std::move(B);
  g["D"] = std::move(D);
  ordered_json F = ordered_json::array();
  for (int i = 0; i < spec.num_players; ++i) {
    ordered_json row = ordered_json::array();
    for (int j = 0; j < spec.num_players; ++j)
      row.push_back(table_to_json(spec.F[i][j], matrix_to_json));
    F.push_back(std::move(row));
  }
  g["F"] = std::move(F);
  g["x_ref"] = std::move(xr);
  g["f_ref"] = std::move(fr);
  g["Q"] = table_to_json(spec.Q, matrix_to_json);
  return g;
}

// ---------------------------------------------------------------------------
// Scenario / policy / belief codecs.

PursuitEvasionParams parse_scenario(const ordered_json& s, const std::string& path) {
  require_object(s, path);
  check_keys(s, path,
             {"horizon", "b1_high", "b1_low", "b2", "target_g", "target_b", "pursuer_start",
              "evader_start", "d2_traj", "deception_ratio", "epsilon0", "d2_terminal", "alpha",
              "d12_terminal", "f11", "f22", "f12", "f21", "noise_std"});
  PursuitEvasionParams p;
  auto num = [&](const char* key, double& slot) {
    if (s.contains(key)) slot = as_double(s[key], path + "." + key);
  };
  if (s.contains("horizon")) p.horizon = as_int(s["horizon"], path + ".horizon");
  num("b1_high", p.b1_high);
  num("b1_low", p.b1_low);
  num("b2", p.b2);
  auto point = [&](const char* key, Eigen::Vector2d& slot) {
    if (!s.contains(key)) return;
    const Vector v = parse_vector(s[key], path + "." + key);
    if (v.size() != 2) fail(path + "." + key, "expected [x, y]");
    slot = v;
  };
  point("target_g", p.target_g);
  point("target_b", p.target_b);
  point("pursuer_start", p.pursuer_start);
  point("evader_start", p.evader_start);
  num("d2_traj", p.d2_traj);
  num("deception_ratio", p.deception_ratio);
  num("epsilon0", p.epsilon0);
  num("d2_terminal", p.d2_terminal);
  num("alpha", p.alpha);
  num("d12_terminal", p.d12_terminal);
  num("f11", p.f11);
  num("f22", p.f22);
  num("f12", p.f12);
  num("f21", p.f21);
  num("noise_std", p.noise_std);
  return p;
}

ordered_json scenario_to_json(const PursuitEvasionParams& p) {
  ordered_json s = ordered_json::object();
  s["horizon"] = p.horizon;
  s["b1_high"] = p.b1_high;
  s["b1_low"] = p.b1_low;
  s["b2"] = p.b2;
  s["target_g"] = {p.target_g.x(), p.target_g.y()};
  s["target_b"] = {p.target_b.x(), p.target_b.y()};
  s["pursuer_start"] = {p.pursuer_start.x(), p.pursuer_start.y()};
  s["evader_start"] = {p.evader_start.x(), p.evader_start.y()};
  s["d2_traj"] = p.d2_traj;
  s["deception_ratio"] = p.deception_ratio;
  s["epsilon0"] = p.epsilon0;
  s["d2_terminal"] = p.d2_terminal;
  s["alpha"] = p.alpha;
  s["d12_terminal"] = p.d12_terminal;
  s["f11"] = p.f11;
  s["f22"] = p.f22;
  s["f12"] = p.f12;
  s["f21"] = p.f21;
  s["noise_std"] = p.noise_std;
  return s;
}

const char* policy_name(PolicyType t) {
  switch (t) {
    case PolicyType::kLevelT: return "level_t";
    case PolicyType::kCompleteInfo: return "complete_info";
    case PolicyType::kDirectFollowing: return "direct_following";
    case PolicyType::kConservative: return "conservative";
  }
  return "level_t";
}

PolicyType policy_from_name(const std::string& name, const std::string& path) {
  if (name == "level_t") return PolicyType::kLevelT;
  if (name == "complete_info") return PolicyType::kCompleteInfo;
  if (name == "direct_following") return PolicyType::kDirectFollowing;
  if (name == "conservative") return PolicyType::kConservative;
  fail(path, "unknown policy '" + name +
                 "' (expected level_t, complete_info, direct_following, or conservative)");
}

PolicyKind parse_policy(const ordered_json& j, const std::string& path, double default_delta) {
  PolicyKind p;
  p.delta = default_delta;
  if (j.is_string()) {
    p.type = policy_from_name(j.get<std::string>(), path);
    return p;
  }
  require_object(j, path);
  check_keys(j, path, {"kind", "delta"});
  if (!j.contains("kind")) fail(path + ".kind", "required");
  p.type = policy_from_name(as_string(j["kind"], path + ".kind"), path + ".kind");
  if (j.contains("delta")) {
    p.delta = as_double(j["delta"], path + ".delta");
    if (!(p.delta > 0.0) || p.delta > 1.0) fail(path + ".delta", "must lie in (0, 1]");
  }
  return p;
}

ordered_json policy_to_json(const PolicyKind& p) {
  if (p.type != PolicyType::kConservative) return policy_name(p.type);
  ordered_json j = ordered_json::object();
  j["kind"] = policy_name(p.type);
  j["delta"] = p.delta;
  return j;
}

BeliefSpec parse_belief(const ordered_json& j, const std::string& path) {
  BeliefSpec b;
  if (j.is_string()) {
    const std::string kind = j.get<std::string>();
    if (kind == "uniform") {
      b.kind = BeliefSpec::Kind::kUniform;
      return b;
    }
    if (kind == "on_true") {
      b.kind = BeliefSpec::Kind::kOnTrue;
      return b;
    }
    fail(path, "unknown belief kind '" + kind + "'");
  }
  require_object(j, path);
  check_keys(j, path, {"kind", "mass", "rows"});
  if (!j.contains("kind")) fail(path + ".kind", "required");
  const std::string kind = as_string(j["kind"], path + ".kind");
  if (kind == "uniform") {
    b.kind = BeliefSpec::Kind::kUniform;
  } else if (kind == "on_true") {
    b.kind = BeliefSpec::Kind::kOnTrue;
    if (j.contains("mass")) {
      b.on_true = as_double(j["mass"], path + ".mass");
      if (b.on_true < 0.0 || b.on_true > 1.0) fail(path + ".mass", "must lie in [0, 1]");
    }
  } else if (kind == "rows") {
    b.kind = BeliefSpec::Kind::kRows;
    if (!j.contains("rows")) fail(path + ".rows", "required");
    const auto& rows = j["rows"];
    if (!rows.is_array() || rows.empty()) fail(path + ".rows", "expected one row per own type");
    for (std::size_t r = 0; r < rows.size(); ++r)
      b.rows.push_back(parse_vector(rows[r], path + ".rows[" + std::to_string(r) + "]"));
  } else {
    fail(path + ".kind", "unknown belief kind '" + kind + "'");
  }
  return b;
}

ordered_json belief_to_json(const BeliefSpec& b) {
  ordered_json j = ordered_json::object();
  switch (b.kind) {
    case BeliefSpec::Kind::kUniform:
      j["kind"] = "uniform";
      break;
    case BeliefSpec::Kind::kOnTrue:
      j["kind"] = "on_true";
      j["mass"] = b.on_true;
      break;
    case BeliefSpec::Kind::kRows: {
      j["kind"] = "rows";
      ordered_json rows = ordered_json::array();
      for (const Vector& r : b.rows) rows.push_back(vector_to_json(r));
      j["rows"] = std::move(rows);
      break;
    }
  }
  return j;
}

JointType parse_true_types(const ordered_json& j, const TypeSpace& types,
                           const std::string& path) {
  if (!j.is_array() || static_cast<int>(j.size()) != types.num_players())
    fail(path, "expected one type per player");
  JointType tt(types.num_players());
  for (int i = 0; i < types.num_players(); ++i) {
    const std::string ipath = path + "[" + std::to_string(i) + "]";
    if (j[i].is_string()) {
      try {
        tt[i] = types.type_index(i, j[i].get<std::string>());
      } catch (const std::exception& e) {
        fail(ipath, e.what());
      }
    } else {
      tt[i] = as_int(j[i], ipath);
      if (tt[i] < 0 || tt[i] >= types.num_types(i)) fail(ipath, "type index out of range");
    }
  }
  return tt;
}

ordered_json true_types_to_json(const JointType& tt, const TypeSpace& types) {
  ordered_json arr = ordered_json::array();
  for (int i = 0; i < types.num_players(); ++i) arr.push_back(types.label(i, tt[i]));
  return arr;
}

ExperimentConfig config_from_json(const ordered_json& root) {
  require_object(root, "");
  check_keys(root, "",
             {"schema_version", "name", "seed", "replications", "level", "threads", "output_dir",
              "formats", "write_trajectories", "scenario", "game", "x0", "true_types", "beliefs",
              "policies", "bayesian_update", "metrics", "sweep"});

  ExperimentConfig c;
  if (!root.contains("schema_version")) fail("schema_version", "required");
  c.schema_version = as_int(root["schema_version"], "schema_version");
  if (c.schema_version != kSchemaVersion)
    fail("schema_version", "unsupported version " + std::to_string(c.schema_version) +
                               " (expected " + std::to_string(kSchemaVersion) + ")");
  if (root.contains("name")) {
    c.name = as_string(root["name"], "name");
    if (c.name.empty() || c.name.find('/') != std::string::npos)
      fail("name", "must be a non-empty path component");
  }
  if (root.contains("seed")) {
    c.seed = as_u64(root["seed"], "seed");
    c.has_seed = true;
  }
  if (root.contains("replications")) {
    c.replications = as_int(root["replications"], "replications");
    if (c.replications < 1) fail("replications", "must be at least 1");
  }
  if (root.contains("level")) {
    c.level = as_int(root["level"], "level");
    if (c.level < 0) fail("level", "must be non-negative");
  }
  if (root.contains("threads")) {
    c.threads = as_int(root["threads"], "threads");
    if (c.threads < 1) fail("threads", "must be at least 1");
  }
  if (root.contains("output_dir")) c.output_dir = as_string(root["output_dir"], "output_dir");
  if (root.contains("formats")) {
    const auto& f = root["formats"];
    if (!f.is_array() || f.empty()) fail("formats", "expected a non-empty list");
    c.formats.clear();
    for (const auto& item : f) {
      const std::string v = as_string(item, "formats");
      if (v != "csv" && v != "json") fail("formats", "unknown format '" + v + "'");
      if (std::find(c.formats.begin(), c.formats.end(), v) == c.formats.end())
        c.formats.push_back(v);
    }
  }
  if (root.contains("write_trajectories"))
    c.write_trajectories = as_bool(root["write_trajectories"], "write_trajectories");

  const bool has_scenario = root.contains("scenario");
  const bool has_game = root.contains("game");
  if (has_scenario == has_game) fail("scenario", "exactly one of scenario/game is required");
  if (has_scenario) c.scenario = parse_scenario(root["scenario"], "scenario");
  if (has_game) c.inline_game = parse_game(root["game"], "game");
  if (root.contains("x0")) c.x0 = parse_vector(root["x0"], "x0");
  if (c.inline_game) {
    if (!c.x0) fail("x0", "required for inline games");
    if (c.x0->size() != c.inline_game->state_dim) fail("x0", "dimension mismatch");
  }

  // The validated base spec provides the type space for label resolution.
  const GameSpec base =
      c.scenario ? build_pursuit_evasion(*c.scenario) : *c.inline_game;
  const int N = base.num_players;

  if (root.contains("metrics")) {
    const auto& m = root["metrics"];
    require_object(m, "metrics");
    check_keys(m, "metrics",
               {"delta", "epsilon", "k_tilde", "threshold", "eta0", "eta",
                "paired_complete_info"});
    if (m.contains("delta")) {
      c.metrics.delta = as_double(m["delta"], "metrics.delta");
      if (!(c.metrics.delta > 0.0) || c.metrics.delta > 1.0)
        fail("metrics.delta", "must lie in (0, 1]");
    }
    if (m.contains("epsilon")) {
      c.metrics.epsilon = as_double(m["epsilon"], "metrics.epsilon");
      if (c.metrics.epsilon < 0.0 || c.metrics.epsilon > 1.0)
        fail("metrics.epsilon", "must lie in [0, 1]");
    }
    if (m.contains("k_tilde")) c.metrics.k_tilde = as_int(m["k_tilde"], "metrics.k_tilde");
    if (m.contains("threshold")) {
      c.metrics.threshold = as_double(m["threshold"], "metrics.threshold");
      if (!(c.metrics.threshold > 0.0)) fail("metrics.threshold", "must be positive");
    }
    if (m.contains("eta0")) {
      c.metrics.eta0 = as_double(m["eta0"], "metrics.eta0");
      if (!(c.metrics.eta0 > 0.0)) fail("metrics.eta0", "must be positive");
    }
    if (m.contains("eta")) {
      const auto& eta = m["eta"];
      if (!eta.is_array() || static_cast<int>(eta.size()) != N)
        fail("metrics.eta", "expected one weight per player");
      for (const auto& w : eta) c.metrics.eta.push_back(as_double(w, "metrics.eta"));
    }
    if (m.contains("paired_complete_info"))
      c.metrics.paired_complete_info = as_bool(m["paired_complete_info"], "metrics.paired_complete_info");
  }

  if (root.contains("true_types"))
    c.true_types = parse_true_types(root["true_types"], base.types, "true_types");

  if (root.contains("beliefs")) {
    const auto& b = root["beliefs"];
    if (!b.is_array() || static_cast<int>(b.size()) != N)
      fail("beliefs", "expected one entry per player");
    for (int i = 0; i < N; ++i)
      c.beliefs.push_back(parse_belief(b[i], "beliefs[" + std::to_string(i) + "]"));
  }
  if (root.contains("policies")) {
    const auto& p = root["policies"];
    if (!p.is_array() || static_cast<int>(p.size()) != N)
      fail("policies", "expected one entry per player");
    for (int i = 0; i < N; ++i)
      c.policies.push_back(
          parse_policy(p[i], "policies[" + std::to_string(i) + "]", c.metrics.delta));
  }
  if (root.contains("bayesian_update")) {
    const auto& b = root["bayesian_update"];
    if (!b.is_array() || static_cast<int>(b.size()) != N)
      fail("bayesian_update", "expected one flag per player");
    for (int i = 0; i < N; ++i)
      c.bayesian_update.push_back(as_bool(b[i], "bayesian_update[" + std::to_string(i) + "]"));
  }

  if (root.contains("sweep")) {
    const auto& s = root["sweep"];
    require_object(s, "sweep");
    check_keys(s, "sweep",
               {"initial_belief", "b1_high", "alpha", "policy", "bayesian", "true_types"});
    auto doubles = [&](const char* key, std::vector<double>& slot, double lo, double hi) {
      if (!s.contains(key)) return;
      const auto& arr = s[key];
      const std::string path = std::string("sweep.") + key;
      if (!arr.is_array() || arr.empty()) fail(path, "expected a non-empty list");
      for (const auto& v : arr) {
        const double d = as_double(v, path);
        if (d < lo || d > hi) fail(path, "value out of range");
        slot.push_back(d);
      }
    };
    doubles("initial_belief", c.axis_initial_belief, 0.0, 1.0);
    doubles("b1_high", c.axis_b1_high, 1e-12, std::numeric_limits<double>::max());
    doubles("alpha", c.axis_alpha, 0.0, std::numeric_limits<double>::max());
    if ((!c.axis_b1_high.empty() || !c.axis_alpha.empty()) && !c.scenario)
      fail("sweep", "b1_high/alpha axes require the scenario");
    if (s.contains("policy")) {
      const auto& arr = s["policy"];
      if (!arr.is_array() || arr.empty()) fail("sweep.policy", "expected a non-empty list");
      for (const auto& v : arr) {
        const std::string name = as_string(v, "sweep.policy");
        policy_from_name(name, "sweep.policy");  // validates
        c.axis_policy.push_back(name);
      }
    }
    if (s.contains("bayesian")) {
      const auto& arr = s["bayesian"];
      if (!arr.is_array() || arr.empty()) fail("sweep.bayesian", "expected a non-empty list");
      for (const auto& v : arr)
        c.axis_bayesian.push_back(as_bool(v, "sweep.bayesian") ? 1 : 0);
    }
    if (s.contains("true_types")) {
      const auto& arr = s["true_types"];
      if (!arr.is_array() || arr.empty()) fail("sweep.true_types", "expected a non-empty list");
      for (std::size_t i = 0; i < arr.size(); ++i)
        c.axis_true_types.push_back(parse_true_types(
            arr[i], base.types, "sweep.true_types[" + std::to_string(i) + "]"));
    }
  }

  if (!root.contains("true_types")) {
    if (c.axis_true_types.empty()) fail("true_types", "required (or provide sweep.true_types)");
    c.true_types = c.axis_true_types.front();
  }
  return c;
}

// ---------------------------------------------------------------------------
// Cells and per-cell resolution.

std::string join_labels(const JointType& tt, const TypeSpace& types) {
  std::string out;
  for (int i = 0; i < types.num_players(); ++i) {
    if (i) out += '+';
    out += types.label(i, tt[i]);
  }
  return out;
}

struct ResolvedCell {
  GameSpec spec;
  BeliefTable beliefs;
  EpisodeOptions options;
  JointType true_types;
  Vector x0;
  std::optional<PursuitEvasionParams> params;
  // Reporting values.
  double initial_belief = kNaN;
  double b1_high = kNaN;
  double alpha = kNaN;
  std::string policy;
  int bayesian = 1;
  std::string true_type_labels;
  bool stc = false;
};

ResolvedCell resolve_cell(const ExperimentConfig& config, const CellOverride& cell) {
  ResolvedCell r;
  r.spec = build_spec(config, cell);
  r.true_types = cell.true_types ? *cell.true_types : config.true_types;
  r.beliefs = build_beliefs(config, cell, r.spec);
  r.options = build_options(config, cell, r.spec);
  if (config.scenario) {
    PursuitEvasionParams p = *config.scenario;
    if (cell.b1_high) p.b1_high = *cell.b1_high;
    if (cell.alpha) p.alpha = *cell.alpha;
    r.params = p;
    r.x0 = initial_state(p);
    r.b1_high = p.b1_high;
    r.alpha = p.alpha;
  } else {
    r.x0 = *config.x0;
  }
  const int true_opp = r.spec.types.flatten_opponent(0, r.true_types);
  r.initial_belief = r.beliefs.row(0, r.true_types[0])(true_opp);
  r.policy = policy_name(r.options.policies[0].type);
  r.bayesian = r.options.bayesian_update.empty() ? 1 : (r.options.bayesian_update[0] ? 1 : 0);
  r.true_type_labels = join_labels(r.true_types, r.spec.types);

  bool all_complete = true;
  for (const PolicyKind& p : r.options.policies)
    all_complete = all_complete && p.type == PolicyType::kCompleteInfo;
  bool all_degenerate = true;
  for (int i = 0; i < r.spec.num_players && all_degenerate; ++i)
    for (int l = 0; l < r.spec.types.num_types(i) && all_degenerate; ++l)
      all_degenerate = r.beliefs.row_degenerate(i, l);
  r.stc = all_complete || all_degenerate;
  return r;
}

// ---------------------------------------------------------------------------
// Artifact assembly.

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_u64(std::uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%llu", static_cast<unsigned long long>(v));
  return buf;
}

void write_text(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open " + path.string() + " for writing");
  out << content;
  out.flush();
  if (!out.good()) throw ConfigError("failed writing " + path.string());
}

struct MetricRow {
  int cell = 0;
  int rep = 0;
  std::uint64_t seed = 0;
  std::vector<double> cum_cost;
  double evader_dist = kNaN;
  double pursuer_dist = kNaN;
  double ktr = kNaN;
  double pd = kNaN;
};

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

// ---------------------------------------------------------------------------
// Public API.

ExperimentConfig parse_config_json(const std::string& json_text) {
  ordered_json root;
  try {
    root = ordered_json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config: JSON parse error: ") + e.what());
  }
  return config_from_json(root);
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config: cannot read " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();
  const std::string ext = path.extension().string();
  if (ext == ".yaml" || ext == ".yml") {
    YAML::Node node;
    try {
      node = YAML::Load(text);
    } catch (const YAML::Exception& e) {
      throw ConfigError("config: YAML parse error at line " + std::to_string(e.mark.line + 1) +
                        ", column " + std::to_string(e.mark.column + 1) + ": " + e.msg);
    }
    return config_from_json(yaml_to_json(node));
  }
  if (ext == ".json") return parse_config_json(text);
  throw ConfigError("config: unsupported extension '" + ext + "' (expected .yaml, .yml, .json)");
}

GameSpec build_spec(const ExperimentConfig& config, const CellOverride& cell) {
  if (config.scenario) {
    PursuitEvasionParams p = *config.scenario;
    if (cell.b1_high) p.b1_high = *cell.b1_high;
    if (cell.alpha) p.alpha = *cell.alpha;
    return build_pursuit_evasion(p);
  }
  if (config.inline_game) {
    if (cell.b1_high || cell.alpha)
      throw ConfigError("config: sweep: b1_high/alpha axes require the scenario");
    return *config.inline_game;
  }
  throw ConfigError("config: scenario: exactly one of scenario/game is required");
}

BeliefTable build_beliefs(const ExperimentConfig& config, const CellOverride& cell,
                          const GameSpec& spec) {
  const int N = spec.num_players;
  const JointType tt = cell.true_types ? *cell.true_types : config.true_types;
  std::vector<BeliefSpec> specs = config.beliefs;
  if (specs.empty()) specs.assign(N, BeliefSpec{});
  if (static_cast<int>(specs.size()) != N)
    throw ConfigError("config: beliefs: expected one entry per player");
  if (cell.initial_belief) {
    BeliefSpec override_spec;
    override_spec.kind = BeliefSpec::Kind::kOnTrue;
    override_spec.on_true = *cell.initial_belief;
    specs[0] = override_spec;
  }

  BeliefTable table = BeliefTable::Uniform(spec.types);
  for (int i = 0; i < N; ++i) {
    const int opp = spec.types.num_opponent(i);
    switch (specs[i].kind) {
      case BeliefSpec::Kind::kUniform:
        break;
      case BeliefSpec::Kind::kOnTrue: {
        const int idx = spec.types.flatten_opponent(i, tt);
        for (int l = 0; l < spec.types.num_types(i); ++l) {
          Vector row(opp);
          if (opp == 1) {
            row(0) = 1.0;
          } else {
            row.setConstant((1.0 - specs[i].on_true) / static_cast<double>(opp - 1));
            row(idx) = specs[i].on_true;
          }
          table.set_row(i, l, row);
        }
        break;
      }
      case BeliefSpec::Kind::kRows: {
        if (static_cast<int>(specs[i].rows.size()) != spec.types.num_types(i))
          throw ConfigError("config: beliefs: expected one row per own type");
        for (int l = 0; l < spec.types.num_types(i); ++l) {
          Vector row = specs[i].rows[l];
          if (row.size() != opp)
            throw ConfigError("config: beliefs: row length must match opponent profile count");
          double total = 0.0;
          for (int p = 0; p < row.size(); ++p) {
            if (row(p) < 0.0) throw ConfigError("config: beliefs: negative probability");
            total += row(p);
          }
          if (!(total > 0.0)) throw ConfigError("config: beliefs: row has no mass");
          table.set_row(i, l, row / total);
        }
        break;
      }
    }
  }
  return table;
}

EpisodeOptions build_options(const ExperimentConfig& config, const CellOverride& cell,
                             const GameSpec& spec) {
  const int N = spec.num_players;
  EpisodeOptions o;
  o.level = config.level;
  o.policies = config.policies;
  if (o.policies.empty()) o.policies.assign(N, PolicyKind{});
  if (static_cast<int>(o.policies.size()) != N)
    throw ConfigError("config: policies: expected one entry per player");
  if (cell.policy) {
    PolicyKind p;
    p.type = policy_from_name(*cell.policy, "sweep.policy");
    p.delta = config.metrics.delta;
    o.policies[0] = p;
  }
  o.bayesian_update = config.bayesian_update;
  if (o.bayesian_update.empty()) o.bayesian_update.assign(N, true);
  if (static_cast<int>(o.bayesian_update.size()) != N)
    throw ConfigError("config: bayesian_update: expected one flag per player");
  if (cell.bayesian) o.bayesian_update[0] = *cell.bayesian;
  return o;
}

std::vector<CellOverride> enumerate_cells(const ExperimentConfig& config) {
  auto expand = [](const auto& axis) {
    using T = typename std::decay_t<decltype(axis)>::value_type;
    std::vector<std::optional<T>> out;
    if (axis.empty()) {
      out.push_back(std::nullopt);
    } else {
      for (const auto& v : axis) out.push_back(v);
    }
    return out;
  };
  const auto beliefs = expand(config.axis_initial_belief);
  const auto b1s = expand(config.axis_b1_high);
  const auto alphas = expand(config.axis_alpha);
  const auto policies = expand(config.axis_policy);
  const auto bayes = expand(config.axis_bayesian);
  const auto truths = expand(config.axis_true_types);

  std::vector<CellOverride> cells;
  int index = 0;
  for (const auto& belief : beliefs)
    for (const auto& b1 : b1s)
      for (const auto& alpha : alphas)
        for (const auto& policy : policies)
          for (const auto& bayesian : bayes)
            for (const auto& truth : truths) {
              CellOverride cell;
              cell.initial_belief = belief;
              cell.b1_high = b1;
              cell.alpha = alpha;
              cell.policy = policy;
              if (bayesian) cell.bayesian = (*bayesian != 0);
              cell.true_types = truth;
              cell.index = index++;
              cells.push_back(std::move(cell));
            }
  return cells;
}

std::string canonical_config_json(const ExperimentConfig& config) {
  const GameSpec base = build_spec(config, CellOverride{});
  ordered_json j = ordered_json::object();
  j["schema_version"] = config.schema_version;
  j["name"] = config.name;
  j["seed"] = config.seed;
  j["replications"] = config.replications;
  j["level"] = config.level;
  j["formats"] = config.formats;
  if (config.write_trajectories)
    j["write_trajectories"] = *config.write_trajectories;
  else
    j["write_trajectories"] = nullptr;
  if (config.scenario) j["scenario"] = scenario_to_json(*config.scenario);
  if (config.inline_game) j["game"] = game_to_json(*config.inline_game);
  if (config.x0) j["x0"] = vector_to_json(*config.x0);
  j["true_types"] = true_types_to_json(config.true_types, base.types);

  ordered_json beliefs = ordered_json::array();
  const auto belief_specs =
      config.beliefs.empty() ? std::vector<BeliefSpec>(base.num_players, BeliefSpec{})
                             : config.beliefs;
  for (const BeliefSpec& b : belief_specs) beliefs.push_back(belief_to_json(b));
  j["beliefs"] = std::move(beliefs);

  ordered_json policies = ordered_json::array();
  const auto policy_kinds = config.policies.empty()
                                ? std::vector<PolicyKind>(base.num_players, PolicyKind{})
                                : config.policies;
  for (const PolicyKind& p : policy_kinds) policies.push_back(policy_to_json(p));
  j["policies"] = std::move(policies);

  ordered_json bayes = ordered_json::array();
  if (config.bayesian_update.empty()) {
    for (int i = 0; i < base.num_players; ++i) bayes.push_back(true);
  } else {
    for (bool b : config.bayesian_update) bayes.push_back(b);
  }
  j["bayesian_update"] = std::move(bayes);

  ordered_json metrics = ordered_json::object();
  metrics["delta"] = config.metrics.delta;
  metrics["epsilon"] = config.metrics.epsilon;
  metrics["k_tilde"] = config.metrics.k_tilde;
  metrics["threshold"] = config.metrics.threshold;
  metrics["eta0"] = config.metrics.eta0;
  if (config.metrics.eta.empty()) {
    ordered_json eta = ordered_json::array();
    for (int i = 0; i < base.num_players; ++i)
      eta.push_back(1.0 / static_cast<double>(base.num_players));
    metrics["eta"] = std::move(eta);
  } else {
    metrics["eta"] = config.metrics.eta;
  }
  metrics["paired_complete_info"] = config.metrics.paired_complete_info;
  j["metrics"] = std::move(metrics);

  ordered_json sweep = ordered_json::object();
  if (!config.axis_initial_belief.empty()) sweep["initial_belief"] = config.axis_initial_belief;
  if (!config.axis_b1_high.empty()) sweep["b1_high"] = config.axis_b1_high;
  if (!config.axis_alpha.empty()) sweep["alpha"] = config.axis_alpha;
  if (!config.axis_policy.empty()) sweep["policy"] = config.axis_policy;
  if (!config.axis_bayesian.empty()) sweep["bayesian"] = config.axis_bayesian;
  if (!config.axis_true_types.empty()) {
    ordered_json tts = ordered_json::array();
    for (const JointType& tt : config.axis_true_types)
      tts.push_back(true_types_to_json(tt, base.types));
    sweep["true_types"] = std::move(tts);
  }
  j["sweep"] = std::move(sweep);
  return j.dump();
}

std::string run_id(const ExperimentConfig& config) {
  const std::uint64_t h = fnv1a64(canonical_config_json(config));
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

RunOutput run_engine(ExperimentConfig config, bool default_trajectories,
                     const std::string& command) {
  if (!config.has_seed)
    throw ConfigError("config: seed: required (wall-clock seeding is not supported)");
  if (!config.write_trajectories) config.write_trajectories = default_trajectories;
  const bool write_traj = *config.write_trajectories;
  const bool any_axis = !config.axis_initial_belief.empty() || !config.axis_b1_high.empty() ||
                        !config.axis_alpha.empty() || !config.axis_policy.empty() ||
                        !config.axis_bayesian.empty() || !config.axis_true_types.empty();
  if (command == "sweep" && !any_axis)
    throw ConfigError("config: sweep: at least one non-empty sweep axis is required");

  const std::string canonical = canonical_config_json(config);
  const std::uint64_t stream_base = fnv1a64(canonical);
  char idbuf[17];
  std::snprintf(idbuf, sizeof(idbuf), "%016llx", static_cast<unsigned long long>(stream_base));
  const std::string id = idbuf;

  const std::vector<CellOverride> cells = enumerate_cells(config);
  std::vector<ResolvedCell> resolved;
  resolved.reserve(cells.size());
  for (const CellOverride& cell : cells) resolved.push_back(resolve_cell(config, cell));

  const int N = resolved.front().spec.num_players;
  const std::vector<double> eta =
      config.metrics.eta.empty()
          ? std::vector<double>(N, 1.0 / static_cast<double>(N))
          : config.metrics.eta;

  std::vector<std::vector<MetricRow>> cell_rows(cells.size());
  std::vector<const Trajectory*> traj_order;  // stable pointers: results stay alive below
  std::vector<MonteCarloResult> results(cells.size());

  for (std::size_t ci = 0; ci < cells.size(); ++ci) {
    const ResolvedCell& rc = resolved[ci];
    results[ci] = monte_carlo(rc.spec, rc.true_types, rc.x0, rc.beliefs, rc.options,
                              config.replications, stream_base, cells[ci].index, config.threads);
    const MonteCarloResult& mc = results[ci];

    // Paired complete-information baselines share the episode seeds.
    std::vector<std::vector<double>> baseline(config.replications);
    if (config.metrics.paired_complete_info) {
      BeliefTable complete = BeliefTable::Uniform(rc.spec.types);
      for (int i = 0; i < N; ++i) complete.make_complete_info(rc.spec.types, i, rc.true_types);
      EpisodeOptions base_opts = rc.options;
      base_opts.policies.assign(N, PolicyKind{});
      base_opts.bayesian_update.clear();
      parallel_for(config.replications, config.threads, [&](int rep) {
        const Trajectory t = run_episode(rc.spec, rc.true_types, rc.x0, complete, base_opts,
                                         mc.trajectories[rep].seed);
        std::vector<double> costs(N);
        for (int i = 0; i < N; ++i) costs[i] = t.final_cost(i);
        baseline[rep] = std::move(costs);
      });
    }

    const int k_tilde =
        config.metrics.k_tilde >= 0 ? config.metrics.k_tilde : rc.spec.horizon / 2;
    (void)k_tilde;  // per-row metric uses ktr directly; k_tilde feeds summaries downstream

    cell_rows[ci].resize(config.replications);
    for (int rep = 0; rep < config.replications; ++rep) {
      const Trajectory& traj = mc.trajectories[rep];
      MetricRow row;
      row.cell = cells[ci].index;
      row.rep = rep;
      row.seed = traj.seed;
      row.cum_cost.resize(N);
      for (int i = 0; i < N; ++i) row.cum_cost[i] = traj.final_cost(i);
      if (rc.params) {
        row.evader_dist =
            evader_endpoint_distance(*rc.params, traj.states.back(), rc.true_types[kEvader]);
        row.pursuer_dist = pursuer_endpoint_distance(traj.states.back());
      }
      if (N == 2) {
        const std::vector<double> seq =
            true_type_belief_sequence(traj, rc.spec.types, 0, 1);
        row.ktr = truth_revealing_stage(seq, config.metrics.delta);
      }
      if (config.metrics.paired_complete_info) {
        row.pd = price_of_deception(baseline[rep], row.cum_cost, config.metrics.eta0, eta);
      }
      cell_rows[ci][rep] = std::move(row);
    }
    for (const Trajectory& t : results[ci].trajectories) traj_order.push_back(&t);
  }

  // ---- artifacts ----------------------------------------------------------
  const fs::path dir = fs::path(config.output_dir) / config.name / id;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("config: output_dir: cannot create " + dir.string());

  const bool csv = std::find(config.formats.begin(), config.formats.end(), "csv") !=
                   config.formats.end();
  const bool jsonfmt = std::find(config.formats.begin(), config.formats.end(), "json") !=
                       config.formats.end();

  // Manifest.
  ordered_json manifest = ordered_json::object();
  manifest["artifact_version"] = kArtifactVersion;
  manifest["schema_version"] = config.schema_version;
  manifest["name"] = config.name;
  manifest["run_id"] = id;
  manifest["command"] = command;
  manifest["seed"] = config.seed;
  manifest["replications"] = config.replications;
  manifest["episodes"] = static_cast<int>(cells.size()) * config.replications;
  bool all_stc = true;
  ordered_json cell_list = ordered_json::array();
  for (std::size_t ci = 0; ci < cells.size(); ++ci) {
    const ResolvedCell& rc = resolved[ci];
    ordered_json c = ordered_json::object();
    c["index"] = cells[ci].index;
    c["initial_belief"] = rc.initial_belief;
    if (rc.params) {
      c["b1_high"] = rc.b1_high;
      c["alpha"] = rc.alpha;
    }
    c["policy"] = rc.policy;
    c["bayesian"] = rc.bayesian != 0;
    c["true_types"] = rc.true_type_labels;
    c["stc_regime"] = rc.stc;
    all_stc = all_stc && rc.stc;
    cell_list.push_back(std::move(c));
  }
  manifest["stc_regime"] = all_stc;
  manifest["cells"] = std::move(cell_list);
  manifest["config"] = ordered_json::parse(canonical);
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");

  // Metric rows.
  std::ostringstream metrics_csv;
  ordered_json metrics_json = ordered_json::array();
  metrics_csv << "cell,rep,seed,initial_belief,b1_high,alpha,policy,bayesian,true_types";
  for (int i = 0; i < N; ++i) metrics_csv << ",cum_cost_" << i;
  metrics_csv << ",evader_dist,pursuer_dist,ktr,pd\n";
  for (std::size_t ci = 0; ci < cells.size(); ++ci) {
    const ResolvedCell& rc = resolved[ci];
    for (const MetricRow& row : cell_rows[ci]) {
      metrics_csv << row.cell << ',' << row.rep << ',' << fmt_u64(row.seed) << ','
                  << fmt_double(rc.initial_belief) << ',' << fmt_double(rc.b1_high) << ','
                  << fmt_double(rc.alpha) << ',' << rc.policy << ',' << rc.bayesian << ','
                  << rc.true_type_labels;
      for (int i = 0; i < N; ++i) metrics_csv << ',' << fmt_double(row.cum_cost[i]);
      metrics_csv << ',' << fmt_double(row.evader_dist) << ',' << fmt_double(row.pursuer_dist)
                  << ',' << fmt_double(row.ktr) << ',' << fmt_double(row.pd) << '\n';
      if (jsonfmt) {
        ordered_json r = ordered_json::object();
        r["cell"] = row.cell;
        r["rep"] = row.rep;
        r["seed"] = row.seed;
        r["initial_belief"] = rc.initial_belief;
        if (rc.params) {
          r["b1_high"] = rc.b1_high;
          r["alpha"] = rc.alpha;
        }
        r["policy"] = rc.policy;
        r["bayesian"] = rc.bayesian != 0;
        r["true_types"] = rc.true_type_labels;
        r["cum_cost"] = row.cum_cost;
        if (rc.params) {
          r["evader_dist"] = row.evader_dist;
          r["pursuer_dist"] = row.pursuer_dist;
        }
        if (!std::isnan(row.ktr)) r["ktr"] = static_cast<int>(row.ktr);
        if (!std::isnan(row.pd)) r["pd"] = row.pd;
        metrics_json.push_back(std::move(r));
      }
    }
  }
  if (csv) write_text(dir / "metrics.csv", metrics_csv.str());
  if (jsonfmt) write_text(dir / "metrics.json", metrics_json.dump(2) + "\n");

  // Summaries: one row per (cell, metric).
  std::ostringstream summary_csv;
  ordered_json summary_json = ordered_json::array();
  summary_csv << "cell,initial_belief,b1_high,alpha,policy,bayesian,true_types,metric,n,mean,"
                 "variance,std_error\n";
  for (std::size_t ci = 0; ci < cells.size(); ++ci) {
    const ResolvedCell& rc = resolved[ci];
    std::vector<std::pair<std::string, std::vector<double>>> columns;
    for (int i = 0; i < N; ++i) {
      std::vector<double> v;
      for (const MetricRow& row : cell_rows[ci]) v.push_back(row.cum_cost[i]);
      columns.emplace_back("cum_cost_" + std::to_string(i), std::move(v));
    }
    auto column = [&](const char* name, auto getter) {
      std::vector<double> v;
      for (const MetricRow& row : cell_rows[ci]) v.push_back(getter(row));
      columns.emplace_back(name, std::move(v));
    };
    column("evader_dist", [](const MetricRow& r) { return r.evader_dist; });
    column("pursuer_dist", [](const MetricRow& r) { return r.pursuer_dist; });
    column("ktr", [](const MetricRow& r) { return r.ktr; });
    column("pd", [](const MetricRow& r) { return r.pd; });
    for (const auto& [name, samples] : columns) {
      const McStatistic s = summarize(samples);
      summary_csv << cells[ci].index << ',' << fmt_double(rc.initial_belief) << ','
                  << fmt_double(rc.b1_high) << ',' << fmt_double(rc.alpha) << ',' << rc.policy
                  << ',' << rc.bayesian << ',' << rc.true_type_labels << ',' << name << ','
                  << samples.size() << ',' << fmt_double(s.mean) << ',' << fmt_double(s.variance)
                  << ',' << fmt_double(s.std_error) << '\n';
      if (jsonfmt) {
        ordered_json r = ordered_json::object();
        r["cell"] = cells[ci].index;
        r["metric"] = name;
        r["n"] = samples.size();
        r["mean"] = s.mean;
        r["variance"] = s.variance;
        r["std_error"] = s.std_error;
        summary_json.push_back(std::move(r));
      }
    }
  }
  if (csv) write_text(dir / "summary.csv", summary_csv.str());
  if (jsonfmt) write_text(dir / "summary.json", summary_json.dump(2) + "\n");

  // Trajectories.
  if (write_traj) {
    std::ostringstream traj_csv;
    ordered_json traj_json = ordered_json::array();
    traj_csv << "stage,cell,rep";
    const GameSpec& spec0 = resolved.front().spec;
    for (int d = 0; d < spec0.state_dim; ++d) traj_csv << ",x_" << d;
    for (int i = 0; i < N; ++i)
      for (int d = 0; d < spec0.control_dims[i]; ++d) traj_csv << ",u" << i << "_" << d;
    for (int i = 0; i < N; ++i)
      for (int p = 0; p < spec0.types.num_opponent(i); ++p) traj_csv << ",belief" << i << "_" << p;
    for (int i = 0; i < N; ++i) traj_csv << ",stage_cost_" << i;
    for (int i = 0; i < N; ++i) traj_csv << ",cum_cost_" << i;
    traj_csv << '\n';
    for (std::size_t ci = 0; ci < cells.size(); ++ci) {
      const ResolvedCell& rc = resolved[ci];
      for (int rep = 0; rep < config.replications; ++rep) {
        const Trajectory& traj = results[ci].trajectories[rep];
        const int K = rc.spec.horizon;
        for (int k = 0; k <= K; ++k) {
          traj_csv << k << ',' << cells[ci].index << ',' << rep;
          for (int d = 0; d < rc.spec.state_dim; ++d)
            traj_csv << ',' << fmt_double(traj.states[k](d));
          for (int i = 0; i < N; ++i)
            for (int d = 0; d < rc.spec.control_dims[i]; ++d)
              traj_csv << ',' << (k < K ? fmt_double(traj.actions[k][i](d)) : "nan");
          for (int i = 0; i < N; ++i) {
            const Vector& row = traj.beliefs[k].row(i, rc.true_types[i]);
            for (int p = 0; p < row.size(); ++p) traj_csv << ',' << fmt_double(row(p));
          }
          for (int i = 0; i < N; ++i) traj_csv << ',' << fmt_double(traj.stage_costs[k][i]);
          for (int i = 0; i < N; ++i) traj_csv << ',' << fmt_double(traj.cumulative_costs[k][i]);
          traj_csv << '\n';
        }
        if (jsonfmt) {
          ordered_json t = ordered_json::object();
          t["cell"] = cells[ci].index;
          t["rep"] = rep;
          t["seed"] = traj.seed;
          ordered_json states = ordered_json::array();
          for (const Vector& x : traj.states) states.push_back(vector_to_json(x));
          t["states"] = std::move(states);
          ordered_json actions = ordered_json::array();
          for (const auto& stage : traj.actions) {
            ordered_json per_player = ordered_json::array();
            for (const Vector& u : stage) per_player.push_back(vector_to_json(u));
            actions.push_back(std::move(per_player));
          }
          t["actions"] = std::move(actions);
          t["stage_costs"] = traj.stage_costs;
          t["cumulative_costs"] = traj.cumulative_costs;
          t["replan_stages"] = traj.replan_stages;
          t["conservative_switch"] = traj.conservative_switch;
          traj_json.push_back(std::move(t));
        }
      }
    }
    if (csv) write_text(dir / "trajectories.csv", traj_csv.str());
    if (jsonfmt) write_text(dir / "trajectories.json", traj_json.dump(2) + "\n");
  }

  RunOutput out;
  out.directory = dir;
  out.id = id;
  out.cells = static_cast<int>(cells.size());
  out.episodes = static_cast<int>(cells.size()) * config.replications;
  return out;
}

}  // namespace

RunOutput cmd_run(const ExperimentConfig& config) { return run_engine(config, true, "run"); }

RunOutput cmd_sweep(const ExperimentConfig& config) { return run_engine(config, false, "sweep"); }

int cmd_validate(const ExperimentConfig& config, std::ostream& log) {
  try {
    if (!config.has_seed) {
      log << "error: seed is required\n";
      return 2;
    }
    const std::vector<CellOverride> cells = enumerate_cells(config);
    const GameSpec base = build_spec(config, CellOverride{});
    const ValidationReport report = validate_spec(base);
    for (const auto& w : report.warnings) log << "warning: " << w << "\n";
    if (!report.valid()) {
      for (const auto& e : report.errors) log << "error: " << e << "\n";
      return 2;
    }
    log << "structure: ok (players=" << base.num_players << ", horizon=" << base.horizon
        << ", state_dim=" << base.state_dim << ")\n";

    const ControllabilityReport ctrl = check_controllability(base);
    log << "controllability: " << (ctrl.overall ? "every" : "not every")
        << " (player, joint type) pair is controllable at horizon scale\n";

    // Dry backward passes: the uniform table plus each cell's initial table.
    std::vector<std::pair<std::string, const BeliefTable*>> tables;
    BeliefTable uniform = BeliefTable::Uniform(base.types);
    tables.emplace_back("uniform", &uniform);
    std::vector<BeliefTable> cell_tables;
    cell_tables.reserve(cells.size());
    std::vector<GameSpec> cell_specs;
    cell_specs.reserve(cells.size());
    for (const CellOverride& cell : cells) {
      cell_specs.push_back(build_spec(config, cell));
      cell_tables.push_back(build_beliefs(config, cell, cell_specs.back()));
    }
    for (std::size_t ci = 0; ci < cells.size(); ++ci)
      tables.emplace_back("cell " + std::to_string(cells[ci].index), &cell_tables[ci]);

    for (std::size_t ti = 0; ti < tables.size(); ++ti) {
      const GameSpec& spec = (ti == 0) ? base : cell_specs[ti - 1];
      const RiccatiSolution sol = backward_pass(spec, *tables[ti].second, 0);
      double worst_rcond = std::numeric_limits<double>::infinity();
      double worst_ratio = std::numeric_limits<double>::infinity();
      for (int k = 0; k < spec.horizon; ++k) {
        worst_rcond = std::min(worst_rcond, sol.diagnostics[k].w0_rcond);
        worst_ratio = std::min(worst_ratio, sol.diagnostics[k].min_r_eig_ratio);
      }
      log << "equilibrium (" << tables[ti].first << "): exists at every stage; min rcond(-W0) "
          << worst_rcond << ", min eig ratio(R) " << worst_ratio << "\n";
      for (int k = 0; k < spec.horizon; ++k)
        log << "  stage " << k << ": rcond " << sol.diagnostics[k].w0_rcond << ", R ratio "
            << sol.diagnostics[k].min_r_eig_ratio << "\n";
    }
    log << "configuration valid\n";
    return 0;
  } catch (const SolverError& e) {
    log << "solver error at stage " << e.stage << ": " << e.what() << "\n";
    return 3;
  } catch (const ConfigError& e) {
    log << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace lqdg
