#include "pofel/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

namespace pofel {
namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw Error(ErrorCode::kConfig, path + ": " + msg);
}

class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_.empty() ? "<root>" : path_, "expected an object");
  }

  template <typename F>
  void opt(const char* key, F&& read) {
    known_.insert(key);
    auto it = j_.find(key);
    if (it != j_.end()) read(*it, child(key));
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!known_.count(k)) fail(child(k), "unknown key");
    }
  }

  std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> known_;
};

double get_double(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) fail(path, "must be finite");
  return v;
}

std::int64_t get_int(const json& j, const std::string& path) {
  if (!j.is_number_integer()) fail(path, "expected an integer");
  return j.get<std::int64_t>();
}

std::uint64_t get_u64(const json& j, const std::string& path) {
  if (!j.is_number_unsigned()) fail(path, "expected a non-negative integer");
  return j.get<std::uint64_t>();
}

bool get_bool(const json& j, const std::string& path) {
  if (!j.is_boolean()) fail(path, "expected true or false");
  return j.get<bool>();
}

std::string get_string(const json& j, const std::string& path) {
  if (!j.is_string()) fail(path, "expected a string");
  return j.get<std::string>();
}

std::vector<double> get_double_list(const json& j, const std::string& path) {
  if (j.is_number()) return {get_double(j, path)};
  if (!j.is_array() || j.empty()) fail(path, "expected a number or a non-empty array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(get_double(j[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

std::optional<NodeId> get_optional_id(const json& j, const std::string& path) {
  if (j.is_null()) return std::nullopt;
  return static_cast<NodeId>(get_int(j, path));
}

template <typename Parse>
auto get_enum(const json& j, const std::string& path, Parse parse) {
  const std::string s = get_string(j, path);
  try {
    return parse(s);
  } catch (const Error& e) {
    fail(path, e.what());
  }
}

const char* trainer_name(Trainer t) { return t == Trainer::kToyClassifier ? "TOY_CLASSIFIER" : "SYNTHETIC_NOISE"; }
const char* distribution_name(DataDistribution d) { return d == DataDistribution::kNonIid ? "NON_IID" : "IID"; }
const char* ledger_mode_name(LedgerMode m) { return m == LedgerMode::kDigestsOnly ? "DIGESTS_ONLY" : "FULL_MODELS"; }

Trainer parse_trainer(const std::string& s) {
  if (s == "SYNTHETIC_NOISE") return Trainer::kSyntheticNoise;
  if (s == "TOY_CLASSIFIER") return Trainer::kToyClassifier;
  throw Error(ErrorCode::kConfig, "unknown trainer '" + s + "'");
}

DataDistribution parse_distribution(const std::string& s) {
  if (s == "IID") return DataDistribution::kIid;
  if (s == "NON_IID") return DataDistribution::kNonIid;
  throw Error(ErrorCode::kConfig, "unknown distribution '" + s + "'");
}

LedgerMode parse_ledger_mode(const std::string& s) {
  if (s == "FULL_MODELS") return LedgerMode::kFullModels;
  if (s == "DIGESTS_ONLY") return LedgerMode::kDigestsOnly;
  throw Error(ErrorCode::kConfig, "unknown ledger mode '" + s + "'");
}

json optional_id_json(const std::optional<NodeId>& id) { return id ? json(*id) : json(nullptr); }

json range_json(const Range& r) { return {{"min", r.min}, {"max", r.max}, {"step", r.step}}; }

void read_range(const json& j, const std::string& path, Range& r) {
  Section s(j, path);
  s.opt("min", [&](const json& v, const std::string& p) { r.min = get_double(v, p); });
  s.opt("max", [&](const json& v, const std::string& p) { r.max = get_double(v, p); });
  s.opt("step", [&](const json& v, const std::string& p) { r.step = get_double(v, p); });
  s.finish();
}

}  // namespace

std::vector<double> Range::points() const {
  if (!(step > 0.0)) throw Error(ErrorCode::kConfig, "range step must be positive");
  if (max < min) throw Error(ErrorCode::kConfig, "range max must not be below min");
  std::vector<double> out;
  const auto n = static_cast<std::int64_t>(std::floor((max - min) / step + 0.5));
  for (std::int64_t i = 0; i <= n; ++i) out.push_back(min + static_cast<double>(i) * step);
  return out;
}

IncentiveParams IncentiveConfig::params() const {
  IncentiveParams p;
  p.B = B;
  p.lambda = lambda;
  p.phi = phi;
  const auto n = static_cast<std::size_t>(n_nodes);
  auto broadcast = [&](const std::vector<double>& v, const char* name) {
    if (v.size() == 1) return std::vector<double>(n, v.front());
    if (v.size() != n) {
      throw Error(ErrorCode::kConfig, std::string("incentive.") + name + ": expected 1 or n_nodes values");
    }
    return v;
  };
  p.gamma = broadcast(gamma, "gamma");
  p.mu = broadcast(mu, "mu");
  return p;
}

void IncentiveConfig::validate() const {
  if (n_nodes < 1) throw Error(ErrorCode::kConfig, "incentive.n_nodes: must be at least 1");
  params().validate();
  if (!(fixed_F > 0.0)) throw Error(ErrorCode::kConfig, "incentive.fixed_F: must be positive");
  if (!(fixed_delta > 0.0)) throw Error(ErrorCode::kConfig, "incentive.fixed_delta: must be positive");
  if (fixed_f_i < 0.0) throw Error(ErrorCode::kConfig, "incentive.fixed_f_i: must be non-negative");
  if (!(sum_f_others > 0.0)) throw Error(ErrorCode::kConfig, "incentive.sum_f_others: must be positive");
  if (!(tol > 0.0)) throw Error(ErrorCode::kConfig, "incentive.tol: must be positive");
  if (!(delta0 > 0.0)) throw Error(ErrorCode::kConfig, "incentive.delta0: must be positive");
  for (const auto& [name, r] : {std::pair{"delta_range", &delta_range}, {"f_range", &f_range}, {"F_range", &F_range}}) {
    try {
      r->points();
    } catch (const Error& e) {
      throw Error(ErrorCode::kConfig, std::string("incentive.") + name + ": " + e.what());
    }
  }
  if (delta_range.min <= 0.0) throw Error(ErrorCode::kConfig, "incentive.delta_range.min: must be positive");
  if (F_range.min <= 0.0) throw Error(ErrorCode::kConfig, "incentive.F_range.min: must be positive");
  if (f_range.min < 0.0) throw Error(ErrorCode::kConfig, "incentive.f_range.min: must be non-negative");
}

std::vector<AdversaryProfile> ExperimentConfig::adversaries() const {
  std::vector<AdversaryProfile> out = profiles;
  const auto count = static_cast<int>(std::llround(bribed.fraction * n_nodes));
  const NodeId first = n_nodes - count + 1;
  for (NodeId node = first; node <= n_nodes; ++node) {
    AdversaryProfile p;
    p.node_id = node;
    p.kind = AdversaryKind::kBribedVoter;
    p.vote_strategy = bribed.vote_strategy;
    p.cbm = bribed.cbm;
    if (bribed.vote_strategy == VoteStrategy::kTargeted) p.target_id = bribed.target_id.value_or(first);
    out.push_back(p);
  }
  return out;
}

EngineConfig ExperimentConfig::engine_config() const {
  EngineConfig e;
  e.n_nodes = n_nodes;
  e.seed = seed;
  e.fel = fel;
  e.fel.seed = seed;
  e.consensus = consensus;
  e.adversaries = adversaries();
  e.allow_majority = allow_majority;
  e.holdout_size = holdout_size;
  return e;
}

void ExperimentConfig::validate() const {
  if (n_nodes < 2) throw Error(ErrorCode::kConfig, "network.n_nodes: must be at least 2");
  if (rounds < 1) throw Error(ErrorCode::kConfig, "rounds: must be positive");
  if (!(bribed.fraction >= 0.0 && bribed.fraction <= 1.0)) {
    throw Error(ErrorCode::kConfig, "adversary.bribed.fraction: must lie in [0, 1]");
  }
  std::set<NodeId> seen;
  for (const auto& p : adversaries()) {
    if (p.node_id < 1 || p.node_id > n_nodes) {
      throw Error(ErrorCode::kConfig, "adversary: node " + std::to_string(p.node_id) + " is outside 1.." +
                                          std::to_string(n_nodes));
    }
    if (!seen.insert(p.node_id).second) {
      throw Error(ErrorCode::kConfig, "adversary: node " + std::to_string(p.node_id) + " has two profiles");
    }
    try {
      p.validate();
    } catch (const Error& e) {
      throw Error(ErrorCode::kConfig, std::string("adversary: ") + e.what());
    }
  }
  engine_config().validate();
  incentive.validate();
}

json config_to_json(const ExperimentConfig& cfg) {
  const auto& f = cfg.fel;
  json overrides = json::object();
  for (const auto& [node, scale] : f.noise_scale_overrides) overrides[std::to_string(node)] = scale;

  json profiles = json::array();
  for (const auto& p : cfg.profiles) {
    profiles.push_back({{"node_id", p.node_id},
                        {"kind", to_string(p.kind)},
                        {"plagiarism_strategy", to_string(p.plagiarism_strategy)},
                        {"vote_strategy", to_string(p.vote_strategy)},
                        {"cbm", p.cbm},
                        {"target_id", optional_id_json(p.target_id)}});
  }
  const auto& c = cfg.consensus;
  const auto& in = cfg.incentive;
  return {
      {"network", {{"n_nodes", cfg.n_nodes}, {"clients_per_cluster", f.clients_per_cluster}, {"seed", cfg.seed}}},
      {"fel",
       {{"fel_iters_per_round", f.fel_iters_per_round},
        {"model_dim", f.model_dim},
        {"trainer", trainer_name(f.trainer)},
        {"distribution", distribution_name(f.distribution)},
        {"label_skew", f.label_skew},
        {"num_classes", f.num_classes},
        {"feature_dim", f.feature_dim},
        {"samples_min", f.samples_min},
        {"samples_max", f.samples_max},
        {"class_separation", f.class_separation},
        {"learning_rate", f.learning_rate},
        {"local_steps", f.local_steps},
        {"noise_scale", f.noise_scale},
        {"noise_scale_overrides", overrides},
        {"holdout_size", cfg.holdout_size}}},
      {"consensus",
       {{"g_max", c.g_max},
        {"window_c", c.btsv.window_c},
        {"beta", c.btsv.beta},
        {"theta", c.btsv.theta},
        {"epsilon", c.btsv.epsilon},
        {"alpha", c.btsv.alpha},
        {"nonce_len", c.hcds.nonce_len},
        {"bind_identity", c.hcds.bind_identity},
        {"phase_barrier", c.hcds.phase_barrier},
        {"timeout_steps", c.hcds.timeout_steps},
        {"ledger_mode", ledger_mode_name(c.ledger_mode)},
        {"verify_unanimity", c.verify_unanimity}}},
      {"adversary",
       {{"allow_majority", cfg.allow_majority},
        {"profiles", profiles},
        {"bribed",
         {{"fraction", cfg.bribed.fraction},
          {"vote_strategy", to_string(cfg.bribed.vote_strategy)},
          {"cbm", cfg.bribed.cbm},
          {"target_id", optional_id_json(cfg.bribed.target_id)}}}}},
      {"incentive",
       {{"B", in.B},
        {"lambda", in.lambda},
        {"phi", in.phi},
        {"gamma", in.gamma},
        {"mu", in.mu},
        {"n_nodes", in.n_nodes},
        {"fixed_F", in.fixed_F},
        {"fixed_delta", in.fixed_delta},
        {"fixed_f_i", in.fixed_f_i},
        {"sum_f_others", in.sum_f_others},
        {"tol", in.tol},
        {"delta0", in.delta0},
        {"delta_range", range_json(in.delta_range)},
        {"f_range", range_json(in.f_range)},
        {"F_range", range_json(in.F_range)}}},
      {"rounds", cfg.rounds},
      {"output_dir", cfg.output_dir}};
}

ExperimentConfig config_from_json(const json& doc) {
  ExperimentConfig cfg;
  auto& f = cfg.fel;
  auto& c = cfg.consensus;
  auto& in = cfg.incentive;
  auto as_int = [](const json& v, const std::string& p) { return static_cast<int>(get_int(v, p)); };

  Section root(doc, "");
  root.opt("network", [&](const json& j, const std::string& path) {
    Section s(j, path);
    s.opt("n_nodes", [&](const json& v, const std::string& p) { cfg.n_nodes = as_int(v, p); });
    s.opt("clients_per_cluster", [&](const json& v, const std::string& p) { f.clients_per_cluster = as_int(v, p); });
    s.opt("seed", [&](const json& v, const std::string& p) { cfg.seed = get_u64(v, p); });
    s.finish();
  });
  root.opt("fel", [&](const json& j, const std::string& path) {
    Section s(j, path);
    s.opt("fel_iters_per_round", [&](const json& v, const std::string& p) { f.fel_iters_per_round = as_int(v, p); });
    s.opt("model_dim", [&](const json& v, const std::string& p) { f.model_dim = as_int(v, p); });
    s.opt("trainer", [&](const json& v, const std::string& p) { f.trainer = get_enum(v, p, parse_trainer); });
    s.opt("distribution",
          [&](const json& v, const std::string& p) { f.distribution = get_enum(v, p, parse_distribution); });
    s.opt("label_skew", [&](const json& v, const std::string& p) { f.label_skew = get_double(v, p); });
    s.opt("num_classes", [&](const json& v, const std::string& p) { f.num_classes = as_int(v, p); });
    s.opt("feature_dim", [&](const json& v, const std::string& p) { f.feature_dim = as_int(v, p); });
    s.opt("samples_min", [&](const json& v, const std::string& p) { f.samples_min = as_int(v, p); });
    s.opt("samples_max", [&](const json& v, const std::string& p) { f.samples_max = as_int(v, p); });
    s.opt("class_separation", [&](const json& v, const std::string& p) { f.class_separation = get_double(v, p); });
    s.opt("learning_rate", [&](const json& v, const std::string& p) { f.learning_rate = get_double(v, p); });
    s.opt("local_steps", [&](const json& v, const std::string& p) { f.local_steps = as_int(v, p); });
    s.opt("noise_scale", [&](const json& v, const std::string& p) { f.noise_scale = get_double(v, p); });
    s.opt("noise_scale_overrides", [&](const json& v, const std::string& p) {
      if (!v.is_object()) fail(p, "expected an object mapping node id to noise scale");
      f.noise_scale_overrides.clear();
      for (const auto& [key, scale] : v.items()) {
        std::size_t used = 0;
        std::int64_t node = 0;
        try {
          node = std::stoll(key, &used);
        } catch (const std::exception&) {
          used = 0;
        }
        if (used != key.size() || key.empty()) fail(p + "." + key, "key must be a node id");
        f.noise_scale_overrides[node] = get_double(scale, p + "." + key);
      }
    });
    s.opt("holdout_size", [&](const json& v, const std::string& p) { cfg.holdout_size = as_int(v, p); });
    s.finish();
  });
  root.opt("consensus", [&](const json& j, const std::string& path) {
    Section s(j, path);
    s.opt("g_max", [&](const json& v, const std::string& p) { c.g_max = get_double(v, p); });
    s.opt("window_c", [&](const json& v, const std::string& p) { c.btsv.window_c = get_u64(v, p); });
    s.opt("beta", [&](const json& v, const std::string& p) { c.btsv.beta = get_double(v, p); });
    s.opt("theta", [&](const json& v, const std::string& p) { c.btsv.theta = get_double(v, p); });
    s.opt("epsilon", [&](const json& v, const std::string& p) { c.btsv.epsilon = get_double(v, p); });
    s.opt("alpha", [&](const json& v, const std::string& p) { c.btsv.alpha = get_double(v, p); });
    s.opt("nonce_len", [&](const json& v, const std::string& p) {
      c.hcds.nonce_len = static_cast<std::size_t>(get_u64(v, p));
    });
    s.opt("bind_identity", [&](const json& v, const std::string& p) { c.hcds.bind_identity = get_bool(v, p); });
    s.opt("phase_barrier", [&](const json& v, const std::string& p) { c.hcds.phase_barrier = get_bool(v, p); });
    s.opt("timeout_steps", [&](const json& v, const std::string& p) { c.hcds.timeout_steps = as_int(v, p); });
    s.opt("ledger_mode", [&](const json& v, const std::string& p) { c.ledger_mode = get_enum(v, p, parse_ledger_mode); });
    s.opt("verify_unanimity", [&](const json& v, const std::string& p) { c.verify_unanimity = get_bool(v, p); });
    s.finish();
  });
  root.opt("adversary", [&](const json& j, const std::string& path) {
    Section s(j, path);
    s.opt("allow_majority", [&](const json& v, const std::string& p) { cfg.allow_majority = get_bool(v, p); });
    s.opt("profiles", [&](const json& v, const std::string& p) {
      if (!v.is_array()) fail(p, "expected an array");
      cfg.profiles.clear();
      for (std::size_t i = 0; i < v.size(); ++i) {
        Section ps(v[i], p + "[" + std::to_string(i) + "]");
        AdversaryProfile prof;
        bool has_id = false;
        ps.opt("node_id", [&](const json& x, const std::string& q) {
          prof.node_id = static_cast<NodeId>(get_int(x, q));
          has_id = true;
        });
        ps.opt("kind", [&](const json& x, const std::string& q) { prof.kind = get_enum(x, q, parse_adversary_kind); });
        ps.opt("plagiarism_strategy", [&](const json& x, const std::string& q) {
          prof.plagiarism_strategy = get_enum(x, q, parse_plagiarism_strategy);
        });
        ps.opt("vote_strategy", [&](const json& x, const std::string& q) {
          prof.vote_strategy = get_enum(x, q, parse_vote_strategy);
        });
        ps.opt("cbm", [&](const json& x, const std::string& q) { prof.cbm = get_double(x, q); });
        ps.opt("target_id", [&](const json& x, const std::string& q) { prof.target_id = get_optional_id(x, q); });
        ps.finish();
        if (!has_id) fail(ps.child("node_id"), "required");
        cfg.profiles.push_back(prof);
      }
    });
    s.opt("bribed", [&](const json& v, const std::string& p) {
      Section bs(v, p);
      bs.opt("fraction", [&](const json& x, const std::string& q) { cfg.bribed.fraction = get_double(x, q); });
      bs.opt("vote_strategy", [&](const json& x, const std::string& q) {
        cfg.bribed.vote_strategy = get_enum(x, q, parse_vote_strategy);
      });
      bs.opt("cbm", [&](const json& x, const std::string& q) { cfg.bribed.cbm = get_double(x, q); });
      bs.opt("target_id", [&](const json& x, const std::string& q) { cfg.bribed.target_id = get_optional_id(x, q); });
      bs.finish();
    });
    s.finish();
  });
  root.opt("incentive", [&](const json& j, const std::string& path) {
    Section s(j, path);
    s.opt("B", [&](const json& v, const std::string& p) { in.B = get_double(v, p); });
    s.opt("lambda", [&](const json& v, const std::string& p) { in.lambda = get_double(v, p); });
    s.opt("phi", [&](const json& v, const std::string& p) { in.phi = get_double(v, p); });
    s.opt("gamma", [&](const json& v, const std::string& p) { in.gamma = get_double_list(v, p); });
    s.opt("mu", [&](const json& v, const std::string& p) { in.mu = get_double_list(v, p); });
    s.opt("n_nodes", [&](const json& v, const std::string& p) { in.n_nodes = as_int(v, p); });
    s.opt("fixed_F", [&](const json& v, const std::string& p) { in.fixed_F = get_double(v, p); });
    s.opt("fixed_delta", [&](const json& v, const std::string& p) { in.fixed_delta = get_double(v, p); });
    s.opt("fixed_f_i", [&](const json& v, const std::string& p) { in.fixed_f_i = get_double(v, p); });
    s.opt("sum_f_others", [&](const json& v, const std::string& p) { in.sum_f_others = get_double(v, p); });
    s.opt("tol", [&](const json& v, const std::string& p) { in.tol = get_double(v, p); });
    s.opt("delta0", [&](const json& v, const std::string& p) { in.delta0 = get_double(v, p); });
    s.opt("delta_range", [&](const json& v, const std::string& p) { read_range(v, p, in.delta_range); });
    s.opt("f_range", [&](const json& v, const std::string& p) { read_range(v, p, in.f_range); });
    s.opt("F_range", [&](const json& v, const std::string& p) { read_range(v, p, in.F_range); });
    s.finish();
  });
  root.opt("rounds", [&](const json& v, const std::string& p) { cfg.rounds = as_int(v, p); });
  root.opt("output_dir", [&](const json& v, const std::string& p) { cfg.output_dir = get_string(v, p); });
  root.finish();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, path.string() + ": invalid JSON: " + e.what());
  }
  return config_from_json(doc);
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw Error(ErrorCode::kConfig, "override '" + assignment + "': expected path=value");
  }
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);

  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (node->is_object()) {
      auto it = node->find(key);
      if (it == node->end()) fail(path, "unknown key '" + key + "'");
      node = &*it;
    } else if (node->is_array()) {
      std::size_t used = 0;
      std::size_t idx = 0;
      try {
        idx = std::stoul(key, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != key.size() || key.empty() || idx >= node->size()) fail(path, "bad array index '" + key + "'");
      node = &(*node)[idx];
    } else {
      fail(path, "'" + key + "' addresses into a scalar");
    }
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  json value = json::parse(text, nullptr, false);
  *node = value.is_discarded() ? json(text) : value;
}

ExperimentConfig with_overrides(const ExperimentConfig& cfg, const std::vector<std::string>& assignments) {
  if (assignments.empty()) return cfg;
  json doc = config_to_json(cfg);
  for (const auto& a : assignments) apply_override(doc, a);
  return config_from_json(doc);
}

}  // namespace pofel
