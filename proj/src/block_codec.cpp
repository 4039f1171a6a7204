#include "pofel/block_codec.hpp"

#include <set>

namespace pofel {
namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& msg) { throw Error(ErrorCode::kParse, "block: " + msg); }

json weights_json(const ModelWeights& w) {
  return std::vector<double>(w.data(), w.data() + w.size());
}

const json& field(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) fail(std::string("missing key '") + key + "'");
  return *it;
}

void expect_keys(const json& obj, std::set<std::string> keys, const char* where) {
  if (!obj.is_object()) fail(std::string(where) + " is not an object");
  for (const auto& [k, v] : obj.items()) {
    if (!keys.count(k)) fail(std::string("unknown key '") + k + "' in " + where);
  }
  if (obj.size() != keys.size()) fail(std::string("missing keys in ") + where);
}

std::uint64_t as_u64(const json& j, const char* what) {
  if (!j.is_number_unsigned()) fail(std::string(what) + " must be a non-negative integer");
  return j.get<std::uint64_t>();
}

double as_f64(const json& j, const char* what) {
  if (!j.is_number()) fail(std::string(what) + " must be a number");
  return j.get<double>();
}

Digest as_digest(const json& j, const char* what) {
  if (!j.is_string()) fail(std::string(what) + " must be a hex string");
  auto d = fixed_from_bytes<32>(from_hex(j.get<std::string>()));
  if (!d) fail(std::string(what) + " is not a 32-byte hex digest");
  return *d;
}

ModelWeights as_weights(const json& j, const char* what) {
  if (!j.is_array()) fail(std::string(what) + " must be an array");
  ModelWeights w(static_cast<Eigen::Index>(j.size()));
  for (std::size_t d = 0; d < j.size(); ++d) w[static_cast<Eigen::Index>(d)] = as_f64(j[d], what);
  return w;
}

std::vector<double> as_doubles(const json& j, const char* what) {
  if (!j.is_array()) fail(std::string(what) + " must be an array");
  std::vector<double> out;
  for (const auto& x : j) out.push_back(as_f64(x, what));
  return out;
}

std::vector<NodeId> as_ids(const json& j, const char* what) {
  if (!j.is_array()) fail(std::string(what) + " must be an array");
  std::vector<NodeId> out;
  for (const auto& x : j) out.push_back(static_cast<NodeId>(as_u64(x, what)));
  return out;
}

}  // namespace

json block_to_json(const Block& block) {
  json models = json::array();
  for (const auto& m : block.models) {
    models.push_back({{"node_id", m.node_id},
                      {"size", m.size},
                      {"model_digest", to_hex(m.model_digest)},
                      {"weights", weights_json(m.weights)}});
  }
  const auto& t = block.tally;
  return {{"round", block.round},
          {"leader_id", block.leader_id},
          {"mode", block.mode == LedgerMode::kFullModels ? "full" : "digests_only"},
          {"prev_digest", to_hex(block.prev_digest)},
          {"digest", to_hex(block.digest)},
          {"models", models},
          {"global_model", weights_json(block.global_model)},
          {"tally",
           {{"participants", t.participants},
            {"votes", t.votes},
            {"scores", t.scores},
            {"weights", t.weights},
            {"adjusted_votes", t.adjusted_votes}}}};
}

std::string block_to_line(const Block& block) { return block_to_json(block).dump(); }

Block block_from_line(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    fail(std::string("invalid JSON: ") + e.what());
  }
  expect_keys(j, {"round", "leader_id", "mode", "prev_digest", "digest", "models", "global_model", "tally"},
              "block");

  Block b;
  b.round = as_u64(field(j, "round"), "round");
  b.leader_id = static_cast<NodeId>(as_u64(field(j, "leader_id"), "leader_id"));
  const auto& mode = field(j, "mode");
  if (mode == "full") {
    b.mode = LedgerMode::kFullModels;
  } else if (mode == "digests_only") {
    b.mode = LedgerMode::kDigestsOnly;
  } else {
    fail("unknown mode");
  }
  b.prev_digest = as_digest(field(j, "prev_digest"), "prev_digest");
  b.digest = as_digest(field(j, "digest"), "digest");

  const auto& models = field(j, "models");
  if (!models.is_array()) fail("models must be an array");
  for (const auto& m : models) {
    expect_keys(m, {"node_id", "size", "model_digest", "weights"}, "model entry");
    ModelEntry e;
    e.node_id = static_cast<NodeId>(as_u64(field(m, "node_id"), "node_id"));
    e.size = static_cast<std::int64_t>(as_u64(field(m, "size"), "size"));
    e.model_digest = as_digest(field(m, "model_digest"), "model_digest");
    e.weights = as_weights(field(m, "weights"), "weights");
    b.models.push_back(std::move(e));
  }
  b.global_model = as_weights(field(j, "global_model"), "global_model");

  const auto& t = field(j, "tally");
  expect_keys(t, {"participants", "votes", "scores", "weights", "adjusted_votes"}, "tally");
  b.tally.participants = as_ids(field(t, "participants"), "participants");
  b.tally.votes = as_ids(field(t, "votes"), "votes");
  b.tally.scores = as_doubles(field(t, "scores"), "scores");
  b.tally.weights = as_doubles(field(t, "weights"), "weights");
  b.tally.adjusted_votes = as_doubles(field(t, "adjusted_votes"), "adjusted_votes");

  if (block_to_line(b) != line) fail("non-canonical encoding");
  return b;
}

void write_ledger_jsonl(std::ostream& out, std::span<const Block> blocks) {
  for (const auto& b : blocks) out << block_to_line(b) << '\n';
}

std::vector<Block> read_ledger_jsonl(std::istream& in) {
  std::vector<Block> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(block_from_line(line));
  }
  return out;
}

}  // namespace pofel
