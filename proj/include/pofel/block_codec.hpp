#pragma once

// JSON-lines ledger export. Parsing is strict: unknown or missing keys fail,
// and a line must be byte-identical to the canonical re-encoding of the block
// it decodes to.

#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pofel/consensus.hpp"

namespace pofel {

nlohmann::json block_to_json(const Block& block);
std::string block_to_line(const Block& block);

/// Throws Error(kParse) on any malformed or non-canonical input.
Block block_from_line(const std::string& line);

void write_ledger_jsonl(std::ostream& out, std::span<const Block> blocks);
std::vector<Block> read_ledger_jsonl(std::istream& in);

}  // namespace pofel
