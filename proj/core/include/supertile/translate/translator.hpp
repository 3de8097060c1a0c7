#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "supertile/cfg/superset.hpp"
#include "supertile/t64/image.hpp"
#include "supertile/tiles/bank.hpp"

namespace supertile::translate {

struct TranslateOptions {
  bool prune_flags = true;
};

// Shared code appended after all translated nodes.
enum class Stub : std::uint8_t { Dispatch, Indirect, HostExit, HostWriteChar, HostWriteU64 };

// A branch destination not yet resolved to a code index.
struct CodeRef {
  enum class Kind : std::uint8_t { None, Offset, Stub, Local };

  Kind kind = Kind::None;
  std::uint64_t value = 0;  // source offset, Stub, or index within the enclosing block

  static CodeRef offset(std::size_t o) { return {Kind::Offset, o}; }
  static CodeRef stub(Stub s) { return {Kind::Stub, static_cast<std::uint64_t>(s)}; }
  static CodeRef local(std::size_t i) { return {Kind::Local, i}; }
};

struct LoweredInstr {
  t64::TargetInstruction ins;
  CodeRef target;
};

struct LoweredNode {
  std::size_t offset = 0;
  std::vector<LoweredInstr> code;
  // Set when the code runs off its end into the node at this offset.
  std::optional<std::size_t> continues_at;
  std::vector<std::string> tiles;  // bank tiles used, for listings
};

struct LoweringContext {
  std::uint64_t image_base = kImageBase;
  std::uint64_t hostcall_base = kHostcallBase;
  std::size_t image_size = 0;
  const tiles::TileBank& bank;
  const tiles::RegisterMap& map;
};

// Target code for one superset node. `live` is the set of flags that must be
// correct after the node.
LoweredNode lower_node(const cfg::Node& node, x86::FlagMask live, const LoweringContext& ctx);

// A run of nodes laid out back to back. labels: (source offset, index).
struct Chunk {
  std::vector<LoweredInstr> code;
  std::vector<std::pair<std::size_t, std::size_t>> labels;
};

// Greedy fall-through merging. Seeds: offset 0, the entry, direct targets in
// ascending order, then every remaining offset in ascending order. A chunk
// that reaches an already placed node ends with an explicit branch to it.
std::vector<Chunk> layout(std::span<const LoweredNode> nodes, std::size_t entry);

struct Linked {
  std::vector<t64::TargetInstruction> code;
  std::vector<std::int64_t> table;
  std::size_t stub_begin = 0;  // index of the first shared stub instruction
};

// Concatenate chunks, append stubs, resolve every reference.
Linked link(const std::vector<Chunk>& chunks, const LoweringContext& ctx);

struct Translation {
  t64::TranslatedImage image;
  cfg::SupersetCFG cfg;
  std::vector<LoweredNode> nodes;
  // Instructions not attributable to any node: layout branches and stubs.
  std::size_t overhead_instructions = 0;
};

Translation translate(std::span<const std::uint8_t> image, std::size_t entry, TranslateOptions options = {});

// Bit-for-bit deterministic in (image, entry, options).
t64::TranslatedImage translate_image(std::span<const std::uint8_t> image, std::size_t entry,
                                     TranslateOptions options = {});

}  // namespace supertile::translate
