#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "supertile/x86/instruction.hpp"

namespace supertile::cfg {

struct DirectTarget {
  std::int64_t offset = 0;  // relative to the image start
  bool external = false;    // outside [0, image size)

  bool operator==(const DirectTarget&) const = default;
};

// One node per byte offset of the image.
struct Node {
  std::size_t offset = 0;
  x86::DecodeResult decoded;
  std::optional<std::size_t> fallthrough;  // in-image successor on the sequential path
  std::vector<DirectTarget> direct_targets;
  bool indirect = false;  // ret, or a register-indirect call/jmp
  bool terminal = false;  // invalid decode or breakpoint: no successors
  x86::FlagMask live_flags = x86::FlagMask::all();  // live after the node
  x86::FlagMask live_in = x86::FlagMask::all();     // live before the node

  bool valid() const { return std::holds_alternative<x86::DecodedInstruction>(decoded); }
  const x86::DecodedInstruction& instruction() const { return std::get<x86::DecodedInstruction>(decoded); }
};

struct SupersetCFG {
  std::vector<Node> nodes;

  std::size_t image_size() const { return nodes.size(); }
};

// decode() at every offset.
std::vector<x86::DecodeResult> superset_disassemble(std::span<const std::uint8_t> image);

// Superset graph with liveness already computed.
SupersetCFG build_superset_cfg(std::span<const std::uint8_t> image);

// Backward flag liveness over fall-through chains. A node that branches, is
// indirect, is terminal or may fault is treated as reading every flag, so
// pruning never changes what a branch target, a trap or an indirect jump sees.
void flag_liveness(SupersetCFG& cfg);

// Graphviz rendering of the valid nodes and their edges.
std::string to_dot(const SupersetCFG& cfg);

}  // namespace supertile::cfg
