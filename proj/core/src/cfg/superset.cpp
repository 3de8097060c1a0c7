#include "supertile/cfg/superset.hpp"

#include <fmt/format.h>

#include "supertile/x86/decoder.hpp"

namespace supertile::cfg {

using x86::DecodedInstruction;
using x86::FlagMask;

std::vector<x86::DecodeResult> superset_disassemble(std::span<const std::uint8_t> image) {
  std::vector<x86::DecodeResult> out;
  out.reserve(image.size());
  for (std::size_t off = 0; off < image.size(); ++off) out.push_back(x86::decode(image, off));
  return out;
}

SupersetCFG build_superset_cfg(std::span<const std::uint8_t> image) {
  SupersetCFG cfg;
  auto decoded = superset_disassemble(image);
  cfg.nodes.resize(image.size());
  const auto size = static_cast<std::int64_t>(image.size());
  for (std::size_t off = 0; off < image.size(); ++off) {
    Node& n = cfg.nodes[off];
    n.offset = off;
    n.decoded = std::move(decoded[off]);
    if (!n.valid()) {
      n.terminal = true;
      continue;
    }
    const DecodedInstruction& in = n.instruction();
    n.terminal = in.mnemonic == x86::Mnemonic::Int3;
    n.indirect = x86::is_indirect_branch(in);
    if (x86::is_direct_branch(in)) {
      const std::int64_t t = x86::branch_target(in);
      n.direct_targets.push_back(DirectTarget{t, t < 0 || t >= size});
    }
    if (x86::falls_through(in) && in.end() < image.size()) n.fallthrough = in.end();
  }
  flag_liveness(cfg);
  return cfg;
}

void flag_liveness(SupersetCFG& cfg) {
  // Fall-through successors always lie at higher offsets, so one backward
  // sweep reaches the fixed point.
  for (std::size_t i = cfg.nodes.size(); i-- > 0;) {
    Node& n = cfg.nodes[i];
    if (!n.valid()) {
      n.live_flags = n.live_in = FlagMask::all();
      continue;
    }
    const DecodedInstruction& in = n.instruction();
    const bool chain_break = x86::is_control_flow(in.mnemonic) || n.terminal || n.indirect;
    n.live_flags = (!chain_break && n.fallthrough) ? cfg.nodes[*n.fallthrough].live_in : FlagMask::all();
    if (chain_break || x86::accesses_memory(in)) {
      n.live_in = FlagMask::all();
    } else {
      n.live_in = in.flags_read | (n.live_flags & ~in.flags_written);
    }
  }
}

std::string to_dot(const SupersetCFG& cfg) {
  std::string out = "digraph superset {\n  node [shape=box, fontname=monospace];\n";
  for (const Node& n : cfg.nodes) {
    if (!n.valid()) continue;
    const auto& in = n.instruction();
    out += fmt::format("  n{} [label=\"{:#x}: {}\\nlive-out {}\"];\n", n.offset, n.offset, x86::format(in),
                       x86::to_string(n.live_flags));
    if (n.fallthrough && cfg.nodes[*n.fallthrough].valid()) {
      out += fmt::format("  n{} -> n{};\n", n.offset, *n.fallthrough);
    }
    for (const auto& t : n.direct_targets) {
      if (t.external) {
        out += fmt::format("  ext{0} [label=\"external {0:#x}\", shape=ellipse];\n  n{1} -> ext{0} [style=dashed];\n",
                           static_cast<std::uint64_t>(t.offset), n.offset);
      } else if (cfg.nodes[static_cast<std::size_t>(t.offset)].valid()) {
        out += fmt::format("  n{} -> n{} [color=blue];\n", n.offset, t.offset);
      }
    }
    if (n.indirect) out += fmt::format("  n{} -> indirect [style=dotted];\n", n.offset);
  }
  out += "}\n";
  return out;
}

}  // namespace supertile::cfg
