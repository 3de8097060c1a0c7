#include "supertile/tiles/bank.hpp"

#include <fmt/format.h>

#include "supertile/tiles/catalog.hpp"

namespace supertile::tiles {

using x86::DecodedInstruction;
using x86::Mnemonic;
using x86::Operand;

void TileBank::add(Tile tile) {
  auto name = tile.name;
  if (!tiles_.emplace(std::move(name), std::move(tile)).second) {
    throw TileCompileError("duplicate tile name");
  }
}

const Tile* TileBank::find(std::string_view name) const {
  auto it = tiles_.find(name);
  return it == tiles_.end() ? nullptr : &it->second;
}

std::string listing(const Tile& tile) {
  std::string out;
  for (const auto& ti : tile.code) {
    out += "  ";
    out += t64::to_string(ti.ins);
    switch (ti.hole) {
      case Hole::None: break;
      case Hole::Imm: out += "  +imm"; break;
      case Hole::Disp: out += "  +disp"; break;
      case Hole::RipTarget: out += "  +rip_target"; break;
    }
    out += '\n';
  }
  return out;
}

std::string TileBank::dump() const {
  std::string out;
  for (const auto& [name, tile] : tiles_) {
    out += name;
    out += ":\n";
    out += listing(tile);
  }
  return out;
}

TileBank build_tile_bank(const RegisterMap& map) {
  TileBank bank;
  for (const auto& entry : tile_catalog()) {
    for (const auto& bindings : entry.bindings) {
      Tile tile;
      tile.name = specialized_name(entry.tmpl, bindings);
      tile.code = compile(entry.tmpl, bindings, map);
      for (const auto& ti : tile.code) {
        tile.reads |= t64::reads(ti.ins);
        tile.writes |= t64::writes(ti.ins);
      }
      bank.add(std::move(tile));
    }
  }
  return bank;
}

const TileBank& default_tile_bank() {
  static const TileBank bank = build_tile_bank();
  return bank;
}

namespace {

std::string operand_name(const Operand& o) {
  switch (o.kind) {
    case Operand::Kind::Register: return std::string(x86::upper_name(o.reg));
    case Operand::Kind::Immediate: return "IMM";
    case Operand::Kind::Memory: return "S1";
  }
  return "?";
}

std::string address_tile(const x86::MemOperand& m) {
  if (m.rip_relative) return "EA_RIP";
  if (!m.base && !m.index) return "EA_ABS";
  if (!m.index) return fmt::format("EA_{}", x86::upper_name(*m.base));
  if (!m.base) return fmt::format("EA_NONE_{}_{}", x86::upper_name(*m.index), m.scale);
  return fmt::format("EA_{}_{}_{}", x86::upper_name(*m.base), x86::upper_name(*m.index), m.scale);
}

class Selector {
 public:
  Selector(const TileBank& bank, const DecodedInstruction& in) : bank_(bank), in_(in) {}

  void add(const std::string& name) {
    const Tile* t = bank_.find(name);
    if (t == nullptr) throw UnsupportedInstruction(fmt::format("no tile {} for '{}'", name, x86::format(in_)));
    out_.tiles.push_back(t);
    // T16 is S0 in the default map, but go by whatever the EA tile writes.
    if (name.rfind("EA_", 0) == 0) {
      ea_writes_ = t->writes;
      s0_stale_ = false;
    } else if ((t->writes & ea_writes_) != 0) {
      s0_stale_ = true;
    }
  }

  // Re-derive the address if something clobbered it since the EA tile.
  void refresh_address(const std::string& ea) {
    if (s0_stale_) add(ea);
  }

  TileSelection take() { return std::move(out_); }

 private:
  const TileBank& bank_;
  const DecodedInstruction& in_;
  TileSelection out_;
  std::uint32_t ea_writes_ = 0;
  bool s0_stale_ = false;
};

const char* alu_name(Mnemonic m) {
  switch (m) {
    case Mnemonic::Add: return "ADD";
    case Mnemonic::Sub: case Mnemonic::Cmp: return "SUB";
    case Mnemonic::And: case Mnemonic::Test: return "AND";
    case Mnemonic::Or: return "OR";
    case Mnemonic::Xor: return "XOR";
    case Mnemonic::Inc: return "INC";
    case Mnemonic::Dec: return "DEC";
    default: return "SHL";
  }
}

}  // namespace

TileSelection lookup_tiles(const TileBank& bank, const DecodedInstruction& in, x86::FlagMask live,
                           std::uint64_t image_base) {
  Selector sel(bank, in);
  const std::string W = std::to_string(in.width);
  const bool want_flags = !(live & in.flags_written).empty();

  int mem_index = -1;
  if (in.mnemonic != Mnemonic::Lea) {
    for (int i = 0; i < in.operand_count; ++i) {
      if (in.op(i).is_mem()) mem_index = i;
    }
  }
  std::string ea;
  HoleValues holes;
  for (const auto& o : in.operands()) {
    if (o.is_imm()) holes.imm = o.imm;
    if (o.is_mem()) {
      holes.disp = o.mem.disp;
      holes.rip_target = static_cast<std::int64_t>(image_base + in.end()) + o.mem.disp;
      ea = address_tile(o.mem);
      sel.add(ea);
    }
  }

  switch (in.mnemonic) {
    case Mnemonic::Mov: {
      const Operand& dst = in.op(0);
      const Operand& src = in.op(1);
      if (dst.is_mem()) {
        if (src.is_imm()) {
          sel.add("MOV" + W + "_S1_IMM");
          sel.refresh_address(ea);
          sel.add("STORE" + W + "_S1");
        } else {
          sel.add("STORE" + W + "_" + operand_name(src));
        }
      } else if (src.is_mem()) {
        if (in.width == 8) {
          sel.add("LOAD8_S1");
          sel.add("MOV8_" + operand_name(dst) + "_S1");
        } else {
          sel.add("LOAD" + W + "_" + operand_name(dst));
        }
      } else {
        sel.add("MOV" + W + "_" + operand_name(dst) + "_" + operand_name(src));
      }
      break;
    }
    case Mnemonic::Lea:
      sel.add("LEA" + W + "_" + operand_name(in.op(0)));
      break;
    case Mnemonic::Add: case Mnemonic::Sub: case Mnemonic::And: case Mnemonic::Or: case Mnemonic::Xor:
    case Mnemonic::Cmp: case Mnemonic::Test: case Mnemonic::Inc: case Mnemonic::Dec: case Mnemonic::Shl: {
      const std::string op = alu_name(in.mnemonic);
      const bool unary = in.mnemonic == Mnemonic::Inc || in.mnemonic == Mnemonic::Dec;
      const bool shift = in.mnemonic == Mnemonic::Shl;
      const bool writes_back = in.mnemonic != Mnemonic::Cmp && in.mnemonic != Mnemonic::Test;
      const std::string a = operand_name(in.op(0));
      std::string suffix;
      if (shift) {
        suffix = "_" + std::to_string(in.op(1).imm & (in.width == 64 ? 63 : 31));
      } else if (!unary) {
        suffix = "_" + operand_name(in.op(1));
      }
      if (mem_index >= 0) sel.add("LOAD" + W + "_S1");
      const bool mem_dest = mem_index == 0 && writes_back;
      if (want_flags) {
        // Probe the destination first: a read-only target must fault before
        // any flag changes.
        if (mem_dest) sel.add("STORE" + W + "_S1");
        if (shift) {
          sel.add("FLAGS_SHL" + W + "_" + a + suffix);
        } else {
          sel.add("FLAGS_" + op + W + "_" + a + suffix);
        }
      }
      if (writes_back) {
        sel.add(op + W + "_" + a + "_" + a + suffix);
        if (mem_dest) {
          sel.refresh_address(ea);
          sel.add("STORE" + W + "_S1");
        }
      }
      break;
    }
    case Mnemonic::Push:
      sel.add("PUSH_" + operand_name(in.op(0)));
      break;
    case Mnemonic::Pop:
      sel.add("POP_" + operand_name(in.op(0)));
      break;
    case Mnemonic::Nop:
      sel.add("NOP");
      break;
    case Mnemonic::Int3:
      sel.add("TRAP_BREAKPOINT");
      break;
    default:
      throw UnsupportedInstruction(fmt::format("'{}' is control flow, not a data tile", x86::format(in)));
  }
  TileSelection out = sel.take();
  if (out.tiles.empty()) out.tiles.push_back(bank.find("NOP"));
  out.holes = holes;
  return out;
}

void instantiate(const TileSelection& selection, std::vector<t64::TargetInstruction>& out) {
  for (const Tile* t : selection.tiles) {
    for (const auto& ti : t->code) {
      t64::TargetInstruction in = ti.ins;
      switch (ti.hole) {
        case Hole::None: break;
        case Hole::Imm: in.imm += selection.holes.imm; break;
        case Hole::Disp: in.imm += selection.holes.disp; break;
        case Hole::RipTarget: in.imm += selection.holes.rip_target; break;
      }
      out.push_back(in);
    }
  }
}

std::vector<t64::TargetInstruction> instantiate(const TileSelection& selection) {
  std::vector<t64::TargetInstruction> out;
  instantiate(selection, out);
  return out;
}

}  // namespace supertile::tiles
