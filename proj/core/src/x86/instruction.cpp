#include "supertile/x86/instruction.hpp"

#include <array>

#include <fmt/format.h>

namespace supertile::x86 {

namespace {

constexpr std::array<std::string_view, 27> kMnemonics = {
    "mov", "lea", "add", "sub", "and", "or",  "xor", "cmp", "test", "inc", "dec", "shl",
    "push", "pop", "call", "ret", "jmp",
    "jz",  "jnz", "jl",  "jge", "jle", "jg",  "jb",  "jae",
    "nop", "int3"};

std::string format_mem(const MemOperand& m, int width, bool sized) {
  std::string out;
  if (sized) out = width == 8 ? "byte ptr " : width == 32 ? "dword ptr " : "qword ptr ";
  out += '[';
  bool first = true;
  auto term = [&](const std::string& t) {
    if (!first) out += '+';
    out += t;
    first = false;
  };
  if (m.rip_relative) term("rip");
  if (m.base) term(std::string(reg_name(*m.base, 64)));
  if (m.index) term(fmt::format("{}*{}", reg_name(*m.index, 64), m.scale));
  if (m.disp != 0 || first) {
    if (m.disp < 0) {
      out += fmt::format("-0x{:x}", -static_cast<std::int64_t>(m.disp));
      first = false;
    } else {
      term(fmt::format("0x{:x}", m.disp));
    }
  }
  out += ']';
  return out;
}

}  // namespace

std::string_view mnemonic_name(Mnemonic m) { return kMnemonics[static_cast<std::size_t>(m)]; }

std::string_view decode_error_name(DecodeError e) {
  switch (e) {
    case DecodeError::UnsupportedOpcode: return "unsupported-opcode";
    case DecodeError::Truncated: return "truncated";
    case DecodeError::Malformed: return "malformed";
  }
  return "?";
}

FlagMask flags_written_by(Mnemonic m) {
  switch (m) {
    case Mnemonic::Add: case Mnemonic::Sub: case Mnemonic::And: case Mnemonic::Or:
    case Mnemonic::Xor: case Mnemonic::Cmp: case Mnemonic::Test: case Mnemonic::Shl:
      return FlagMask::all();
    case Mnemonic::Inc: case Mnemonic::Dec:
      return ~FlagMask::of(Flag::CF);
    default:
      return FlagMask::none();
  }
}

FlagMask flags_read_by(Mnemonic m) {
  const auto zf = FlagMask::of(Flag::ZF);
  const auto cf = FlagMask::of(Flag::CF);
  const auto sof = FlagMask::of(Flag::SF) | FlagMask::of(Flag::OF);
  switch (m) {
    case Mnemonic::Jz: case Mnemonic::Jnz: return zf;
    case Mnemonic::Jb: case Mnemonic::Jae: return cf;
    case Mnemonic::Jl: case Mnemonic::Jge: return sof;
    case Mnemonic::Jle: case Mnemonic::Jg: return sof | zf;
    default: return FlagMask::none();
  }
}

bool is_conditional_branch(Mnemonic m) { return m >= Mnemonic::Jz && m <= Mnemonic::Jae; }

bool is_control_flow(Mnemonic m) {
  return m == Mnemonic::Call || m == Mnemonic::Ret || m == Mnemonic::Jmp || m == Mnemonic::Int3 ||
         is_conditional_branch(m);
}

bool is_direct_branch(const DecodedInstruction& in) {
  return (in.mnemonic == Mnemonic::Call || in.mnemonic == Mnemonic::Jmp ||
          is_conditional_branch(in.mnemonic)) &&
         in.operand_count == 1 && in.op(0).is_imm();
}

bool is_indirect_branch(const DecodedInstruction& in) {
  if (in.mnemonic == Mnemonic::Ret) return true;
  return (in.mnemonic == Mnemonic::Call || in.mnemonic == Mnemonic::Jmp) && in.op(0).is_reg();
}

bool falls_through(const DecodedInstruction& in) {
  switch (in.mnemonic) {
    case Mnemonic::Jmp: case Mnemonic::Ret: case Mnemonic::Int3: return false;
    default: return true;
  }
}

bool accesses_memory(const DecodedInstruction& in) {
  switch (in.mnemonic) {
    case Mnemonic::Push: case Mnemonic::Pop: case Mnemonic::Call: case Mnemonic::Ret:
      return true;
    case Mnemonic::Lea:
      return false;
    default:
      for (const auto& o : in.operands()) {
        if (o.is_mem()) return true;
      }
      return false;
  }
}

std::int64_t branch_target(const DecodedInstruction& in) {
  return static_cast<std::int64_t>(in.end()) + in.op(0).imm;
}

std::string format(const DecodedInstruction& in) {
  std::string out(mnemonic_name(in.mnemonic));
  if (is_direct_branch(in)) {
    const auto t = branch_target(in);
    return t < 0 ? fmt::format("{} -0x{:x}", out, -t) : fmt::format("{} 0x{:x}", out, t);
  }
  bool has_reg = false;
  for (const auto& o : in.operands()) has_reg |= o.is_reg();
  const bool fixed64 = in.mnemonic == Mnemonic::Push || in.mnemonic == Mnemonic::Pop ||
                       in.mnemonic == Mnemonic::Call || in.mnemonic == Mnemonic::Jmp;
  for (int i = 0; i < in.operand_count; ++i) {
    const auto& o = in.op(i);
    out += i == 0 ? " " : ", ";
    switch (o.kind) {
      case Operand::Kind::Register:
        out += reg_name(o.reg, fixed64 ? 64 : in.width);
        break;
      case Operand::Kind::Immediate:
        out += fmt::format("0x{:x}", static_cast<std::uint64_t>(o.imm) & width_mask(in.width));
        break;
      case Operand::Kind::Memory:
        out += format_mem(o.mem, in.width, !has_reg && in.mnemonic != Mnemonic::Lea);
        break;
    }
  }
  return out;
}

}  // namespace supertile::x86
