#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>

#include "supertile/x86/flags.hpp"
#include "supertile/x86/registers.hpp"

namespace supertile::x86 {

enum class Mnemonic : std::uint8_t {
  Mov, Lea, Add, Sub, And, Or, Xor, Cmp, Test, Inc, Dec, Shl,
  Push, Pop, Call, Ret, Jmp,
  Jz, Jnz, Jl, Jge, Jle, Jg, Jb, Jae,
  Nop, Int3,
};

std::string_view mnemonic_name(Mnemonic m);

struct MemOperand {
  std::optional<Reg> base;
  std::optional<Reg> index;
  std::uint8_t scale = 0;  // 1, 2, 4 or 8 when index is present, else 0
  std::int32_t disp = 0;
  bool rip_relative = false;

  bool operator==(const MemOperand&) const = default;
};

struct Operand {
  enum class Kind : std::uint8_t { Register, Immediate, Memory };

  Kind kind = Kind::Register;
  Reg reg = Reg::RAX;
  std::int64_t imm = 0;
  MemOperand mem;

  static Operand of_reg(Reg r) { return Operand{Kind::Register, r, 0, {}}; }
  static Operand of_imm(std::int64_t v) { return Operand{Kind::Immediate, Reg::RAX, v, {}}; }
  static Operand of_mem(MemOperand m) { return Operand{Kind::Memory, Reg::RAX, 0, m}; }

  bool is_reg() const { return kind == Kind::Register; }
  bool is_imm() const { return kind == Kind::Immediate; }
  bool is_mem() const { return kind == Kind::Memory; }

  bool operator==(const Operand&) const = default;
};

// One decoded instruction. Branch displacements are stored as immediates
// relative to the end of the instruction; use branch_target() for the offset.
struct DecodedInstruction {
  std::size_t offset = 0;
  std::uint8_t length = 0;
  Mnemonic mnemonic = Mnemonic::Nop;
  std::uint8_t width = 64;
  std::uint8_t operand_count = 0;
  std::array<Operand, 2> ops{};
  FlagMask flags_written;
  FlagMask flags_read;

  std::span<const Operand> operands() const { return {ops.data(), operand_count}; }
  const Operand& op(int i) const { return ops[static_cast<std::size_t>(i)]; }
  std::size_t end() const { return offset + length; }

  bool operator==(const DecodedInstruction&) const = default;
};

enum class DecodeError : std::uint8_t { UnsupportedOpcode, Truncated, Malformed };

std::string_view decode_error_name(DecodeError e);

struct InvalidDecode {
  std::size_t offset = 0;
  DecodeError reason = DecodeError::UnsupportedOpcode;

  bool operator==(const InvalidDecode&) const = default;
};

using DecodeResult = std::variant<DecodedInstruction, InvalidDecode>;

FlagMask flags_written_by(Mnemonic m);
FlagMask flags_read_by(Mnemonic m);

bool is_conditional_branch(Mnemonic m);
// Anything that may leave the fall-through path.
bool is_control_flow(Mnemonic m);
// Direct call/jmp/jcc (immediate displacement operand).
bool is_direct_branch(const DecodedInstruction& in);
// Register-indirect call/jmp, and ret.
bool is_indirect_branch(const DecodedInstruction& in);
// Whether execution can continue at end() after this instruction.
bool falls_through(const DecodedInstruction& in);
// Whether the instruction touches memory (and so can fault).
bool accesses_memory(const DecodedInstruction& in);

// Signed offset of the direct branch target; may lie outside the image.
std::int64_t branch_target(const DecodedInstruction& in);

// Intel-syntax rendering, e.g. "add rcx, rdx" or "jz 0x9".
std::string format(const DecodedInstruction& in);

}  // namespace supertile::x86
