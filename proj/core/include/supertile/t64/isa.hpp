#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace supertile::t64 {

// Fixed-width three-address target ISA with 32 general registers. T31 reads
// as zero and ignores writes.
//
//   ALU ops:   rd = rn OP (regs[rm] + imm)    (shift amounts use the low 6 bits)
//   ADDI:      rd = rn + imm
//   LDI:       rd = imm
//   LOADn:     rd = zero-extended n bytes at [rn + imm]
//   STOREn:    n low bytes of rd stored at [rn + imm]
//   B/BNEZ/BEQZ, XLATE rd <- table[rn - image_base], BR rn
//   HOST imm with argument rn, TRAP imm, HALT with exit code rn
enum class Opcode : std::uint8_t {
  LDI, MOVR, ADD, SUB, AND, OR, XOR, NOT, SHL, SHR, ADDI,
  LOAD1, LOAD4, LOAD8, STORE1, STORE4, STORE8,
  B, BNEZ, BEQZ, XLATE, BR, HOST, TRAP, HALT,
};

inline constexpr int kOpcodeCount = static_cast<int>(Opcode::HALT) + 1;
inline constexpr int kRegisterCount = 32;
inline constexpr std::uint8_t kZeroReg = 31;

std::string_view opcode_name(Opcode op);

struct TargetInstruction {
  Opcode op = Opcode::HALT;
  std::uint8_t rd = 0;
  std::uint8_t rn = 0;
  std::uint8_t rm = kZeroReg;
  std::int64_t imm = 0;

  bool operator==(const TargetInstruction&) const = default;
};

TargetInstruction ldi(std::uint8_t rd, std::int64_t imm);
TargetInstruction movr(std::uint8_t rd, std::uint8_t rn);
TargetInstruction alu(Opcode op, std::uint8_t rd, std::uint8_t rn, std::uint8_t rm, std::int64_t imm = 0);
TargetInstruction alu_imm(Opcode op, std::uint8_t rd, std::uint8_t rn, std::int64_t imm);
TargetInstruction not_(std::uint8_t rd, std::uint8_t rn);
TargetInstruction addi(std::uint8_t rd, std::uint8_t rn, std::int64_t imm);
TargetInstruction load(int bytes, std::uint8_t rd, std::uint8_t rn, std::int64_t imm = 0);
TargetInstruction store(int bytes, std::uint8_t value, std::uint8_t rn, std::int64_t imm = 0);
TargetInstruction branch(std::int64_t target);
TargetInstruction bnez(std::uint8_t rn, std::int64_t target);
TargetInstruction beqz(std::uint8_t rn, std::int64_t target);
TargetInstruction xlate(std::uint8_t rd, std::uint8_t rn);
TargetInstruction br(std::uint8_t rn);
TargetInstruction host(std::int64_t call, std::uint8_t arg);
TargetInstruction trap(std::int64_t code);
TargetInstruction halt(std::uint8_t rn);

bool is_alu(Opcode op);
bool is_branch(Opcode op);  // B, BNEZ, BEQZ: imm is a code index
bool is_load(Opcode op);
bool is_store(Opcode op);
int access_bytes(Opcode op);

// Operand fields an opcode does not use must be zero (rm: kZeroReg).
bool is_canonical(const TargetInstruction& in);

// Bitmasks over T0..T31.
std::uint32_t reads(const TargetInstruction& in);
std::uint32_t writes(const TargetInstruction& in);

std::string to_string(const TargetInstruction& in);

}  // namespace supertile::t64
