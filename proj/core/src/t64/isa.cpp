#include "supertile/t64/isa.hpp"

#include <array>

#include <fmt/format.h>

namespace supertile::t64 {

namespace {

constexpr std::array<std::string_view, kOpcodeCount> kNames = {
    "LDI",    "MOVR",   "ADD",    "SUB", "AND",  "OR",    "XOR", "NOT",  "SHL", "SHR", "ADDI", "LOAD1", "LOAD4",
    "LOAD8",  "STORE1", "STORE4", "STORE8", "B", "BNEZ", "BEQZ", "XLATE", "BR", "HOST", "TRAP", "HALT"};

std::uint32_t bit(std::uint8_t r) { return r == kZeroReg ? 0 : (std::uint32_t{1} << r); }

std::string reg(std::uint8_t r) { return r == kZeroReg ? "xzr" : fmt::format("t{}", r); }

std::string imm_text(std::int64_t v) {
  return v < 0 ? fmt::format("-{:#x}", -static_cast<std::uint64_t>(v)) : fmt::format("{:#x}", v);
}

}  // namespace

std::string_view opcode_name(Opcode op) { return kNames[static_cast<std::size_t>(op)]; }

TargetInstruction ldi(std::uint8_t rd, std::int64_t imm) { return {Opcode::LDI, rd, 0, kZeroReg, imm}; }
TargetInstruction movr(std::uint8_t rd, std::uint8_t rn) { return {Opcode::MOVR, rd, rn, kZeroReg, 0}; }
TargetInstruction alu(Opcode op, std::uint8_t rd, std::uint8_t rn, std::uint8_t rm, std::int64_t imm) {
  return {op, rd, rn, rm, imm};
}
TargetInstruction alu_imm(Opcode op, std::uint8_t rd, std::uint8_t rn, std::int64_t imm) {
  return {op, rd, rn, kZeroReg, imm};
}
TargetInstruction not_(std::uint8_t rd, std::uint8_t rn) { return {Opcode::NOT, rd, rn, kZeroReg, 0}; }
TargetInstruction addi(std::uint8_t rd, std::uint8_t rn, std::int64_t imm) {
  return {Opcode::ADDI, rd, rn, kZeroReg, imm};
}
TargetInstruction load(int bytes, std::uint8_t rd, std::uint8_t rn, std::int64_t imm) {
  const Opcode op = bytes == 1 ? Opcode::LOAD1 : bytes == 4 ? Opcode::LOAD4 : Opcode::LOAD8;
  return {op, rd, rn, kZeroReg, imm};
}
TargetInstruction store(int bytes, std::uint8_t value, std::uint8_t rn, std::int64_t imm) {
  const Opcode op = bytes == 1 ? Opcode::STORE1 : bytes == 4 ? Opcode::STORE4 : Opcode::STORE8;
  return {op, value, rn, kZeroReg, imm};
}
TargetInstruction branch(std::int64_t target) { return {Opcode::B, 0, 0, kZeroReg, target}; }
TargetInstruction bnez(std::uint8_t rn, std::int64_t target) { return {Opcode::BNEZ, 0, rn, kZeroReg, target}; }
TargetInstruction beqz(std::uint8_t rn, std::int64_t target) { return {Opcode::BEQZ, 0, rn, kZeroReg, target}; }
TargetInstruction xlate(std::uint8_t rd, std::uint8_t rn) { return {Opcode::XLATE, rd, rn, kZeroReg, 0}; }
TargetInstruction br(std::uint8_t rn) { return {Opcode::BR, 0, rn, kZeroReg, 0}; }
TargetInstruction host(std::int64_t call, std::uint8_t arg) { return {Opcode::HOST, 0, arg, kZeroReg, call}; }
TargetInstruction trap(std::int64_t code) { return {Opcode::TRAP, 0, 0, kZeroReg, code}; }
TargetInstruction halt(std::uint8_t rn) { return {Opcode::HALT, 0, rn, kZeroReg, 0}; }

bool is_alu(Opcode op) {
  switch (op) {
    case Opcode::ADD: case Opcode::SUB: case Opcode::AND: case Opcode::OR:
    case Opcode::XOR: case Opcode::SHL: case Opcode::SHR:
      return true;
    default:
      return false;
  }
}

bool is_branch(Opcode op) { return op == Opcode::B || op == Opcode::BNEZ || op == Opcode::BEQZ; }
bool is_load(Opcode op) { return op == Opcode::LOAD1 || op == Opcode::LOAD4 || op == Opcode::LOAD8; }
bool is_store(Opcode op) { return op == Opcode::STORE1 || op == Opcode::STORE4 || op == Opcode::STORE8; }

int access_bytes(Opcode op) {
  switch (op) {
    case Opcode::LOAD1: case Opcode::STORE1: return 1;
    case Opcode::LOAD4: case Opcode::STORE4: return 4;
    case Opcode::LOAD8: case Opcode::STORE8: return 8;
    default: return 0;
  }
}

bool is_canonical(const TargetInstruction& in) {
  if (static_cast<int>(in.op) >= kOpcodeCount) return false;
  if (in.rd >= kRegisterCount || in.rn >= kRegisterCount || in.rm >= kRegisterCount) return false;
  const bool rd_used = !(is_branch(in.op) || in.op == Opcode::BR || in.op == Opcode::HOST ||
                         in.op == Opcode::TRAP || in.op == Opcode::HALT);
  const bool rn_used = !(in.op == Opcode::LDI || in.op == Opcode::B || in.op == Opcode::TRAP);
  const bool rm_used = is_alu(in.op);
  const bool imm_used = !(in.op == Opcode::MOVR || in.op == Opcode::NOT || in.op == Opcode::XLATE ||
                          in.op == Opcode::BR || in.op == Opcode::HALT);
  return (rd_used || in.rd == 0) && (rn_used || in.rn == 0) && (rm_used || in.rm == kZeroReg) &&
         (imm_used || in.imm == 0);
}

std::uint32_t reads(const TargetInstruction& in) {
  switch (in.op) {
    case Opcode::LDI: case Opcode::B: case Opcode::TRAP: return 0;
    case Opcode::MOVR: case Opcode::NOT: case Opcode::ADDI: case Opcode::BNEZ: case Opcode::BEQZ:
    case Opcode::XLATE: case Opcode::BR: case Opcode::HOST: case Opcode::HALT:
    case Opcode::LOAD1: case Opcode::LOAD4: case Opcode::LOAD8:
      return bit(in.rn);
    case Opcode::STORE1: case Opcode::STORE4: case Opcode::STORE8:
      return bit(in.rn) | bit(in.rd);
    default:
      return bit(in.rn) | bit(in.rm);
  }
}

std::uint32_t writes(const TargetInstruction& in) {
  if (is_store(in.op) || is_branch(in.op)) return 0;
  switch (in.op) {
    case Opcode::BR: case Opcode::HOST: case Opcode::TRAP: case Opcode::HALT: return 0;
    default: return bit(in.rd);
  }
}

std::string to_string(const TargetInstruction& in) {
  const auto name = opcode_name(in.op);
  switch (in.op) {
    case Opcode::LDI: return fmt::format("{} {}, {}", name, reg(in.rd), imm_text(in.imm));
    case Opcode::MOVR: case Opcode::NOT: case Opcode::XLATE:
      return fmt::format("{} {}, {}", name, reg(in.rd), reg(in.rn));
    case Opcode::ADDI: return fmt::format("{} {}, {}, {}", name, reg(in.rd), reg(in.rn), imm_text(in.imm));
    case Opcode::LOAD1: case Opcode::LOAD4: case Opcode::LOAD8:
    case Opcode::STORE1: case Opcode::STORE4: case Opcode::STORE8:
      return in.imm == 0 ? fmt::format("{} {}, [{}]", name, reg(in.rd), reg(in.rn))
                         : fmt::format("{} {}, [{}{:+}]", name, reg(in.rd), reg(in.rn), in.imm);
    case Opcode::B: return fmt::format("{} @{}", name, in.imm);
    case Opcode::BNEZ: case Opcode::BEQZ: return fmt::format("{} {}, @{}", name, reg(in.rn), in.imm);
    case Opcode::BR: case Opcode::HALT: return fmt::format("{} {}", name, reg(in.rn));
    case Opcode::HOST: return fmt::format("{} {}, {}", name, in.imm, reg(in.rn));
    case Opcode::TRAP: return fmt::format("{} {}", name, in.imm);
    default:
      if (in.rm == kZeroReg) return fmt::format("{} {}, {}, {}", name, reg(in.rd), reg(in.rn), imm_text(in.imm));
      if (in.imm == 0) return fmt::format("{} {}, {}, {}", name, reg(in.rd), reg(in.rn), reg(in.rm));
      return fmt::format("{} {}, {}, {}{:+}", name, reg(in.rd), reg(in.rn), reg(in.rm), in.imm);
  }
}

}  // namespace supertile::t64
