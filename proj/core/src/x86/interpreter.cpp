#include "supertile/x86/interpreter.hpp"

#include <string>

#include "supertile/x86/decoder.hpp"

namespace supertile::x86 {

MachineState::MachineState(std::span<const std::uint8_t> image, std::size_t entry, const GprFile& gprs)
    : gpr(gprs), rip(kImageBase + entry), memory(image, kImageBase) {}

namespace {

using Outcome = StepOutcome;

Outcome trapped(TrapKind kind) {
  Outcome o;
  o.kind = Outcome::Kind::Trapped;
  o.trap = kind;
  return o;
}

std::uint64_t effective_address(const MachineState& s, const DecodedInstruction& in, const MemOperand& m) {
  if (m.rip_relative) return kImageBase + in.end() + static_cast<std::uint64_t>(static_cast<std::int64_t>(m.disp));
  std::uint64_t ea = static_cast<std::uint64_t>(static_cast<std::int64_t>(m.disp));
  if (m.base) ea += s.gpr[static_cast<std::size_t>(index_of(*m.base))];
  if (m.index) ea += s.gpr[static_cast<std::size_t>(index_of(*m.index))] * m.scale;
  return ea;
}

std::uint64_t& reg(MachineState& s, Reg r) { return s.gpr[static_cast<std::size_t>(index_of(r))]; }

// Read an operand truncated to the instruction width.
std::optional<TrapKind> read_operand(const MachineState& s, const DecodedInstruction& in, const Operand& o,
                                     std::uint64_t& out) {
  const std::uint64_t mask = width_mask(in.width);
  switch (o.kind) {
    case Operand::Kind::Register:
      out = s.gpr[static_cast<std::size_t>(index_of(o.reg))] & mask;
      return std::nullopt;
    case Operand::Kind::Immediate:
      out = static_cast<std::uint64_t>(o.imm) & mask;
      return std::nullopt;
    case Operand::Kind::Memory:
      return s.memory.read(effective_address(s, in, o.mem), in.width / 8, out);
  }
  return std::nullopt;
}

// Register writes follow x86 width rules: 8-bit merges, 32-bit zero-extends.
void write_register(MachineState& s, Reg r, int width, std::uint64_t value) {
  std::uint64_t& dst = reg(s, r);
  switch (width) {
    case 8: dst = (dst & ~std::uint64_t{0xFF}) | (value & 0xFF); break;
    case 32: dst = value & 0xFFFFFFFF; break;
    default: dst = value; break;
  }
}

std::optional<TrapKind> write_operand(MachineState& s, const DecodedInstruction& in, const Operand& o,
                                      std::uint64_t value) {
  if (o.is_reg()) {
    write_register(s, o.reg, in.width, value);
    return std::nullopt;
  }
  return s.memory.write(effective_address(s, in, o.mem), in.width / 8, value);
}

bool condition(Mnemonic m, FlagMask f) {
  const bool zf = f.test(Flag::ZF), cf = f.test(Flag::CF);
  const bool lt = f.test(Flag::SF) != f.test(Flag::OF);
  switch (m) {
    case Mnemonic::Jz: return zf;
    case Mnemonic::Jnz: return !zf;
    case Mnemonic::Jb: return cf;
    case Mnemonic::Jae: return !cf;
    case Mnemonic::Jl: return lt;
    case Mnemonic::Jge: return !lt;
    case Mnemonic::Jle: return zf || lt;
    case Mnemonic::Jg: return !zf && !lt;
    default: return false;
  }
}

Outcome push(MachineState& s, std::uint64_t value) {
  const std::uint64_t sp = reg(s, Reg::RSP) - 8;
  if (auto t = s.memory.write(sp, 8, value)) return trapped(*t);
  reg(s, Reg::RSP) = sp;
  return {};
}

// Exit never returns, so it leaves the stack alone; the others pop their
// return address first and only then take effect.
Outcome hostcall(MachineState& s, Hostcall h) {
  Outcome o;
  o.hostcall = true;
  if (h == Hostcall::Exit) {
    o.kind = Outcome::Kind::Halted;
    o.exit_code = reg(s, Reg::RDI);
    return o;
  }
  std::uint64_t ret = 0;
  if (auto t = s.memory.read(reg(s, Reg::RSP), 8, ret)) return trapped(*t);
  reg(s, Reg::RSP) += 8;
  const std::uint64_t arg = reg(s, Reg::RDI);
  switch (h) {
    case Hostcall::Exit:
      break;
    case Hostcall::WriteChar:
      s.output.push_back(static_cast<std::uint8_t>(arg));
      break;
    case Hostcall::WriteU64: {
      const std::string text = std::to_string(arg);
      s.output.insert(s.output.end(), text.begin(), text.end());
      break;
    }
  }
  s.rip = ret;
  return o;
}

}  // namespace

Outcome execute(MachineState& s, const DecodedInstruction& in) {
  const std::uint64_t next = kImageBase + in.end();
  const int w = in.width;
  const std::uint64_t mask = width_mask(w);

  switch (in.mnemonic) {
    case Mnemonic::Mov: {
      std::uint64_t v = 0;
      if (auto t = read_operand(s, in, in.op(1), v)) return trapped(*t);
      if (auto t = write_operand(s, in, in.op(0), v)) return trapped(*t);
      break;
    }
    case Mnemonic::Lea:
      write_register(s, in.op(0).reg, w, effective_address(s, in, in.op(1).mem) & mask);
      break;
    case Mnemonic::Add: case Mnemonic::Sub: case Mnemonic::And: case Mnemonic::Or:
    case Mnemonic::Xor: case Mnemonic::Cmp: case Mnemonic::Test: {
      std::uint64_t a = 0, b = 0;
      if (auto t = read_operand(s, in, in.op(0), a)) return trapped(*t);
      if (auto t = read_operand(s, in, in.op(1), b)) return trapped(*t);
      std::uint64_t r = 0;
      bool carry = false;
      FlagKind kind = FlagKind::Logic;
      switch (in.mnemonic) {
        case Mnemonic::Add:
          r = (a + b) & mask;
          carry = r < a;
          kind = FlagKind::Add;
          break;
        case Mnemonic::Sub: case Mnemonic::Cmp:
          r = (a - b) & mask;
          carry = a < b;
          kind = FlagKind::Sub;
          break;
        case Mnemonic::And: case Mnemonic::Test: r = a & b; break;
        case Mnemonic::Or: r = a | b; break;
        default: r = a ^ b; break;
      }
      if (in.mnemonic != Mnemonic::Cmp && in.mnemonic != Mnemonic::Test) {
        if (auto t = write_operand(s, in, in.op(0), r)) return trapped(*t);
      }
      s.flags = compute_flags(kind, w, a, b, r, carry).apply(s.flags);
      break;
    }
    case Mnemonic::Inc: case Mnemonic::Dec: {
      std::uint64_t a = 0;
      if (auto t = read_operand(s, in, in.op(0), a)) return trapped(*t);
      const bool inc = in.mnemonic == Mnemonic::Inc;
      const std::uint64_t r = (inc ? a + 1 : a - 1) & mask;
      if (auto t = write_operand(s, in, in.op(0), r)) return trapped(*t);
      s.flags = compute_flags(inc ? FlagKind::Inc : FlagKind::Dec, w, a, 1, r, false).apply(s.flags);
      break;
    }
    case Mnemonic::Shl: {
      std::uint64_t a = 0;
      if (auto t = read_operand(s, in, in.op(0), a)) return trapped(*t);
      const auto count = static_cast<int>(static_cast<std::uint64_t>(in.op(1).imm) & (w == 64 ? 63 : 31));
      const std::uint64_t r = (a << count) & mask;
      const bool carry = count <= w && ((a >> (w - count)) & 1);
      if (auto t = write_operand(s, in, in.op(0), r)) return trapped(*t);
      s.flags = compute_flags(FlagKind::Shl, w, a, static_cast<std::uint64_t>(count), r, carry).apply(s.flags);
      break;
    }
    case Mnemonic::Push: {
      auto o = push(s, reg(s, in.op(0).reg));
      if (o.kind != Outcome::Kind::Continue) return o;
      break;
    }
    case Mnemonic::Pop: {
      std::uint64_t v = 0;
      if (auto t = s.memory.read(reg(s, Reg::RSP), 8, v)) return trapped(*t);
      reg(s, Reg::RSP) += 8;
      reg(s, in.op(0).reg) = v;
      break;
    }
    case Mnemonic::Call: {
      const std::uint64_t target = in.op(0).is_reg()
                                       ? reg(s, in.op(0).reg)
                                       : static_cast<std::uint64_t>(static_cast<std::int64_t>(kImageBase) + branch_target(in));
      auto o = push(s, next);
      if (o.kind != Outcome::Kind::Continue) return o;
      s.rip = target;
      return {};
    }
    case Mnemonic::Ret: {
      std::uint64_t v = 0;
      if (auto t = s.memory.read(reg(s, Reg::RSP), 8, v)) return trapped(*t);
      reg(s, Reg::RSP) += 8;
      s.rip = v;
      return {};
    }
    case Mnemonic::Jmp:
      s.rip = in.op(0).is_reg() ? reg(s, in.op(0).reg)
                                : static_cast<std::uint64_t>(static_cast<std::int64_t>(kImageBase) + branch_target(in));
      return {};
    case Mnemonic::Nop:
      break;
    case Mnemonic::Int3:
      return trapped(TrapKind::Breakpoint);
    default:
      if (condition(in.mnemonic, s.flags)) {
        s.rip = static_cast<std::uint64_t>(static_cast<std::int64_t>(kImageBase) + branch_target(in));
        return {};
      }
      break;
  }
  s.rip = next;
  return {};
}

Outcome step(MachineState& s) {
  if (!s.memory.in_image(s.rip)) {
    if (auto h = hostcall_at(s.rip, s.memory.image_base() - 0x1000)) return hostcall(s, *h);
    return trapped(TrapKind::UntranslatedTarget);
  }
  const auto decoded = decode(s.memory.image(), s.rip - s.memory.image_base());
  if (const auto* in = std::get_if<DecodedInstruction>(&decoded)) return execute(s, *in);
  return trapped(TrapKind::InvalidDecode);
}

ExecutionResult snapshot(const MachineState& s, const StepOutcome& last, std::uint64_t steps) {
  ExecutionResult r;
  switch (last.kind) {
    case StepOutcome::Kind::Halted:
      r.status = RunStatus::Halted;
      r.exit_code = last.exit_code;
      break;
    case StepOutcome::Kind::Trapped:
      r.status = RunStatus::Trapped;
      r.trap = last.trap;
      break;
    case StepOutcome::Kind::Continue:
      r.status = RunStatus::FuelExhausted;
      break;
  }
  r.gprs = s.gpr;
  r.flags = s.flags;
  r.output = s.output;
  r.writable_memory.assign(s.memory.stack().begin(), s.memory.stack().end());
  r.steps = steps;
  return r;
}

ExecutionResult run_source(std::span<const std::uint8_t> image, std::size_t entry, std::uint64_t fuel,
                           const GprFile& gprs) {
  MachineState s(image, entry, gprs);
  StepOutcome last;
  std::uint64_t steps = 0;
  while (steps < fuel) {
    last = step(s);
    ++steps;
    if (last.kind != StepOutcome::Kind::Continue) break;
  }
  return snapshot(s, last, steps);
}

}  // namespace supertile::x86
