#include "supertile/t64/vm.hpp"

#include <string>

namespace supertile::t64 {

namespace {

VmOutcome trapped(TrapKind kind) {
  VmOutcome o;
  o.kind = VmOutcome::Kind::Trapped;
  o.trap = kind;
  return o;
}

}  // namespace

VmOutcome exec_step(TargetState& s, const CodeView& view) {
  if (s.pc >= view.code.size()) return trapped(TrapKind::BadProgramCounter);
  const TargetInstruction& in = view.code[s.pc];
  auto& r = s.regs;
  const std::uint64_t rn = r[in.rn];
  const auto imm = static_cast<std::uint64_t>(in.imm);
  std::uint64_t result = 0;
  std::uint64_t next = s.pc + 1;

  switch (in.op) {
    case Opcode::LDI: result = imm; break;
    case Opcode::MOVR: result = rn; break;
    case Opcode::ADD: result = rn + (r[in.rm] + imm); break;
    case Opcode::SUB: result = rn - (r[in.rm] + imm); break;
    case Opcode::AND: result = rn & (r[in.rm] + imm); break;
    case Opcode::OR: result = rn | (r[in.rm] + imm); break;
    case Opcode::XOR: result = rn ^ (r[in.rm] + imm); break;
    case Opcode::SHL: result = rn << ((r[in.rm] + imm) & 63); break;
    case Opcode::SHR: result = rn >> ((r[in.rm] + imm) & 63); break;
    case Opcode::NOT: result = ~rn; break;
    case Opcode::ADDI: result = rn + imm; break;
    case Opcode::LOAD1: case Opcode::LOAD4: case Opcode::LOAD8:
      if (auto t = s.memory.read(rn + imm, access_bytes(in.op), result)) return trapped(*t);
      break;
    case Opcode::STORE1: case Opcode::STORE4: case Opcode::STORE8:
      if (auto t = s.memory.write(rn + imm, access_bytes(in.op), r[in.rd])) return trapped(*t);
      s.pc = next;
      return {};
    case Opcode::B:
      s.pc = imm;
      return {};
    case Opcode::BNEZ:
      s.pc = rn != 0 ? imm : next;
      return {};
    case Opcode::BEQZ:
      s.pc = rn == 0 ? imm : next;
      return {};
    case Opcode::XLATE: {
      const std::uint64_t d = rn - view.image_base;
      if (d >= view.table.size() || view.table[d] < 0) return trapped(TrapKind::UntranslatedTarget);
      result = static_cast<std::uint64_t>(view.table[d]);
      break;
    }
    case Opcode::BR:
      s.pc = rn;
      return {};
    case Opcode::HOST:
      switch (in.imm) {
        case 0: {
          VmOutcome o;
          o.kind = VmOutcome::Kind::Halted;
          o.exit_code = rn;
          return o;
        }
        case 1:
          s.output.push_back(static_cast<std::uint8_t>(rn));
          break;
        default: {
          const std::string text = std::to_string(rn);
          s.output.insert(s.output.end(), text.begin(), text.end());
          break;
        }
      }
      s.pc = next;
      return {};
    case Opcode::TRAP:
      return trapped(static_cast<TrapKind>(in.imm));
    case Opcode::HALT: {
      VmOutcome o;
      o.kind = VmOutcome::Kind::Halted;
      o.exit_code = rn;
      return o;
    }
  }
  if (in.rd != kZeroReg) r[in.rd] = result;
  s.pc = next;
  return {};
}

void load_source_state(TargetState& s, const GprFile& gprs, x86::FlagMask flags, const tiles::RegisterMap& map) {
  for (int i = 0; i < x86::kGprCount; ++i) {
    s.regs[map.target_of(x86::reg_at(i))] = gprs[static_cast<std::size_t>(i)];
  }
  s.regs[map.flags] = flags.bits();
}

GprFile source_gprs(const TargetState& s, const tiles::RegisterMap& map) {
  GprFile g{};
  for (int i = 0; i < x86::kGprCount; ++i) g[static_cast<std::size_t>(i)] = s.regs[map.target_of(x86::reg_at(i))];
  return g;
}

x86::FlagMask source_flags(const TargetState& s, const tiles::RegisterMap& map) {
  return x86::FlagMask::from_bits(s.regs[map.flags]);
}

ExecutionResult snapshot(const TargetState& s, const VmOutcome& last, std::uint64_t steps,
                         const tiles::RegisterMap& map) {
  ExecutionResult r;
  switch (last.kind) {
    case VmOutcome::Kind::Halted:
      r.status = RunStatus::Halted;
      r.exit_code = last.exit_code;
      break;
    case VmOutcome::Kind::Trapped:
      r.status = RunStatus::Trapped;
      r.trap = last.trap;
      break;
    case VmOutcome::Kind::Continue:
      r.status = RunStatus::FuelExhausted;
      break;
  }
  r.gprs = source_gprs(s, map);
  r.flags = source_flags(s, map);
  r.output = s.output;
  r.writable_memory.assign(s.memory.stack().begin(), s.memory.stack().end());
  r.steps = steps;
  return r;
}

ExecutionResult run_translated(const TranslatedImage& image, std::uint64_t fuel, const GprFile& gprs) {
  TargetState s(image.source_image, image.image_base);
  load_source_state(s, gprs, x86::FlagMask::none());
  const CodeView view = view_of(image);
  VmOutcome last;
  std::uint64_t steps = 0;
  if (image.entry >= image.table.size() || image.table[image.entry] < 0) {
    return snapshot(s, trapped(TrapKind::UntranslatedTarget), 0);
  }
  s.pc = static_cast<std::uint64_t>(image.table[image.entry]);
  while (steps < fuel) {
    last = exec_step(s, view);
    ++steps;
    if (last.kind != VmOutcome::Kind::Continue) break;
  }
  return snapshot(s, last, steps);
}

}  // namespace supertile::t64
