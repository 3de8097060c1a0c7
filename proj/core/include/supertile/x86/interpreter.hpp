#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "supertile/execution.hpp"
#include "supertile/x86/instruction.hpp"
#include "supertile/x86/memory.hpp"

namespace supertile::x86 {

struct MachineState {
  GprFile gpr{};
  FlagMask flags;
  std::uint64_t rip = 0;
  AddressSpace memory;
  std::vector<std::uint8_t> output;

  MachineState(std::span<const std::uint8_t> image, std::size_t entry,
               const GprFile& gprs = default_gprs());
};

struct StepOutcome {
  enum class Kind : std::uint8_t { Continue, Halted, Trapped };

  Kind kind = Kind::Continue;
  std::uint64_t exit_code = 0;
  TrapKind trap = TrapKind::InvalidDecode;
  bool hostcall = false;  // the step serviced a hostcall slot
};

// Execute one already-decoded instruction located at state.rip. A trapping
// instruction leaves the state untouched.
StepOutcome execute(MachineState& state, const DecodedInstruction& in);

// Fetch, decode and execute at state.rip, or service a hostcall slot.
StepOutcome step(MachineState& state);

ExecutionResult snapshot(const MachineState& state, const StepOutcome& last, std::uint64_t steps);

// Reference execution. Returns FuelExhausted once `fuel` steps have run.
ExecutionResult run_source(std::span<const std::uint8_t> image, std::size_t entry,
                           std::uint64_t fuel, const GprFile& gprs = default_gprs());

}  // namespace supertile::x86
