#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "supertile/trap.hpp"
#include "supertile/x86/flags.hpp"

namespace supertile {

enum class RunStatus : std::uint8_t { Halted, Trapped, FuelExhausted };

using GprFile = std::array<std::uint64_t, 16>;

// All registers zero except RSP.
GprFile default_gprs();

// Observable outcome of a guest run, in source-architecture terms. The target
// VM maps its state back through the register map before reporting.
struct ExecutionResult {
  RunStatus status = RunStatus::Halted;
  std::uint64_t exit_code = 0;
  TrapKind trap = TrapKind::InvalidDecode;
  GprFile gprs{};
  x86::FlagMask flags;
  std::vector<std::uint8_t> output;
  std::vector<std::uint8_t> writable_memory;
  std::uint64_t steps = 0;
};

// First observable difference, or nullopt when the runs agree. Step counts
// are not observable (the two sides count different things).
std::optional<std::string> compare_results(const ExecutionResult& expected,
                                           const ExecutionResult& actual);

std::string describe(const ExecutionResult& result);

}  // namespace supertile
