#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "supertile/execution.hpp"
#include "supertile/t64/image.hpp"
#include "supertile/tiles/register_map.hpp"

namespace supertile::t64 {

struct TargetState {
  std::array<std::uint64_t, kRegisterCount> regs{};
  std::uint64_t pc = 0;
  AddressSpace memory;
  std::vector<std::uint8_t> output;

  explicit TargetState(std::span<const std::uint8_t> source_image, std::uint64_t image_base = kImageBase)
      : memory(source_image, image_base) {}
};

// What the VM needs besides its state: code, lookup table and address layout.
struct CodeView {
  std::span<const TargetInstruction> code;
  std::span<const std::int64_t> table;
  std::uint64_t image_base = kImageBase;
};

inline CodeView view_of(const TranslatedImage& image) {
  return CodeView{image.code, image.table, image.image_base};
}

struct VmOutcome {
  enum class Kind : std::uint8_t { Continue, Halted, Trapped };

  Kind kind = Kind::Continue;
  std::uint64_t exit_code = 0;
  TrapKind trap = TrapKind::InvalidDecode;
};

// One target instruction. A trapping instruction leaves the state untouched.
VmOutcome exec_step(TargetState& state, const CodeView& view);

// Load source-level registers and flags into target registers.
void load_source_state(TargetState& state, const GprFile& gprs, x86::FlagMask flags,
                       const tiles::RegisterMap& map = tiles::default_register_map());

// Read target registers back as source-level state.
GprFile source_gprs(const TargetState& state, const tiles::RegisterMap& map = tiles::default_register_map());
x86::FlagMask source_flags(const TargetState& state, const tiles::RegisterMap& map = tiles::default_register_map());

ExecutionResult snapshot(const TargetState& state, const VmOutcome& last, std::uint64_t steps,
                         const tiles::RegisterMap& map = tiles::default_register_map());

// Run from the lookup-table entry of image.entry. `fuel` counts target
// instructions.
ExecutionResult run_translated(const TranslatedImage& image, std::uint64_t fuel,
                               const GprFile& gprs = default_gprs());

}  // namespace supertile::t64
