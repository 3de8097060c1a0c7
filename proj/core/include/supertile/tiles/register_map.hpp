#pragma once

#include <array>
#include <cstdint>
#include <optional>

#include "supertile/x86/registers.hpp"

namespace supertile::tiles {

using TargetReg = std::uint8_t;

// Where each piece of source state lives on the target. S0 carries effective
// addresses, S1 carries memory operand values, S0 and S2 are tile temporaries.
struct RegisterMap {
  std::array<TargetReg, x86::kGprCount> gpr{};
  TargetReg flags = 0;
  std::array<TargetReg, 3> scratch{};

  TargetReg target_of(x86::Reg r) const { return gpr[static_cast<std::size_t>(x86::index_of(r))]; }
  std::optional<x86::Reg> source_of(TargetReg t) const;
};

// Arguments land in argument registers, caller-saved in caller-saved,
// callee-saved in callee-saved:
//   RDI T0, RSI T1, RDX T2, RCX T3, R8 T4, R9 T5, RAX T9, R10 T10, R11 T11,
//   RBX T19, RBP T20, R12..R15 T21..T24, RSP T25; flags T14; scratch T16 T17 T15.
const RegisterMap& default_register_map();

// Injective, avoids the zero register, keeps flags and scratch outside the
// GPR image.
bool is_well_formed(const RegisterMap& map);

}  // namespace supertile::tiles
