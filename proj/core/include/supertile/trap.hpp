#pragma once

#include <cstdint>
#include <string_view>

namespace supertile {

// Reasons a guest stops abnormally. Shared by the source interpreter and the
// target VM so that both sides report faults with the same vocabulary.
enum class TrapKind : std::uint8_t {
  InvalidDecode = 1,
  Breakpoint = 2,
  WriteToImage = 3,
  BadMemory = 4,
  UntranslatedTarget = 5,
  BadProgramCounter = 6,
};

std::string_view trap_name(TrapKind kind);

}  // namespace supertile
