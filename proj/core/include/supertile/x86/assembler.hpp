#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "supertile/x86/instruction.hpp"

namespace supertile::x86 {

class AssemblyError : public std::runtime_error {
 public:
  AssemblyError(int line, const std::string& what);
  int line() const { return line_; }

 private:
  int line_;
};

struct Assembly {
  std::vector<std::uint8_t> image;
  std::map<std::string, std::size_t, std::less<>> symbols;
  // Every emitted instruction, as it should decode at its own offset.
  std::vector<DecodedInstruction> instructions;
  // `_start` if defined, otherwise 0.
  std::size_t entry = 0;
};

// Intel-syntax assembler for the supported subset plus `.byte`. Labels
// `__exit`, `__putc` and `__putu64` name the hostcall slots.
Assembly assemble(std::string_view text);

}  // namespace supertile::x86
