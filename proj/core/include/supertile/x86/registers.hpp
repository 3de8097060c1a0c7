#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

namespace supertile::x86 {

// Hardware encoding order.
enum class Reg : std::uint8_t {
  RAX, RCX, RDX, RBX, RSP, RBP, RSI, RDI,
  R8, R9, R10, R11, R12, R13, R14, R15,
};

inline constexpr int kGprCount = 16;

constexpr int index_of(Reg r) { return static_cast<int>(r); }
constexpr Reg reg_at(int i) { return static_cast<Reg>(i); }

// "RAX", "R12": the spelling used inside tile names.
std::string_view upper_name(Reg r);

// Assembly spelling at a width: al/eax/rax, spl/esp/rsp, r8b/r8d/r8.
std::string_view reg_name(Reg r, int width);

struct NamedReg {
  Reg reg;
  int width;
};

std::optional<NamedReg> parse_reg(std::string_view name);

}  // namespace supertile::x86
