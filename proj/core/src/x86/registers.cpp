#include "supertile/x86/registers.hpp"

#include <array>

namespace supertile::x86 {

namespace {

constexpr std::array<std::string_view, 16> kUpper = {
    "RAX", "RCX", "RDX", "RBX", "RSP", "RBP", "RSI", "RDI",
    "R8",  "R9",  "R10", "R11", "R12", "R13", "R14", "R15"};
constexpr std::array<std::string_view, 16> k64 = {
    "rax", "rcx", "rdx", "rbx", "rsp", "rbp", "rsi", "rdi",
    "r8",  "r9",  "r10", "r11", "r12", "r13", "r14", "r15"};
constexpr std::array<std::string_view, 16> k32 = {
    "eax", "ecx", "edx", "ebx", "esp", "ebp", "esi", "edi",
    "r8d", "r9d", "r10d", "r11d", "r12d", "r13d", "r14d", "r15d"};
constexpr std::array<std::string_view, 16> k8 = {
    "al",  "cl",  "dl",   "bl",   "spl",  "bpl",  "sil",  "dil",
    "r8b", "r9b", "r10b", "r11b", "r12b", "r13b", "r14b", "r15b"};

}  // namespace

std::string_view upper_name(Reg r) { return kUpper[static_cast<std::size_t>(r)]; }

std::string_view reg_name(Reg r, int width) {
  const auto i = static_cast<std::size_t>(r);
  switch (width) {
    case 8: return k8[i];
    case 32: return k32[i];
    default: return k64[i];
  }
}

std::optional<NamedReg> parse_reg(std::string_view name) {
  for (int i = 0; i < kGprCount; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    if (name == k64[idx]) return NamedReg{reg_at(i), 64};
    if (name == k32[idx]) return NamedReg{reg_at(i), 32};
    if (name == k8[idx]) return NamedReg{reg_at(i), 8};
  }
  return std::nullopt;
}

}  // namespace supertile::x86
