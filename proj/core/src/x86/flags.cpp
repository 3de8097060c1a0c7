#include "supertile/x86/flags.hpp"

#include <bit>

namespace supertile::x86 {

std::string to_string(FlagMask mask) {
  static constexpr const char* kNames[] = {"CF", "PF", "AF", "ZF", "SF", "OF"};
  std::string out;
  for (int i = 0; i < 6; ++i) {
    if (!mask.test(kAllFlags[i])) continue;
    if (!out.empty()) out += '|';
    out += kNames[i];
  }
  return out.empty() ? "-" : out;
}

FlagUpdate compute_flags(FlagKind kind, int width, std::uint64_t a, std::uint64_t b,
                         std::uint64_t result, bool carry_out) {
  const std::uint64_t mask = width_mask(width);
  const int top = width - 1;
  const std::uint64_t r = result & mask;

  FlagUpdate u;
  u.written = FlagMask::all();
  u.values.set(Flag::ZF, r == 0);
  u.values.set(Flag::SF, (r >> top) & 1);
  u.values.set(Flag::PF, std::popcount(r & 0xFF) % 2 == 0);

  switch (kind) {
    case FlagKind::Add:
    case FlagKind::Inc:
      u.values.set(Flag::CF, carry_out);
      u.values.set(Flag::OF, (((a ^ r) & (b ^ r)) >> top) & 1);
      u.values.set(Flag::AF, ((a ^ b ^ r) >> 4) & 1);
      break;
    case FlagKind::Sub:
    case FlagKind::Dec:
      u.values.set(Flag::CF, carry_out);
      u.values.set(Flag::OF, (((a ^ b) & (a ^ r)) >> top) & 1);
      u.values.set(Flag::AF, ((a ^ b ^ r) >> 4) & 1);
      break;
    case FlagKind::Logic:
      break;
    case FlagKind::Shl:
      u.values.set(Flag::CF, carry_out);
      u.values.set(Flag::OF, b == 1 && (((r >> top) & 1) != static_cast<std::uint64_t>(carry_out)));
      break;
  }
  if (kind == FlagKind::Inc || kind == FlagKind::Dec) {
    u.written = ~FlagMask::of(Flag::CF);
    u.values &= u.written;
  }
  return u;
}

}  // namespace supertile::x86
