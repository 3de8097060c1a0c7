#pragma once

#include <cstdint>
#include <string>

namespace supertile::x86 {

// Bit positions follow RFLAGS so a mask can be packed into a register as-is.
enum class Flag : std::uint8_t { CF = 0, PF = 2, AF = 4, ZF = 6, SF = 7, OF = 11 };

inline constexpr Flag kAllFlags[] = {Flag::CF, Flag::PF, Flag::AF, Flag::ZF, Flag::SF, Flag::OF};

class FlagMask {
 public:
  static constexpr std::uint64_t kDefinedBits = 0x08D5;

  constexpr FlagMask() = default;

  static constexpr FlagMask from_bits(std::uint64_t bits) { return FlagMask(bits & kDefinedBits); }
  static constexpr FlagMask all() { return FlagMask(kDefinedBits); }
  static constexpr FlagMask none() { return FlagMask(0); }
  static constexpr FlagMask of(Flag f) { return FlagMask(std::uint64_t{1} << static_cast<int>(f)); }

  constexpr std::uint64_t bits() const { return bits_; }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr bool test(Flag f) const { return (bits_ >> static_cast<int>(f)) & 1; }

  constexpr void set(Flag f, bool value) {
    const std::uint64_t bit = std::uint64_t{1} << static_cast<int>(f);
    bits_ = value ? (bits_ | bit) : (bits_ & ~bit);
  }

  constexpr FlagMask operator|(FlagMask o) const { return FlagMask(bits_ | o.bits_); }
  constexpr FlagMask operator&(FlagMask o) const { return FlagMask(bits_ & o.bits_); }
  constexpr FlagMask operator~() const { return FlagMask(~bits_ & kDefinedBits); }
  constexpr FlagMask& operator|=(FlagMask o) { bits_ |= o.bits_; return *this; }
  constexpr FlagMask& operator&=(FlagMask o) { bits_ &= o.bits_; return *this; }
  constexpr bool operator==(const FlagMask&) const = default;

 private:
  constexpr explicit FlagMask(std::uint64_t bits) : bits_(bits) {}
  std::uint64_t bits_ = 0;
};

// "CF|ZF" style rendering; "-" when empty.
std::string to_string(FlagMask mask);

enum class FlagKind : std::uint8_t { Add, Sub, Inc, Dec, Logic, Shl };

// written: which flags the operation defines. values: their new values.
struct FlagUpdate {
  FlagMask written;
  FlagMask values;

  FlagMask apply(FlagMask old) const { return (old & ~written) | (values & written); }
};

// Architectural flag results for an operation of the given width. a and b are
// the operands (b is the shift count for Shl), result is the untruncated
// outcome, carry_out is the carry/borrow leaving the top bit (for Shl the last
// bit shifted out). Undefined flags are pinned: logic ops clear AF, and a
// shift by more than one clears OF and AF.
FlagUpdate compute_flags(FlagKind kind, int width, std::uint64_t a, std::uint64_t b,
                         std::uint64_t result, bool carry_out);

constexpr std::uint64_t width_mask(int width) {
  return width >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << width) - 1;
}

}  // namespace supertile::x86
