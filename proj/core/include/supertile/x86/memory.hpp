#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "supertile/trap.hpp"

namespace supertile {

inline constexpr std::uint64_t kImageBase = 0x400000;
inline constexpr std::uint64_t kHostcallBase = kImageBase - 0x1000;
inline constexpr std::uint64_t kStackBase = 0x7F0000;
inline constexpr std::uint64_t kStackEnd = 0x800000;
inline constexpr std::uint64_t kInitialRsp = 0x7FFFF8;

enum class Hostcall : std::uint8_t { Exit = 0, WriteChar = 1, WriteU64 = 2 };

inline constexpr std::uint64_t hostcall_address(Hostcall h, std::uint64_t base = kHostcallBase) {
  return base + 8 * static_cast<std::uint64_t>(h);
}

std::optional<Hostcall> hostcall_at(std::uint64_t address, std::uint64_t base = kHostcallBase);

// Guest address space: the read-only image plus a zero-filled stack whose slot
// at the initial RSP holds the exit hostcall address, so a top-level `ret`
// ends the run.
class AddressSpace {
 public:
  AddressSpace(std::span<const std::uint8_t> image, std::uint64_t image_base = kImageBase);

  std::optional<TrapKind> read(std::uint64_t address, int bytes, std::uint64_t& out) const;
  std::optional<TrapKind> write(std::uint64_t address, int bytes, std::uint64_t value);

  std::span<const std::uint8_t> image() const { return *image_; }
  std::span<const std::uint8_t> stack() const { return stack_; }
  std::uint64_t image_base() const { return image_base_; }

  bool in_image(std::uint64_t address) const {
    return address - image_base_ < image_->size();
  }

 private:
  std::shared_ptr<const std::vector<std::uint8_t>> image_;
  std::uint64_t image_base_;
  std::vector<std::uint8_t> stack_;
};

}  // namespace supertile
