#include "supertile/x86/memory.hpp"

namespace supertile {

std::optional<Hostcall> hostcall_at(std::uint64_t address, std::uint64_t base) {
  for (auto h : {Hostcall::Exit, Hostcall::WriteChar, Hostcall::WriteU64}) {
    if (address == hostcall_address(h, base)) return h;
  }
  return std::nullopt;
}

AddressSpace::AddressSpace(std::span<const std::uint8_t> image, std::uint64_t image_base)
    : image_(std::make_shared<const std::vector<std::uint8_t>>(image.begin(), image.end())),
      image_base_(image_base),
      stack_(kStackEnd - kStackBase, 0) {
  write(kInitialRsp, 8, hostcall_address(Hostcall::Exit, image_base - 0x1000));
}

std::optional<TrapKind> AddressSpace::read(std::uint64_t address, int bytes, std::uint64_t& out) const {
  const auto n = static_cast<std::uint64_t>(bytes);
  const std::uint8_t* src = nullptr;
  if (address - kStackBase < stack_.size() && address - kStackBase + n <= stack_.size()) {
    src = stack_.data() + (address - kStackBase);
  } else if (address - image_base_ < image_->size() && address - image_base_ + n <= image_->size()) {
    src = image_->data() + (address - image_base_);
  } else {
    return TrapKind::BadMemory;
  }
  std::uint64_t v = 0;
  for (std::uint64_t i = 0; i < n; ++i) v |= std::uint64_t{src[i]} << (8 * i);
  out = v;
  return std::nullopt;
}

std::optional<TrapKind> AddressSpace::write(std::uint64_t address, int bytes, std::uint64_t value) {
  const auto n = static_cast<std::uint64_t>(bytes);
  if (address - kStackBase < stack_.size() && address - kStackBase + n <= stack_.size()) {
    std::uint8_t* dst = stack_.data() + (address - kStackBase);
    for (std::uint64_t i = 0; i < n; ++i) dst[i] = static_cast<std::uint8_t>(value >> (8 * i));
    return std::nullopt;
  }
  // Any overlap with the image counts as an attempt to modify it.
  if (address - image_base_ < image_->size() ||
      (address + n - 1) - image_base_ < image_->size()) {
    return TrapKind::WriteToImage;
  }
  return TrapKind::BadMemory;
}

}  // namespace supertile
