#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "supertile/t64/image.hpp"

namespace supertile::t64 {

enum class ContainerErrorKind : std::uint8_t {
  BadMagic,
  VersionMismatch,
  TruncatedContainer,
  ChecksumMismatch,
  InvalidContent,
};

class ContainerError : public std::runtime_error {
 public:
  ContainerError(ContainerErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ContainerErrorKind kind() const { return kind_; }

 private:
  ContainerErrorKind kind_;
};

inline constexpr std::uint16_t kContainerVersion = 1;

// "ELVT" container: magic, u16 version, u64 image_base, u64 entry,
// u64 hostcall_base, u32-length source image, u32-count i64 table,
// u32-count 12-byte instructions (op, rd, rn, rm, imm u64), CRC-32 of all
// preceding bytes. Little-endian throughout.
std::vector<std::uint8_t> serialize(const TranslatedImage& image);

// Throws ContainerError.
TranslatedImage deserialize(std::span<const std::uint8_t> bytes);

}  // namespace supertile::t64
