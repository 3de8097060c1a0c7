#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "supertile/x86/instruction.hpp"

namespace supertile::x86 {

// Decode the instruction starting at `offset`. Pure and deterministic; every
// byte offset of an image is a legal starting point.
DecodeResult decode(std::span<const std::uint8_t> image, std::size_t offset);

}  // namespace supertile::x86
