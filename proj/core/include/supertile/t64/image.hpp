#pragma once

#include <cstdint>
#include <vector>

#include "supertile/t64/isa.hpp"
#include "supertile/x86/memory.hpp"

namespace supertile::t64 {

// Lookup-table entry for offsets that have no translation.
inline constexpr std::int64_t kNoTranslation = -1;

// A translated program. The source image travels along because the guest may
// read it as data; the code never executes source bytes.
struct TranslatedImage {
  std::uint64_t image_base = kImageBase;
  std::uint64_t entry = 0;
  std::uint64_t hostcall_base = kHostcallBase;
  std::vector<std::uint8_t> source_image;
  std::vector<std::int64_t> table;  // one entry per source byte offset
  std::vector<TargetInstruction> code;

  bool operator==(const TranslatedImage&) const = default;
};

}  // namespace supertile::t64
