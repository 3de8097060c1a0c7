#pragma once

#include <cstddef>
#include <optional>
#include <string>

#include "supertile/translate/translator.hpp"

namespace supertile::harness {

struct LockstepResult {
  std::size_t steps = 0;  // source steps compared
  bool finished = false;  // both sides halted or trapped
  std::optional<std::string> divergence;
};

// Runs the reference interpreter from `start` and the translated code from
// table[start] side by side. After every source step that lands inside the
// image, the target runs until it reaches that offset's label and the two
// states are compared. Flags are compared under the offset's live-in set
// when `pruned`, in full otherwise.
LockstepResult lockstep(const translate::Translation& translation, std::size_t start, bool pruned,
                        std::size_t max_steps = 100);

}  // namespace supertile::harness
