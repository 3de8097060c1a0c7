#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace supertile::harness {

// One concrete source instruction, as assembly text, that selects some set
// of bank tiles.
std::vector<std::string> instruction_forms();

struct FidelityOptions {
  std::uint64_t min_per_tile = 100'000;
  std::uint64_t seed = 1;
  std::size_t max_failures = 20;
};

struct FidelityReport {
  // Comparisons in which each tile took part.
  std::map<std::string, std::uint64_t> comparisons;
  std::uint64_t trials = 0;
  std::vector<std::string> failures;
  std::vector<std::string> uncovered;  // bank tiles no form selects

  std::uint64_t min_comparisons() const;
  bool ok() const { return failures.empty() && uncovered.empty(); }
};

// Executes every form against the reference interpreter with randomized and
// boundary inputs until each of its tiles has reached `min_per_tile`
// comparisons. Reg-reg 8-bit add/sub/cmp forms additionally sweep all 65,536
// operand pairs.
FidelityReport check_tile_fidelity(const FidelityOptions& options = {});

}  // namespace supertile::harness
