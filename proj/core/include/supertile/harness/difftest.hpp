#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "supertile/harness/generator.hpp"

namespace supertile::harness {

struct DifftestOptions {
  std::uint64_t seed_begin = 0;
  std::uint64_t seed_end = 100;  // exclusive
  std::size_t budget = 200;
  GenFeatures features;
  std::uint64_t fuel = 1'000'000;
  bool mid_entry = true;
};

struct DifftestFailure {
  std::uint64_t seed = 0;
  std::string variant;  // "pruned", "unpruned", "entry@<offset>/pruned", ...
  std::string detail;
};

struct DifftestReport {
  std::size_t programs = 0;
  std::size_t comparisons = 0;
  std::size_t passed = 0;
  // Mid-program entries whose reference run exhausted its fuel; not compared.
  std::size_t inconclusive = 0;
  std::vector<DifftestFailure> failures;  // sorted by seed

  bool ok() const { return failures.empty(); }
};

// One seed: assemble, run both sides with and without pruning, and repeat
// from a mid-program entry point picked by the seed.
DifftestReport difftest_seed(std::uint64_t seed, const DifftestOptions& options);
DifftestReport difftest(const DifftestOptions& options);

}  // namespace supertile::harness
