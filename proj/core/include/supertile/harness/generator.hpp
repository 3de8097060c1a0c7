#pragma once

#include <cstdint>
#include <string>

namespace supertile::harness {

struct GenFeatures {
  bool memory = true;
  bool indirect = true;
  bool overlap = true;

  static GenFeatures all() { return {}; }
  static GenFeatures none() { return {false, false, false}; }
};

struct GenSpec {
  std::uint64_t seed = 0;
  std::size_t instruction_budget = 200;
  GenFeatures features;
};

// Assembly text of a terminating program. Branches only go forward, pushes
// and pops balance, and the program ends in the exit hostcall. A pure
// function of `spec`. With indirect branches enabled, any budget above two
// yields at least one jump table, even when that overruns the budget.
std::string gen_program(const GenSpec& spec);

// Parses a comma separated list of memory, indirect, overlap, all or none.
GenFeatures parse_features(const std::string& list);

}  // namespace supertile::harness
