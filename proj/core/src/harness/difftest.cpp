#include "supertile/harness/difftest.hpp"

#include <algorithm>
#include <random>

#include <fmt/format.h>

#include "supertile/t64/vm.hpp"
#include "supertile/translate/translator.hpp"
#include "supertile/x86/assembler.hpp"
#include "supertile/x86/interpreter.hpp"

namespace supertile::harness {

namespace {

// Target instructions allowed per reference step.
constexpr std::uint64_t kFuelRatio = 256;

void compare_run(DifftestReport& report, std::uint64_t seed, const std::string& variant,
                 const t64::TranslatedImage& image, const ExecutionResult& expected) {
  ++report.comparisons;
  const auto actual = t64::run_translated(image, expected.steps * kFuelRatio + 4096);
  if (auto d = compare_results(expected, actual)) {
    report.failures.push_back({seed, variant, *d});
  } else {
    ++report.passed;
  }
}

}  // namespace

DifftestReport difftest_seed(std::uint64_t seed, const DifftestOptions& options) {
  DifftestReport report;
  report.programs = 1;
  GenSpec spec{seed, options.budget, options.features};
  x86::Assembly assembly;
  try {
    assembly = x86::assemble(gen_program(spec));
  } catch (const std::exception& e) {
    report.failures.push_back({seed, "assemble", e.what()});
    return report;
  }
  const auto expected = x86::run_source(assembly.image, assembly.entry, options.fuel);
  if (expected.status == RunStatus::FuelExhausted) {
    report.failures.push_back({seed, "reference", "generated program did not halt"});
    return report;
  }
  const auto pruned = translate::translate(assembly.image, assembly.entry, {true});
  const auto unpruned = translate::translate_image(assembly.image, assembly.entry, {false});
  compare_run(report, seed, "pruned", pruned.image, expected);
  compare_run(report, seed, "unpruned", unpruned, expected);

  if (options.mid_entry) {
    std::vector<std::size_t> valid;
    for (const auto& n : pruned.cfg.nodes) {
      if (n.valid() && n.offset != assembly.entry) valid.push_back(n.offset);
    }
    if (!valid.empty()) {
      std::mt19937_64 rng(seed ^ 0x9E3779B97F4A7C15ull);
      const std::size_t entry = valid[rng() % valid.size()];
      const auto mid = x86::run_source(assembly.image, entry, options.fuel);
      if (mid.status == RunStatus::FuelExhausted) {
        ++report.inconclusive;
      } else {
        auto a = pruned.image;
        a.entry = entry;
        auto b = unpruned;
        b.entry = entry;
        compare_run(report, seed, fmt::format("entry@{:#x}/pruned", entry), a, mid);
        compare_run(report, seed, fmt::format("entry@{:#x}/unpruned", entry), b, mid);
      }
    }
  }
  return report;
}

DifftestReport difftest(const DifftestOptions& options) {
  DifftestReport total;
  for (auto seed = options.seed_begin; seed < options.seed_end; ++seed) {
    auto r = difftest_seed(seed, options);
    total.programs += r.programs;
    total.comparisons += r.comparisons;
    total.passed += r.passed;
    total.inconclusive += r.inconclusive;
    for (auto& f : r.failures) total.failures.push_back(std::move(f));
  }
  std::stable_sort(total.failures.begin(), total.failures.end(),
                   [](const auto& a, const auto& b) { return a.seed < b.seed; });
  return total;
}

}  // namespace supertile::harness
