// Acceptance run: one PASS/FAIL line per criterion. Exit status is nonzero
// if any criterion fails.

#include <chrono>
#include <cstdio>
#include <random>
#include <string>

#include <fmt/core.h>

#include "supertile/harness/difftest.hpp"
#include "supertile/harness/fidelity.hpp"
#include "supertile/harness/generator.hpp"
#include "supertile/harness/lockstep.hpp"
#include "supertile/harness/metrics.hpp"
#include "supertile/harness/programs.hpp"
#include "supertile/t64/container.hpp"
#include "supertile/t64/vm.hpp"
#include "supertile/translate/translator.hpp"
#include "supertile/x86/assembler.hpp"
#include "supertile/x86/interpreter.hpp"

using namespace supertile;

namespace {

// Pinned tolerances.
constexpr double kGoldenSeconds = 1.0;
constexpr std::uint64_t kFidelityPerTile = 100'000;
constexpr double kFidelitySeconds = 600.0;
constexpr std::uint64_t kDifftestSeeds = 1000;
constexpr std::size_t kDifftestBudget = 200;
constexpr double kDifftestSeconds = 300.0;
constexpr std::size_t kCorpusImages = 50;
constexpr std::size_t kLockstepOffsets = 20;
constexpr std::size_t kLockstepSteps = 100;
constexpr double kIdentityTolerance = 0.01;
constexpr std::uint64_t kFuel = 1'000'000;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void report(int id, bool pass, const std::string& what) {
  if (!pass) ++failures;
  fmt::print("criterion {}: {} {}\n", id, pass ? "PASS" : "FAIL", what);
  std::fflush(stdout);
}

GprFile with_rdi(std::uint64_t v) {
  GprFile g = default_gprs();
  g[static_cast<std::size_t>(x86::index_of(x86::Reg::RDI))] = v;
  return g;
}

// Both sides agree with each other and with `expect` on RAX under `mask`.
bool golden_case(const x86::Assembly& a, const t64::TranslatedImage& img, std::uint64_t input, std::uint64_t mask,
                 std::uint64_t expect, std::string& detail) {
  const auto src = x86::run_source(a.image, a.entry, kFuel, with_rdi(input));
  const auto dst = t64::run_translated(img, kFuel * 64, with_rdi(input));
  const std::uint64_t s = src.gprs[0] & mask;
  const std::uint64_t d = dst.gprs[0] & mask;
  if (src.status != RunStatus::Halted || dst.status != RunStatus::Halted || s != expect || d != expect ||
      compare_results(src, dst)) {
    detail += fmt::format(" input={:#x} oracle={:#x} vm={:#x};", input, s, d);
    return false;
  }
  return true;
}

void criterion_goldens() {
  const auto t0 = Clock::now();
  bool ok = true;
  std::string detail;
  const auto ovl = x86::assemble(harness::overlapping_return_program());
  const auto ovl_img = translate::translate_image(ovl.image, ovl.entry);
  ok &= golden_case(ovl, ovl_img, 0, 0xFF, 0xC2, detail);
  for (std::uint64_t v : {std::uint64_t{1}, std::uint64_t{7}, std::uint64_t{1} << 63}) {
    ok &= golden_case(ovl, ovl_img, v, 0xFF, 0xC3, detail);
  }
  const auto jt = x86::assemble(harness::jump_table_program());
  const auto jt_img = translate::translate_image(jt.image, jt.entry);
  for (std::uint64_t i = 0; i < 8; ++i) ok &= golden_case(jt, jt_img, i, ~std::uint64_t{0}, 4 - (i & 3), detail);
  const double secs = seconds_since(t0);
  report(1, ok && secs < kGoldenSeconds,
         fmt::format("golden programs: overlapping return 4/4 inputs, jump table 8/8 inputs, {:.3f}s (limit {:.0f}s){}",
                     secs, kGoldenSeconds, detail));
}

void criterion_fidelity() {
  const auto t0 = Clock::now();
  harness::FidelityOptions o;
  o.min_per_tile = kFidelityPerTile;
  const auto r = harness::check_tile_fidelity(o);
  const double secs = seconds_since(t0);
  std::string detail;
  for (const auto& f : r.failures) detail += "\n    " + f;
  for (const auto& u : r.uncovered) detail += "\n    uncovered " + u;
  report(2, r.ok() && r.min_comparisons() >= kFidelityPerTile && secs < kFidelitySeconds,
         fmt::format("per-tile fidelity: {} tiles, min {} comparisons/tile (need {}), {} trials, {} mismatches, "
                     "{} uncovered, {:.1f}s (limit {:.0f}s){}",
                     r.comparisons.size(), r.min_comparisons(), kFidelityPerTile, r.trials, r.failures.size(),
                     r.uncovered.size(), secs, kFidelitySeconds, detail));
}

void criterion_difftest() {
  const auto t0 = Clock::now();
  harness::DifftestOptions o;
  o.seed_begin = 0;
  o.seed_end = kDifftestSeeds;
  o.budget = kDifftestBudget;
  o.features = harness::GenFeatures::all();
  o.fuel = kFuel;
  o.mid_entry = true;
  const auto r = harness::difftest(o);
  const double secs = seconds_since(t0);
  std::string detail;
  for (std::size_t i = 0; i < r.failures.size() && i < 10; ++i) {
    detail += fmt::format("\n    seed {} {}: {}", r.failures[i].seed, r.failures[i].variant, r.failures[i].detail);
  }
  report(3, r.ok() && r.programs == kDifftestSeeds && secs < kDifftestSeconds,
         fmt::format("differential: {} programs, {} comparisons (pruned, unpruned, mid-entry), {} passed, "
                     "{} inconclusive, {} divergences, {:.1f}s (limit {:.0f}s){}",
                     r.programs, r.comparisons, r.passed, r.inconclusive, r.failures.size(), secs, kDifftestSeconds,
                     detail));
}

struct CorpusImage {
  std::uint64_t seed;
  x86::Assembly a;
};

std::vector<CorpusImage> corpus() {
  std::vector<CorpusImage> out;
  for (std::uint64_t seed = 0; seed < kCorpusImages; ++seed) {
    out.push_back({seed, x86::assemble(harness::gen_program({seed, kDifftestBudget, harness::GenFeatures::all()}))});
  }
  return out;
}

void criterion_determinism(const std::vector<CorpusImage>& images) {
  std::size_t identical = 0;
  for (const auto& c : images) {
    const auto first = t64::serialize(translate::translate_image(c.a.image, c.a.entry));
    const auto second = t64::serialize(translate::translate_image(c.a.image, c.a.entry));
    identical += first == second ? 1 : 0;
  }
  report(4, identical == images.size(),
         fmt::format("determinism: {}/{} images translate to byte-identical containers", identical, images.size()));
}

void criterion_completeness(const std::vector<CorpusImage>& images) {
  std::size_t valid = 0, missing = 0, runs = 0, divergences = 0, finished = 0, steps = 0;
  std::string detail;
  for (const auto& c : images) {
    const auto t = translate::translate(c.a.image, c.a.entry);
    std::vector<std::size_t> offsets;
    for (std::size_t o = 0; o < t.cfg.nodes.size(); ++o) {
      if (!t.cfg.nodes[o].valid()) continue;
      ++valid;
      if (t.image.table[o] < 0) ++missing;
      offsets.push_back(o);
    }
    std::mt19937_64 rng(c.seed);
    std::shuffle(offsets.begin(), offsets.end(), rng);
    offsets.resize(std::min(offsets.size(), kLockstepOffsets));
    for (std::size_t o : offsets) {
      const auto r = harness::lockstep(t, o, true, kLockstepSteps);
      ++runs;
      steps += r.steps;
      if (r.divergence) {
        ++divergences;
        if (divergences <= 10) detail += fmt::format("\n    seed {} offset {}: {}", c.seed, o, *r.divergence);
      } else if (r.finished) {
        ++finished;
      } else if (r.steps < kLockstepSteps) {
        ++divergences;
        detail += fmt::format("\n    seed {} offset {}: stopped after {} steps", c.seed, o, r.steps);
      }
    }
  }
  report(5, missing == 0 && divergences == 0,
         fmt::format("superset completeness: {} valid offsets, {} without landing pad; {} lockstep runs "
                     "({} per image, {} steps or halt), {} stopped early (exit or trap), mean {:.1f} steps compared, "
                     "{} divergences{}",
                     valid, missing, runs, kLockstepOffsets, kLockstepSteps, finished,
                     runs ? static_cast<double>(steps) / static_cast<double>(runs) : 0.0, divergences, detail));
}

void criterion_identity(const std::vector<CorpusImage>& images) {
  double worst = 0, rate = 0, len = 0;
  std::size_t valid = 0, bytes = 0, real = 0;
  for (const auto& c : images) {
    const auto t = translate::translate(c.a.image, c.a.entry);
    std::vector<std::size_t> starts;
    for (const auto& in : c.a.instructions) starts.push_back(in.offset);
    const auto m = harness::compute_metrics(t, starts);
    worst = std::max(worst, m.identity_error());
    valid += m.valid_offset_count;
    bytes += m.image_len;
    real += m.real_instruction_count;
  }
  rate = static_cast<double>(valid) / static_cast<double>(bytes);
  len = static_cast<double>(bytes) / static_cast<double>(real);
  report(6, worst <= kIdentityTolerance,
         fmt::format("decomposition identity: worst |expansion/product - 1| = {:.2e} over {} images (limit {}); "
                     "corpus valid-decode rate {:.3f}, average source instruction length {:.2f} B (reported only)",
                     worst, images.size(), kIdentityTolerance, rate, len));
}

void criterion_pruning() {
  const auto a = x86::assemble(harness::chained_arithmetic_program());
  const auto pruned = translate::translate_image(a.image, a.entry, {true});
  const auto full = translate::translate_image(a.image, a.entry, {false});
  bool same = true;
  for (std::uint64_t v : {std::uint64_t{0}, std::uint64_t{50}, std::uint64_t{96}, std::uint64_t{200},
                          ~std::uint64_t{0}}) {
    const auto src = x86::run_source(a.image, a.entry, kFuel, with_rdi(v));
    const auto p = t64::run_translated(pruned, kFuel * 64, with_rdi(v));
    const auto f = t64::run_translated(full, kFuel * 64, with_rdi(v));
    same &= !compare_results(src, p) && !compare_results(src, f) && !compare_results(f, p);
  }
  report(7, same && pruned.code.size() < full.code.size(),
         fmt::format("flag pruning: chained arithmetic translates to {} instructions pruned vs {} unpruned, "
                     "results {}",
                     pruned.code.size(), full.code.size(), same ? "identical" : "DIFFER"));
}

}  // namespace

int main() {
  criterion_goldens();
  const auto images = corpus();
  criterion_difftest();
  criterion_determinism(images);
  criterion_completeness(images);
  criterion_identity(images);
  criterion_pruning();
  criterion_fidelity();
  fmt::print("{} of 7 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
