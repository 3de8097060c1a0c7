#include "supertile/harness/lockstep.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "supertile/t64/vm.hpp"
#include "supertile/x86/interpreter.hpp"

namespace supertile::harness {

namespace {

// Upper bound on target instructions per source instruction, stubs included.
constexpr std::uint64_t kTargetStepsPerSource = 4096;

std::optional<std::string> compare_states(const x86::MachineState& src, const t64::TargetState& tgt,
                                          x86::FlagMask flag_mask) {
  const GprFile gprs = t64::source_gprs(tgt);
  for (int i = 0; i < x86::kGprCount; ++i) {
    if (src.gpr[i] != gprs[i]) {
      return fmt::format("{}: expected {:#x}, got {:#x}", x86::upper_name(x86::reg_at(i)), src.gpr[i], gprs[i]);
    }
  }
  const auto flags = t64::source_flags(tgt);
  if ((flags & flag_mask) != (src.flags & flag_mask)) {
    return fmt::format("flags under {}: expected {}, got {}", x86::to_string(flag_mask),
                       x86::to_string(src.flags & flag_mask), x86::to_string(flags & flag_mask));
  }
  const auto a = src.memory.stack();
  const auto b = tgt.memory.stack();
  if (!std::equal(a.begin(), a.end(), b.begin(), b.end())) {
    const auto at = std::mismatch(a.begin(), a.end(), b.begin()).first - a.begin();
    return fmt::format("stack byte {:#x} differs", kStackBase + static_cast<std::uint64_t>(at));
  }
  if (src.output != tgt.output) return std::string("output differs");
  return std::nullopt;
}

}  // namespace

LockstepResult lockstep(const translate::Translation& translation, std::size_t start, bool pruned,
                        std::size_t max_steps) {
  LockstepResult result;
  const auto& image = translation.image;
  const auto view = t64::view_of(image);
  const auto& nodes = translation.cfg.nodes;

  x86::MachineState src(image.source_image, start);
  t64::TargetState tgt(image.source_image, image.image_base);
  t64::load_source_state(tgt, src.gpr, src.flags);
  if (start >= image.table.size() || image.table[start] < 0) {
    result.divergence = fmt::format("no landing pad at offset {:#x}", start);
    return result;
  }
  tgt.pc = static_cast<std::uint64_t>(image.table[start]);

  std::uint64_t src_steps = 0;
  std::uint64_t tgt_steps = 0;
  while (result.steps < max_steps) {
    const auto so = x86::step(src);
    ++src_steps;
    if (so.kind != x86::StepOutcome::Kind::Continue) {
      // Run the target to its own end and compare observable results.
      t64::VmOutcome vo;
      for (std::uint64_t i = 0; i < kTargetStepsPerSource; ++i) {
        vo = t64::exec_step(tgt, view);
        ++tgt_steps;
        if (vo.kind != t64::VmOutcome::Kind::Continue) break;
      }
      if (vo.kind == t64::VmOutcome::Kind::Continue) {
        result.divergence = "reference stopped but the target kept running";
        return result;
      }
      const auto expected = x86::snapshot(src, so, src_steps);
      const auto actual = t64::snapshot(tgt, vo, tgt_steps);
      result.divergence = compare_results(expected, actual);
      result.finished = true;
      return result;
    }
    const std::uint64_t off = src.rip - image.image_base;
    if (off >= image.source_image.size()) continue;  // a hostcall slot, serviced next step
    ++result.steps;

    const auto label = static_cast<std::uint64_t>(image.table[off]);
    bool moved = false;
    for (std::uint64_t i = 0; !(moved && tgt.pc == label); ++i) {
      if (i == kTargetStepsPerSource) {
        result.divergence = fmt::format("target never reached offset {:#x}", off);
        return result;
      }
      const auto vo = t64::exec_step(tgt, view);
      ++tgt_steps;
      moved = true;
      if (vo.kind != t64::VmOutcome::Kind::Continue) {
        result.divergence = fmt::format("target stopped ({}) before offset {:#x}",
                                        vo.kind == t64::VmOutcome::Kind::Halted ? "halt" : trap_name(vo.trap), off);
        return result;
      }
    }
    const auto mask = pruned ? nodes[off].live_in : x86::FlagMask::all();
    if (auto d = compare_states(src, tgt, mask)) {
      result.divergence = fmt::format("at offset {:#x} after {} steps: {}", off, result.steps, *d);
      return result;
    }
  }
  return result;
}

}  // namespace supertile::harness
