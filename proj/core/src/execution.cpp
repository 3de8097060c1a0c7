#include "supertile/execution.hpp"

#include <fmt/format.h>

#include "supertile/x86/memory.hpp"
#include "supertile/x86/registers.hpp"

namespace supertile {

std::string_view trap_name(TrapKind kind) {
  switch (kind) {
    case TrapKind::InvalidDecode: return "invalid-decode";
    case TrapKind::Breakpoint: return "breakpoint";
    case TrapKind::WriteToImage: return "write-to-image";
    case TrapKind::BadMemory: return "bad-memory";
    case TrapKind::UntranslatedTarget: return "untranslated-target";
    case TrapKind::BadProgramCounter: return "bad-program-counter";
  }
  return "?";
}

GprFile default_gprs() {
  GprFile g{};
  g[static_cast<std::size_t>(x86::index_of(x86::Reg::RSP))] = kInitialRsp;
  return g;
}

namespace {

std::string_view status_name(RunStatus s) {
  switch (s) {
    case RunStatus::Halted: return "halted";
    case RunStatus::Trapped: return "trapped";
    case RunStatus::FuelExhausted: return "fuel-exhausted";
  }
  return "?";
}

}  // namespace

std::optional<std::string> compare_results(const ExecutionResult& e, const ExecutionResult& a) {
  if (e.status != a.status) {
    return fmt::format("status: expected {}, got {}", status_name(e.status), status_name(a.status));
  }
  if (e.status == RunStatus::Halted && e.exit_code != a.exit_code) {
    return fmt::format("exit code: expected {}, got {}", e.exit_code, a.exit_code);
  }
  if (e.status == RunStatus::Trapped && e.trap != a.trap) {
    return fmt::format("trap: expected {}, got {}", trap_name(e.trap), trap_name(a.trap));
  }
  for (int i = 0; i < x86::kGprCount; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    if (e.gprs[idx] != a.gprs[idx]) {
      return fmt::format("{}: expected {:#x}, got {:#x}", x86::reg_name(x86::reg_at(i), 64), e.gprs[idx],
                         a.gprs[idx]);
    }
  }
  if (e.flags != a.flags) {
    return fmt::format("flags: expected {}, got {}", x86::to_string(e.flags), x86::to_string(a.flags));
  }
  if (e.output != a.output) {
    return fmt::format("output: expected {} bytes, got {} bytes", e.output.size(), a.output.size());
  }
  if (e.writable_memory.size() != a.writable_memory.size()) return std::string("memory size differs");
  for (std::size_t i = 0; i < e.writable_memory.size(); ++i) {
    if (e.writable_memory[i] != a.writable_memory[i]) {
      return fmt::format("memory at {:#x}: expected {:#04x}, got {:#04x}", kStackBase + i, e.writable_memory[i],
                         a.writable_memory[i]);
    }
  }
  return std::nullopt;
}

std::string describe(const ExecutionResult& r) {
  std::string out = fmt::format("status: {}", status_name(r.status));
  if (r.status == RunStatus::Halted) out += fmt::format(" (exit {})", r.exit_code);
  if (r.status == RunStatus::Trapped) out += fmt::format(" ({})", trap_name(r.trap));
  out += fmt::format("\nsteps: {}\n", r.steps);
  for (int i = 0; i < x86::kGprCount; ++i) {
    out += fmt::format("{:>4} = {:#018x}{}", x86::reg_name(x86::reg_at(i), 64), r.gprs[static_cast<std::size_t>(i)],
                       i % 4 == 3 ? "\n" : "  ");
  }
  out += fmt::format("flags: {}\n", x86::to_string(r.flags));
  if (!r.output.empty()) out += fmt::format("output: {}\n", std::string(r.output.begin(), r.output.end()));
  return out;
}

}  // namespace supertile
