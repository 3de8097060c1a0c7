#include "supertile/harness/fidelity.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <random>
#include <set>

#include <fmt/format.h>

#include "supertile/t64/vm.hpp"
#include "supertile/tiles/bank.hpp"
#include "supertile/x86/assembler.hpp"
#include "supertile/x86/interpreter.hpp"

namespace supertile::harness {

namespace {

using x86::DecodedInstruction;
using x86::Mnemonic;
using x86::Reg;

constexpr std::array kWidths{8, 32, 64};
constexpr std::size_t kImageSize = 4096;
// Forms whose tiles are already covered still get this many trials.
constexpr std::uint64_t kMinFormTrials = 1000;
// Full stack comparison period, in trials.
constexpr std::uint64_t kFullCompareEvery = 4096;

std::string reg(int i, int w) { return std::string(x86::reg_name(x86::reg_at(i), w)); }

std::string ptr(int w) { return w == 8 ? "byte ptr" : w == 32 ? "dword ptr" : "qword ptr"; }

int shl_limit(int w) { return w == 64 ? 63 : 31; }

// Addressing forms rotated through the memory variants of each instruction.
std::string address(std::size_t k) {
  switch (k % 5) {
    case 0: return "[rbx]";
    case 1: return "[rsi + rcx*4 + 0x10]";
    case 2: return "[rdx*8 - 0x20]";
    case 3: return "[0x7F8000]";
    default: return "[rip + 0x40]";
  }
}

}  // namespace

std::vector<std::string> instruction_forms() {
  std::vector<std::string> f;
  std::size_t k = 0;
  for (int w : kWidths) {
    for (const char* op : {"add", "sub", "and", "or", "xor", "cmp", "test"}) {
      const bool test = std::string_view(op) == "test";
      for (int d = 0; d < 16; ++d) {
        for (int s = 0; s < 16; ++s) f.push_back(fmt::format("{} {}, {}", op, reg(d, w), reg(s, w)));
        if (!test) f.push_back(fmt::format("{} {}, 0x5A", op, reg(d, w)));
        if (!test) f.push_back(fmt::format("{} {}, {} {}", op, reg(d, w), ptr(w), address(k++)));
        f.push_back(fmt::format("{} {} {}, {}", op, ptr(w), address(k++), reg(d, w)));
      }
      if (!test) f.push_back(fmt::format("{} {} {}, 0x33", op, ptr(w), address(k++)));
    }
    for (int d = 0; d < 16; ++d) {
      for (int s = 0; s < 16; ++s) f.push_back(fmt::format("mov {}, {}", reg(d, w), reg(s, w)));
      f.push_back(fmt::format("mov {}, 0x11", reg(d, w)));
      if (w == 64) f.push_back(fmt::format("mov {}, 0x123456789A", reg(d, w)));
      f.push_back(fmt::format("mov {}, {} {}", reg(d, w), ptr(w), address(k++)));
      f.push_back(fmt::format("mov {} {}, {}", ptr(w), address(k++), reg(d, w)));
      for (const char* op : {"inc", "dec"}) f.push_back(fmt::format("{} {}", op, reg(d, w)));
      for (int c = 1; c <= shl_limit(w); ++c) f.push_back(fmt::format("shl {}, {}", reg(d, w), c));
    }
    f.push_back(fmt::format("mov {} {}, 0x22", ptr(w), address(k++)));
    for (const char* op : {"inc", "dec"}) f.push_back(fmt::format("{} {} {}", op, ptr(w), address(k++)));
    for (int c = 1; c <= shl_limit(w); ++c) f.push_back(fmt::format("shl {} {}, {}", ptr(w), address(k++), c));
  }
  for (int d = 0; d < 16; ++d) {
    f.push_back(fmt::format("lea {}, {}", reg(d, 32), address(k++)));
    f.push_back(fmt::format("lea {}, {}", reg(d, 64), address(k++)));
    f.push_back(fmt::format("push {}", reg(d, 64)));
    f.push_back(fmt::format("pop {}", reg(d, 64)));
  }
  // Every address tile, each behind a rotating consumer.
  const std::array<std::string, 4> consumers{"mov rax, qword ptr {}", "add {}, ecx", "lea r9, {}", "mov {}, dl"};
  std::size_t c = 0;
  auto with = [&](const std::string& m) { f.push_back(fmt::format(fmt::runtime(consumers[c++ % 4]), m)); };
  for (int b = 0; b < 16; ++b) with(fmt::format("[{}]", reg(b, 64)));
  for (int s : {1, 2, 4, 8}) {
    for (int i = 0; i < 16; ++i) {
      if (x86::reg_at(i) == Reg::RSP) continue;
      for (int b = 0; b < 16; ++b) with(fmt::format("[{} + {}*{} + 0x18]", reg(b, 64), reg(i, 64), s));
      with(fmt::format("[{}*{} + 0x1000]", reg(i, 64), s));
    }
  }
  with("[0x7F4000]");
  with("[rip + 0x80]");
  f.push_back("nop");
  f.push_back("int3");
  f.push_back(".byte 0x0F, 0x0B");
  return f;
}

std::uint64_t FidelityReport::min_comparisons() const {
  std::uint64_t m = std::numeric_limits<std::uint64_t>::max();
  for (const auto& [_, n] : comparisons) m = std::min(m, n);
  return comparisons.empty() ? 0 : m;
}

namespace {

// A selection instantiated once, with the hole-carrying slots remembered so
// each trial only rewrites those immediates.
struct Patchable {
  std::vector<t64::TargetInstruction> code;
  std::vector<std::pair<std::size_t, tiles::Hole>> holes;
  std::vector<std::int64_t> base_imm;

  explicit Patchable(const tiles::TileSelection& sel) {
    for (const auto* t : sel.tiles) {
      for (const auto& ti : t->code) {
        if (ti.hole != tiles::Hole::None) {
          holes.emplace_back(code.size(), ti.hole);
          base_imm.push_back(ti.ins.imm);
        }
        code.push_back(ti.ins);
      }
    }
  }

  void patch(const tiles::HoleValues& h) {
    for (std::size_t i = 0; i < holes.size(); ++i) {
      const auto [at, kind] = holes[i];
      const auto v = kind == tiles::Hole::Imm ? h.imm : kind == tiles::Hole::Disp ? h.disp : h.rip_target;
      code[at].imm = base_imm[i] + v;
    }
  }
};

class FormRunner {
 public:
  FormRunner(const tiles::TileBank& bank, std::mt19937_64& rng, FidelityReport& report, const FidelityOptions& options)
      : bank_(bank), rng_(rng), report_(report), options_(options) {}

  void run(const std::string& text) {
    const auto assembly = x86::assemble(text);
    image_ = assembly.image;
    const std::size_t code_len = image_.size();
    image_.resize(kImageSize);
    for (std::size_t i = code_len; i < kImageSize; ++i) image_[i] = static_cast<std::uint8_t>(rng_());

    decoded_ = !assembly.instructions.empty();
    tiles::TileSelection all, none;
    if (decoded_) {
      in_ = assembly.instructions.front();
      all = tiles::lookup_tiles(bank_, in_, x86::FlagMask::all());
      none = tiles::lookup_tiles(bank_, in_, x86::FlagMask::none());
    } else {
      all.tiles.push_back(bank_.find("TRAP_INVALID_DECODE"));
      none = all;
    }
    const auto trials = trial_count(all);
    text_ = text;

    x86::MachineState src(image_, 0);
    t64::TargetState tgt(image_);
    const DecodedInstruction base = in_;
    const bool sweep = decoded_ && sweepable();
    const std::uint64_t total = sweep ? std::max<std::uint64_t>(trials, 65536) : trials;
    Patchable code_all(all);
    Patchable code_none(none);
    std::uint64_t with_flags = 0;
    std::uint64_t without_flags = 0;
    // Tally once per form; the map is keyed by name.
    struct Flush {
      FidelityReport& report;
      const tiles::TileSelection& all;
      const tiles::TileSelection& none;
      const std::uint64_t& with_flags;
      const std::uint64_t& without_flags;
      ~Flush() {
        for (const auto* tile : all.tiles) report.comparisons[tile->name] += with_flags;
        for (const auto* tile : none.tiles) report.comparisons[tile->name] += without_flags;
        report.trials += with_flags + without_flags;
      }
    } flush{report_, all, none, with_flags, without_flags};
    for (std::uint64_t t = 0; t < total; ++t) {
      in_ = base;
      // Every eighth trial runs without the flag tile.
      const bool flags_live = t % 8 != 7 || sweep && t < 65536;
      auto& code = flags_live ? code_all : code_none;
      prepare(src, t, sweep && t < 65536);
      code.patch(holes());
      if (!compare(src, tgt, code.code, flags_live, t % kFullCompareEvery == 0)) return;
      ++(flags_live ? with_flags : without_flags);
    }
  }

 private:
  std::uint64_t trial_count(const tiles::TileSelection& sel) const {
    std::uint64_t have = std::numeric_limits<std::uint64_t>::max();
    for (const auto* tile : sel.tiles) {
      const auto it = report_.comparisons.find(tile->name);
      have = std::min(have, it == report_.comparisons.end() ? 0 : it->second);
    }
    const auto need = have >= options_.min_per_tile ? 0 : options_.min_per_tile - have;
    // Value tiles miss one trial in eight when the flag tile is also present.
    return std::max(kMinFormTrials, need + need / 7 + 8);
  }

  // 8-bit add/sub/cmp whose two operand values can be chosen independently.
  bool sweepable() const {
    if (in_.width != 8) return false;
    if (in_.mnemonic != Mnemonic::Add && in_.mnemonic != Mnemonic::Sub && in_.mnemonic != Mnemonic::Cmp) return false;
    std::set<Reg> data;
    std::set<Reg> addr;
    for (const auto& o : in_.operands()) {
      if (o.is_reg() && !data.insert(o.reg).second) return false;
      if (o.is_mem()) {
        if (o.mem.base) addr.insert(*o.mem.base);
        if (o.mem.index) addr.insert(*o.mem.index);
      }
    }
    for (Reg r : data) {
      if (addr.count(r)) return false;
    }
    return true;
  }

  std::uint64_t random_value() {
    static constexpr std::array<std::uint64_t, 14> kEdges{0,          1,           2,          0x7F,
                                                          0x80,       0xFF,        0x7FFF,     0x8000,
                                                          0x7FFFFFFF, 0x80000000u, 0xFFFFFFFFu, 0x7FFFFFFFFFFFFFFF,
                                                          0x8000000000000000, ~std::uint64_t{0}};
    const std::uint64_t r = rng_();
    switch (r & 7) {
      case 0: return kEdges[(r >> 3) % kEdges.size()];
      case 1: return kEdges[(r >> 3) % kEdges.size()] ^ (r & 0xFFFFFFFF00000000);
      case 2: return (r & ~std::uint64_t{0xFF}) | kEdges[(r >> 3) % 6];
      case 3: return (r >> 3) % 128;
      default: return rng_();
    }
  }

  std::int64_t random_imm() {
    if (in_.mnemonic == Mnemonic::Mov && in_.width == 64 && in_.length >= 10) {
      return static_cast<std::int64_t>(random_value());
    }
    if (in_.width == 8 || in_.length <= 4) return static_cast<std::int8_t>(random_value());
    return static_cast<std::int32_t>(random_value());
  }

  // Where the memory operand should land.
  std::uint64_t random_address(int bytes) {
    const auto roll = rng_() % 100;
    if (roll < 90) return kStackBase + 64 + rng_() % (kStackEnd - kStackBase - 128);
    if (roll < 94) return kImageBase + rng_() % (kImageSize - 8);
    if (roll < 97) return kStackEnd - static_cast<std::uint64_t>(bytes) + (rng_() % 2);  // last slot or straddling
    return rng_();
  }

  void set_low(std::uint64_t& v, std::uint64_t low) { v = (v & ~std::uint64_t{0xFF}) | (low & 0xFF); }

  void prepare(x86::MachineState& src, std::uint64_t trial, bool sweep) {
    for (const auto& o : in_.operands()) {
      if (o.is_reg()) src.gpr[x86::index_of(o.reg)] = random_value();
      if (o.is_mem()) {
        if (o.mem.base) src.gpr[x86::index_of(*o.mem.base)] = random_value();
        if (o.mem.index) src.gpr[x86::index_of(*o.mem.index)] = random_value();
      }
    }
    src.gpr[x86::index_of(Reg::RSP)] = random_address(8);
    src.flags = x86::FlagMask::from_bits(rng_());
    src.rip = kImageBase;
    // Shift counts are part of the tile name, not a hole.
    for (int i = 0; i < in_.operand_count; ++i) {
      if (in_.ops[i].is_imm() && in_.mnemonic != Mnemonic::Shl) in_.ops[i].imm = random_imm();
    }

    std::uint64_t ea = 0;
    int mem_index = -1;
    for (int i = 0; i < in_.operand_count; ++i) {
      if (in_.ops[i].is_mem()) mem_index = i;
    }
    if (mem_index >= 0) {
      auto& m = in_.ops[mem_index].mem;
      ea = place(src, m);
    }
    if (sweep) {
      const std::uint64_t a = trial & 0xFF;
      const std::uint64_t b = trial >> 8;
      const std::uint64_t vals[2] = {a, b};
      for (int i = 0; i < 2; ++i) {
        auto& o = in_.ops[i];
        if (o.is_reg()) set_low(src.gpr[x86::index_of(o.reg)], vals[i]);
        if (o.is_imm()) o.imm = static_cast<std::int8_t>(vals[i]);
        if (o.is_mem()) mem_value_ = vals[i];
      }
    } else {
      mem_value_ = random_value();
    }
    if (mem_index >= 0) {
      mem_target_ = ea;
      mem_write_ = true;
    } else {
      mem_write_ = false;
    }
  }

  // Choose displacement and address registers so the operand hits a chosen
  // address. Returns the effective address.
  std::uint64_t place(x86::MachineState& src, x86::MemOperand& m) {
    const std::uint64_t target = random_address(in_.width / 8);
    auto disp = static_cast<std::int32_t>(random_value());
    if (m.rip_relative) {
      const auto want = static_cast<std::int64_t>(target) - static_cast<std::int64_t>(kImageBase + in_.end());
      if (want >= std::numeric_limits<std::int32_t>::min() && want <= std::numeric_limits<std::int32_t>::max()) {
        m.disp = static_cast<std::int32_t>(want);
      } else {
        m.disp = disp;
      }
      return kImageBase + in_.end() + static_cast<std::uint64_t>(static_cast<std::int64_t>(m.disp));
    }
    if (!m.base && !m.index) {
      m.disp = target < 0x80000000u ? static_cast<std::int32_t>(target) : disp;
      return static_cast<std::uint64_t>(static_cast<std::int64_t>(m.disp));
    }
    m.disp = disp;
    const auto d = static_cast<std::uint64_t>(static_cast<std::int64_t>(disp));
    if (!m.base) {
      auto& idx = src.gpr[x86::index_of(*m.index)];
      idx = rng_() % 4096;
      const auto rest = static_cast<std::int64_t>(target - idx * m.scale);
      if (rest >= std::numeric_limits<std::int32_t>::min() && rest <= std::numeric_limits<std::int32_t>::max()) {
        m.disp = static_cast<std::int32_t>(rest);
      }
      return idx * m.scale + static_cast<std::uint64_t>(static_cast<std::int64_t>(m.disp));
    }
    auto& base = src.gpr[x86::index_of(*m.base)];
    if (!m.index) {
      base = target - d;
      return target;
    }
    auto& idx = src.gpr[x86::index_of(*m.index)];
    if (m.index == m.base) {
      base = rng_() % 4096;
      const auto rest = static_cast<std::int64_t>(target - base * (1 + m.scale));
      if (rest >= std::numeric_limits<std::int32_t>::min() && rest <= std::numeric_limits<std::int32_t>::max()) {
        m.disp = static_cast<std::int32_t>(rest);
      }
      return base * (1 + m.scale) + static_cast<std::uint64_t>(static_cast<std::int64_t>(m.disp));
    }
    idx = random_value();
    base = target - idx * m.scale - d;
    return target;
  }

  tiles::HoleValues holes() const {
    tiles::HoleValues h;
    for (const auto& o : in_.operands()) {
      if (o.is_imm()) h.imm = o.imm;
      if (o.is_mem()) {
        h.disp = o.mem.disp;
        h.rip_target = static_cast<std::int64_t>(kImageBase + in_.end()) + o.mem.disp;
      }
    }
    return h;
  }

  bool fail(const std::string& what) {
    if (report_.failures.size() < options_.max_failures) {
      report_.failures.push_back(fmt::format("{}: {}", text_, what));
    }
    return false;
  }

  bool compare(x86::MachineState& src, t64::TargetState& tgt, const std::vector<t64::TargetInstruction>& code,
               bool flags_live, bool full_memory) {
    // Seed the memory operand identically on both sides, straight through the
    // address spaces so traps and bounds stay honest.
    if (mem_write_) {
      const int bytes = std::max(1, in_.width / 8);
      const bool a = src.memory.write(mem_target_, bytes, mem_value_).has_value();
      const bool b = tgt.memory.write(mem_target_, bytes, mem_value_).has_value();
      if (a != b) return fail("memory seeding disagrees");
    }
    t64::load_source_state(tgt, src.gpr, src.flags);
    tgt.pc = 0;

    const auto so = decoded_ ? x86::execute(src, in_) : x86::step(src);
    const t64::CodeView view{code, {}, kImageBase};
    t64::VmOutcome vo;
    while (tgt.pc < code.size()) {
      vo = t64::exec_step(tgt, view);
      if (vo.kind != t64::VmOutcome::Kind::Continue) break;
    }
    const bool src_trap = so.kind == x86::StepOutcome::Kind::Trapped;
    const bool tgt_trap = vo.kind == t64::VmOutcome::Kind::Trapped;
    if (src_trap != tgt_trap || (src_trap && so.trap != vo.trap)) {
      return fail(fmt::format("outcome: expected {}, got {}", src_trap ? trap_name(so.trap) : "continue",
                              tgt_trap ? trap_name(vo.trap) : "continue"));
    }
    const GprFile g = t64::source_gprs(tgt);
    for (int i = 0; i < x86::kGprCount; ++i) {
      if (g[i] != src.gpr[i]) {
        return fail(fmt::format("{}: expected {:#x}, got {:#x}", x86::upper_name(x86::reg_at(i)), src.gpr[i], g[i]));
      }
    }
    if (flags_live && t64::source_flags(tgt) != src.flags) {
      return fail(fmt::format("flags: expected {}, got {}", x86::to_string(src.flags),
                              x86::to_string(t64::source_flags(tgt))));
    }
    const auto sa = src.memory.stack();
    const auto ta = tgt.memory.stack();
    if (full_memory) {
      if (!std::equal(sa.begin(), sa.end(), ta.begin(), ta.end())) return fail("stack contents differ");
    } else if (mem_write_ || in_.mnemonic == Mnemonic::Push) {
      const std::uint64_t around = in_.mnemonic == Mnemonic::Push ? src.gpr[x86::index_of(Reg::RSP)] : mem_target_;
      for (std::uint64_t a = around - 16; a != around + 16; ++a) {
        const std::uint64_t off = a - kStackBase;
        if (off < sa.size() && sa[off] != ta[off]) return fail(fmt::format("memory at {:#x} differs", a));
      }
    }
    if (src.output != tgt.output) return fail("output differs");
    return true;
  }

  const tiles::TileBank& bank_;
  std::mt19937_64& rng_;
  FidelityReport& report_;
  const FidelityOptions& options_;
  std::vector<std::uint8_t> image_;
  DecodedInstruction in_;
  bool decoded_ = false;
  std::string text_;
  bool mem_write_ = false;
  std::uint64_t mem_target_ = 0;
  std::uint64_t mem_value_ = 0;
};

}  // namespace

FidelityReport check_tile_fidelity(const FidelityOptions& options) {
  FidelityReport report;
  const auto& bank = tiles::default_tile_bank();
  std::mt19937_64 rng(options.seed);
  FormRunner runner(bank, rng, report, options);
  for (const auto& form : instruction_forms()) {
    try {
      runner.run(form);
    } catch (const std::exception& e) {
      report.failures.push_back(fmt::format("{}: {}", form, e.what()));
    }
  }
  for (const auto& [name, _] : bank.tiles()) {
    if (!report.comparisons.count(name)) report.uncovered.push_back(name);
  }
  return report;
}

}  // namespace supertile::harness
