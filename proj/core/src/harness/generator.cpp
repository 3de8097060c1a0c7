#include "supertile/harness/generator.hpp"

#include <array>
#include <cstdlib>
#include <random>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <fmt/format.h>

#include "supertile/x86/registers.hpp"

namespace supertile::harness {

namespace {

using x86::Reg;

constexpr std::array kPool{Reg::RAX, Reg::RBX, Reg::RCX, Reg::RDX, Reg::RSI, Reg::RDI, Reg::R8,
                           Reg::R9,  Reg::R10, Reg::R11, Reg::R12, Reg::R13, Reg::R14, Reg::R15};
// Registers whose 32-bit `inc` and `mov r32, imm32` have no prefix byte.
constexpr std::array kLowPool{Reg::RAX, Reg::RBX, Reg::RCX, Reg::RDX, Reg::RSI, Reg::RDI};
constexpr std::array kAlu{"add", "sub", "and", "or", "xor", "cmp"};
constexpr std::array kJcc{"jz", "jnz", "jl", "jge", "jle", "jg", "jb", "jae"};
constexpr std::array kWidths{8, 32, 64};

constexpr std::size_t kJumpTableLength = 11;

// Frame for memory operands, well inside the stack.
constexpr int kFrameSpan = 0x100;

class Generator {
 public:
  explicit Generator(const GenSpec& spec) : spec_(spec), rng_(spec.seed) {}

  std::string run() {
    line("_start:");
    if (spec_.instruction_budget > 1) {
      insn("lea rbp, [rsp - 0x400]");
      for (int i = 0; i < 4 && count_ + 2 < spec_.instruction_budget; ++i) {
        insn(fmt::format("mov {}, {}", name(pick(kPool), 64), imm_for(64)));
      }
    }
    while (count_ + 2 < spec_.instruction_budget) {
      // Reserve room so every program with indirect branches has a jump table.
      if (spec_.features.indirect && !jump_tables_ && count_ + 2 + kJumpTableLength >= spec_.instruction_budget) {
        jump_table();
      } else {
        unit();
      }
    }
    flush_labels();
    if (spec_.instruction_budget > 1) insn(fmt::format("mov rdi, {}", name(pick(kPool), 64)));
    insn("call __exit");
    out_ << functions_.str();
    out_ << data_.str();
    return out_.str();
  }

 private:
  std::uint64_t below(std::uint64_t n) { return rng_() % n; }
  bool chance(int percent) { return below(100) < static_cast<std::uint64_t>(percent); }
  template <typename A>
  typename A::value_type pick(const A& a) {
    return a[below(a.size())];
  }

  static std::string name(Reg r, int width) { return std::string(x86::reg_name(r, width)); }

  std::string imm_for(int width) {
    static constexpr std::array<std::int64_t, 10> kEdges{0, 1, -1, 0x7F, -0x80, 0x7FFFFFFF, -0x7FFFFFFF - 1,
                                                         0x55, 0x40, 63};
    if (chance(30)) {
      const auto e = pick(kEdges);
      if (width == 8 && (e > 127 || e < -128)) return "1";
      return fmt::format("{}", e);
    }
    if (width == 8) return fmt::format("{}", static_cast<std::int8_t>(rng_()));
    if (chance(50)) return fmt::format("{}", static_cast<std::int8_t>(rng_()));
    return fmt::format("{}", static_cast<std::int32_t>(rng_()));
  }

  static std::string ptr(int width) {
    return width == 8 ? "byte ptr" : width == 32 ? "dword ptr" : "qword ptr";
  }

  std::string frame_slot() {
    const auto d = static_cast<int>(below(2 * kFrameSpan)) - kFrameSpan;
    return d < 0 ? fmt::format("[rbp - {}]", -d) : fmt::format("[rbp + {}]", d);
  }

  void line(const std::string& s) { out_ << s << '\n'; }
  void insn(const std::string& s) {
    out_ << "    " << s << '\n';
    ++count_;
  }

  std::string fresh(const char* stem) { return fmt::format("{}_{}", stem, labels_++); }

  // Forward-branch targets waiting to be placed between units.
  void place_due_labels() {
    for (auto it = pending_.begin(); it != pending_.end();) {
      if (--it->second <= 0) {
        line(it->first + ":");
        it = pending_.erase(it);
      } else {
        ++it;
      }
    }
  }
  void flush_labels() {
    for (const auto& [label, _] : pending_) line(label + ":");
    pending_.clear();
  }

  std::string arith() {
    const int w = pick(kWidths);
    const Reg d = pick(kPool);
    switch (below(8)) {
      case 0: case 1:
        return fmt::format("{} {}, {}", pick(kAlu), name(d, w), name(pick(kPool), w));
      case 2:
        return fmt::format("{} {}, {}", pick(kAlu), name(d, w), imm_for(w));
      case 3:
        return fmt::format("test {}, {}", name(d, w), name(pick(kPool), w));
      case 4:
        return fmt::format("{} {}", chance(50) ? "inc" : "dec", name(d, w));
      case 5:
        return fmt::format("shl {}, {}", name(d, w), 1 + below(w == 64 ? 63 : 31));
      case 6:
        if (chance(50)) return fmt::format("mov {}, {}", name(d, w), name(pick(kPool), w));
        if (w == 64 && chance(50)) return fmt::format("mov {}, {}", name(d, 64), static_cast<std::int64_t>(rng_()));
        return fmt::format("mov {}, {}", name(d, w), imm_for(w));
      default: {
        const int lw = chance(50) ? 32 : 64;
        const auto disp = static_cast<std::int32_t>(rng_() % 4096) - 2048;
        return fmt::format("lea {}, [{} + {}*{} {} {}]", name(d, lw), name(pick(kPool), 64), name(pick(kPool), 64),
                           1 << below(4), disp < 0 ? '-' : '+', std::abs(disp));
      }
    }
  }

  std::string memory_op() {
    const int w = pick(kWidths);
    const Reg r = pick(kPool);
    const std::string m = frame_slot();
    switch (below(7)) {
      case 0: return fmt::format("mov {} {}, {}", ptr(w), m, name(r, w));
      case 1: return fmt::format("mov {}, {} {}", name(r, w), ptr(w), m);
      case 2: return fmt::format("{} {}, {} {}", pick(kAlu), name(r, w), ptr(w), m);
      case 3: return fmt::format("{} {} {}, {}", pick(kAlu), ptr(w), m, name(r, w));
      case 4: return fmt::format("{} {} {}, {}", pick(kAlu), ptr(w), m, imm_for(w));
      case 5: return fmt::format("{} {} {}", chance(50) ? "inc" : "dec", ptr(w), m);
      default: return fmt::format("shl {} {}, {}", ptr(w), m, 1 + below(w == 64 ? 63 : 31));
    }
  }

  void straight() { insn(spec_.features.memory && chance(30) ? memory_op() : arith()); }

  void indexed_load() {
    const Reg i = pick(kPool);
    Reg d = pick(kPool);
    insn(fmt::format("and {}, 15", name(i, 64)));
    const int scale = 1 << below(4);
    if (chance(50)) {
      insn(fmt::format("mov {}, [rbp + {}*{} - 0x40]", name(d, 64), name(i, 64), scale));
    } else {
      insn(fmt::format("add [rbp + {}*{} + 8], {}", name(i, 64), scale, name(d, 32)));
    }
  }

  void rip_load() {
    const std::string label = fresh("data");
    data_ << label << ":\n    .byte";
    for (int i = 0; i < 8; ++i) data_ << (i ? ", " : " ") << (rng_() & 0xFF);
    data_ << '\n';
    const int w = pick(kWidths);
    insn(fmt::format("{} {}, {} [rip + {}]", chance(50) ? "mov" : pick(kAlu), name(pick(kPool), w), ptr(w), label));
  }

  void push_pop() {
    insn(fmt::format("push {}", name(pick(kPool), 64)));
    for (auto n = below(3); n > 0; --n) straight();
    insn(fmt::format("pop {}", name(pick(kPool), 64)));
  }

  void forward_branch() {
    const std::string label = fresh("fwd");
    insn(fmt::format("{} {}", pick(kJcc), label));
    pending_.emplace_back(label, 1 + static_cast<int>(below(6)));
  }

  void call_function() {
    const std::string f = fresh("fn");
    functions_ << f << ":\n";
    for (auto n = 1 + below(4); n > 0; --n) {
      functions_ << "    " << arith() << '\n';
      ++count_;
    }
    functions_ << "    ret\n";
    ++count_;
    if (spec_.features.indirect && chance(40)) {
      Reg r = pick(kPool);
      insn(fmt::format("lea {}, [rip + {}]", name(r, 64), f));
      insn(fmt::format("call {}", name(r, 64)));
    } else {
      insn("call " + f);
    }
  }

  void output() {
    if (chance(50)) {
      insn(fmt::format("mov edi, {}", 0x41 + below(26)));
      insn("call __putc");
    } else {
      insn(fmt::format("mov rdi, {}", name(pick(kPool), 64)));
      insn("call __putu64");
    }
  }

  void jump_table() {
    const Reg index = pick(kPool);
    Reg pad = pick(kPool);
    while (pad == index) pad = pick(kPool);
    Reg counter = pick(kLowPool);
    while (counter == index || counter == pad) counter = pick(kLowPool);
    ++jump_tables_;
    const std::string table = fresh("table");
    const std::string after = fresh("after");
    insn(fmt::format("and {}, 3", name(index, 64)));
    insn(fmt::format("shl {}, 1", name(index, 64)));
    insn("call " + table);
    for (int i = 0; i < 4; ++i) insn(fmt::format("inc {}", name(counter, 32)));
    insn("jmp " + after);
    line(table + ":");
    insn(fmt::format("pop {}", name(pad, 64)));
    insn(fmt::format("add {}, {}", name(pad, 64), name(index, 64)));
    insn(fmt::format("jmp {}", name(pad, 64)));
    line(after + ":");
  }

  void overlap() {
    // The skipped byte is a mov r32, imm32 opcode whose immediate is the four
    // bytes of real code at the label.
    const std::string label = fresh("ovl");
    static constexpr std::array<int, 6> kMovRegs{0, 1, 2, 3, 6, 7};
    insn(fmt::format("{} {}", pick(kJcc), label));
    line(fmt::format("    .byte {:#x}", 0xB8 + pick(kMovRegs)));
    line(label + ":");
    if (chance(50)) {
      insn(fmt::format("{} {}, {}", pick(kAlu), name(pick(kLowPool), 64), static_cast<std::int8_t>(rng_())));
    } else {
      for (int i = 0; i < 2; ++i) {
        insn(fmt::format("{} {}, {}", pick(kAlu), name(pick(kLowPool), 32), name(pick(kLowPool), 32)));
      }
    }
  }

  void unit() {
    place_due_labels();
    const auto roll = below(100);
    if (roll < 45) return straight();
    if (roll < 57) return forward_branch();
    if (roll < 63) return call_function();
    if (roll < 67) return push_pop();
    if (roll < 70) return output();
    if (spec_.features.memory && roll < 78) return chance(60) ? indexed_load() : rip_load();
    if (spec_.features.indirect && roll < 85) return jump_table();
    if (spec_.features.overlap && roll < 93) return overlap();
    straight();
  }

  GenSpec spec_;
  std::mt19937_64 rng_;
  std::ostringstream out_;
  std::ostringstream functions_;
  std::ostringstream data_;
  std::vector<std::pair<std::string, int>> pending_;
  std::size_t count_ = 0;
  int labels_ = 0;
  int jump_tables_ = 0;
};

}  // namespace

std::string gen_program(const GenSpec& spec) {
  if (spec.instruction_budget == 0) throw std::invalid_argument("instruction budget must be at least 1");
  return Generator(spec).run();
}

GenFeatures parse_features(const std::string& list) {
  GenFeatures f = GenFeatures::none();
  std::istringstream in(list);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item == "all") f = GenFeatures::all();
    else if (item == "none") f = GenFeatures::none();
    else if (item == "memory") f.memory = true;
    else if (item == "indirect") f.indirect = true;
    else if (item == "overlap") f.overlap = true;
    else throw std::invalid_argument("unknown feature: " + item);
  }
  return f;
}

}  // namespace supertile::harness
