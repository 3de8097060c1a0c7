#include "supertile/tiles/catalog.hpp"

#include <fmt/format.h>

#include "supertile/trap.hpp"
#include "supertile/x86/flags.hpp"

namespace supertile::tiles {

namespace {

using x86::Reg;

constexpr std::int64_t kMask8 = 0xFF;
constexpr std::int64_t kMask32 = 0xFFFFFFFF;

const Slot kR1 = Slot::param(0);
const Slot kR2 = Slot::param(1);
const Slot kS0 = Slot::scratch(0);
const Slot kS1 = Slot::scratch(1);
const Slot kFlags = Slot::flag_reg();

constexpr int kWidths[] = {8, 32, 64};

// Move bit `from` of e to bit `to`, clearing everything else.
Expr bit_to(const Expr& e, int from, int to) {
  const std::int64_t m = std::int64_t{1} << to;
  if (from == to) return e & m;
  return from > to ? ((e >> (from - to)) & m) : ((e << (to - from)) & m);
}

Expr zero_flag(int width, const Expr& r) {
  if (width == 64) return bit_to(~(r | (Expr(std::int64_t{0}) - r)), 63, 6);
  return bit_to((r & static_cast<std::int64_t>(x86::width_mask(width))) + Expr(std::int64_t{-1}), 63, 6);
}

Expr sign_flag(int width, const Expr& r) { return bit_to(r, width - 1, 7); }
Expr parity_flag(const Expr& r) { return Expr::parity(r) << 2; }
Expr adjust_flag(const Expr& a, const Expr& b, const Expr& r) { return (a ^ b ^ r) & 0x10; }

// F = t0 | t1 | ... built one accumulation at a time so each term only
// needs two registers.
std::vector<Stmt> accumulate(std::vector<Expr> terms, bool keep_carry) {
  std::vector<Stmt> out;
  if (keep_carry) {
    out.push_back(set(kFlags, Expr(kFlags) & 1));
  } else {
    out.push_back(set(kFlags, terms.front()));
    terms.erase(terms.begin());
  }
  for (const auto& t : terms) out.push_back(set(kFlags, Expr(kFlags) | t));
  return out;
}

enum class AluOp { Add, Sub, And, Or, Xor };

const char* alu_name(AluOp op) {
  switch (op) {
    case AluOp::Add: return "ADD";
    case AluOp::Sub: return "SUB";
    case AluOp::And: return "AND";
    case AluOp::Or: return "OR";
    default: return "XOR";
  }
}

Expr apply(AluOp op, const Expr& a, const Expr& b) {
  switch (op) {
    case AluOp::Add: return a + b;
    case AluOp::Sub: return a - b;
    case AluOp::And: return a & b;
    case AluOp::Or: return a | b;
    default: return a ^ b;
  }
}

std::vector<Stmt> alu_flags(AluOp op, int w, const Expr& a, const Expr& b) {
  const Expr r = apply(op, a, b);
  const int top = w - 1;
  switch (op) {
    case AluOp::Add:
      return accumulate({bit_to((a & b) | ((a | b) & ~r), top, 0), parity_flag(r), adjust_flag(a, b, r),
                         zero_flag(w, r), sign_flag(w, r), bit_to((a ^ r) & (b ^ r), top, 11)},
                        false);
    case AluOp::Sub:
      return accumulate({bit_to((r & b) | ((r | b) & ~a), top, 0), parity_flag(r), adjust_flag(a, b, r),
                         zero_flag(w, r), sign_flag(w, r), bit_to((a ^ b) & (a ^ r), top, 11)},
                        false);
    default:
      return accumulate({parity_flag(r), zero_flag(w, r), sign_flag(w, r)}, false);
  }
}

std::vector<Stmt> incdec_flags(bool inc, int w, const Expr& a) {
  const Expr one(std::int64_t{1});
  const Expr r = inc ? a + one : a - one;
  const Expr overflow = inc ? (r & ~a) : (a & ~r);
  return accumulate({parity_flag(r), adjust_flag(a, one, r), zero_flag(w, r), sign_flag(w, r),
                     bit_to(overflow, w - 1, 11)},
                    true);
}

std::vector<Stmt> shl_flags(int w, int count, const Expr& a) {
  const Expr r = a << count;
  std::vector<Expr> terms;
  if (count <= w) terms.push_back(bit_to(a, w - count, 0));
  terms.push_back(parity_flag(r));
  terms.push_back(zero_flag(w, r));
  terms.push_back(sign_flag(w, r));
  if (count == 1) terms.push_back(bit_to(a ^ (a << 1), w - 1, 11));
  return accumulate(terms, false);
}

std::vector<Binding> gprs() {
  std::vector<Binding> out;
  for (int i = 0; i < x86::kGprCount; ++i) out.push_back(Binding::gpr(x86::reg_at(i)));
  return out;
}

// (destination-or-first-source, second source) pairs: register or memory
// value on the left, register/memory/immediate on the right, never two
// memory operands.
std::vector<std::vector<Binding>> binary_pairs(bool allow_s1_rhs, bool allow_s1_lhs) {
  std::vector<std::vector<Binding>> out;
  for (const auto& d : gprs()) {
    for (const auto& s : gprs()) out.push_back({d, s});
    if (allow_s1_rhs) out.push_back({d, Binding::s1()});
    out.push_back({d, Binding::imm()});
  }
  if (allow_s1_lhs) {
    for (const auto& s : gprs()) out.push_back({Binding::s1(), s});
    out.push_back({Binding::s1(), Binding::imm()});
  }
  return out;
}

std::vector<std::vector<Binding>> unary(bool with_s1) {
  std::vector<std::vector<Binding>> out;
  for (const auto& g : gprs()) out.push_back({g});
  if (with_s1) out.push_back({Binding::s1()});
  return out;
}

std::string w_str(int w) { return std::to_string(w); }

void add_data_templates(std::vector<CatalogEntry>& out) {
  for (int w : kWidths) {
    const std::string W = w_str(w);
    for (AluOp op : {AluOp::Add, AluOp::Sub, AluOp::And, AluOp::Or, AluOp::Xor}) {
      const std::string name = alu_name(op);
      out.push_back({TileTemplate{name + W + "_R1_R1_R2", 2, {set(kR1, fit_width(w, apply(op, kR1, kR2), kR1))}},
                     binary_pairs(true, true)});
      out.push_back({TileTemplate{"FLAGS_" + name + W + "_R1_R2", 2, alu_flags(op, w, kR1, kR2)},
                     binary_pairs(true, true)});
    }

    // mov r, r/imm; mov r8, [m] goes through S1; mov [m], imm builds S1.
    std::vector<std::vector<Binding>> mov_pairs;
    for (const auto& d : gprs()) {
      for (const auto& s : gprs()) mov_pairs.push_back({d, s});
      if (w == 8) mov_pairs.push_back({d, Binding::s1()});
      mov_pairs.push_back({d, Binding::imm()});
    }
    mov_pairs.push_back({Binding::s1(), Binding::imm()});
    out.push_back({TileTemplate{"MOV" + W + "_R1_R2", 2, {set(kR1, fit_width(w, kR2, kR1))}}, mov_pairs});

    for (bool inc : {true, false}) {
      const std::string name = inc ? "INC" : "DEC";
      const Expr delta = inc ? Expr(kR1) + 1 : Expr(kR1) - 1;
      out.push_back({TileTemplate{name + W + "_R1_R1", 1, {set(kR1, fit_width(w, delta, kR1))}}, unary(true)});
      out.push_back({TileTemplate{"FLAGS_" + name + W + "_R1", 1, incdec_flags(inc, w, kR1)}, unary(true)});
    }

    const int max_count = w == 64 ? 63 : 31;
    for (int c = 1; c <= max_count; ++c) {
      const std::string C = std::to_string(c);
      out.push_back(
          {TileTemplate{"SHL" + W + "_R1_R1_" + C, 1, {set(kR1, fit_width(w, Expr(kR1) << c, kR1))}}, unary(true)});
      out.push_back({TileTemplate{"FLAGS_SHL" + W + "_R1_" + C, 1, shl_flags(w, c, kR1)}, unary(true)});
    }

    // Loads straight into a register only when the width rules allow it;
    // 8-bit loads land in S1 and merge through MOV8.
    if (w == 8) {
      out.push_back({TileTemplate{"LOAD8_R1", 1, {load(1, kR1, kS0)}}, {{Binding::s1()}}});
    } else {
      out.push_back({TileTemplate{"LOAD" + W + "_R1", 1, {load(w / 8, kR1, kS0)}}, unary(true)});
    }
    out.push_back({TileTemplate{"STORE" + W + "_R1", 1, {store(w / 8, kR1, kS0)}}, unary(true)});
  }

  for (int w : {32, 64}) {
    out.push_back({TileTemplate{"LEA" + w_str(w) + "_R1", 1, {set(kR1, fit_width(w, kS0, kR1))}}, unary(false)});
  }

  const Slot rsp = Slot::gpr(Reg::RSP);
  // Stores before committing RSP so a faulting push changes nothing.
  out.push_back({TileTemplate{"PUSH_R1", 1, {set(kS0, Expr(rsp) + Expr(std::int64_t{-8})), store(8, kR1, kS0), set(rsp, kS0)}},
                 unary(false)});
  out.push_back({TileTemplate{"POP_R1", 1, {load(8, kS0, rsp), set(rsp, Expr(rsp) + 8), set(kR1, kS0)}},
                 unary(false)});
}

void add_address_templates(std::vector<CatalogEntry>& out) {
  const Expr disp = Expr::hole(Hole::Disp);
  std::vector<std::vector<Binding>> bases, base_index, index_only;
  for (const auto& b : gprs()) bases.push_back({b});
  for (const auto& i : gprs()) {
    if (i.reg == Reg::RSP) continue;
    index_only.push_back({i});
    for (const auto& b : gprs()) base_index.push_back({b, i});
  }
  out.push_back({TileTemplate{"EA_R1", 1, {set(kS0, Expr(kR1) + disp)}}, bases});
  for (int scale : {1, 2, 4, 8}) {
    const int shift = __builtin_ctz(static_cast<unsigned>(scale));
    const Expr scaled_r2 = shift == 0 ? Expr(kR2) : Expr(kR2) << shift;
    const Expr scaled_r1 = shift == 0 ? Expr(kR1) : Expr(kR1) << shift;
    const std::string S = std::to_string(scale);
    out.push_back({TileTemplate{"EA_R1_R2_" + S, 2, {set(kS0, scaled_r2 + (Expr(kR1) + disp))}}, base_index});
    out.push_back({TileTemplate{"EA_NONE_R1_" + S, 1, {set(kS0, scaled_r1 + disp)}}, index_only});
  }
  out.push_back({TileTemplate{"EA_ABS", 0, {set(kS0, disp)}}, {{}}});
  out.push_back({TileTemplate{"EA_RIP", 0, {set(kS0, Expr::hole(Hole::RipTarget))}}, {{}}});
}

void add_fixed_templates(std::vector<CatalogEntry>& out) {
  out.push_back({TileTemplate{"NOP", 0, {raw(t64::addi(t64::kZeroReg, t64::kZeroReg, 0))}}, {{}}});
  out.push_back({TileTemplate{"TRAP_INVALID_DECODE", 0,
                              {raw(t64::trap(static_cast<std::int64_t>(TrapKind::InvalidDecode)))}},
                 {{}}});
  out.push_back(
      {TileTemplate{"TRAP_BREAKPOINT", 0, {raw(t64::trap(static_cast<std::int64_t>(TrapKind::Breakpoint)))}}, {{}}});
}

}  // namespace

Expr fit_width(int width, const Expr& value, const Expr& old) {
  switch (width) {
    case 8: return (value & kMask8) | (old & ~kMask8);
    case 32: return value & kMask32;
    default: return value;
  }
}

std::vector<CatalogEntry> tile_catalog() {
  std::vector<CatalogEntry> out;
  add_data_templates(out);
  add_address_templates(out);
  add_fixed_templates(out);
  return out;
}

}  // namespace supertile::tiles
