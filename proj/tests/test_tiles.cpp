#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "supertile/t64/vm.hpp"
#include "supertile/tiles/bank.hpp"
#include "supertile/tiles/catalog.hpp"
#include "supertile/x86/assembler.hpp"
#include "supertile/x86/decoder.hpp"

using namespace supertile;
using namespace supertile::tiles;
using x86::Reg;

namespace {

const TileBank& bank() { return default_tile_bank(); }

std::vector<t64::TargetInstruction> code_of(const Tile& tile) {
  TileSelection sel;
  sel.tiles.push_back(&tile);
  return instantiate(sel);
}

// Runs straight-line tile code to its end.
t64::VmOutcome run(t64::TargetState& state, std::span<const t64::TargetInstruction> code) {
  const t64::CodeView view{code, {}, kImageBase};
  state.pc = 0;
  t64::VmOutcome out;
  while (state.pc < code.size() && out.kind == t64::VmOutcome::Kind::Continue) out = exec_step(state, view);
  return out;
}

std::vector<std::string> names(const TileSelection& sel) {
  std::vector<std::string> out;
  for (const Tile* t : sel.tiles) out.push_back(t->name);
  return out;
}

x86::DecodedInstruction decoded(std::string_view text) { return x86::assemble(text).instructions.at(0); }

const std::set<std::string>& gpr_names() {
  static const std::set<std::string> names = [] {
    std::set<std::string> s;
    for (int i = 0; i < x86::kGprCount; ++i) s.emplace(x86::upper_name(x86::reg_at(i)));
    return s;
  }();
  return names;
}

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string part;
  while (std::getline(in, part, '_')) out.push_back(part);
  return out;
}

}  // namespace

TEST(RegisterMap, ArgumentAlignedAssignments) {
  const RegisterMap& m = default_register_map();
  EXPECT_EQ(m.target_of(Reg::RCX), 3);
  EXPECT_EQ(m.target_of(Reg::RDX), 2);
  EXPECT_EQ(m.target_of(Reg::RAX), 9);
  EXPECT_EQ(m.flags, 14);
  EXPECT_TRUE(is_well_formed(m));
  EXPECT_EQ(m.source_of(3), std::optional<Reg>{Reg::RCX});
  EXPECT_FALSE(m.source_of(m.flags).has_value());
}

TEST(RegisterMap, RejectsCollisions) {
  RegisterMap m = default_register_map();
  m.gpr[1] = m.gpr[0];
  EXPECT_FALSE(is_well_formed(m));
  m = default_register_map();
  m.flags = t64::kZeroReg;
  EXPECT_FALSE(is_well_formed(m));
}

TEST(Bank, SixteenBySixteenAdd64RegisterForms) {
  int count = 0;
  for (const auto& [name, tile] : bank().tiles()) {
    const auto parts = split(name);
    if (parts.size() == 4 && parts[0] == "ADD64" && parts[1] == parts[2] && gpr_names().count(parts[1]) &&
        gpr_names().count(parts[3])) {
      ++count;
    }
  }
  EXPECT_EQ(count, 256);
}

TEST(Bank, UnknownNameIsAbsent) {
  EXPECT_EQ(bank().find("ADD64_RCX_RDX_RCX"), nullptr);
  EXPECT_EQ(bank().find("ADC64_RCX_RCX_RDX"), nullptr);
  EXPECT_NE(bank().find("ADD64_RCX_RCX_RDX"), nullptr);
}

TEST(Bank, ByteAddTouchesOnlyDestinationLowByte) {
  const Tile* tile = bank().find("ADD8_RCX_RCX_RDX");
  ASSERT_NE(tile, nullptr);
  const RegisterMap& m = default_register_map();
  std::uint32_t mapped = 0;
  for (auto t : m.gpr) mapped |= 1u << t;
  mapped |= 1u << m.flags;
  EXPECT_EQ(tile->writes & mapped, 1u << 3);
  EXPECT_EQ(tile->reads & mapped, (1u << 3) | (1u << 2));

  t64::TargetState s({});
  s.regs[3] = 0xFFFFFFFFFFFFFF05;
  s.regs[2] = 0x03;
  const auto code = code_of(*tile);
  run(s, code);
  EXPECT_EQ(s.regs[3], 0xFFFFFFFFFFFFFF08u);

  s.regs[3] = 0x11223344556677FF;
  s.regs[2] = 0xAA02;
  run(s, code);
  EXPECT_EQ(s.regs[3], 0x1122334455667701u);
}

TEST(Bank, IdentityMoveChangesNothing) {
  const Tile* tile = bank().find("MOV64_RSI_RSI");
  ASSERT_NE(tile, nullptr);
  std::mt19937_64 rng(1);
  t64::TargetState s({});
  for (int i = 0; i < t64::kZeroReg; ++i) s.regs[static_cast<std::size_t>(i)] = rng();
  const auto code = code_of(*tile);
  const auto before = s.regs;
  run(s, code);
  const RegisterMap& m = default_register_map();
  for (int i = 0; i < x86::kGprCount; ++i) EXPECT_EQ(s.regs[m.gpr[i]], before[m.gpr[i]]);
  EXPECT_EQ(s.regs[m.flags], before[m.flags]);
}

TEST(Lookup, DeadFlagsDropTheFlagTile) {
  const auto in = decoded("add rcx, rdx");
  EXPECT_EQ(names(lookup_tiles(bank(), in, x86::FlagMask::none())), (std::vector<std::string>{"ADD64_RCX_RCX_RDX"}));
  EXPECT_EQ(names(lookup_tiles(bank(), in, x86::FlagMask::of(x86::Flag::ZF))),
            (std::vector<std::string>{"FLAGS_ADD64_RCX_RDX", "ADD64_RCX_RCX_RDX"}));
}

TEST(Lookup, MemorySourceUsesAddressThenLoad) {
  const auto sel = lookup_tiles(bank(), decoded("mov rax, [rbx + rcx*4 + 0x10]"), x86::FlagMask::all());
  EXPECT_EQ(names(sel), (std::vector<std::string>{"EA_RBX_RCX_4", "LOAD64_RAX"}));
  EXPECT_EQ(sel.holes.disp, 0x10);
}

TEST(Lookup, RipRelativeHoleIsAbsolute) {
  const auto sel = lookup_tiles(bank(), decoded("add byte ptr [rip + 0x40], 0x22"), x86::FlagMask::none());
  EXPECT_EQ(sel.holes.imm, 0x22);
  EXPECT_EQ(static_cast<std::uint64_t>(sel.holes.rip_target), kImageBase + 7 + 0x40);
}

TEST(Lookup, ControlFlowIsNotATile) {
  EXPECT_THROW(lookup_tiles(bank(), decoded("ret"), x86::FlagMask::all()), UnsupportedInstruction);
  EXPECT_THROW(lookup_tiles(bank(), decoded("jmp rsi"), x86::FlagMask::all()), UnsupportedInstruction);
}

// Every byte sequence the decoder accepts must find its tiles.
TEST(Lookup, DecoderFuzzCoverage) {
  std::mt19937_64 rng(9);
  std::vector<std::uint8_t> image(1 << 18);
  for (auto& b : image) b = static_cast<std::uint8_t>(rng());
  // Bias towards instruction-like bytes so the subset is well exercised.
  static constexpr std::uint8_t kLead[] = {0x00, 0x01, 0x02, 0x03, 0x08, 0x20, 0x29, 0x31, 0x38, 0x3B, 0x80,
                                           0x81, 0x83, 0x84, 0x85, 0x88, 0x89, 0x8A, 0x8B, 0x8D, 0xB0, 0xB8,
                                           0xC0, 0xC1, 0xC6, 0xC7, 0xD0, 0xD1, 0xFE, 0xFF, 0x50, 0x58};
  for (std::size_t i = 0; i + 1 < image.size(); i += 16) {
    if (rng() % 2) image[i++] = static_cast<std::uint8_t>(0x40 + rng() % 16);
    image[i] = kLead[rng() % std::size(kLead)];
  }
  std::size_t covered = 0;
  for (std::size_t o = 0; o < image.size(); ++o) {
    const auto r = x86::decode(image, o);
    const auto* in = std::get_if<x86::DecodedInstruction>(&r);
    if (in == nullptr || x86::is_control_flow(in->mnemonic) || in->mnemonic == x86::Mnemonic::Int3) continue;
    TileSelection all;
    ASSERT_NO_THROW(all = lookup_tiles(bank(), *in, x86::FlagMask::all())) << x86::format(*in);
    ASSERT_NO_THROW(lookup_tiles(bank(), *in, x86::FlagMask::none())) << x86::format(*in);
    if (!in->flags_written.empty()) {
      bool has_flag_tile = false;
      for (const Tile* t : all.tiles) has_flag_tile |= t->name.rfind("FLAGS_", 0) == 0;
      EXPECT_TRUE(has_flag_tile) << x86::format(*in);
    }
    ++covered;
  }
  EXPECT_GT(covered, 50000u);
}

// A tile changes nothing outside its declared write set.
TEST(Bank, TilesStayInsideTheirWriteSets) {
  std::mt19937_64 rng(17);
  const RegisterMap& m = default_register_map();
  for (const auto& [name, tile] : bank().tiles()) {
    auto code = code_of(tile);
    for (auto& ins : code) {
      if (ins.op == t64::Opcode::TRAP) ins = t64::TargetInstruction{t64::Opcode::ADDI, t64::kZeroReg, t64::kZeroReg};
    }
    for (int trial = 0; trial < 4; ++trial) {
      t64::TargetState s({});
      for (int i = 0; i < t64::kZeroReg; ++i) s.regs[static_cast<std::size_t>(i)] = rng();
      // Keep every address-like register on the stack so memory tiles run.
      for (int i = 0; i < x86::kGprCount; ++i) s.regs[m.gpr[i]] = kStackBase + 0x8000 + 8 * (rng() % 64);
      for (auto t : m.scratch) s.regs[t] = kStackBase + 0x8000 + 8 * (rng() % 64);
      s.regs[m.target_of(Reg::RSP)] = kInitialRsp - 0x100;
      const auto before = s.regs;
      const auto out = run(s, code);
      ASSERT_NE(out.kind, t64::VmOutcome::Kind::Trapped) << name;
      for (int i = 0; i < t64::kRegisterCount; ++i) {
        if ((tile.writes >> i) & 1) continue;
        ASSERT_EQ(s.regs[static_cast<std::size_t>(i)], before[static_cast<std::size_t>(i)]) << name << " t" << i;
      }
    }
  }
}

TEST(Bank, BuildIsDeterministic) {
  EXPECT_EQ(build_tile_bank().dump(), build_tile_bank().dump());
  EXPECT_EQ(build_tile_bank().dump(), bank().dump());
}

TEST(Bank, ExcerptMatchesGolden) {
  std::ifstream in(std::string(SUPERTILE_GOLDEN_DIR) + "/bank_excerpt.txt");
  ASSERT_TRUE(in.good());
  std::string line;
  std::string name;
  std::ostringstream expected;
  std::vector<std::string> order;
  std::map<std::string, std::string> golden;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == ':') {
      name = line.substr(0, line.size() - 1);
      order.push_back(name);
    } else if (!name.empty()) {
      golden[name] += line + "\n";
    }
  }
  ASSERT_FALSE(order.empty());
  for (const auto& n : order) {
    const Tile* t = bank().find(n);
    ASSERT_NE(t, nullptr) << n;
    EXPECT_EQ(listing(*t), golden[n]) << n;
  }
}

TEST(Compiler, SpecializedNames) {
  TileTemplate t{"ADD8_R1_R1_R2", 2, {}};
  EXPECT_EQ(specialized_name(t, {Binding::gpr(Reg::RCX), Binding::gpr(Reg::RDX)}), "ADD8_RCX_RCX_RDX");
  EXPECT_EQ(specialized_name(t, {Binding::s1(), Binding::imm()}), "ADD8_S1_S1_IMM");
}

TEST(Compiler, SethiUllmanNeedAgainstScratchBudget) {
  // An unread destination plus two temporaries: a balanced tree with
  // Sethi-Ullman need three compiles, one level deeper is refused.
  const Expr a = Slot::param(0);
  const Expr b = Slot::param(1);
  const std::vector<Binding> bind{Binding::gpr(Reg::RCX), Binding::gpr(Reg::RDX), Binding::gpr(Reg::RAX)};
  const Expr three = ((a + b) ^ (a - b)) & ((a | b) + (a & b));
  TileTemplate t{"THREE_R3_R1_R2", 3, {set(Slot::param(2), three)}};
  const auto code = compile(t, bind, default_register_map());
  std::vector<t64::TargetInstruction> ins;
  for (const auto& c : code) ins.push_back(c.ins);
  t64::TargetState s({});
  s.regs[3] = 0x1234;
  s.regs[2] = 0x0F0F;
  run(s, ins);
  const std::uint64_t x = 0x1234, y = 0x0F0F;
  EXPECT_EQ(s.regs[9], ((x + y) ^ (x - y)) & ((x | y) + (x & y)));
  EXPECT_EQ(s.regs[3], x);
  EXPECT_EQ(s.regs[2], y);

  const Expr other = ((a - b) + (a ^ b)) | ((a & b) - (a + b));
  TileTemplate too_deep{"FOUR_R3_R1_R2", 3, {set(Slot::param(2), three ^ other)}};
  EXPECT_THROW(compile(too_deep, bind, default_register_map()), TileCompileError);
}
