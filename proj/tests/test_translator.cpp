#include <gtest/gtest.h>

#include <algorithm>

#include "supertile/harness/programs.hpp"
#include "supertile/t64/container.hpp"
#include "supertile/t64/vm.hpp"
#include "supertile/translate/translator.hpp"
#include "supertile/x86/assembler.hpp"
#include "supertile/x86/interpreter.hpp"

using namespace supertile;
using namespace supertile::translate;
using t64::Opcode;

namespace {

struct Built {
  x86::Assembly asm_;
  Translation t;
};

Built build(std::string_view text, TranslateOptions opts = {}) {
  Built b{x86::assemble(text), {}};
  b.t = translate::translate(b.asm_.image, b.asm_.entry, opts);
  return b;
}

GprFile rdi(std::uint64_t v) {
  GprFile g = default_gprs();
  g[static_cast<std::size_t>(x86::index_of(x86::Reg::RDI))] = v;
  return g;
}

std::size_t at(const Built& b, std::size_t offset) { return static_cast<std::size_t>(b.t.image.table[offset]); }

}  // namespace

TEST(Layout, StraightLineIsOneChunk) {
  const Built b = build("add rax, rbx\nadd rcx, rdx\nmov edi, 1\ncall __exit\n");
  const auto chunks = layout(b.t.nodes, 0);
  ASSERT_FALSE(chunks.empty());
  const Chunk& first = chunks.front();
  ASSERT_GE(first.labels.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(first.labels[i].first, b.asm_.instructions[i].offset);
  // No layout branch between the four instructions.
  for (std::size_t i = 0; i < first.labels[3].second; ++i) {
    const auto& li = first.code[i];
    EXPECT_FALSE(li.ins.op == Opcode::B && li.target.kind == CodeRef::Kind::Offset) << i;
  }
}

TEST(Layout, SingleByteProgramHasMonotoneTable) {
  const Built b = build("nop\nnop\nnop\nret\n");
  for (std::size_t o = 1; o < 4; ++o) EXPECT_LT(b.t.image.table[o - 1], b.t.image.table[o]);
  EXPECT_EQ(b.t.image.table[0], 0);
}

TEST(Layout, ChunksReachingPlacedNodesBranchToThem) {
  const Built b = build(harness::overlapping_return_program());
  const auto chunks = layout(b.t.nodes, b.asm_.entry);
  std::vector<bool> placed(b.t.nodes.size(), false);
  int joins = 0;
  for (const Chunk& c : chunks) {
    for (const auto& [off, idx] : c.labels) placed[off] = true;
    const auto [off, idx] = c.labels.back();
    const auto& node = b.t.nodes[off];
    if (node.continues_at && c.code.size() == idx + node.code.size() + 1) {
      // The layout appended a branch: its target was placed first.
      const auto& last = c.code.back();
      EXPECT_EQ(last.ins.op, Opcode::B);
      EXPECT_EQ(last.target.kind, CodeRef::Kind::Offset);
      EXPECT_EQ(last.target.value, *node.continues_at);
      EXPECT_TRUE(placed[*node.continues_at]);
      ++joins;
    } else {
      EXPECT_EQ(c.code.size(), idx + node.code.size());
      EXPECT_FALSE(node.continues_at.has_value());
    }
  }
  EXPECT_GT(joins, 0);
  for (std::size_t o = 0; o < placed.size(); ++o) EXPECT_TRUE(placed[o]) << o;
}

TEST(Layout, OverlappingDecodesHaveDistinctLabels) {
  const Built b = build(harness::overlapping_return_program());
  const std::size_t mov = b.asm_.symbols.at("ret_c3");
  ASSERT_GE(b.t.image.table[mov], 0);
  ASSERT_GE(b.t.image.table[mov + 1], 0);
  EXPECT_NE(b.t.image.table[mov], b.t.image.table[mov + 1]);
  // The jz lands on the hidden ret.
  const auto& code = b.t.image.code;
  const bool targeted = std::any_of(code.begin(), code.end(), [&](const t64::TargetInstruction& in) {
    return t64::is_branch(in.op) && in.imm == b.t.image.table[mov + 1];
  });
  EXPECT_TRUE(targeted);
}

TEST(Link, DirectBranchesResolveToTargetLabels) {
  const Built b = build("jmp b\nnop\nb: jmp c\nnop\nc: mov edi, 0\ncall __exit\n");
  for (const auto& in : b.asm_.instructions) {
    if (in.mnemonic != x86::Mnemonic::Jmp) continue;
    const auto& first = b.t.image.code[at(b, in.offset)];
    EXPECT_EQ(first.op, Opcode::B);
    EXPECT_EQ(first.imm, b.t.image.table[static_cast<std::size_t>(x86::branch_target(in))]);
  }
  for (const auto& in : b.t.image.code) {
    if (t64::is_branch(in.op)) EXPECT_LT(static_cast<std::size_t>(in.imm), b.t.image.code.size());
  }
}

TEST(Link, InvalidOffsetsTrap) {
  const Built b = build("nop\n.byte 0x0F, 0x0B\nret\n");
  const auto& in = b.t.image.code[at(b, 1)];
  EXPECT_EQ(in.op, Opcode::TRAP);
  EXPECT_EQ(in.imm, static_cast<std::int64_t>(TrapKind::InvalidDecode));
}

TEST(Link, EveryOffsetHasALandingPad) {
  const Built b = build(harness::jump_table_program());
  for (std::size_t o = 0; o < b.t.image.table.size(); ++o) {
    EXPECT_GE(b.t.image.table[o], 0);
    EXPECT_LT(static_cast<std::size_t>(b.t.image.table[o]), b.t.image.code.size());
  }
}

TEST(Lowering, CallPushesAbsoluteReturnSite) {
  std::string text;
  for (int i = 0; i < 12; ++i) text += "nop\n";
  text += "call f\nret\nf: ret\n";
  const Built b = build(text);
  const auto& node = b.t.nodes[12];
  std::optional<std::size_t> ldi;
  for (std::size_t i = 0; i < node.code.size(); ++i) {
    if (node.code[i].ins.op == Opcode::LDI && node.code[i].ins.imm == static_cast<std::int64_t>(kImageBase + 17)) ldi = i;
  }
  ASSERT_TRUE(ldi.has_value());
  EXPECT_EQ(node.code[*ldi + 1].ins.op, Opcode::STORE8);
  const auto& last = node.code.back();
  EXPECT_EQ(last.ins.op, Opcode::B);
  EXPECT_EQ(last.target.kind, CodeRef::Kind::Offset);
  EXPECT_EQ(last.target.value, b.asm_.symbols.at("f"));
}

TEST(Lowering, RetPopsChecksBoundsTranslatesAndBranches) {
  const Built b = build("ret\n");
  std::vector<Opcode> ops;
  for (const auto& li : b.t.nodes[0].code) ops.push_back(li.ins.op);
  ASSERT_FALSE(ops.empty());
  EXPECT_EQ(ops.front(), Opcode::LOAD8);
  EXPECT_NE(std::find(ops.begin(), ops.end(), Opcode::BNEZ), ops.end());
  EXPECT_EQ(ops[ops.size() - 2], Opcode::XLATE);
  EXPECT_EQ(ops.back(), Opcode::BR);
}

TEST(Lowering, JzTestsZeroFlagBit) {
  const Built b = build("jz l\nnop\nl: ret\n");
  const auto& code = b.t.nodes[0].code;
  ASSERT_GE(code.size(), 2u);
  EXPECT_EQ(code[0].ins.op, Opcode::AND);
  EXPECT_EQ(code[0].ins.rn, tiles::default_register_map().flags);
  EXPECT_EQ(code[0].ins.imm, 0x40);
  EXPECT_EQ(code[1].ins.op, Opcode::BNEZ);
  EXPECT_EQ(code[1].target.kind, CodeRef::Kind::Offset);
  EXPECT_EQ(code[1].target.value, 3u);
}

TEST(Lowering, BreakpointTraps) {
  const Built b = build("int3\n");
  ASSERT_EQ(b.t.nodes[0].code.size(), 1u);
  EXPECT_EQ(b.t.nodes[0].code[0].ins, t64::trap(static_cast<std::int64_t>(TrapKind::Breakpoint)));
}

TEST(Translate, Deterministic) {
  const auto a = x86::assemble(harness::jump_table_program());
  EXPECT_EQ(t64::serialize(translate_image(a.image, a.entry)), t64::serialize(translate_image(a.image, a.entry)));
}

TEST(Translate, JumpTableWithoutTableKnowledge) {
  const auto a = x86::assemble(harness::jump_table_program());
  const auto img = translate_image(a.image, a.entry);
  for (std::uint64_t i = 0; i < 4; ++i) {
    const auto r = t64::run_translated(img, 100000, rdi(i));
    ASSERT_EQ(r.status, RunStatus::Halted);
    EXPECT_EQ(r.gprs[0], 4 - i);
  }
}

TEST(Translate, OverlappingReturnMatchesOracle) {
  const auto a = x86::assemble(harness::overlapping_return_program());
  const auto img = translate_image(a.image, a.entry);
  for (std::uint64_t v : {0ull, 7ull}) {
    const auto expected = x86::run_source(a.image, a.entry, 100000, rdi(v));
    const auto actual = t64::run_translated(img, 100000, rdi(v));
    EXPECT_EQ(compare_results(expected, actual), std::nullopt);
    EXPECT_EQ(actual.gprs[0] & 0xFF, v == 0 ? 0xC2u : 0xC3u);
  }
}

TEST(Translate, HostcallOutputMatchesOracle) {
  const auto a = x86::assemble("mov edi, 0x41\ncall __putc\nmov rdi, 99\ncall __putu64\nmov edi, 3\ncall __exit\n");
  const auto img = translate_image(a.image, a.entry);
  const auto r = t64::run_translated(img, 100000);
  EXPECT_EQ(compare_results(x86::run_source(a.image, a.entry, 100000), r), std::nullopt);
  EXPECT_EQ(std::string(r.output.begin(), r.output.end()), "A99");
  EXPECT_EQ(r.exit_code, 3u);
}

TEST(Translate, PruningShrinksChainedArithmetic) {
  const auto a = x86::assemble(harness::chained_arithmetic_program());
  const auto pruned = translate_image(a.image, a.entry, {true});
  const auto full = translate_image(a.image, a.entry, {false});
  EXPECT_LT(pruned.code.size(), full.code.size());
  for (std::uint64_t v : {0ull, 50ull, 200ull}) {
    EXPECT_EQ(compare_results(t64::run_translated(full, 100000, rdi(v)), t64::run_translated(pruned, 100000, rdi(v))),
              std::nullopt);
  }
}

TEST(Translate, OverheadAccountsForUnattributedCode) {
  const Built b = build(harness::jump_table_program());
  std::size_t attributed = 0;
  for (const auto& n : b.t.nodes) attributed += n.code.size();
  EXPECT_EQ(attributed + b.t.overhead_instructions, b.t.image.code.size());
}
