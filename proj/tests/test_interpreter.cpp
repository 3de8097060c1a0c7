#include <gtest/gtest.h>

#include "supertile/harness/programs.hpp"
#include "supertile/x86/assembler.hpp"
#include "supertile/x86/interpreter.hpp"

using namespace supertile;
using namespace supertile::x86;

namespace {

GprFile with(Reg r, std::uint64_t v, GprFile g = default_gprs()) {
  g[static_cast<std::size_t>(index_of(r))] = v;
  return g;
}

std::uint64_t reg(const ExecutionResult& r, Reg x) { return r.gprs[static_cast<std::size_t>(index_of(x))]; }

ExecutionResult run(std::string_view text, GprFile g = default_gprs()) {
  const Assembly a = assemble(text);
  return run_source(a.image, a.entry, 1'000'000, g);
}

}  // namespace

TEST(Interpreter, XorZeroExtends) {
  const Assembly a = assemble("xor eax, eax\n");
  MachineState s(a.image, 0, with(Reg::RAX, 0xFFFFFFFFFFFFFFFF));
  step(s);
  EXPECT_EQ(s.gpr[0], 0u);
  EXPECT_TRUE(s.flags.test(Flag::ZF));
  EXPECT_FALSE(s.flags.test(Flag::CF));
}

TEST(Interpreter, CallPushesReturnAddress) {
  const Assembly a = assemble("nop\nnop\ncall f\nnop\nf: ret\n");
  MachineState s(a.image, 0);
  step(s);
  step(s);
  step(s);
  const std::uint64_t rsp = s.gpr[static_cast<std::size_t>(index_of(Reg::RSP))];
  EXPECT_EQ(rsp, kInitialRsp - 8);
  std::uint64_t top = 0;
  ASSERT_FALSE(s.memory.read(rsp, 8, top).has_value());
  EXPECT_EQ(top, kImageBase + 2 + 5);
  EXPECT_EQ(s.rip, kImageBase + a.symbols.at("f"));
}

TEST(Interpreter, ByteMovMergesIntoRax) {
  const Assembly a = assemble("mov al, 0xC3\n");
  MachineState s(a.image, 0, with(Reg::RAX, 0x1122334455667700));
  step(s);
  EXPECT_EQ(s.gpr[0], 0x11223344556677C3u);
}

TEST(Interpreter, OverlappingReturn) {
  for (std::uint64_t rdi : {0ull, 1ull, 7ull, 1ull << 63}) {
    const auto r = run(harness::overlapping_return_program(), with(Reg::RDI, rdi));
    ASSERT_EQ(r.status, RunStatus::Halted);
    EXPECT_EQ(reg(r, Reg::RAX) & 0xFF, rdi == 0 ? 0xC2u : 0xC3u) << rdi;
  }
}

TEST(Interpreter, JumpTable) {
  for (std::uint64_t i = 0; i < 8; ++i) {
    const auto r = run(harness::jump_table_program(), with(Reg::RDI, i));
    ASSERT_EQ(r.status, RunStatus::Halted);
    EXPECT_EQ(reg(r, Reg::RAX), 4 - (i & 3)) << i;
  }
}

TEST(Interpreter, CountedLoop) {
  const auto r = run(harness::counted_loop_program(), with(Reg::RDI, 10));
  ASSERT_EQ(r.status, RunStatus::Halted);
  EXPECT_EQ(r.exit_code, 55u);
}

TEST(Interpreter, Hostcalls) {
  const auto r = run(R"(
    mov edi, 0x41
    call __putc
    mov rdi, 1234
    call __putu64
    mov edi, 9
    call __exit
  )");
  ASSERT_EQ(r.status, RunStatus::Halted);
  EXPECT_EQ(r.exit_code, 9u);
  EXPECT_EQ(std::string(r.output.begin(), r.output.end()), "A1234");
}

TEST(Interpreter, Traps) {
  EXPECT_EQ(run("int3\n").trap, TrapKind::Breakpoint);
  EXPECT_EQ(run(".byte 0x0F, 0x0B\n").trap, TrapKind::InvalidDecode);
  EXPECT_EQ(run("mov byte ptr [0x400000], 1\n").trap, TrapKind::WriteToImage);
  EXPECT_EQ(run("mov rax, [0x10]\n").trap, TrapKind::BadMemory);
  EXPECT_EQ(run("mov rax, 0x500000\njmp rax\n").trap, TrapKind::UntranslatedTarget);
}

TEST(Interpreter, TrapLeavesStateUntouched) {
  const Assembly a = assemble("add qword ptr [0x10], 1\n");
  MachineState s(a.image, 0, with(Reg::RAX, 5));
  s.flags = FlagMask::of(Flag::CF);
  const auto before_gpr = s.gpr;
  const auto out = step(s);
  EXPECT_EQ(out.kind, StepOutcome::Kind::Trapped);
  EXPECT_EQ(s.gpr, before_gpr);
  EXPECT_EQ(s.flags, FlagMask::of(Flag::CF));
  EXPECT_EQ(s.rip, kImageBase);
}

TEST(Interpreter, FuelExhaustion) {
  const Assembly a = assemble("l: jmp l\n");
  const auto r = run_source(a.image, 0, 1000);
  EXPECT_EQ(r.status, RunStatus::FuelExhausted);
  EXPECT_EQ(r.steps, 1000u);
}

TEST(Interpreter, ImageIsReadableData) {
  const auto r = run("mov al, byte ptr [rip + d]\nret\nd: .byte 0x5A\n");
  EXPECT_EQ(r.gprs[0] & 0xFF, 0x5Au);
}
