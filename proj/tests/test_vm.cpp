#include <gtest/gtest.h>

#include <random>

#include "supertile/harness/programs.hpp"
#include "supertile/t64/container.hpp"
#include "supertile/t64/vm.hpp"
#include "supertile/translate/translator.hpp"
#include "supertile/x86/assembler.hpp"

using namespace supertile;
using namespace supertile::t64;

namespace {

TranslatedImage overlapping_image() {
  const auto a = x86::assemble(harness::overlapping_return_program());
  return translate::translate_image(a.image, a.entry);
}

}  // namespace

TEST(Vm, XlateInsideImage) {
  const TranslatedImage img = overlapping_image();
  TargetState s(img.source_image);
  const std::vector<TargetInstruction> code{xlate(1, 0)};
  s.regs[0] = kImageBase + img.entry;
  ASSERT_EQ(exec_step(s, CodeView{code, img.table, kImageBase}).kind, VmOutcome::Kind::Continue);
  EXPECT_EQ(static_cast<std::int64_t>(s.regs[1]), img.table[img.entry]);
}

TEST(Vm, XlateOutsideImageTraps) {
  const TranslatedImage img = overlapping_image();
  const std::vector<TargetInstruction> code{xlate(1, 0)};
  for (std::uint64_t addr : {kImageBase - 8, kImageBase + img.source_image.size(), std::uint64_t{0}}) {
    TargetState s(img.source_image);
    s.regs[0] = addr;
    const auto out = exec_step(s, CodeView{code, img.table, kImageBase});
    EXPECT_EQ(out.kind, VmOutcome::Kind::Trapped);
    EXPECT_EQ(out.trap, TrapKind::UntranslatedTarget);
    EXPECT_EQ(s.pc, 0u);
  }
}

TEST(Vm, AluSecondOperandIsRegisterPlusImmediate) {
  TargetState s({});
  const std::vector<TargetInstruction> code{ldi(1, 10), ldi(2, 5), alu(Opcode::SUB, 3, 1, 2, 1),
                                            alu(Opcode::SHL, 4, 1, kZeroReg, 65), ldi(kZeroReg, 7)};
  const CodeView v{code, {}, kImageBase};
  for (std::size_t i = 0; i < code.size(); ++i) exec_step(s, v);
  EXPECT_EQ(s.regs[3], 4u);
  EXPECT_EQ(s.regs[4], 20u);
  EXPECT_EQ(s.regs[kZeroReg], 0u);
}

TEST(Vm, MemoryTraps) {
  TargetState s(std::vector<std::uint8_t>{0xAA, 0xBB});
  const std::vector<TargetInstruction> code{load(1, 1, 0), store(1, 1, 0)};
  s.regs[0] = kImageBase + 1;
  const CodeView v{code, {}, kImageBase};
  ASSERT_EQ(exec_step(s, v).kind, VmOutcome::Kind::Continue);
  EXPECT_EQ(s.regs[1], 0xBBu);
  EXPECT_EQ(exec_step(s, v).trap, TrapKind::WriteToImage);
  s.regs[0] = kStackEnd;
  s.pc = 0;
  EXPECT_EQ(exec_step(s, v).trap, TrapKind::BadMemory);
}

TEST(Vm, RunsPastEndTrap) {
  TargetState s({});
  EXPECT_EQ(exec_step(s, CodeView{}).trap, TrapKind::BadProgramCounter);
}

TEST(Vm, ReturnThroughTableLandsOnReturnSite) {
  const auto a = x86::assemble("call f\nmov edi, 4\ncall __exit\nf: ret\n");
  const auto t = translate::translate(a.image, a.entry);
  TargetState s(t.image.source_image);
  load_source_state(s, default_gprs(), x86::FlagMask::none());
  s.pc = static_cast<std::uint64_t>(t.image.table[a.entry]);
  const CodeView v = view_of(t.image);
  const auto ret_label = static_cast<std::uint64_t>(t.image.table[a.symbols.at("f")]);
  const auto site = static_cast<std::uint64_t>(t.image.table[5]);
  bool at_ret = false;
  for (int i = 0; i < 200; ++i) {
    if (s.pc == ret_label) at_ret = true;
    if (at_ret && v.code[s.pc].op == Opcode::BR) {
      exec_step(s, v);
      EXPECT_EQ(s.pc, site);
      return;
    }
    ASSERT_EQ(exec_step(s, v).kind, VmOutcome::Kind::Continue);
  }
  FAIL() << "no BR reached";
}

TEST(Container, SerializeIsPure) {
  const TranslatedImage img = overlapping_image();
  EXPECT_EQ(serialize(img), serialize(img));
}

TEST(Container, RoundTrip) {
  const TranslatedImage img = overlapping_image();
  const auto bytes = serialize(img);
  EXPECT_EQ(bytes[0], 'E');
  EXPECT_EQ(bytes[3], 'T');
  EXPECT_EQ(deserialize(bytes), img);
}

TEST(Container, LayoutSizes) {
  const TranslatedImage img = overlapping_image();
  const std::size_t expected = 4 + 2 + 8 * 3 + 4 + img.source_image.size() + 4 + 8 * img.table.size() + 4 +
                               12 * img.code.size() + 4;
  EXPECT_EQ(serialize(img).size(), expected);
}

TEST(Container, EveryFlippedByteIsDetected) {
  const TranslatedImage img = overlapping_image();
  const auto bytes = serialize(img);
  std::mt19937_64 rng(21);
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    auto bad = bytes;
    bad[i] ^= static_cast<std::uint8_t>(1 + rng() % 255);
    EXPECT_THROW(deserialize(bad), ContainerError) << "byte " << i;
  }
}

TEST(Container, ErrorKinds) {
  const auto bytes = serialize(overlapping_image());
  auto expect_kind = [](std::vector<std::uint8_t> b, ContainerErrorKind k) {
    try {
      deserialize(b);
      ADD_FAILURE() << "no error";
    } catch (const ContainerError& e) {
      EXPECT_EQ(e.kind(), k);
    }
  };
  auto magic = bytes;
  magic[0] = 'X';
  expect_kind(magic, ContainerErrorKind::BadMagic);
  auto version = bytes;
  version[4] = 9;
  expect_kind(version, ContainerErrorKind::VersionMismatch);
  expect_kind({bytes.begin(), bytes.begin() + 20}, ContainerErrorKind::TruncatedContainer);
  auto crc = bytes;
  crc[40] ^= 1;
  expect_kind(crc, ContainerErrorKind::ChecksumMismatch);
}

TEST(Container, RandomGarbageNeverCrashes) {
  std::mt19937_64 rng(23);
  const auto good = serialize(overlapping_image());
  for (int i = 0; i < 2000; ++i) {
    std::vector<std::uint8_t> b(good.begin(), good.begin() + static_cast<std::ptrdiff_t>(rng() % good.size()));
    for (int k = 0; k < 3 && !b.empty(); ++k) b[rng() % b.size()] = static_cast<std::uint8_t>(rng());
    EXPECT_THROW(deserialize(b), ContainerError);
  }
}
