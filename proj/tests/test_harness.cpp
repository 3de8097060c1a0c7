#include <gtest/gtest.h>

#include <regex>
#include <set>

#include "supertile/harness/difftest.hpp"
#include "supertile/harness/generator.hpp"
#include "supertile/harness/lockstep.hpp"
#include "supertile/harness/metrics.hpp"
#include "supertile/harness/programs.hpp"
#include "supertile/t64/vm.hpp"
#include "supertile/translate/translator.hpp"
#include "supertile/x86/assembler.hpp"
#include "supertile/x86/decoder.hpp"
#include "supertile/x86/interpreter.hpp"

using namespace supertile;
using namespace supertile::harness;

namespace {

std::vector<std::size_t> starts(const x86::Assembly& a) {
  std::vector<std::size_t> out;
  for (const auto& in : a.instructions) out.push_back(in.offset);
  return out;
}

}  // namespace

TEST(Generator, PureFunctionOfSpec) {
  for (std::uint64_t seed : {0ull, 1ull, 99ull}) {
    EXPECT_EQ(gen_program({seed, 200, GenFeatures::all()}), gen_program({seed, 200, GenFeatures::all()}));
  }
  EXPECT_NE(gen_program({1, 200, GenFeatures::all()}), gen_program({2, 200, GenFeatures::all()}));
  EXPECT_NE(gen_program({1, 200, GenFeatures::all()}), gen_program({1, 200, GenFeatures::none()}));
}

TEST(Generator, BudgetOneIsJustTheExit) {
  const auto a = x86::assemble(gen_program({0, 1, GenFeatures::all()}));
  ASSERT_EQ(a.instructions.size(), 1u);
  EXPECT_EQ(a.instructions[0].mnemonic, x86::Mnemonic::Call);
  EXPECT_THROW(gen_program({0, 0, GenFeatures::all()}), std::invalid_argument);
}

TEST(Generator, IndirectJumpsLandOnInstructionStarts) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const std::string text = gen_program({seed, seed % 2 ? std::size_t{200} : std::size_t{20}, GenFeatures::all()});
    EXPECT_TRUE(std::regex_search(text, std::regex("jmp (r[a-z0-9]+)\\n"))) << seed;
    const auto a = x86::assemble(text);
    const auto valid = starts(a);
    x86::MachineState s(a.image, a.entry);
    for (int i = 0; i < 100000; ++i) {
      if (!s.memory.in_image(s.rip)) {
        if (x86::step(s).kind != x86::StepOutcome::Kind::Continue) break;
        continue;
      }
      const auto r = x86::decode(a.image, s.rip - kImageBase);
      const auto* in = std::get_if<x86::DecodedInstruction>(&r);
      ASSERT_NE(in, nullptr);
      const bool indirect_jmp = in->mnemonic == x86::Mnemonic::Jmp && in->op(0).is_reg();
      const auto out = x86::step(s);
      if (out.kind != x86::StepOutcome::Kind::Continue) break;
      if (indirect_jmp) {
        EXPECT_TRUE(std::binary_search(valid.begin(), valid.end(), s.rip - kImageBase)) << seed;
      }
    }
  }
}

TEST(Generator, FeatureToggles) {
  const std::string plain = gen_program({5, 300, GenFeatures::none()});
  EXPECT_EQ(plain.find(".byte 0xb"), std::string::npos);
  EXPECT_EQ(plain.find("jmp r"), std::string::npos);
  EXPECT_EQ(plain.find("ptr"), std::string::npos);
  const GenFeatures f = parse_features("memory,overlap");
  EXPECT_TRUE(f.memory);
  EXPECT_FALSE(f.indirect);
  EXPECT_TRUE(f.overlap);
  EXPECT_THROW(parse_features("bogus"), std::invalid_argument);
}

TEST(Generator, ThousandSeedsHalt) {
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const auto a = x86::assemble(gen_program({seed, 200, GenFeatures::all()}));
    const auto r = x86::run_source(a.image, a.entry, 1'000'000);
    ASSERT_EQ(r.status, RunStatus::Halted) << "seed " << seed << ": " << describe(r);
  }
}

TEST(Metrics, IdentityHoldsOnGeneratedPrograms) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto a = x86::assemble(gen_program({seed, 200, GenFeatures::all()}));
    const auto t = translate::translate(a.image, a.entry);
    const auto s = starts(a);
    const MetricsReport m = compute_metrics(t, s);
    EXPECT_EQ(m.real_instruction_count, a.instructions.size());
    EXPECT_EQ(m.image_len, a.image.size());
    EXPECT_LT(m.identity_error(), 0.01);
    EXPECT_GT(m.valid_decode_rate, 0.0);
    EXPECT_LT(m.valid_decode_rate, 1.0);
    EXPECT_NEAR(m.avg_source_instr_len, static_cast<double>(a.image.size()) / a.instructions.size(), 1.0);
  }
}

TEST(Metrics, HandComputedSmallImage) {
  // 31 C0 | 90 | C3: offsets 0, 2, 3 are real; offset 1 (C0 ..) is invalid.
  const auto a = x86::assemble("xor eax, eax\nnop\nret\n");
  const auto t = translate::translate(a.image, a.entry);
  const auto s = starts(a);
  const MetricsReport m = compute_metrics(t, s);
  EXPECT_EQ(m.real_instruction_count, 3u);
  EXPECT_EQ(m.image_len, 4u);
  EXPECT_EQ(m.valid_offset_count, 3u);
  EXPECT_DOUBLE_EQ(m.valid_decode_rate, 0.75);
  EXPECT_DOUBLE_EQ(m.density_factor, 1.0);
  EXPECT_DOUBLE_EQ(m.avg_source_instr_len, 4.0 / 3.0);
  std::size_t real = 0;
  for (std::size_t o : s) real += t.nodes[o].code.size();
  EXPECT_DOUBLE_EQ(m.lowering_factor, static_cast<double>(real) / 3.0);
}

TEST(Metrics, SingleByteProgramDensityIsValidRate) {
  const auto a = x86::assemble("push rax\nnop\npop rcx\nret\nint3\nnop\n");
  const auto t = translate::translate(a.image, a.entry);
  const MetricsReport m = compute_metrics(t, starts(a));
  EXPECT_DOUBLE_EQ(m.density_factor, m.valid_decode_rate);
}

TEST(Lockstep, OverlappingReturnFromEveryOffset) {
  const auto a = x86::assemble(harness::overlapping_return_program());
  for (bool pruned : {true, false}) {
    const auto t = translate::translate(a.image, a.entry, {pruned});
    for (std::size_t o = 0; o < a.image.size(); ++o) {
      if (!t.cfg.nodes[o].valid()) continue;
      const auto r = lockstep(t, o, pruned, 100);
      EXPECT_FALSE(r.divergence.has_value()) << o << ": " << r.divergence.value_or("");
    }
  }
}

TEST(Lockstep, DetectsTamperedTile) {
  const auto a = x86::assemble(harness::jump_table_program());
  auto t = translate::translate(a.image, a.entry, {false});
  // Corrupt the first inc eax: the mask that writes RAX back drops bit 0.
  std::size_t inc = 0;
  for (const auto& in : a.instructions) {
    if (in.mnemonic == x86::Mnemonic::Inc) {
      inc = in.offset;
      break;
    }
  }
  auto& code = t.image.code;
  const auto rax = tiles::default_register_map().target_of(x86::Reg::RAX);
  const auto begin = static_cast<std::size_t>(t.image.table[inc]);
  bool tampered = false;
  for (std::size_t i = begin + t.nodes[inc].code.size(); i-- > begin;) {
    if (code[i].rd == rax) {
      code[i].imm ^= 1;
      tampered = true;
      break;
    }
  }
  ASSERT_TRUE(tampered);
  const auto r = lockstep(t, inc, false, 100);
  ASSERT_TRUE(r.divergence.has_value());
  GprFile g = default_gprs();
  const auto expected = x86::run_source(a.image, a.entry, 10000, g);
  EXPECT_NE(compare_results(expected, t64::run_translated(t.image, 100000, g)), std::nullopt);
}

TEST(Difftest, SmallSeedRange) {
  DifftestOptions o;
  o.seed_begin = 0;
  o.seed_end = 25;
  const auto report = difftest(o);
  EXPECT_EQ(report.programs, 25u);
  EXPECT_TRUE(report.ok()) << report.failures.front().variant << " " << report.failures.front().detail;
  EXPECT_EQ(report.passed + report.inconclusive, report.comparisons);
}

TEST(Difftest, ReportsAreSortedAndReproducible) {
  DifftestOptions o;
  o.seed_begin = 40;
  o.seed_end = 45;
  const auto whole = difftest(o);
  std::size_t comparisons = 0;
  for (std::uint64_t s = 40; s < 45; ++s) comparisons += difftest_seed(s, o).comparisons;
  EXPECT_EQ(whole.comparisons, comparisons);
}
