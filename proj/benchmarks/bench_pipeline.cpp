#include <benchmark/benchmark.h>

#include <map>

#include "supertile/cfg/superset.hpp"
#include "supertile/harness/generator.hpp"
#include "supertile/t64/container.hpp"
#include "supertile/t64/vm.hpp"
#include "supertile/tiles/bank.hpp"
#include "supertile/translate/translator.hpp"
#include "supertile/x86/assembler.hpp"
#include "supertile/x86/decoder.hpp"
#include "supertile/x86/interpreter.hpp"

using namespace supertile;

namespace {

const x86::Assembly& program(std::size_t budget) {
  static std::map<std::size_t, x86::Assembly> cache;
  auto it = cache.find(budget);
  if (it == cache.end()) {
    it = cache.emplace(budget, x86::assemble(harness::gen_program({7, budget, harness::GenFeatures::all()}))).first;
  }
  return it->second;
}

void BM_DecodeEveryOffset(benchmark::State& state) {
  const auto& a = program(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(cfg::superset_disassemble(a.image));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * a.image.size()));
}
BENCHMARK(BM_DecodeEveryOffset)->Arg(200)->Arg(2000);

void BM_SupersetCfg(benchmark::State& state) {
  const auto& a = program(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(cfg::build_superset_cfg(a.image));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * a.image.size()));
}
BENCHMARK(BM_SupersetCfg)->Arg(200)->Arg(2000);

void BM_Translate(benchmark::State& state) {
  const auto& a = program(static_cast<std::size_t>(state.range(0)));
  tiles::default_tile_bank();
  for (auto _ : state) benchmark::DoNotOptimize(translate::translate_image(a.image, a.entry));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * a.image.size()));
}
BENCHMARK(BM_Translate)->Arg(200)->Arg(2000);

void BM_Serialize(benchmark::State& state) {
  const auto& a = program(2000);
  const auto img = translate::translate_image(a.image, a.entry);
  for (auto _ : state) benchmark::DoNotOptimize(t64::serialize(img));
}
BENCHMARK(BM_Serialize);

void BM_RunSource(benchmark::State& state) {
  const auto& a = program(2000);
  for (auto _ : state) {
    const auto r = x86::run_source(a.image, a.entry, 1'000'000);
    state.counters["steps"] = static_cast<double>(r.steps);
  }
}
BENCHMARK(BM_RunSource);

void BM_RunTranslated(benchmark::State& state) {
  const auto& a = program(2000);
  const auto img = translate::translate_image(a.image, a.entry, {state.range(0) != 0});
  for (auto _ : state) {
    const auto r = t64::run_translated(img, 100'000'000);
    state.counters["steps"] = static_cast<double>(r.steps);
  }
}
BENCHMARK(BM_RunTranslated)->ArgName("pruned")->Arg(0)->Arg(1);

void BM_BuildTileBank(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(tiles::build_tile_bank());
}
BENCHMARK(BM_BuildTileBank)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
