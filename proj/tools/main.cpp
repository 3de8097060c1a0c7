#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "supertile/cfg/superset.hpp"
#include "supertile/harness/difftest.hpp"
#include "supertile/harness/generator.hpp"
#include "supertile/harness/metrics.hpp"
#include "supertile/t64/container.hpp"
#include "supertile/t64/vm.hpp"
#include "supertile/translate/translator.hpp"
#include "supertile/x86/assembler.hpp"
#include "supertile/x86/interpreter.hpp"

namespace {

using namespace supertile;
using json = nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitDivergence = 1;
constexpr int kExitUsage = 2;
constexpr int kExitStopped = 3;  // guest trapped or ran out of fuel

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::uint64_t parse_number(std::string_view s) {
  int base = 10;
  if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) {
    s.remove_prefix(2);
    base = 16;
  }
  std::uint64_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v, base);
  if (ec != std::errc() || p != s.data() + s.size()) throw UsageError(fmt::format("bad number '{}'", s));
  return v;
}

GprFile parse_regs(const std::vector<std::string>& specs) {
  GprFile g = default_gprs();
  for (const auto& spec : specs) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos) throw UsageError("--reg expects NAME=VALUE, got " + spec);
    std::string name = spec.substr(0, eq);
    for (auto& c : name) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    const auto named = x86::parse_reg(name);
    if (!named || named->width != 64) throw UsageError("unknown 64-bit register in " + spec);
    g[x86::index_of(named->reg)] = parse_number(spec.substr(eq + 1));
  }
  return g;
}

// Entry from --entry, else the assembler's sidecar, else 0.
std::size_t resolve_entry(const std::string& image_path, std::optional<std::string> entry) {
  if (entry) return parse_number(*entry);
  std::ifstream side(image_path + ".entry");
  std::string text;
  if (side >> text) return parse_number(text);
  return 0;
}

std::string status_name(RunStatus s) {
  switch (s) {
    case RunStatus::Halted: return "halted";
    case RunStatus::Trapped: return "trapped";
    default: return "fuel-exhausted";
  }
}

json result_json(const ExecutionResult& r) {
  json j;
  j["status"] = status_name(r.status);
  if (r.status == RunStatus::Halted) j["exit_code"] = r.exit_code;
  if (r.status == RunStatus::Trapped) j["trap"] = std::string(trap_name(r.trap));
  json regs;
  for (int i = 0; i < x86::kGprCount; ++i) regs[std::string(x86::upper_name(x86::reg_at(i)))] = r.gprs[i];
  j["registers"] = regs;
  j["flags"] = x86::to_string(r.flags);
  j["output"] = std::string(r.output.begin(), r.output.end());
  j["steps"] = r.steps;
  return j;
}

int report_run(const ExecutionResult& r, bool as_json) {
  if (as_json) {
    std::cout << result_json(r).dump(2) << '\n';
  } else {
    std::cout << describe(r) << '\n';
  }
  if (r.status == RunStatus::Halted) return static_cast<int>(r.exit_code & 0xFF);
  return kExitStopped;
}

std::vector<std::size_t> read_symbols(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read " + path);
  std::vector<std::size_t> offsets;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    if (kind == "insn") {
      std::string off;
      ls >> off;
      offsets.push_back(parse_number(off));
    }
  }
  return offsets;
}

// Seeds as "A..B" (exclusive end) or a single seed.
std::pair<std::uint64_t, std::uint64_t> parse_seeds(const std::string& s) {
  const auto dots = s.find("..");
  if (dots == std::string::npos) {
    const auto v = parse_number(s);
    return {v, v + 1};
  }
  const auto a = parse_number(s.substr(0, dots));
  const auto b = parse_number(s.substr(dots + 2));
  if (b < a) throw UsageError("empty seed range " + s);
  return {a, b};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Superset-disassembly static translator from an x86-64 subset to the T64 VM"};
  app.require_subcommand(1);
  bool as_json = false;
  app.add_flag("--json", as_json, "Machine-readable output");

  std::string input, output, symbols_path, seeds = "0..100", features = "all";
  std::optional<std::string> entry;
  std::vector<std::string> regs;
  std::uint64_t fuel = 10'000'000;
  std::size_t budget = 200;
  std::uint64_t seed = 0;
  bool no_prune = false, dump_cfg = false, dump_bank = false, no_mid_entry = false;

  auto* asm_cmd = app.add_subcommand("asm", "Assemble a program into a flat image");
  asm_cmd->add_option("program", input, "Assembly source")->required();
  asm_cmd->add_option("-o,--output", output, "Image file")->required();
  asm_cmd->add_option("--symbols", symbols_path, "Write label and instruction offsets here");

  auto* tr = app.add_subcommand("translate", "Translate an image into an ELVT container");
  tr->add_option("image", input, "Flat image")->required();
  tr->add_option("--entry", entry, "Entry offset (default: sidecar or 0)");
  tr->add_option("-o,--output", output, "Container file")->required();
  tr->add_flag("--no-prune", no_prune, "Keep every flag tile");
  tr->add_flag("--dump-cfg", dump_cfg, "Print the superset CFG as DOT");
  tr->add_flag("--dump-bank", dump_bank, "Print the tile bank");

  auto* rs = app.add_subcommand("run-source", "Run an image on the reference interpreter");
  rs->add_option("image", input, "Flat image")->required();
  rs->add_option("--entry", entry, "Entry offset (default: sidecar or 0)");
  rs->add_option("--reg", regs, "Initial register, e.g. RDI=0x10");
  rs->add_option("--fuel", fuel, "Step limit");

  auto* run = app.add_subcommand("run", "Run a translated container on the VM");
  run->add_option("container", input, "ELVT file")->required();
  run->add_option("--reg", regs, "Initial register, e.g. RDI=0x10");
  run->add_option("--fuel", fuel, "Target instruction limit");

  auto* dt = app.add_subcommand("difftest", "Differential test over generated programs");
  dt->add_option("--seeds", seeds, "Seed range A..B, end exclusive");
  dt->add_option("--budget", budget, "Instructions per program");
  dt->add_option("--features", features, "memory,indirect,overlap | all | none");
  dt->add_option("--fuel", fuel, "Reference step limit");
  dt->add_flag("--no-mid-entry", no_mid_entry, "Skip mid-program entry variants");

  auto* mt = app.add_subcommand("metrics", "Expansion decomposition of a container");
  mt->add_option("container", input, "ELVT file")->required();
  mt->add_option("--symbols", symbols_path, "Symbols written by asm")->required();
  mt->add_flag("--no-prune", no_prune, "The container was translated with --no-prune");

  auto* gen = app.add_subcommand("gen", "Print a generated program");
  gen->add_option("--seed", seed, "Generator seed");
  gen->add_option("--budget", budget, "Instruction budget");
  gen->add_option("--features", features, "memory,indirect,overlap | all | none");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*asm_cmd) {
      const auto text = read_file(input);
      const auto a = x86::assemble(std::string_view(reinterpret_cast<const char*>(text.data()), text.size()));
      write_file(output, std::string_view(reinterpret_cast<const char*>(a.image.data()), a.image.size()));
      write_file(output + ".entry", fmt::format("{}\n", a.entry));
      if (!symbols_path.empty()) {
        std::string s;
        for (const auto& [name, off] : a.symbols) s += fmt::format("label {} {}\n", name, off);
        for (const auto& in : a.instructions) s += fmt::format("insn {}\n", in.offset);
        write_file(symbols_path, s);
      }
      std::cout << fmt::format("{} bytes, {} instructions, entry {}\n", a.image.size(), a.instructions.size(),
                               a.entry);
      return kExitOk;
    }
    if (*tr) {
      const auto image = read_file(input);
      const auto e = resolve_entry(input, entry);
      if (image.empty() || e >= image.size()) throw UsageError("entry must lie inside a non-empty image");
      const auto t = translate::translate(image, e, {!no_prune});
      if (dump_cfg) std::cout << cfg::to_dot(t.cfg);
      if (dump_bank) std::cout << tiles::default_tile_bank().dump();
      const auto bytes = t64::serialize(t.image);
      write_file(output, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
      if (as_json) {
        std::cout << json{{"image_len", image.size()},
                          {"entry", e},
                          {"target_instructions", t.image.code.size()},
                          {"container_bytes", bytes.size()}}
                         .dump(2)
                  << '\n';
      } else if (!dump_cfg && !dump_bank) {
        std::cout << fmt::format("{} source bytes -> {} target instructions ({} bytes)\n", image.size(),
                                 t.image.code.size(), bytes.size());
      }
      return kExitOk;
    }
    if (*rs) {
      const auto image = read_file(input);
      const auto e = resolve_entry(input, entry);
      if (e >= image.size()) throw UsageError("entry must lie inside the image");
      return report_run(x86::run_source(image, e, fuel, parse_regs(regs)), as_json);
    }
    if (*run) {
      const auto image = t64::deserialize(read_file(input));
      return report_run(t64::run_translated(image, fuel, parse_regs(regs)), as_json);
    }
    if (*dt) {
      harness::DifftestOptions o;
      std::tie(o.seed_begin, o.seed_end) = parse_seeds(seeds);
      o.budget = budget;
      o.features = harness::parse_features(features);
      o.fuel = fuel;
      o.mid_entry = !no_mid_entry;
      const auto r = harness::difftest(o);
      if (as_json) {
        json failures = json::array();
        for (const auto& f : r.failures) failures.push_back({{"seed", f.seed}, {"variant", f.variant}, {"detail", f.detail}});
        std::cout << json{{"programs", r.programs},
                          {"comparisons", r.comparisons},
                          {"passed", r.passed},
                          {"inconclusive", r.inconclusive},
                          {"failures", failures}}
                         .dump(2)
                  << '\n';
      } else {
        for (const auto& f : r.failures) std::cout << fmt::format("FAIL seed {} {}: {}\n", f.seed, f.variant, f.detail);
        std::cout << fmt::format("{} programs, {}/{} comparisons passed, {} inconclusive\n", r.programs, r.passed,
                                 r.comparisons, r.inconclusive);
      }
      return r.ok() ? kExitOk : kExitDivergence;
    }
    if (*mt) {
      const auto image = t64::deserialize(read_file(input));
      // Per-offset sizes are not stored; recover them by retranslating and
      // insist the result matches the container.
      const auto t = translate::translate(image.source_image, image.entry, {!no_prune});
      if (t.image != image) throw UsageError("container does not match a retranslation; check --no-prune");
      const auto offsets = read_symbols(symbols_path);
      const auto m = harness::compute_metrics(t, offsets);
      if (as_json) {
        std::cout << json{{"image_len", m.image_len},
                          {"real_instruction_count", m.real_instruction_count},
                          {"valid_offset_count", m.valid_offset_count},
                          {"target_instruction_count", m.target_instruction_count},
                          {"total_code_len", m.total_code_len},
                          {"lowering_factor", m.lowering_factor},
                          {"density_factor", m.density_factor},
                          {"amplification_factor", m.amplification_factor},
                          {"expansion", m.expansion},
                          {"identity_error", m.identity_error()},
                          {"valid_decode_rate", m.valid_decode_rate},
                          {"avg_source_instr_len", m.avg_source_instr_len}}
                         .dump(2)
                  << '\n';
      } else {
        std::cout << harness::format_report(m);
      }
      return kExitOk;
    }
    if (*gen) {
      if (budget == 0) throw UsageError("--budget must be at least 1");
      std::cout << harness::gen_program({seed, budget, harness::parse_features(features)});
      return kExitOk;
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const x86::AssemblyError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const t64::ContainerError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}
