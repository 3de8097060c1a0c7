#include "supertile/tiles/register_map.hpp"

#include <bitset>

#include "supertile/t64/isa.hpp"

namespace supertile::tiles {

std::optional<x86::Reg> RegisterMap::source_of(TargetReg t) const {
  for (int i = 0; i < x86::kGprCount; ++i) {
    if (gpr[static_cast<std::size_t>(i)] == t) return x86::reg_at(i);
  }
  return std::nullopt;
}

const RegisterMap& default_register_map() {
  static const RegisterMap map = [] {
    using x86::Reg;
    RegisterMap m;
    auto put = [&](Reg r, TargetReg t) { m.gpr[static_cast<std::size_t>(x86::index_of(r))] = t; };
    put(Reg::RDI, 0);
    put(Reg::RSI, 1);
    put(Reg::RDX, 2);
    put(Reg::RCX, 3);
    put(Reg::R8, 4);
    put(Reg::R9, 5);
    put(Reg::RAX, 9);
    put(Reg::R10, 10);
    put(Reg::R11, 11);
    put(Reg::RBX, 19);
    put(Reg::RBP, 20);
    put(Reg::R12, 21);
    put(Reg::R13, 22);
    put(Reg::R14, 23);
    put(Reg::R15, 24);
    put(Reg::RSP, 25);
    m.flags = 14;
    m.scratch = {16, 17, 15};
    return m;
  }();
  return map;
}

bool is_well_formed(const RegisterMap& map) {
  std::bitset<t64::kRegisterCount> used;
  auto claim = [&](TargetReg t) {
    if (t >= t64::kZeroReg || used.test(t)) return false;
    used.set(t);
    return true;
  };
  for (auto t : map.gpr) {
    if (!claim(t)) return false;
  }
  if (!claim(map.flags)) return false;
  for (auto t : map.scratch) {
    if (!claim(t)) return false;
  }
  return true;
}

}  // namespace supertile::tiles
