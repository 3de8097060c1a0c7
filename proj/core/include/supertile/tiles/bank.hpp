#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "supertile/tiles/expr.hpp"
#include "supertile/x86/instruction.hpp"
#include "supertile/x86/memory.hpp"

namespace supertile::tiles {

struct Tile {
  std::string name;
  std::vector<TileInstr> code;
  std::uint32_t reads = 0;   // target registers read
  std::uint32_t writes = 0;  // target registers written
};

class TileBank {
 public:
  void add(Tile tile);

  const Tile* find(std::string_view name) const;
  const std::map<std::string, Tile, std::less<>>& tiles() const { return tiles_; }
  std::size_t size() const { return tiles_.size(); }

  // Every tile name followed by its target listing, in name order.
  std::string dump() const;

 private:
  std::map<std::string, Tile, std::less<>> tiles_;
};

std::string listing(const Tile& tile);

// Specialize every catalog template over every admissible binding.
TileBank build_tile_bank(const RegisterMap& map = default_register_map());

// Built once on first use.
const TileBank& default_tile_bank();

class UnsupportedInstruction : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct HoleValues {
  std::int64_t imm = 0;
  std::int64_t disp = 0;
  std::int64_t rip_target = 0;
};

struct TileSelection {
  std::vector<const Tile*> tiles;
  HoleValues holes;
};

// Tiles implementing a non-control instruction in execution order: address
// computation, memory load, optional flag tile (only when a live flag is
// written), value tile, store. Throws UnsupportedInstruction for control
// flow and for anything the bank does not cover.
TileSelection lookup_tiles(const TileBank& bank, const x86::DecodedInstruction& in, x86::FlagMask live,
                           std::uint64_t image_base = kImageBase);

// Fill the holes and append the code to `out`.
void instantiate(const TileSelection& selection, std::vector<t64::TargetInstruction>& out);
std::vector<t64::TargetInstruction> instantiate(const TileSelection& selection);

}  // namespace supertile::tiles
