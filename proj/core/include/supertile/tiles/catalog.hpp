#pragma once

#include <vector>

#include "supertile/tiles/expr.hpp"

namespace supertile::tiles {

// A template together with every operand binding the decoder can demand.
struct CatalogEntry {
  TileTemplate tmpl;
  std::vector<std::vector<Binding>> bindings;
};

std::vector<CatalogEntry> tile_catalog();

// The value tile semantics at a width: 64-bit writes the whole register,
// 32-bit zero-extends, 8-bit merges into the old value.
Expr fit_width(int width, const Expr& value, const Expr& old);

}  // namespace supertile::tiles
