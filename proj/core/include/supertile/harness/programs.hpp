#pragma once

#include <string_view>

namespace supertile::harness {

// Overlapping decode: `mov al, 0xC3` hides a `ret` one byte in. RAX ends as
// 0xC2 when RDI is zero and 0xC3 otherwise.
std::string_view overlapping_return_program();

// Computed jump into a run of four `inc eax`, indexed by RDI & 3. RAX ends as
// 4 - (RDI & 3).
std::string_view jump_table_program();

// Backward-branching counter loop; exits with 1 + 2 + ... + RDI.
std::string_view counted_loop_program();

// Twelve consecutive flag writers ahead of one conditional branch.
std::string_view chained_arithmetic_program();

}  // namespace supertile::harness
