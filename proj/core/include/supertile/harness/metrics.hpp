#pragma once

#include <cstddef>
#include <span>
#include <string>

#include "supertile/translate/translator.hpp"

namespace supertile::harness {

struct MetricsReport {
  std::size_t real_instruction_count = 0;
  std::size_t valid_offset_count = 0;
  std::size_t image_len = 0;
  // Target instructions attributed to valid offsets.
  std::size_t target_instruction_count = 0;
  // Everything emitted: also invalid-offset traps, layout branches and stubs.
  std::size_t total_code_len = 0;
  double lowering_factor = 0;
  double density_factor = 0;
  double amplification_factor = 0;
  double expansion = 0;
  double valid_decode_rate = 0;
  double avg_source_instr_len = 0;

  double product() const { return lowering_factor * density_factor * amplification_factor; }
  // |expansion / product - 1|
  double identity_error() const;
};

// `real_offsets` are the instruction starts the assembler emitted.
MetricsReport compute_metrics(const translate::Translation& translation, std::span<const std::size_t> real_offsets);

std::string format_report(const MetricsReport& report);

}  // namespace supertile::harness
