#include "supertile/harness/metrics.hpp"

#include <cmath>

#include <fmt/format.h>

namespace supertile::harness {

double MetricsReport::identity_error() const {
  const double p = product();
  return p == 0 ? (expansion == 0 ? 0 : 1) : std::abs(expansion / p - 1.0);
}

MetricsReport compute_metrics(const translate::Translation& translation, std::span<const std::size_t> real_offsets) {
  MetricsReport r;
  const auto& nodes = translation.cfg.nodes;
  r.image_len = nodes.size();
  r.real_instruction_count = real_offsets.size();
  r.total_code_len = translation.image.code.size();

  std::size_t real_code = 0;
  std::size_t real_bytes = 0;
  for (std::size_t o : real_offsets) {
    real_code += translation.nodes.at(o).code.size();
    if (nodes.at(o).valid()) real_bytes += nodes[o].instruction().length;
  }
  for (const auto& n : nodes) {
    if (!n.valid()) continue;
    ++r.valid_offset_count;
    r.target_instruction_count += translation.nodes[n.offset].code.size();
  }
  if (r.real_instruction_count == 0 || r.valid_offset_count == 0) return r;

  const auto R = static_cast<double>(r.real_instruction_count);
  const auto V = static_cast<double>(r.valid_offset_count);
  r.lowering_factor = static_cast<double>(real_code) / R;
  r.density_factor = V / R;
  r.amplification_factor = (static_cast<double>(r.target_instruction_count) / V) / r.lowering_factor;
  r.expansion = static_cast<double>(r.target_instruction_count) / R;
  r.valid_decode_rate = V / static_cast<double>(r.image_len);
  r.avg_source_instr_len = static_cast<double>(real_bytes) / R;
  return r;
}

std::string format_report(const MetricsReport& r) {
  return fmt::format(
      "image_len                 {}\n"
      "real_instruction_count    {}\n"
      "valid_offset_count        {}\n"
      "target_instruction_count  {}\n"
      "total_code_len            {}\n"
      "lowering_factor           {:.4f}\n"
      "density_factor            {:.4f}\n"
      "amplification_factor      {:.4f}\n"
      "expansion                 {:.4f}\n"
      "identity_error            {:.2e}\n"
      "valid_decode_rate         {:.4f}\n"
      "avg_source_instr_len      {:.3f}\n",
      r.image_len, r.real_instruction_count, r.valid_offset_count, r.target_instruction_count, r.total_code_len,
      r.lowering_factor, r.density_factor, r.amplification_factor, r.expansion, r.identity_error(),
      r.valid_decode_rate, r.avg_source_instr_len);
}

}  // namespace supertile::harness
