#include "supertile/t64/container.hpp"

#include <algorithm>

#include <zlib.h>

#include <fmt/format.h>

namespace supertile::t64 {

namespace {

constexpr std::uint8_t kMagic[4] = {'E', 'L', 'V', 'T'};

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void le(std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void raw(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }
  std::vector<std::uint8_t>& bytes() { return out_; }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint64_t le(int bytes) {
    need(static_cast<std::size_t>(bytes));
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= std::uint64_t{in_[pos_++]} << (8 * i);
    return v;
  }
  std::span<const std::uint8_t> raw(std::size_t n) {
    need(n);
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw ContainerError(ContainerErrorKind::TruncatedContainer, "truncated container");
  }
  std::size_t pos() const { return pos_; }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

std::uint32_t crc(std::span<const std::uint8_t> data) {
  return static_cast<std::uint32_t>(::crc32(::crc32(0L, Z_NULL, 0), data.data(), static_cast<uInt>(data.size())));
}

}  // namespace

std::vector<std::uint8_t> serialize(const TranslatedImage& image) {
  Writer w;
  w.raw(kMagic);
  w.le(kContainerVersion, 2);
  w.le(image.image_base, 8);
  w.le(image.entry, 8);
  w.le(image.hostcall_base, 8);
  w.le(image.source_image.size(), 4);
  w.raw(image.source_image);
  w.le(image.table.size(), 4);
  for (auto e : image.table) w.le(static_cast<std::uint64_t>(e), 8);
  w.le(image.code.size(), 4);
  for (const auto& in : image.code) {
    w.u8(static_cast<std::uint8_t>(in.op));
    w.u8(in.rd);
    w.u8(in.rn);
    w.u8(in.rm);
    w.le(static_cast<std::uint64_t>(in.imm), 8);
  }
  w.le(crc(w.bytes()), 4);
  return std::move(w.bytes());
}

TranslatedImage deserialize(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  const auto magic = r.raw(4);
  if (!std::equal(magic.begin(), magic.end(), kMagic)) {
    throw ContainerError(ContainerErrorKind::BadMagic, "not an ELVT container");
  }
  const auto version = r.le(2);
  if (version != kContainerVersion) {
    throw ContainerError(ContainerErrorKind::VersionMismatch,
                         fmt::format("container version {} (expected {})", version, kContainerVersion));
  }
  TranslatedImage image;
  image.image_base = r.le(8);
  image.entry = r.le(8);
  image.hostcall_base = r.le(8);
  const auto image_len = r.le(4);
  const auto src = r.raw(image_len);
  image.source_image.assign(src.begin(), src.end());
  const auto table_len = r.le(4);
  r.need(table_len * 8);
  image.table.reserve(table_len);
  for (std::uint64_t i = 0; i < table_len; ++i) image.table.push_back(static_cast<std::int64_t>(r.le(8)));
  const auto code_len = r.le(4);
  r.need(code_len * 12);
  image.code.reserve(code_len);
  for (std::uint64_t i = 0; i < code_len; ++i) {
    TargetInstruction in;
    const auto op = r.le(1);
    in.rd = static_cast<std::uint8_t>(r.le(1));
    in.rn = static_cast<std::uint8_t>(r.le(1));
    in.rm = static_cast<std::uint8_t>(r.le(1));
    in.imm = static_cast<std::int64_t>(r.le(8));
    if (op >= kOpcodeCount) throw ContainerError(ContainerErrorKind::InvalidContent, fmt::format("bad opcode {}", op));
    in.op = static_cast<Opcode>(op);
    image.code.push_back(in);
  }
  const std::size_t body = r.pos();
  const auto stored = static_cast<std::uint32_t>(r.le(4));
  if (stored != crc(bytes.first(body))) throw ContainerError(ContainerErrorKind::ChecksumMismatch, "checksum mismatch");
  if (r.pos() != bytes.size()) throw ContainerError(ContainerErrorKind::InvalidContent, "trailing bytes");

  if (image.table.size() != image.source_image.size()) {
    throw ContainerError(ContainerErrorKind::InvalidContent, "lookup table does not cover the image");
  }
  for (const auto& in : image.code) {
    if (!is_canonical(in)) throw ContainerError(ContainerErrorKind::InvalidContent, "non-canonical instruction");
  }
  for (auto e : image.table) {
    if (e < kNoTranslation || e >= static_cast<std::int64_t>(image.code.size())) {
      throw ContainerError(ContainerErrorKind::InvalidContent, "lookup table entry out of range");
    }
  }
  return image;
}

}  // namespace supertile::t64
