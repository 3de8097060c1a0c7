#include "supertile/x86/decoder.hpp"

#include <optional>

namespace supertile::x86 {

namespace {

class Cursor {
 public:
  Cursor(std::span<const std::uint8_t> image, std::size_t pos) : image_(image), pos_(pos) {}

  // Reads past the end yield zero and latch the truncated flag.
  std::uint8_t byte() {
    if (pos_ >= image_.size()) {
      truncated_ = true;
      return 0;
    }
    return image_[pos_++];
  }
  std::int64_t imm8() { return static_cast<std::int8_t>(byte()); }
  std::int64_t imm32() { return static_cast<std::int32_t>(le(4)); }
  std::int64_t imm64() { return static_cast<std::int64_t>(le(8)); }
  std::size_t pos() const { return pos_; }
  bool truncated() const { return truncated_; }

 private:
  std::uint64_t le(int n) {
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= std::uint64_t{byte()} << (8 * i);
    return v;
  }

  std::span<const std::uint8_t> image_;
  std::size_t pos_;
  bool truncated_ = false;
};

struct Rex {
  bool present = false;
  bool w = false, r = false, x = false, b = false;
};

struct ModRm {
  int mod = 0;
  int reg = 0;       // includes REX.R
  int digit = 0;     // raw reg field, for opcode extensions
  Operand rm;
};

ModRm read_modrm(Cursor& c, const Rex& rex) {
  const std::uint8_t m = c.byte();
  ModRm out;
  out.mod = m >> 6;
  out.digit = (m >> 3) & 7;
  out.reg = out.digit | (rex.r ? 8 : 0);
  const int rm = m & 7;
  if (out.mod == 3) {
    out.rm = Operand::of_reg(reg_at(rm | (rex.b ? 8 : 0)));
    return out;
  }
  MemOperand mem;
  bool disp32 = out.mod == 2;
  if (rm == 4) {
    const std::uint8_t sib = c.byte();
    const int idx = ((sib >> 3) & 7) | (rex.x ? 8 : 0);
    const int base = sib & 7;
    if (idx != 4) {
      mem.index = reg_at(idx);
      mem.scale = static_cast<std::uint8_t>(1 << (sib >> 6));
    }
    if (base == 5 && out.mod == 0) {
      disp32 = true;
    } else {
      mem.base = reg_at(base | (rex.b ? 8 : 0));
    }
  } else if (rm == 5 && out.mod == 0) {
    mem.rip_relative = true;
    disp32 = true;
  } else {
    mem.base = reg_at(rm | (rex.b ? 8 : 0));
  }
  if (out.mod == 1) {
    mem.disp = static_cast<std::int32_t>(c.imm8());
  } else if (disp32) {
    mem.disp = static_cast<std::int32_t>(c.imm32());
  }
  out.rm = Operand::of_mem(mem);
  return out;
}

// Without REX, 8-bit register numbers 4..7 name AH/CH/DH/BH, which the
// subset leaves out.
bool high_byte_reg(const Rex& rex, int reg) { return !rex.present && reg >= 4 && reg <= 7; }

bool high_byte_operand(const Rex& rex, const Operand& o) {
  return o.is_reg() && high_byte_reg(rex, index_of(o.reg));
}

std::optional<Mnemonic> alu_op(int digit) {
  switch (digit) {
    case 0: return Mnemonic::Add;
    case 1: return Mnemonic::Or;
    case 4: return Mnemonic::And;
    case 5: return Mnemonic::Sub;
    case 6: return Mnemonic::Xor;
    case 7: return Mnemonic::Cmp;
    default: return std::nullopt;
  }
}

std::optional<Mnemonic> jcc_op(int cc) {
  switch (cc) {
    case 0x2: return Mnemonic::Jb;
    case 0x3: return Mnemonic::Jae;
    case 0x4: return Mnemonic::Jz;
    case 0x5: return Mnemonic::Jnz;
    case 0xC: return Mnemonic::Jl;
    case 0xD: return Mnemonic::Jge;
    case 0xE: return Mnemonic::Jle;
    case 0xF: return Mnemonic::Jg;
    default: return std::nullopt;
  }
}

class Builder {
 public:
  Builder(const Cursor& c, std::size_t offset) : cursor_(c) { in_.offset = offset; }

  Builder& op(Mnemonic m, int width) {
    in_.mnemonic = m;
    in_.width = static_cast<std::uint8_t>(width);
    return *this;
  }
  Builder& arg(const Operand& o) {
    in_.ops[in_.operand_count++] = o;
    return *this;
  }
  DecodeResult finish() const {
    if (cursor_.truncated()) return InvalidDecode{in_.offset, DecodeError::Truncated};
    DecodedInstruction out = in_;
    out.length = static_cast<std::uint8_t>(cursor_.pos() - in_.offset);
    out.flags_written = flags_written_by(out.mnemonic);
    out.flags_read = flags_read_by(out.mnemonic);
    return out;
  }
  // A rejection that follows a read past the end reports the truncation.
  DecodeResult fail(DecodeError e) const {
    return InvalidDecode{in_.offset, cursor_.truncated() ? DecodeError::Truncated : e};
  }
  DecodeResult unsupported() const { return fail(DecodeError::UnsupportedOpcode); }

 private:
  const Cursor& cursor_;
  DecodedInstruction in_;
};

}  // namespace

DecodeResult decode(std::span<const std::uint8_t> image, std::size_t offset) {
  Cursor c(image, offset);
  Builder out(c, offset);
  Rex rex;
  std::uint8_t b = c.byte();
  if ((b & 0xF0) == 0x40) {
    rex.present = true;
    rex.w = b & 8;
    rex.r = b & 4;
    rex.x = b & 2;
    rex.b = b & 1;
    b = c.byte();
    if ((b & 0xF0) == 0x40) return out.unsupported();
  }
  const int opsize = rex.w ? 64 : 32;
  const int low_reg = (b & 7) | (rex.b ? 8 : 0);

  // ALU r/m,r and r,r/m blocks: 00-03, 08-0B, 20-23, 28-2B, 30-33, 38-3B.
  if (b < 0x40 && (b & 7) < 4) {
    const auto m = alu_op(b >> 3);
    if (!m) return out.unsupported();
    const bool byte_op = (b & 1) == 0;
    const bool to_reg = (b & 2) != 0;
    const int width = byte_op ? 8 : opsize;
    const ModRm mr = read_modrm(c, rex);
    const Operand reg = Operand::of_reg(reg_at(mr.reg));
    if (byte_op && (high_byte_reg(rex, mr.reg) || high_byte_operand(rex, mr.rm))) {
      return out.unsupported();
    }
    out.op(*m, width);
    if (to_reg) {
      out.arg(reg).arg(mr.rm);
    } else {
      out.arg(mr.rm).arg(reg);
    }
    return out.finish();
  }

  switch (b) {
    case 0x0F: {
      const std::uint8_t b2 = c.byte();
      if ((b2 & 0xF0) != 0x80) return out.unsupported();
      const auto m = jcc_op(b2 & 0xF);
      if (!m) return out.unsupported();
      out.op(*m, 64).arg(Operand::of_imm(c.imm32()));
      return out.finish();
    }
    case 0x50: case 0x51: case 0x52: case 0x53: case 0x54: case 0x55: case 0x56: case 0x57:
      out.op(Mnemonic::Push, 64).arg(Operand::of_reg(reg_at(low_reg)));
      return out.finish();
    case 0x58: case 0x59: case 0x5A: case 0x5B: case 0x5C: case 0x5D: case 0x5E: case 0x5F:
      out.op(Mnemonic::Pop, 64).arg(Operand::of_reg(reg_at(low_reg)));
      return out.finish();
    case 0x70: case 0x71: case 0x72: case 0x73: case 0x74: case 0x75: case 0x76: case 0x77:
    case 0x78: case 0x79: case 0x7A: case 0x7B: case 0x7C: case 0x7D: case 0x7E: case 0x7F: {
      const auto m = jcc_op(b & 0xF);
      if (!m) return out.unsupported();
      out.op(*m, 64).arg(Operand::of_imm(c.imm8()));
      return out.finish();
    }
    case 0x80: case 0x81: case 0x83: {
      const ModRm mr = read_modrm(c, rex);
      const auto m = alu_op(mr.digit);
      if (!m) return out.unsupported();
      const int width = b == 0x80 ? 8 : opsize;
      if (width == 8 && high_byte_operand(rex, mr.rm)) return out.unsupported();
      const std::int64_t imm = b == 0x81 ? c.imm32() : c.imm8();
      out.op(*m, width).arg(mr.rm).arg(Operand::of_imm(imm));
      return out.finish();
    }
    case 0x84: case 0x85: case 0x88: case 0x89: case 0x8A: case 0x8B: {
      const bool byte_op = (b & 1) == 0;
      const int width = byte_op ? 8 : opsize;
      const ModRm mr = read_modrm(c, rex);
      if (byte_op && (high_byte_reg(rex, mr.reg) || high_byte_operand(rex, mr.rm))) {
        return out.unsupported();
      }
      const Operand reg = Operand::of_reg(reg_at(mr.reg));
      out.op(b <= 0x85 ? Mnemonic::Test : Mnemonic::Mov, width);
      if (b == 0x8A || b == 0x8B) {
        out.arg(reg).arg(mr.rm);
      } else {
        out.arg(mr.rm).arg(reg);
      }
      return out.finish();
    }
    case 0x8D: {
      const ModRm mr = read_modrm(c, rex);
      if (mr.mod == 3) return out.fail(DecodeError::Malformed);
      out.op(Mnemonic::Lea, opsize).arg(Operand::of_reg(reg_at(mr.reg))).arg(mr.rm);
      return out.finish();
    }
    case 0x90:
      if (rex.b) return out.unsupported();
      out.op(Mnemonic::Nop, 64);
      return out.finish();
    case 0xB0: case 0xB1: case 0xB2: case 0xB3: case 0xB4: case 0xB5: case 0xB6: case 0xB7:
      if (high_byte_reg(rex, low_reg)) return out.unsupported();
      out.op(Mnemonic::Mov, 8).arg(Operand::of_reg(reg_at(low_reg))).arg(Operand::of_imm(c.imm8()));
      return out.finish();
    case 0xB8: case 0xB9: case 0xBA: case 0xBB: case 0xBC: case 0xBD: case 0xBE: case 0xBF: {
      const std::int64_t imm = rex.w ? c.imm64() : c.imm32();
      out.op(Mnemonic::Mov, opsize).arg(Operand::of_reg(reg_at(low_reg))).arg(Operand::of_imm(imm));
      return out.finish();
    }
    case 0xC0: case 0xC1: case 0xD0: case 0xD1: {
      const ModRm mr = read_modrm(c, rex);
      if (mr.digit != 4) return out.unsupported();
      const int width = (b & 1) ? opsize : 8;
      if (width == 8 && high_byte_operand(rex, mr.rm)) return out.unsupported();
      const std::int64_t count = b <= 0xC1 ? std::int64_t{c.byte()} : 1;
      // A masked count of zero leaves the flags untouched, which would make
      // the written-flag set depend on the operand value.
      if ((count & (width == 64 ? 63 : 31)) == 0) return out.unsupported();
      out.op(Mnemonic::Shl, width).arg(mr.rm).arg(Operand::of_imm(count));
      return out.finish();
    }
    case 0xC3:
      out.op(Mnemonic::Ret, 64);
      return out.finish();
    case 0xC6: case 0xC7: {
      const ModRm mr = read_modrm(c, rex);
      if (mr.digit != 0) return out.unsupported();
      const int width = b == 0xC6 ? 8 : opsize;
      if (width == 8 && high_byte_operand(rex, mr.rm)) return out.unsupported();
      const std::int64_t imm = b == 0xC6 ? c.imm8() : c.imm32();
      out.op(Mnemonic::Mov, width).arg(mr.rm).arg(Operand::of_imm(imm));
      return out.finish();
    }
    case 0xCC:
      out.op(Mnemonic::Int3, 64);
      return out.finish();
    case 0xE8:
      out.op(Mnemonic::Call, 64).arg(Operand::of_imm(c.imm32()));
      return out.finish();
    case 0xE9:
      out.op(Mnemonic::Jmp, 64).arg(Operand::of_imm(c.imm32()));
      return out.finish();
    case 0xEB:
      out.op(Mnemonic::Jmp, 64).arg(Operand::of_imm(c.imm8()));
      return out.finish();
    case 0xFE: case 0xFF: {
      const ModRm mr = read_modrm(c, rex);
      const int width = b == 0xFE ? 8 : opsize;
      switch (mr.digit) {
        case 0:
        case 1:
          if (width == 8 && high_byte_operand(rex, mr.rm)) return out.unsupported();
          out.op(mr.digit == 0 ? Mnemonic::Inc : Mnemonic::Dec, width).arg(mr.rm);
          return out.finish();
        case 2:
        case 4:
          if (b != 0xFF || mr.mod != 3) return out.unsupported();
          out.op(mr.digit == 2 ? Mnemonic::Call : Mnemonic::Jmp, 64).arg(mr.rm);
          return out.finish();
        default:
          return out.unsupported();
      }
    }
    default:
      return out.unsupported();
  }
}

}  // namespace supertile::x86
