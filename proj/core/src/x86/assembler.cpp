#include "supertile/x86/assembler.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <limits>
#include <optional>
#include <unordered_map>

#include <fmt/format.h>

#include "supertile/x86/memory.hpp"

namespace supertile::x86 {

AssemblyError::AssemblyError(int line, const std::string& what)
    : std::runtime_error(fmt::format("line {}: {}", line, what)), line_(line) {}

namespace {

// An immediate or displacement that may name a label: value = sym + addend.
struct Value {
  std::string symbol;
  std::int64_t addend = 0;
};

struct AsmOperand {
  enum class Kind { Register, Immediate, Memory } kind = Kind::Register;
  NamedReg reg{Reg::RAX, 64};
  Value value;             // immediate, or displacement for memory
  MemOperand mem;          // disp is filled in at encode time
  int mem_width = 0;       // from a `byte ptr` style prefix, 0 if absent
};

enum class BranchSize { Auto, Short, Near };

struct AsmInsn {
  int line = 0;
  Mnemonic mnemonic = Mnemonic::Nop;
  std::vector<AsmOperand> operands;
  BranchSize branch = BranchSize::Auto;
  bool use_near = false;  // relaxation state for Auto branches
  int width = 64;
};

struct Item {
  enum class Kind { Label, Bytes, Insn } kind;
  std::string label;
  std::vector<std::uint8_t> bytes;
  AsmInsn insn;
};

const std::unordered_map<std::string_view, Mnemonic>& mnemonic_table() {
  static const std::unordered_map<std::string_view, Mnemonic> table = {
      {"mov", Mnemonic::Mov},   {"lea", Mnemonic::Lea},   {"add", Mnemonic::Add},
      {"sub", Mnemonic::Sub},   {"and", Mnemonic::And},   {"or", Mnemonic::Or},
      {"xor", Mnemonic::Xor},   {"cmp", Mnemonic::Cmp},   {"test", Mnemonic::Test},
      {"inc", Mnemonic::Inc},   {"dec", Mnemonic::Dec},   {"shl", Mnemonic::Shl},
      {"sal", Mnemonic::Shl},   {"push", Mnemonic::Push}, {"pop", Mnemonic::Pop},
      {"call", Mnemonic::Call}, {"ret", Mnemonic::Ret},   {"jmp", Mnemonic::Jmp},
      {"jz", Mnemonic::Jz},     {"je", Mnemonic::Jz},     {"jnz", Mnemonic::Jnz},
      {"jne", Mnemonic::Jnz},   {"jl", Mnemonic::Jl},     {"jnge", Mnemonic::Jl},
      {"jge", Mnemonic::Jge},   {"jnl", Mnemonic::Jge},   {"jle", Mnemonic::Jle},
      {"jng", Mnemonic::Jle},   {"jg", Mnemonic::Jg},     {"jnle", Mnemonic::Jg},
      {"jb", Mnemonic::Jb},     {"jc", Mnemonic::Jb},     {"jnae", Mnemonic::Jb},
      {"jae", Mnemonic::Jae},   {"jnc", Mnemonic::Jae},   {"jnb", Mnemonic::Jae},
      {"nop", Mnemonic::Nop},   {"int3", Mnemonic::Int3},
  };
  return table;
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool is_ident_start(char ch) {
  return std::isalpha(static_cast<unsigned char>(ch)) || ch == '_' || ch == '.';
}

bool is_ident(std::string_view s) {
  if (s.empty() || !is_ident_start(s[0])) return false;
  return std::all_of(s.begin(), s.end(), [](char ch) {
    return std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '.';
  });
}

std::optional<std::int64_t> parse_number(std::string_view s) {
  s = trim(s);
  bool negative = false;
  if (!s.empty() && (s[0] == '-' || s[0] == '+')) {
    negative = s[0] == '-';
    s = trim(s.substr(1));
  }
  int base = 10;
  if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) {
    base = 16;
    s.remove_prefix(2);
  }
  if (s.empty()) return std::nullopt;
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v, base);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return negative ? -static_cast<std::int64_t>(v) : static_cast<std::int64_t>(v);
}

// Split "a + b*4 - 8" into signed terms.
std::vector<std::pair<bool, std::string>> split_terms(std::string_view s, int line) {
  std::vector<std::pair<bool, std::string>> terms;
  bool negative = false;
  std::string cur;
  auto flush = [&] {
    auto t = trim(cur);
    if (t.empty()) throw AssemblyError(line, "empty term in expression");
    terms.emplace_back(negative, std::string(t));
    cur.clear();
  };
  for (char ch : s) {
    if (ch == '+' || ch == '-') {
      if (trim(cur).empty() && terms.empty() && ch == '-') {
        negative = !negative;
        continue;
      }
      flush();
      negative = ch == '-';
    } else {
      cur += ch;
    }
  }
  flush();
  return terms;
}

Value parse_value(std::string_view text, int line) {
  Value v;
  for (auto& [neg, term] : split_terms(text, line)) {
    if (auto n = parse_number(term)) {
      v.addend += neg ? -*n : *n;
    } else if (is_ident(term) && !neg && v.symbol.empty()) {
      v.symbol = term;
    } else {
      throw AssemblyError(line, fmt::format("bad expression '{}'", text));
    }
  }
  return v;
}

AsmOperand parse_memory(std::string_view inner, int line) {
  AsmOperand op;
  op.kind = AsmOperand::Kind::Memory;
  for (auto& [neg, term] : split_terms(inner, line)) {
    const std::string t = lower(term);
    const auto star = t.find('*');
    if (star != std::string::npos) {
      auto r = parse_reg(trim(std::string_view(t).substr(0, star)));
      auto s = parse_number(std::string_view(t).substr(star + 1));
      if (!r || r->width != 64 || !s || neg) throw AssemblyError(line, "bad index term " + term);
      if (*s != 1 && *s != 2 && *s != 4 && *s != 8) throw AssemblyError(line, "bad scale");
      if (op.mem.index) throw AssemblyError(line, "two index registers");
      op.mem.index = r->reg;
      op.mem.scale = static_cast<std::uint8_t>(*s);
    } else if (t == "rip") {
      if (neg) throw AssemblyError(line, "negated rip");
      op.mem.rip_relative = true;
    } else if (auto r = parse_reg(t)) {
      if (r->width != 64 || neg) throw AssemblyError(line, "bad address register " + term);
      if (!op.mem.base) {
        op.mem.base = r->reg;
      } else if (!op.mem.index) {
        op.mem.index = r->reg;
        op.mem.scale = 1;
      } else {
        throw AssemblyError(line, "too many address registers");
      }
    } else if (auto n = parse_number(term)) {
      op.value.addend += neg ? -*n : *n;
    } else if (is_ident(term) && !neg && op.value.symbol.empty()) {
      op.value.symbol = term;
    } else {
      throw AssemblyError(line, "bad address term " + term);
    }
  }
  if (op.mem.rip_relative && (op.mem.base || op.mem.index)) {
    throw AssemblyError(line, "rip-relative address cannot use other registers");
  }
  if (op.mem.index == Reg::RSP) throw AssemblyError(line, "rsp cannot be an index");
  if (!op.value.symbol.empty() && !op.mem.rip_relative && (op.mem.base || op.mem.index)) {
    throw AssemblyError(line, "labels are only allowed in rip-relative or absolute addresses");
  }
  return op;
}

AsmOperand parse_operand(std::string_view text, int line) {
  std::string t = lower(trim(text));
  int mem_width = 0;
  for (auto [prefix, w] : {std::pair{"byte", 8}, {"dword", 32}, {"qword", 64}}) {
    const std::string p = prefix;
    if (t.rfind(p, 0) == 0 && t.size() > p.size() && !std::isalnum(static_cast<unsigned char>(t[p.size()]))) {
      mem_width = w;
      t = std::string(trim(std::string_view(t).substr(p.size())));
      if (t.rfind("ptr", 0) == 0) t = std::string(trim(std::string_view(t).substr(3)));
      break;
    }
  }
  if (!t.empty() && t.front() == '[') {
    if (t.back() != ']') throw AssemblyError(line, "unterminated memory operand");
    // Keep label spelling from the original text.
    const auto open = text.find('[');
    const auto close = text.rfind(']');
    AsmOperand op = parse_memory(text.substr(open + 1, close - open - 1), line);
    op.mem_width = mem_width;
    return op;
  }
  if (mem_width != 0) throw AssemblyError(line, "size prefix needs a memory operand");
  if (auto r = parse_reg(t)) {
    AsmOperand op;
    op.reg = *r;
    return op;
  }
  AsmOperand op;
  op.kind = AsmOperand::Kind::Immediate;
  op.value = parse_value(trim(text), line);
  return op;
}

std::vector<std::string> split_operands(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  int depth = 0;
  for (char ch : s) {
    if (ch == '[') ++depth;
    if (ch == ']') --depth;
    if (ch == ',' && depth == 0) {
      out.emplace_back(trim(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (!trim(cur).empty()) out.emplace_back(trim(cur));
  return out;
}

using Kind = AsmOperand::Kind;

bool is_reg(const AsmOperand& o) { return o.kind == Kind::Register; }
bool is_imm(const AsmOperand& o) { return o.kind == Kind::Immediate; }
bool is_mem(const AsmOperand& o) { return o.kind == Kind::Memory; }

// Infer the operand size and reject shapes the subset cannot encode.
int check_shape(AsmInsn& in) {
  auto& ops = in.operands;
  const auto n = ops.size();
  auto fail = [&](const char* why) -> int { throw AssemblyError(in.line, why); };
  auto need = [&](std::size_t count) {
    if (n != count) fail("wrong number of operands");
  };
  auto reg_width = [&]() {
    int w = 0;
    for (auto& o : ops) {
      if (!is_reg(o)) continue;
      if (w != 0 && o.reg.width != w) fail("operand size mismatch");
      w = o.reg.width;
    }
    for (auto& o : ops) {
      if (is_mem(o) && o.mem_width != 0) {
        if (w != 0 && o.mem_width != w) fail("operand size mismatch");
        w = o.mem_width;
      }
    }
    if (w == 0) fail("operand size is ambiguous; add byte/dword/qword ptr");
    return w;
  };

  switch (in.mnemonic) {
    case Mnemonic::Mov:
    case Mnemonic::Add: case Mnemonic::Sub: case Mnemonic::And: case Mnemonic::Or:
    case Mnemonic::Xor: case Mnemonic::Cmp:
      need(2);
      if (is_imm(ops[0])) fail("destination cannot be an immediate");
      if (is_mem(ops[0]) && is_mem(ops[1])) fail("two memory operands");
      return reg_width();
    case Mnemonic::Test:
      need(2);
      if (!(is_reg(ops[1]) || is_reg(ops[0])) || is_imm(ops[0]) || is_imm(ops[1])) {
        fail("test needs a register operand and no immediate");
      }
      if (is_mem(ops[1])) std::swap(ops[0], ops[1]);
      return reg_width();
    case Mnemonic::Lea:
      need(2);
      if (!is_reg(ops[0]) || !is_mem(ops[1]) || ops[0].reg.width == 8) fail("lea needs r32/r64, mem");
      return ops[0].reg.width;
    case Mnemonic::Inc: case Mnemonic::Dec:
      need(1);
      if (is_imm(ops[0])) fail("operand cannot be an immediate");
      return reg_width();
    case Mnemonic::Shl:
      need(2);
      if (is_imm(ops[0]) || !is_imm(ops[1]) || !ops[1].value.symbol.empty()) {
        fail("shl needs r/m, constant count");
      }
      return reg_width();
    case Mnemonic::Push: case Mnemonic::Pop:
      need(1);
      if (!is_reg(ops[0]) || ops[0].reg.width != 64) fail("push/pop need a 64-bit register");
      return 64;
    case Mnemonic::Call: case Mnemonic::Jmp:
      need(1);
      if (is_mem(ops[0])) fail("memory-indirect branches are not supported");
      if (is_reg(ops[0]) && ops[0].reg.width != 64) fail("indirect branch needs a 64-bit register");
      return 64;
    case Mnemonic::Ret: case Mnemonic::Nop: case Mnemonic::Int3:
      need(0);
      return 64;
    default:
      need(1);
      if (!is_imm(ops[0])) fail("conditional branch needs a target");
      return 64;
  }
}

bool fits8(std::int64_t v) { return v >= -128 && v <= 127; }
bool fits32(std::int64_t v) {
  return v >= std::numeric_limits<std::int32_t>::min() && v <= std::numeric_limits<std::int32_t>::max();
}
std::int64_t sext(std::int64_t v, int width) {
  if (width >= 64) return v;
  const int shift = 64 - width;
  return static_cast<std::int64_t>(static_cast<std::uint64_t>(v) << shift) >> shift;
}

class Encoder {
 public:
  Encoder(const std::map<std::string, std::size_t, std::less<>>& labels, int line)
      : labels_(labels), line_(line) {}

  // Encode `in` placed at `offset`. When `resolve` is false, symbols resolve
  // to 0 and only the length is meaningful.
  std::vector<std::uint8_t> encode(const AsmInsn& in, std::size_t offset, bool resolve,
                                   DecodedInstruction* expect);

 private:
  std::int64_t absolute(const Value& v, bool resolve) const;
  void rex_and_opcode(std::vector<std::uint8_t>& out, bool w, int reg, const AsmOperand* rm,
                      bool byte_regs, std::initializer_list<std::uint8_t> opcode);
  void modrm(std::vector<std::uint8_t>& out, int reg, const AsmOperand& rm);
  [[noreturn]] void fail(const std::string& why) const { throw AssemblyError(line_, why); }

  const std::map<std::string, std::size_t, std::less<>>& labels_;
  int line_;
  std::size_t rip_fixup_ = 0;  // byte index of a pending rip-relative disp32
  bool has_rip_fixup_ = false;
  std::int64_t rip_target_ = 0;
};

std::int64_t Encoder::absolute(const Value& v, bool resolve) const {
  if (v.symbol.empty()) return v.addend;
  if (!resolve) return static_cast<std::int64_t>(kImageBase) + v.addend;
  if (v.symbol == "__exit") return static_cast<std::int64_t>(hostcall_address(Hostcall::Exit)) + v.addend;
  if (v.symbol == "__putc") return static_cast<std::int64_t>(hostcall_address(Hostcall::WriteChar)) + v.addend;
  if (v.symbol == "__putu64") return static_cast<std::int64_t>(hostcall_address(Hostcall::WriteU64)) + v.addend;
  auto it = labels_.find(v.symbol);
  if (it == labels_.end()) fail("undefined label " + v.symbol);
  return static_cast<std::int64_t>(kImageBase + it->second) + v.addend;
}

void Encoder::rex_and_opcode(std::vector<std::uint8_t>& out, bool w, int reg, const AsmOperand* rm,
                             bool byte_regs, std::initializer_list<std::uint8_t> opcode) {
  std::uint8_t rex = 0x40;
  if (w) rex |= 8;
  if (reg >= 8) rex |= 4;
  bool force = false;
  if (byte_regs && reg >= 4 && reg <= 7) force = true;
  if (rm != nullptr) {
    if (is_reg(*rm)) {
      const int r = index_of(rm->reg.reg);
      if (r >= 8) rex |= 1;
      if (byte_regs && r >= 4 && r <= 7) force = true;
    } else if (is_mem(*rm)) {
      if (rm->mem.base && index_of(*rm->mem.base) >= 8) rex |= 1;
      if (rm->mem.index && index_of(*rm->mem.index) >= 8) rex |= 2;
    }
  }
  if (rex != 0x40 || force) out.push_back(rex);
  out.insert(out.end(), opcode);
}

void Encoder::modrm(std::vector<std::uint8_t>& out, int reg, const AsmOperand& rm) {
  const auto r = static_cast<std::uint8_t>((reg & 7) << 3);
  if (is_reg(rm)) {
    out.push_back(static_cast<std::uint8_t>(0xC0 | r | (index_of(rm.reg.reg) & 7)));
    return;
  }
  const MemOperand& m = rm.mem;
  auto put32 = [&](std::int64_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(static_cast<std::uint64_t>(v) >> (8 * i)));
  };
  if (m.rip_relative) {
    out.push_back(static_cast<std::uint8_t>(0x05 | r));
    has_rip_fixup_ = true;
    rip_fixup_ = out.size();
    put32(0);
    return;
  }
  const std::int64_t disp = rm.value.addend;
  if (!m.base) {
    const int idx = m.index ? (index_of(*m.index) & 7) : 4;
    const int ss = m.index ? __builtin_ctz(m.scale) : 0;
    out.push_back(static_cast<std::uint8_t>(0x04 | r));
    out.push_back(static_cast<std::uint8_t>((ss << 6) | (idx << 3) | 5));
    put32(disp);
    return;
  }
  const int base = index_of(*m.base) & 7;
  int mod = 2;
  if (disp == 0 && base != 5) {
    mod = 0;
  } else if (fits8(disp)) {
    mod = 1;
  }
  const bool sib = m.index || base == 4;
  out.push_back(static_cast<std::uint8_t>((mod << 6) | r | (sib ? 4 : base)));
  if (sib) {
    const int idx = m.index ? (index_of(*m.index) & 7) : 4;
    const int ss = m.index ? __builtin_ctz(m.scale) : 0;
    out.push_back(static_cast<std::uint8_t>((ss << 6) | (idx << 3) | base));
  }
  if (mod == 1) out.push_back(static_cast<std::uint8_t>(disp));
  if (mod == 2) put32(disp);
}

int alu_digit(Mnemonic m) {
  switch (m) {
    case Mnemonic::Add: return 0;
    case Mnemonic::Or: return 1;
    case Mnemonic::And: return 4;
    case Mnemonic::Sub: return 5;
    case Mnemonic::Xor: return 6;
    default: return 7;  // cmp
  }
}

std::uint8_t jcc_code(Mnemonic m) {
  switch (m) {
    case Mnemonic::Jb: return 0x2;
    case Mnemonic::Jae: return 0x3;
    case Mnemonic::Jz: return 0x4;
    case Mnemonic::Jnz: return 0x5;
    case Mnemonic::Jl: return 0xC;
    case Mnemonic::Jge: return 0xD;
    case Mnemonic::Jle: return 0xE;
    default: return 0xF;
  }
}

std::vector<std::uint8_t> Encoder::encode(const AsmInsn& in, std::size_t offset, bool resolve,
                                          DecodedInstruction* expect) {
  std::vector<std::uint8_t> out;
  has_rip_fixup_ = false;
  const int w = in.width;
  const bool rexw = w == 64;
  const bool byte_op = w == 8;
  const auto& ops = in.operands;

  auto put_imm = [&](std::int64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) out.push_back(static_cast<std::uint8_t>(static_cast<std::uint64_t>(v) >> (8 * i)));
  };
  auto reg_of = [](const AsmOperand& o) { return index_of(o.reg.reg); };

  // Operand values as the decoder will report them.
  std::vector<Operand> decoded;
  auto decoded_of = [&](const AsmOperand& o) {
    switch (o.kind) {
      case Kind::Register: return Operand::of_reg(o.reg.reg);
      case Kind::Memory: {
        MemOperand m = o.mem;
        if (m.index && m.scale == 0) m.scale = 1;
        if (!m.rip_relative) {
          const std::int64_t d = absolute(o.value, resolve);
          if (!fits32(d)) fail("displacement does not fit in 32 bits");
          m.disp = static_cast<std::int32_t>(d);
        }
        return Operand::of_mem(m);
      }
      case Kind::Immediate: break;
    }
    return Operand::of_imm(absolute(o.value, resolve));
  };
  auto resolved = [&](const AsmOperand& o) {
    AsmOperand copy = o;
    if (is_mem(o) && !o.mem.rip_relative) copy.value = Value{"", decoded_of(o).mem.disp};
    return copy;
  };

  std::int64_t imm_value = 0;
  auto imm = [&](const AsmOperand& o) {
    const std::int64_t v = absolute(o.value, resolve);
    if (w == 8 && (v < -128 || v > 255)) fail("immediate does not fit in 8 bits");
    if (w == 32 && (v < std::numeric_limits<std::int32_t>::min() || v > 0xFFFFFFFFll)) {
      fail("immediate does not fit in 32 bits");
    }
    return v;
  };

  switch (in.mnemonic) {
    case Mnemonic::Mov: {
      const auto dst = resolved(ops[0]);
      const auto src = resolved(ops[1]);
      decoded = {decoded_of(ops[0]), decoded_of(ops[1])};
      if (is_imm(src)) {
        imm_value = imm(src);
        if (is_reg(dst) && byte_op) {
          const int r = reg_of(dst);
          rex_and_opcode(out, false, 0, &dst, true, {static_cast<std::uint8_t>(0xB0 | (r & 7))});
          put_imm(imm_value, 1);
          decoded[1].imm = sext(imm_value, 8);
        } else if (is_reg(dst) && w == 32) {
          const int r = reg_of(dst);
          rex_and_opcode(out, false, 0, &dst, false, {static_cast<std::uint8_t>(0xB8 | (r & 7))});
          put_imm(imm_value, 4);
          decoded[1].imm = sext(imm_value, 32);
        } else if (is_reg(dst) && !fits32(imm_value)) {
          const int r = reg_of(dst);
          rex_and_opcode(out, true, 0, &dst, false, {static_cast<std::uint8_t>(0xB8 | (r & 7))});
          put_imm(imm_value, 8);
        } else {
          if (w == 64 && !fits32(imm_value)) fail("immediate does not fit in 32 bits");
          rex_and_opcode(out, rexw, 0, &dst, byte_op, {static_cast<std::uint8_t>(byte_op ? 0xC6 : 0xC7)});
          modrm(out, 0, dst);
          put_imm(imm_value, byte_op ? 1 : 4);
          decoded[1].imm = sext(imm_value, byte_op ? 8 : 32);
        }
      } else if (is_reg(dst)) {
        // reg <- reg uses 89/88 (r/m destination); reg <- mem uses 8B/8A.
        if (is_reg(src)) {
          rex_and_opcode(out, rexw, reg_of(src), &dst, byte_op, {static_cast<std::uint8_t>(byte_op ? 0x88 : 0x89)});
          modrm(out, reg_of(src), dst);
        } else {
          rex_and_opcode(out, rexw, reg_of(dst), &src, byte_op, {static_cast<std::uint8_t>(byte_op ? 0x8A : 0x8B)});
          modrm(out, reg_of(dst), src);
        }
      } else {
        rex_and_opcode(out, rexw, reg_of(src), &dst, byte_op, {static_cast<std::uint8_t>(byte_op ? 0x88 : 0x89)});
        modrm(out, reg_of(src), dst);
      }
      break;
    }
    case Mnemonic::Add: case Mnemonic::Sub: case Mnemonic::And: case Mnemonic::Or:
    case Mnemonic::Xor: case Mnemonic::Cmp: {
      const auto dst = resolved(ops[0]);
      const auto src = resolved(ops[1]);
      decoded = {decoded_of(ops[0]), decoded_of(ops[1])};
      const int digit = alu_digit(in.mnemonic);
      if (is_imm(src)) {
        imm_value = imm(src);
        if (byte_op) {
          rex_and_opcode(out, false, 0, &dst, true, {0x80});
          modrm(out, digit, dst);
          put_imm(imm_value, 1);
          decoded[1].imm = sext(imm_value, 8);
        } else {
          const std::int64_t v = sext(imm_value, w == 32 ? 32 : 64);
          if (!fits32(v)) fail("immediate does not fit in 32 bits");
          const bool short_form = fits8(v) && src.value.symbol.empty();
          rex_and_opcode(out, rexw, 0, &dst, false, {static_cast<std::uint8_t>(short_form ? 0x83 : 0x81)});
          modrm(out, digit, dst);
          put_imm(v, short_form ? 1 : 4);
          decoded[1].imm = v;
        }
      } else {
        const std::uint8_t base = static_cast<std::uint8_t>(digit << 3);
        if (is_mem(src)) {
          rex_and_opcode(out, rexw, reg_of(dst), &src, byte_op, {static_cast<std::uint8_t>(base | (byte_op ? 2 : 3))});
          modrm(out, reg_of(dst), src);
        } else {
          rex_and_opcode(out, rexw, reg_of(src), &dst, byte_op, {static_cast<std::uint8_t>(base | (byte_op ? 0 : 1))});
          modrm(out, reg_of(src), dst);
        }
      }
      break;
    }
    case Mnemonic::Test: {
      const auto dst = resolved(ops[0]);
      const auto src = resolved(ops[1]);
      decoded = {decoded_of(ops[0]), decoded_of(ops[1])};
      rex_and_opcode(out, rexw, reg_of(src), &dst, byte_op, {static_cast<std::uint8_t>(byte_op ? 0x84 : 0x85)});
      modrm(out, reg_of(src), dst);
      break;
    }
    case Mnemonic::Lea: {
      const auto src = resolved(ops[1]);
      decoded = {decoded_of(ops[0]), decoded_of(ops[1])};
      rex_and_opcode(out, rexw, reg_of(ops[0]), &src, false, {0x8D});
      modrm(out, reg_of(ops[0]), src);
      break;
    }
    case Mnemonic::Inc: case Mnemonic::Dec: {
      const auto dst = resolved(ops[0]);
      decoded = {decoded_of(ops[0])};
      rex_and_opcode(out, rexw, 0, &dst, byte_op, {static_cast<std::uint8_t>(byte_op ? 0xFE : 0xFF)});
      modrm(out, in.mnemonic == Mnemonic::Inc ? 0 : 1, dst);
      break;
    }
    case Mnemonic::Shl: {
      const auto dst = resolved(ops[0]);
      decoded = {decoded_of(ops[0]), decoded_of(ops[1])};
      const std::int64_t count = imm(ops[1]);
      const std::int64_t limit = w == 64 ? 63 : 31;
      if (count < 1 || count > limit) fail(fmt::format("shift count must be 1..{}", limit));
      if (count == 1) {
        rex_and_opcode(out, rexw, 0, &dst, byte_op, {static_cast<std::uint8_t>(byte_op ? 0xD0 : 0xD1)});
        modrm(out, 4, dst);
      } else {
        rex_and_opcode(out, rexw, 0, &dst, byte_op, {static_cast<std::uint8_t>(byte_op ? 0xC0 : 0xC1)});
        modrm(out, 4, dst);
        put_imm(count, 1);
      }
      break;
    }
    case Mnemonic::Push: case Mnemonic::Pop: {
      const int r = reg_of(ops[0]);
      decoded = {decoded_of(ops[0])};
      if (r >= 8) out.push_back(0x41);
      out.push_back(static_cast<std::uint8_t>((in.mnemonic == Mnemonic::Push ? 0x50 : 0x58) | (r & 7)));
      break;
    }
    case Mnemonic::Ret: out.push_back(0xC3); break;
    case Mnemonic::Nop: out.push_back(0x90); break;
    case Mnemonic::Int3: out.push_back(0xCC); break;
    default: {
      // call / jmp / jcc
      if (is_reg(ops[0])) {
        decoded = {decoded_of(ops[0])};
        rex_and_opcode(out, false, 0, &ops[0], false, {0xFF});
        modrm(out, in.mnemonic == Mnemonic::Call ? 2 : 4, ops[0]);
        break;
      }
      const bool near = in.mnemonic == Mnemonic::Call || in.branch == BranchSize::Near ||
                        (in.branch == BranchSize::Auto && in.use_near);
      std::size_t len = 0;
      if (in.mnemonic == Mnemonic::Call || in.mnemonic == Mnemonic::Jmp) {
        len = near ? 5 : 2;
      } else {
        len = near ? 6 : 2;
      }
      const std::int64_t target = imm(ops[0]);
      const std::int64_t disp = resolve ? target - static_cast<std::int64_t>(kImageBase + offset + len) : 0;
      if (!near && !fits8(disp)) fail("branch displacement overflow");
      if (near && !fits32(disp)) fail("branch displacement overflow");
      decoded = {Operand::of_imm(disp)};
      if (in.mnemonic == Mnemonic::Call) {
        out.push_back(0xE8);
      } else if (in.mnemonic == Mnemonic::Jmp) {
        out.push_back(near ? 0xE9 : 0xEB);
      } else if (near) {
        out.push_back(0x0F);
        out.push_back(static_cast<std::uint8_t>(0x80 | jcc_code(in.mnemonic)));
      } else {
        out.push_back(static_cast<std::uint8_t>(0x70 | jcc_code(in.mnemonic)));
      }
      put_imm(disp, near ? 4 : 1);
      break;
    }
  }

  if (has_rip_fixup_) {
    const AsmOperand& mem = is_mem(ops[0]) ? ops[0] : ops[1];
    // `[rip + label]` addresses the label; `[rip + N]` is a plain displacement.
    std::int64_t disp = mem.value.addend;
    if (!mem.value.symbol.empty()) {
      const std::int64_t target = absolute(mem.value, resolve);
      disp = resolve ? target - static_cast<std::int64_t>(kImageBase + offset + out.size()) : 0;
    }
    if (!fits32(disp)) fail("rip-relative displacement does not fit in 32 bits");
    for (int i = 0; i < 4; ++i) {
      out[rip_fixup_ + static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(static_cast<std::uint64_t>(disp) >> (8 * i));
    }
    for (auto& d : decoded) {
      if (d.is_mem()) d.mem.disp = static_cast<std::int32_t>(disp);
    }
  }

  if (expect != nullptr) {
    DecodedInstruction& e = *expect;
    e = DecodedInstruction{};
    e.offset = offset;
    e.length = static_cast<std::uint8_t>(out.size());
    e.mnemonic = in.mnemonic;
    e.width = static_cast<std::uint8_t>(w);
    for (const auto& d : decoded) e.ops[e.operand_count++] = d;
    e.flags_written = flags_written_by(in.mnemonic);
    e.flags_read = flags_read_by(in.mnemonic);
  }
  return out;
}

std::vector<Item> parse(std::string_view text) {
  std::vector<Item> items;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (auto c = line.find_first_of(";#"); c != std::string_view::npos) line = line.substr(0, c);
    line = trim(line);
    while (!line.empty()) {
      const auto colon = line.find(':');
      if (colon != std::string_view::npos && is_ident(trim(line.substr(0, colon)))) {
        Item label{Item::Kind::Label, std::string(trim(line.substr(0, colon))), {}, {}};
        items.push_back(std::move(label));
        line = trim(line.substr(colon + 1));
        continue;
      }
      break;
    }
    if (line.empty()) continue;

    const auto space = line.find_first_of(" \t");
    const std::string head = lower(line.substr(0, space));
    std::string_view rest = space == std::string_view::npos ? std::string_view{} : trim(line.substr(space));

    if (head == ".byte") {
      Item bytes{Item::Kind::Bytes, {}, {}, {}};
      for (const auto& b : split_operands(rest)) {
        auto v = parse_number(b);
        if (!v || *v < -128 || *v > 255) throw AssemblyError(line_no, "bad .byte value " + b);
        bytes.bytes.push_back(static_cast<std::uint8_t>(*v));
      }
      items.push_back(std::move(bytes));
      continue;
    }
    const auto& table = mnemonic_table();
    auto it = table.find(head);
    if (it == table.end()) throw AssemblyError(line_no, "unknown mnemonic " + head);
    AsmInsn insn;
    insn.line = line_no;
    insn.mnemonic = it->second;
    std::string_view ops_text = rest;
    const std::string lowered = lower(rest);
    if (lowered.rfind("short ", 0) == 0) {
      insn.branch = BranchSize::Short;
      ops_text = trim(rest.substr(6));
    } else if (lowered.rfind("near ", 0) == 0) {
      insn.branch = BranchSize::Near;
      ops_text = trim(rest.substr(5));
    }
    for (const auto& o : split_operands(ops_text)) insn.operands.push_back(parse_operand(o, line_no));
    insn.width = check_shape(insn);
    if (insn.branch != BranchSize::Auto &&
        (insn.operands.empty() || !is_imm(insn.operands[0]) || insn.mnemonic == Mnemonic::Call)) {
      throw AssemblyError(line_no, "short/near only apply to direct jumps");
    }
    items.push_back(Item{Item::Kind::Insn, {}, {}, std::move(insn)});
  }
  return items;
}

}  // namespace

Assembly assemble(std::string_view text) {
  std::vector<Item> items = parse(text);
  std::map<std::string, std::size_t, std::less<>> labels;
  for (const auto& item : items) {
    if (item.kind == Item::Kind::Label) {
      if (item.label.rfind("__", 0) == 0) throw AssemblyError(0, "reserved label " + item.label);
      if (!labels.emplace(item.label, 0).second) throw AssemblyError(0, "duplicate label " + item.label);
    }
  }

  // Branch relaxation: start short, widen whatever does not reach, repeat.
  for (int round = 0;; ++round) {
    std::size_t offset = 0;
    std::vector<std::size_t> offsets;
    for (auto& item : items) {
      offsets.push_back(offset);
      switch (item.kind) {
        case Item::Kind::Label: labels[item.label] = offset; break;
        case Item::Kind::Bytes: offset += item.bytes.size(); break;
        case Item::Kind::Insn: {
          Encoder enc(labels, item.insn.line);
          offset += enc.encode(item.insn, offset, false, nullptr).size();
          break;
        }
      }
    }
    bool changed = false;
    for (std::size_t i = 0; i < items.size(); ++i) {
      auto& in = items[i].insn;
      if (items[i].kind != Item::Kind::Insn || in.branch != BranchSize::Auto || in.use_near) continue;
      if (in.operands.size() != 1 || !is_imm(in.operands[0]) || in.mnemonic == Mnemonic::Call) continue;
      Encoder enc(labels, in.line);
      try {
        enc.encode(in, offsets[i], true, nullptr);
      } catch (const AssemblyError&) {
        in.use_near = true;
        changed = true;
      }
    }
    if (!changed) break;
  }

  Assembly out;
  for (auto& item : items) {
    switch (item.kind) {
      case Item::Kind::Label: break;
      case Item::Kind::Bytes:
        out.image.insert(out.image.end(), item.bytes.begin(), item.bytes.end());
        break;
      case Item::Kind::Insn: {
        Encoder enc(labels, item.insn.line);
        DecodedInstruction expect;
        auto bytes = enc.encode(item.insn, out.image.size(), true, &expect);
        out.image.insert(out.image.end(), bytes.begin(), bytes.end());
        out.instructions.push_back(expect);
        break;
      }
    }
  }
  out.symbols = labels;
  if (auto it = labels.find("_start"); it != labels.end()) out.entry = it->second;
  return out;
}

}  // namespace supertile::x86
