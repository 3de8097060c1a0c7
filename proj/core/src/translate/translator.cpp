#include "supertile/translate/translator.hpp"

#include <algorithm>
#include <set>

#include <fmt/format.h>

namespace supertile::translate {

using t64::Opcode;
using t64::TargetInstruction;
using x86::DecodedInstruction;
using x86::Mnemonic;

namespace {

class NodeBuilder {
 public:
  NodeBuilder(const LoweringContext& ctx, LoweredNode& node) : ctx_(ctx), node_(node) {
    s0_ = ctx.map.scratch[0];
    s1_ = ctx.map.scratch[1];
    s2_ = ctx.map.scratch[2];
  }

  void emit(const TargetInstruction& in, CodeRef ref = {}) { node_.code.push_back(LoweredInstr{in, ref}); }
  std::size_t here() const { return node_.code.size(); }

  t64::TargetInstruction& at(std::size_t i) { return node_.code[i].ins; }
  void retarget(std::size_t i, CodeRef ref) { node_.code[i].target = ref; }

  bool in_image(std::int64_t off) const { return off >= 0 && off < static_cast<std::int64_t>(ctx_.image_size); }

  // Continue at a source offset, in the image or not.
  void go_to(std::int64_t off) {
    if (in_image(off)) {
      emit(t64::branch(0), CodeRef::offset(static_cast<std::size_t>(off)));
    } else {
      emit(t64::ldi(s0_, static_cast<std::int64_t>(ctx_.image_base) + off));
      emit(t64::branch(0), CodeRef::stub(Stub::Dispatch));
    }
  }

  // Source address in S0: translate through the lookup table and jump, or
  // divert to the dispatcher when it lies outside the image.
  void indirect_jump() { emit_indirect_core(*this, ctx_, s0_, s1_, s2_); }

  static void emit_indirect_core(NodeBuilder& b, const LoweringContext& ctx, std::uint8_t s0, std::uint8_t s1,
                                 std::uint8_t s2) {
    b.emit(t64::addi(s1, s0, -static_cast<std::int64_t>(ctx.image_base)));
    b.emit(t64::alu_imm(Opcode::SHR, s2, s1, 31));
    b.emit(t64::bnez(s2, 0), CodeRef::stub(Stub::Dispatch));
    b.emit(t64::addi(s2, s1, -static_cast<std::int64_t>(ctx.image_size)));
    b.emit(t64::alu_imm(Opcode::SHR, s2, s2, 63));
    b.emit(t64::beqz(s2, 0), CodeRef::stub(Stub::Dispatch));
    b.emit(t64::xlate(s1, s0));
    b.emit(t64::br(s1));
  }

  // Push a constant return address. The store happens before RSP moves.
  void push_return(std::uint64_t address) {
    const auto rsp = ctx_.map.target_of(x86::Reg::RSP);
    emit(t64::addi(s1_, rsp, -8));
    emit(t64::ldi(s2_, static_cast<std::int64_t>(address)));
    emit(t64::store(8, s2_, s1_));
    emit(t64::movr(rsp, s1_));
  }

  // Leaves the condition in S0; returns true if "taken" means S0 != 0.
  bool condition(Mnemonic m) {
    const auto f = ctx_.map.flags;
    switch (m) {
      case Mnemonic::Jz: case Mnemonic::Jnz:
        emit(t64::alu_imm(Opcode::AND, s0_, f, 0x40));
        return m == Mnemonic::Jz;
      case Mnemonic::Jb: case Mnemonic::Jae:
        emit(t64::alu_imm(Opcode::AND, s0_, f, 0x1));
        return m == Mnemonic::Jb;
      default: {
        // SF != OF, optionally or'ed with ZF.
        emit(t64::alu_imm(Opcode::SHR, s0_, f, 7));
        emit(t64::alu_imm(Opcode::SHR, s2_, f, 11));
        emit(t64::alu(Opcode::XOR, s0_, s0_, s2_));
        if (m == Mnemonic::Jle || m == Mnemonic::Jg) {
          emit(t64::alu_imm(Opcode::SHR, s2_, f, 6));
          emit(t64::alu(Opcode::OR, s0_, s0_, s2_));
        }
        emit(t64::alu_imm(Opcode::AND, s0_, s0_, 1));
        return m == Mnemonic::Jl || m == Mnemonic::Jle;
      }
    }
  }

  std::uint8_t s0() const { return s0_; }

 private:
  const LoweringContext& ctx_;
  LoweredNode& node_;
  std::uint8_t s0_, s1_, s2_;
};

void lower_control(NodeBuilder& b, const DecodedInstruction& in, const LoweringContext& ctx) {
  const auto ret_addr = ctx.image_base + in.end();
  const auto rsp = ctx.map.target_of(x86::Reg::RSP);
  switch (in.mnemonic) {
    case Mnemonic::Jmp:
      if (in.op(0).is_reg()) {
        b.emit(t64::movr(b.s0(), ctx.map.target_of(in.op(0).reg)));
        b.indirect_jump();
      } else {
        b.go_to(x86::branch_target(in));
      }
      return;
    case Mnemonic::Call:
      if (in.op(0).is_reg()) {
        b.emit(t64::movr(b.s0(), ctx.map.target_of(in.op(0).reg)));
        b.push_return(ret_addr);
        b.indirect_jump();
      } else {
        b.push_return(ret_addr);
        b.go_to(x86::branch_target(in));
      }
      return;
    case Mnemonic::Ret:
      b.emit(t64::load(8, b.s0(), rsp));
      b.emit(t64::addi(rsp, rsp, 8));
      b.indirect_jump();
      return;
    case Mnemonic::Int3:
      b.emit(t64::trap(static_cast<std::int64_t>(TrapKind::Breakpoint)));
      return;
    default:
      break;
  }
  // Conditional branch.
  const bool taken_if_set = b.condition(in.mnemonic);
  const std::int64_t target = x86::branch_target(in);
  const auto fall = static_cast<std::int64_t>(in.end());
  if (b.in_image(target)) {
    b.emit(taken_if_set ? t64::bnez(b.s0(), 0) : t64::beqz(b.s0(), 0),
           CodeRef::offset(static_cast<std::size_t>(target)));
    b.go_to(fall);
    return;
  }
  const std::size_t skip = b.here();
  b.emit(taken_if_set ? t64::beqz(b.s0(), 0) : t64::bnez(b.s0(), 0));
  b.go_to(target);
  b.retarget(skip, CodeRef::local(b.here()));
  b.go_to(fall);
}

}  // namespace

LoweredNode lower_node(const cfg::Node& node, x86::FlagMask live, const LoweringContext& ctx) {
  LoweredNode out;
  out.offset = node.offset;
  NodeBuilder b(ctx, out);
  if (!node.valid()) {
    b.emit(t64::trap(static_cast<std::int64_t>(TrapKind::InvalidDecode)));
    out.tiles.push_back("TRAP_INVALID_DECODE");
    return out;
  }
  const DecodedInstruction& in = node.instruction();
  if (x86::is_control_flow(in.mnemonic)) {
    lower_control(b, in, ctx);
    return out;
  }
  const auto selection = tiles::lookup_tiles(ctx.bank, in, live, ctx.image_base);
  std::vector<TargetInstruction> code;
  tiles::instantiate(selection, code);
  for (const auto& ins : code) b.emit(ins);
  for (const auto* t : selection.tiles) out.tiles.push_back(t->name);
  if (node.fallthrough) {
    out.continues_at = node.fallthrough;
  } else {
    b.go_to(static_cast<std::int64_t>(in.end()));
  }
  return out;
}

std::vector<Chunk> layout(std::span<const LoweredNode> nodes, std::size_t entry) {
  const std::size_t n = nodes.size();
  std::vector<std::size_t> seeds;
  seeds.push_back(0);
  if (entry < n) seeds.push_back(entry);
  std::set<std::size_t> targets;
  for (const auto& node : nodes) {
    for (const auto& li : node.code) {
      if (li.target.kind == CodeRef::Kind::Offset) targets.insert(li.target.value);
    }
  }
  seeds.insert(seeds.end(), targets.begin(), targets.end());
  for (std::size_t o = 0; o < n; ++o) seeds.push_back(o);

  std::vector<bool> placed(n, false);
  std::vector<Chunk> chunks;
  for (std::size_t seed : seeds) {
    if (seed >= n || placed[seed]) continue;
    Chunk chunk;
    std::size_t cur = seed;
    for (;;) {
      placed[cur] = true;
      const std::size_t base = chunk.code.size();
      chunk.labels.emplace_back(cur, base);
      for (LoweredInstr li : nodes[cur].code) {
        if (li.target.kind == CodeRef::Kind::Local) li.target.value += base;
        chunk.code.push_back(li);
      }
      const auto next = nodes[cur].continues_at;
      if (!next) break;
      if (placed[*next]) {
        chunk.code.push_back(LoweredInstr{t64::branch(0), CodeRef::offset(*next)});
        break;
      }
      cur = *next;
    }
    chunks.push_back(std::move(chunk));
  }
  return chunks;
}

Linked link(const std::vector<Chunk>& chunks, const LoweringContext& ctx) {
  Linked out;
  out.table.assign(ctx.image_size, t64::kNoTranslation);
  std::vector<std::size_t> chunk_base;
  std::vector<LoweredInstr> code;
  for (const auto& chunk : chunks) {
    chunk_base.push_back(code.size());
    for (const auto& [off, idx] : chunk.labels) out.table[off] = static_cast<std::int64_t>(code.size() + idx);
    for (LoweredInstr li : chunk.code) {
      if (li.target.kind == CodeRef::Kind::Local) li.target.value += chunk_base.back();
      code.push_back(li);
    }
  }

  out.stub_begin = code.size();
  std::vector<std::size_t> stub_at(5, 0);
  LoweredNode stubs;
  NodeBuilder b(ctx, stubs);
  const auto s0 = ctx.map.scratch[0];
  const auto s1 = ctx.map.scratch[1];
  const auto s2 = ctx.map.scratch[2];
  const auto rsp = ctx.map.target_of(x86::Reg::RSP);
  const auto rdi = ctx.map.target_of(x86::Reg::RDI);
  const Stub hosts[] = {Stub::HostExit, Stub::HostWriteChar, Stub::HostWriteU64};

  stub_at[static_cast<std::size_t>(Stub::Dispatch)] = code.size() + b.here();
  for (int k = 0; k < 3; ++k) {
    b.emit(t64::addi(s1, s0, -static_cast<std::int64_t>(ctx.hostcall_base + 8 * static_cast<std::uint64_t>(k))));
    b.emit(t64::beqz(s1, 0), CodeRef::stub(hosts[k]));
  }
  b.emit(t64::trap(static_cast<std::int64_t>(TrapKind::UntranslatedTarget)));
  stub_at[static_cast<std::size_t>(Stub::HostExit)] = code.size() + b.here();
  b.emit(t64::host(0, rdi));
  for (int k = 1; k < 3; ++k) {
    // Output hostcalls return like a callee: pop the return address and jump.
    stub_at[static_cast<std::size_t>(hosts[k])] = code.size() + b.here();
    b.emit(t64::load(8, s0, rsp));
    b.emit(t64::addi(rsp, rsp, 8));
    b.emit(t64::host(k, rdi));
    b.emit(t64::branch(0), CodeRef::stub(Stub::Indirect));
  }
  stub_at[static_cast<std::size_t>(Stub::Indirect)] = code.size() + b.here();
  NodeBuilder::emit_indirect_core(b, ctx, s0, s1, s2);
  code.insert(code.end(), stubs.code.begin(), stubs.code.end());

  out.code.reserve(code.size());
  for (const auto& li : code) {
    TargetInstruction ins = li.ins;
    switch (li.target.kind) {
      case CodeRef::Kind::None: break;
      case CodeRef::Kind::Offset: {
        const auto t = out.table.at(li.target.value);
        if (t < 0) throw std::logic_error(fmt::format("offset {:#x} was never placed", li.target.value));
        ins.imm = t;
        break;
      }
      case CodeRef::Kind::Stub: ins.imm = static_cast<std::int64_t>(stub_at[li.target.value]); break;
      case CodeRef::Kind::Local: ins.imm = static_cast<std::int64_t>(li.target.value); break;
    }
    out.code.push_back(ins);
  }
  return out;
}

Translation translate(std::span<const std::uint8_t> image, std::size_t entry, TranslateOptions options) {
  Translation out;
  out.cfg = cfg::build_superset_cfg(image);
  const tiles::TileBank& bank = tiles::default_tile_bank();
  const LoweringContext ctx{kImageBase, kHostcallBase, image.size(), bank, tiles::default_register_map()};

  out.nodes.reserve(image.size());
  for (const auto& node : out.cfg.nodes) {
    const auto live = options.prune_flags ? node.live_flags : x86::FlagMask::all();
    out.nodes.push_back(lower_node(node, live, ctx));
  }
  const auto chunks = layout(out.nodes, entry);
  Linked linked = link(chunks, ctx);

  std::size_t attributed = 0;
  for (const auto& n : out.nodes) attributed += n.code.size();
  out.overhead_instructions = linked.code.size() - attributed;

  out.image.image_base = ctx.image_base;
  out.image.entry = entry;
  out.image.hostcall_base = ctx.hostcall_base;
  out.image.source_image.assign(image.begin(), image.end());
  out.image.table = std::move(linked.table);
  out.image.code = std::move(linked.code);
  return out;
}

t64::TranslatedImage translate_image(std::span<const std::uint8_t> image, std::size_t entry,
                                     TranslateOptions options) {
  return translate(image, entry, options).image;
}

}  // namespace supertile::translate
