#include "supertile/tiles/expr.hpp"

#include <algorithm>
#include <optional>

namespace supertile::tiles {

using t64::Opcode;
using t64::TargetInstruction;
using Op = Expr::Op;

Expr::Expr(std::int64_t constant) {
  auto n = std::make_shared<ExprNode>();
  n->op = Op::Const;
  n->value = constant;
  node_ = std::move(n);
}

Expr::Expr(Slot slot) {
  auto n = std::make_shared<ExprNode>();
  n->op = Op::Slot;
  n->slot = slot;
  node_ = std::move(n);
}

Expr Expr::hole(Hole h) {
  auto n = std::make_shared<ExprNode>();
  n->op = Op::Hole;
  n->hole = h;
  return Expr(std::move(n));
}

Expr Expr::parity(const Expr& x) {
  auto n = std::make_shared<ExprNode>();
  n->op = Op::Parity;
  n->lhs = x.node_;
  return Expr(std::move(n));
}

Expr Expr::binary(Op op, const Expr& a, const Expr& b) {
  auto n = std::make_shared<ExprNode>();
  n->op = op;
  n->lhs = a.node_;
  n->rhs = b.node_;
  return Expr(std::move(n));
}

Expr operator+(const Expr& a, const Expr& b) { return Expr::binary(Op::Add, a, b); }
Expr operator-(const Expr& a, const Expr& b) { return Expr::binary(Op::Sub, a, b); }
Expr operator&(const Expr& a, const Expr& b) { return Expr::binary(Op::And, a, b); }
Expr operator|(const Expr& a, const Expr& b) { return Expr::binary(Op::Or, a, b); }
Expr operator^(const Expr& a, const Expr& b) { return Expr::binary(Op::Xor, a, b); }
Expr operator<<(const Expr& a, int amount) { return Expr::binary(Op::Shl, a, Expr(std::int64_t{amount})); }
Expr operator>>(const Expr& a, int amount) { return Expr::binary(Op::Shr, a, Expr(std::int64_t{amount})); }
Expr operator~(const Expr& a) {
  auto n = std::make_shared<ExprNode>();
  n->op = Op::Not;
  n->lhs = a.node_;
  return Expr(std::move(n));
}

Stmt set(Slot dst, Expr value) {
  Stmt s;
  s.kind = Stmt::Kind::Set;
  s.dst = dst;
  s.value = std::move(value);
  return s;
}

Stmt load(int bytes, Slot dst, Slot addr) {
  Stmt s;
  s.kind = Stmt::Kind::Load;
  s.bytes = bytes;
  s.dst = dst;
  s.addr = addr;
  return s;
}

Stmt store(int bytes, Slot src, Slot addr) {
  Stmt s;
  s.kind = Stmt::Kind::Store;
  s.bytes = bytes;
  s.src = src;
  s.addr = addr;
  return s;
}

Stmt raw(const TargetInstruction& in) {
  Stmt s;
  s.kind = Stmt::Kind::Raw;
  s.raw = in;
  return s;
}

std::string Binding::name() const {
  switch (kind) {
    case Kind::Gpr: return std::string(x86::upper_name(reg));
    case Kind::S1: return "S1";
    case Kind::Imm: return "IMM";
  }
  return "?";
}

std::string specialized_name(const TileTemplate& tmpl, const std::vector<Binding>& bindings) {
  std::string out;
  std::size_t pos = 0;
  while (pos <= tmpl.pattern.size()) {
    auto us = tmpl.pattern.find('_', pos);
    if (us == std::string::npos) us = tmpl.pattern.size();
    const std::string token = tmpl.pattern.substr(pos, us - pos);
    if (!out.empty()) out += '_';
    if (token.size() == 2 && token[0] == 'R' && token[1] >= '1' && token[1] <= '9') {
      out += bindings.at(static_cast<std::size_t>(token[1] - '1')).name();
    } else {
      out += token;
    }
    pos = us + 1;
  }
  return out;
}

namespace {

using NodePtr = std::shared_ptr<const ExprNode>;

Slot bind_slot(Slot s, const std::vector<Binding>& bindings) {
  if (s.kind != Slot::Kind::Param) return s;
  const Binding& b = bindings.at(s.index);
  switch (b.kind) {
    case Binding::Kind::Gpr: return Slot::gpr(b.reg);
    case Binding::Kind::S1: return Slot::scratch(1);
    case Binding::Kind::Imm: break;
  }
  throw TileCompileError("an immediate cannot be a storage location");
}

NodePtr substitute(const NodePtr& n, const std::vector<Binding>& bindings) {
  if (n->op == Op::Slot) {
    if (n->slot.kind == Slot::Kind::Param && bindings.at(n->slot.index).kind == Binding::Kind::Imm) {
      auto h = std::make_shared<ExprNode>();
      h->op = Op::Hole;
      h->hole = Hole::Imm;
      return h;
    }
    auto out = std::make_shared<ExprNode>(*n);
    out->slot = bind_slot(n->slot, bindings);
    return out;
  }
  if (!n->lhs) return n;
  auto out = std::make_shared<ExprNode>(*n);
  out->lhs = substitute(n->lhs, bindings);
  if (n->rhs) out->rhs = substitute(n->rhs, bindings);
  return out;
}

void collect_scratch(const ExprNode& n, std::vector<int>& out) {
  if (n.op == Op::Slot && n.slot.kind == Slot::Kind::Scratch) out.push_back(n.slot.index);
  if (n.lhs) collect_scratch(*n.lhs, out);
  if (n.rhs) collect_scratch(*n.rhs, out);
}

bool commutative(Op op) { return op == Op::Add || op == Op::And || op == Op::Or || op == Op::Xor; }

Opcode opcode_for(Op op) {
  switch (op) {
    case Op::Add: return Opcode::ADD;
    case Op::Sub: return Opcode::SUB;
    case Op::And: return Opcode::AND;
    case Op::Or: return Opcode::OR;
    case Op::Xor: return Opcode::XOR;
    case Op::Shl: return Opcode::SHL;
    default: return Opcode::SHR;
  }
}

// Code generation in Sethi-Ullman order. Leaves and (register + constant)
// fold into the second ALU operand, which is computed as regs[rm] + imm.
class Compiler {
 public:
  Compiler(const RegisterMap& map, std::vector<TargetReg> pool) : map_(map), pool_(std::move(pool)) {}

  void statement(const Stmt& s) {
    switch (s.kind) {
      case Stmt::Kind::Set: set(reg(s.dst), s.value.node()); break;
      case Stmt::Kind::Load: emit(t64::load(s.bytes, reg(s.dst), reg(s.addr))); break;
      case Stmt::Kind::Store: emit(t64::store(s.bytes, reg(s.src), reg(s.addr))); break;
      case Stmt::Kind::Raw: emit(s.raw); break;
    }
  }

  std::vector<TileInstr> take() { return std::move(out_); }

 private:
  struct Operand2 {
    TargetReg rm = t64::kZeroReg;
    std::int64_t imm = 0;
    Hole hole = Hole::None;
  };

  TargetReg reg(Slot s) const {
    switch (s.kind) {
      case Slot::Kind::Gpr: return map_.gpr[s.index];
      case Slot::Kind::Scratch: return map_.scratch[s.index];
      case Slot::Kind::Flags: return map_.flags;
      case Slot::Kind::Param: break;
    }
    throw TileCompileError("unbound template parameter");
  }

  std::optional<TargetReg> as_reg(const ExprNode& n) const {
    if (n.op == Op::Slot) return reg(n.slot);
    if (n.op == Op::Const && n.value == 0) return t64::kZeroReg;
    return std::nullopt;
  }

  std::optional<Operand2> as_op2(const ExprNode& n) const {
    switch (n.op) {
      case Op::Slot: return Operand2{reg(n.slot), 0, Hole::None};
      case Op::Const: return Operand2{t64::kZeroReg, n.value, Hole::None};
      case Op::Hole: return Operand2{t64::kZeroReg, 0, n.hole};
      case Op::Add:
        if (n.lhs->op == Op::Slot && (n.rhs->op == Op::Const || n.rhs->op == Op::Hole)) {
          return Operand2{reg(n.lhs->slot), n.rhs->op == Op::Const ? n.rhs->value : 0, n.rhs->hole};
        }
        return std::nullopt;
      default: return std::nullopt;
    }
  }

  bool reads(const ExprNode& n, TargetReg r) const {
    if (n.op == Op::Slot) return reg(n.slot) == r;
    return (n.lhs && reads(*n.lhs, r)) || (n.rhs && reads(*n.rhs, r));
  }

  int need(const ExprNode& n) const {
    switch (n.op) {
      case Op::Slot: case Op::Const: case Op::Hole: return 1;
      case Op::Not: return need(*n.lhs);
      case Op::Parity: return std::max(need(*n.lhs), 2);
      default: break;
    }
    const ExprNode& l = *n.lhs;
    const ExprNode& r = *n.rhs;
    if (as_op2(r)) {
      if (as_reg(l)) return 1;
      if (commutative(n.op) && as_op2(l) && as_reg(r)) return 1;
      return need(l);
    }
    if (commutative(n.op) && as_op2(l)) return need(r);
    if (as_reg(l)) return need(r);
    const int nl = need(l), nr = need(r);
    return nl == nr ? nl + 1 : std::max(nl, nr);
  }

  void emit(const TargetInstruction& in, Hole hole = Hole::None) { out_.push_back(TileInstr{in, hole}); }

  void emit_op(Op op, TargetReg rd, TargetReg rn, const Operand2& o2) {
    emit(t64::alu(opcode_for(op), rd, rn, o2.rm, o2.imm), o2.hole);
  }

  TargetReg alloc() {
    if (pool_.empty()) throw TileCompileError("out of scratch registers");
    const TargetReg r = pool_.back();
    pool_.pop_back();
    return r;
  }
  void release(TargetReg r) { pool_.push_back(r); }

  void gen(const ExprNode& n, TargetReg t) {
    switch (n.op) {
      case Op::Slot: emit(t64::movr(t, reg(n.slot))); return;
      case Op::Const: emit(t64::ldi(t, n.value)); return;
      case Op::Hole: emit(t64::ldi(t, 0), n.hole); return;
      case Op::Not:
        if (auto r = as_reg(*n.lhs)) {
          emit(t64::not_(t, *r));
        } else {
          gen(*n.lhs, t);
          emit(t64::not_(t, t));
        }
        return;
      case Op::Parity: {
        if (auto r = as_reg(*n.lhs)) {
          emit(t64::alu_imm(Opcode::AND, t, *r, 0xFF));
        } else {
          gen(*n.lhs, t);
          emit(t64::alu_imm(Opcode::AND, t, t, 0xFF));
        }
        const TargetReg u = alloc();
        for (int shift : {4, 2, 1}) {
          emit(t64::alu_imm(Opcode::SHR, u, t, shift));
          emit(t64::alu(Opcode::XOR, t, t, u));
        }
        emit(t64::alu_imm(Opcode::AND, t, t, 1));
        emit(t64::alu_imm(Opcode::XOR, t, t, 1));
        release(u);
        return;
      }
      default: break;
    }
    const ExprNode& l = *n.lhs;
    const ExprNode& r = *n.rhs;
    if (auto o = as_op2(r)) {
      if (auto lr = as_reg(l)) {
        emit_op(n.op, t, *lr, *o);
      } else if (commutative(n.op) && as_op2(l) && as_reg(r)) {
        emit_op(n.op, t, *as_reg(r), *as_op2(l));
      } else {
        gen(l, t);
        emit_op(n.op, t, t, *o);
      }
      return;
    }
    if (commutative(n.op)) {
      if (auto o = as_op2(l)) {
        gen(r, t);
        emit_op(n.op, t, t, *o);
        return;
      }
    }
    if (auto lr = as_reg(l)) {
      gen(r, t);
      emit_op(n.op, t, *lr, Operand2{t, 0, Hole::None});
      return;
    }
    const TargetReg u = alloc();
    if (need(r) > need(l)) {
      gen(r, t);
      gen(l, u);
      emit_op(n.op, t, u, Operand2{t, 0, Hole::None});
    } else {
      gen(l, t);
      gen(r, u);
      emit_op(n.op, t, t, Operand2{u, 0, Hole::None});
    }
    release(u);
  }

  void set(TargetReg d, const ExprNode& e) {
    if (!reads(e, d)) {
      gen(e, d);
      return;
    }
    const bool accumulate = e.lhs && e.rhs && e.op != Op::Parity && e.lhs->op == Op::Slot &&
                            reg(e.lhs->slot) == d && !reads(*e.rhs, d);
    if (accumulate) {
      if (auto o = as_op2(*e.rhs)) {
        emit_op(e.op, d, d, *o);
      } else {
        const TargetReg u = alloc();
        gen(*e.rhs, u);
        emit_op(e.op, d, d, Operand2{u, 0, Hole::None});
        release(u);
      }
      return;
    }
    const TargetReg u = alloc();
    gen(e, u);
    out_.back().ins.rd = d;  // the last instruction produced u; retarget it
    release(u);
  }

  const RegisterMap& map_;
  std::vector<TargetReg> pool_;
  std::vector<TileInstr> out_;
};

}  // namespace

std::vector<TileInstr> compile(const TileTemplate& tmpl, const std::vector<Binding>& bindings,
                               const RegisterMap& map) {
  if (bindings.size() != static_cast<std::size_t>(tmpl.arity)) throw TileCompileError("wrong number of bindings");
  std::vector<Stmt> body;
  std::vector<int> named;
  for (const Stmt& s : tmpl.body) {
    Stmt c = s;
    if (s.kind == Stmt::Kind::Set || s.kind == Stmt::Kind::Load) c.dst = bind_slot(s.dst, bindings);
    if (s.kind == Stmt::Kind::Store) c.src = bind_slot(s.src, bindings);
    if (s.kind == Stmt::Kind::Load || s.kind == Stmt::Kind::Store) c.addr = bind_slot(s.addr, bindings);
    if (s.kind == Stmt::Kind::Set) c.value = Expr::from(substitute(s.value.ptr(), bindings));
    for (Slot slot : {c.dst, c.src, c.addr}) {
      if (slot.kind == Slot::Kind::Scratch) named.push_back(slot.index);
    }
    if (c.kind == Stmt::Kind::Set) collect_scratch(c.value.node(), named);
    body.push_back(std::move(c));
  }
  // S1 is reserved for memory operand values and never used as a temporary.
  std::vector<TargetReg> pool;
  for (int i : {2, 0}) {
    if (std::find(named.begin(), named.end(), i) == named.end()) pool.push_back(map.scratch[static_cast<std::size_t>(i)]);
  }
  Compiler compiler(map, pool);
  for (const Stmt& s : body) compiler.statement(s);
  return compiler.take();
}

}  // namespace supertile::tiles
