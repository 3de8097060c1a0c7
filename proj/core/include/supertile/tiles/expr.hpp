#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "supertile/t64/isa.hpp"
#include "supertile/tiles/register_map.hpp"
#include "supertile/x86/registers.hpp"

namespace supertile::tiles {

// A storage location named by a template. Param slots are positional
// (R1, R2, ...) and disappear during specialization.
struct Slot {
  enum class Kind : std::uint8_t { Param, Gpr, Scratch, Flags };

  Kind kind = Kind::Param;
  std::uint8_t index = 0;

  static Slot param(int i) { return {Kind::Param, static_cast<std::uint8_t>(i)}; }
  static Slot gpr(x86::Reg r) { return {Kind::Gpr, static_cast<std::uint8_t>(x86::index_of(r))}; }
  static Slot scratch(int i) { return {Kind::Scratch, static_cast<std::uint8_t>(i)}; }
  static Slot flag_reg() { return {Kind::Flags, 0}; }

  bool operator==(const Slot&) const = default;
};

// Values known only when a tile is placed: an instruction immediate, a
// memory displacement, or the absolute target of a rip-relative operand.
enum class Hole : std::uint8_t { None, Imm, Disp, RipTarget };

struct ExprNode;

// Pure 64-bit expression over slots, constants and holes.
class Expr {
 public:
  enum class Op : std::uint8_t { Slot, Const, Hole, Add, Sub, And, Or, Xor, Shl, Shr, Not, Parity };

  Expr(std::int64_t constant);  // NOLINT(google-explicit-constructor)
  Expr(Slot slot);              // NOLINT(google-explicit-constructor)
  static Expr hole(Hole h);
  static Expr parity(const Expr& x);  // 1 when the low byte has even parity
  static Expr from(std::shared_ptr<const ExprNode> node) { return Expr(std::move(node)); }

  const ExprNode& node() const { return *node_; }
  const std::shared_ptr<const ExprNode>& ptr() const { return node_; }

  friend Expr operator+(const Expr& a, const Expr& b);
  friend Expr operator-(const Expr& a, const Expr& b);
  friend Expr operator&(const Expr& a, const Expr& b);
  friend Expr operator|(const Expr& a, const Expr& b);
  friend Expr operator^(const Expr& a, const Expr& b);
  friend Expr operator<<(const Expr& a, int amount);
  friend Expr operator>>(const Expr& a, int amount);
  friend Expr operator~(const Expr& a);

 private:
  explicit Expr(std::shared_ptr<const ExprNode> node) : node_(std::move(node)) {}
  static Expr binary(Op op, const Expr& a, const Expr& b);

  std::shared_ptr<const ExprNode> node_;
};

struct ExprNode {
  Expr::Op op = Expr::Op::Const;
  Slot slot;
  std::int64_t value = 0;
  Hole hole = Hole::None;
  std::shared_ptr<const ExprNode> lhs, rhs;
};

struct Stmt {
  enum class Kind : std::uint8_t { Set, Load, Store, Raw };

  Kind kind = Kind::Set;
  Slot dst;     // Set, Load
  Slot src;     // Store: value to write
  Slot addr;    // Load, Store: address register
  int bytes = 8;
  Expr value = Expr(std::int64_t{0});
  t64::TargetInstruction raw;
};

Stmt set(Slot dst, Expr value);
Stmt load(int bytes, Slot dst, Slot addr);
Stmt store(int bytes, Slot src, Slot addr);
Stmt raw(const t64::TargetInstruction& in);

// Semantics plus a name pattern such as "ADD64_R1_R1_R2"; R<n> tokens are
// replaced by the binding names of the specialized operands.
struct TileTemplate {
  std::string pattern;
  int arity = 0;
  std::vector<Stmt> body;
};

// What a positional parameter is specialized to.
struct Binding {
  enum class Kind : std::uint8_t { Gpr, S1, Imm };

  Kind kind = Kind::Gpr;
  x86::Reg reg = x86::Reg::RAX;

  static Binding gpr(x86::Reg r) { return {Kind::Gpr, r}; }
  static Binding s1() { return {Kind::S1, x86::Reg::RAX}; }
  static Binding imm() { return {Kind::Imm, x86::Reg::RAX}; }

  std::string name() const;
  bool operator==(const Binding&) const = default;
};

struct TileInstr {
  t64::TargetInstruction ins;
  Hole hole = Hole::None;  // added to ins.imm at placement

  bool operator==(const TileInstr&) const = default;
};

class TileCompileError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

std::string specialized_name(const TileTemplate& tmpl, const std::vector<Binding>& bindings);

// Substitute the bindings and compile to target code. Throws
// TileCompileError when the expression needs more temporaries than the
// register map provides.
std::vector<TileInstr> compile(const TileTemplate& tmpl, const std::vector<Binding>& bindings,
                               const RegisterMap& map);

}  // namespace supertile::tiles
