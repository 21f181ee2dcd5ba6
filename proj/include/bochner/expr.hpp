#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace bochner::sym {

enum class Kind : std::uint8_t {
    Constant,
    Variable,
    Add,
    Sub,
    Neg,
    Mul,
    Div,
    Pow,   // integer exponent
    Sin,
    Cos,
    Sqrt,
    Exp,
};

class ExprNode;
using NodeRef = const ExprNode*;

/// Immutable, hash-consed symbolic expression over named real variables.
/// Structurally equal expressions share the same node, so identity
/// comparison (`same`) is structural equality.
class Expr {
public:
    Expr();  // the constant 0

    static Expr constant(double v);
    static Expr variable(const std::string& name);

    Kind kind() const;
    double constant_value() const;      // Constant only
    const std::string& var_name() const;  // Variable only
    int exponent() const;               // Pow only
    int arity() const;
    Expr child(int i) const;

    /// Interner sequence number; equal iff structurally equal.
    std::uint64_t id() const;
    bool same(const Expr& o) const { return node_ == o.node_; }

    bool is_constant() const;
    bool is_constant(double v) const;
    bool is_zero() const { return is_constant(0.0); }
    bool is_one() const { return is_constant(1.0); }

    std::string str() const;
    double eval(const class Env& env) const;
    Expr diff(const std::string& var) const;
    Expr simplified() const;

    /// Number of distinct nodes reachable from this root (DAG size).
    std::size_t node_count() const;
    int depth() const;
    void free_variables(std::set<std::string>& out) const;
    bool depends_on(const std::string& var) const;

    NodeRef node() const { return node_; }
    explicit Expr(NodeRef n) : node_(n) {}

private:
    NodeRef node_;
};

// Smart constructors: fold constants and the trivial 0/1 identities at
// build time so operator pipelines don't drown in dead terms.
Expr add(Expr a, Expr b);
Expr sub(Expr a, Expr b);
Expr neg(Expr a);
Expr mul(Expr a, Expr b);
Expr div(Expr a, Expr b);
Expr pow(Expr a, int k);
Expr sin(Expr a);
Expr cos(Expr a);
Expr sqrt(Expr a);
Expr exp(Expr a);

inline Expr operator+(Expr a, Expr b) { return add(a, b); }
inline Expr operator-(Expr a, Expr b) { return sub(a, b); }
inline Expr operator-(Expr a) { return neg(a); }
inline Expr operator*(Expr a, Expr b) { return mul(a, b); }
inline Expr operator/(Expr a, Expr b) { return div(a, b); }
inline Expr operator+(Expr a, double b) { return add(a, Expr::constant(b)); }
inline Expr operator+(double a, Expr b) { return add(Expr::constant(a), b); }
inline Expr operator-(Expr a, double b) { return sub(a, Expr::constant(b)); }
inline Expr operator-(double a, Expr b) { return sub(Expr::constant(a), b); }
inline Expr operator*(Expr a, double b) { return mul(a, Expr::constant(b)); }
inline Expr operator*(double a, Expr b) { return mul(Expr::constant(a), b); }
inline Expr operator/(Expr a, double b) { return div(a, Expr::constant(b)); }
inline Expr operator/(double a, Expr b) { return div(Expr::constant(a), b); }

/// Variable bindings for evaluation. Lookup of an unbound name throws.
class Env {
public:
    Env() = default;
    Env(std::initializer_list<std::pair<const std::string, double>> init) : vals_(init) {}
    void bind(const std::string& name, double v) { vals_[name] = v; }
    double lookup(const std::string& name) const;
    bool has(const std::string& name) const { return vals_.count(name) != 0; }

private:
    std::map<std::string, double> vals_;
};

struct ParseError : std::runtime_error {
    ParseError(const std::string& msg, std::size_t off)
        : std::runtime_error(msg + " at offset " + std::to_string(off)), offset(off) {}
    std::size_t offset;
};

struct EvalError : std::runtime_error {
    EvalError(const std::string& msg, Expr where)
        : std::runtime_error(msg + " in `" + where.str() + "`"), subtree(where) {}
    Expr subtree;
};

/// Parse the documented infix grammar (see docs/grammar.md).
Expr parse(const std::string& src);

Expr simplify(Expr e);
Expr diff(Expr e, const std::string& var);

/// Replace variables by expressions (simultaneous substitution).
Expr substitute(Expr e, const std::map<std::string, Expr>& bindings);

/// Batch variants sharing one memo table across the whole component set;
/// much faster than per-expression calls when components share subtrees.
std::vector<Expr> simplify_all(std::vector<Expr> es);
std::vector<Expr> diff_all(const std::vector<Expr>& es, const std::string& var);

/// Compiled straight-line form of a set of expressions sharing one
/// variable ordering. Hash-consed subtrees are emitted once. Evaluation
/// follows IEEE semantics (no domain-error throwing on the hot path);
/// unbound variables are rejected at compile time.
class Program {
public:
    enum class Op : std::uint8_t { Const, Add, Sub, Neg, Mul, Div, PowI, Sin, Cos, Sqrt, Exp };

    struct Instr {
        Op op;
        std::uint32_t out, a, b;
        double imm;  // Const value or PowI exponent
    };

    Program() = default;
    static Program compile(const std::vector<Expr>& roots, const std::vector<std::string>& vars);

    std::size_t op_count() const { return code_.size(); }
    std::size_t slot_count() const { return nslots_; }
    std::size_t output_count() const { return outputs_.size(); }
    std::size_t input_count() const { return nvars_; }

    /// scratch must have at least slot_count() entries; out at least output_count().
    /// Works for any scalar type providing +,-,*,/ plus ADL-found sin, cos,
    /// sqrt, exp, powi(x,int) and constant_like(proto,double); requires at
    /// least one input variable for non-double types.
    template <typename T>
    void eval(const T* vars, T* scratch, T* out) const;

    void eval_double(const double* vars, double* scratch, double* out) const;

    static constexpr std::size_t kBatch = 8;
    /// Evaluate kBatch points at once. Lane-major layout: vars[v*kBatch + lane],
    /// out[o*kBatch + lane]; scratch needs slot_count()*kBatch entries.
    /// Substantially faster than per-point calls on large tapes.
    void eval_batch(const double* vars, double* scratch, double* out) const;

private:
    std::vector<Instr> code_;
    std::vector<std::uint32_t> outputs_;
    std::uint32_t nslots_ = 0;
    std::uint32_t nvars_ = 0;
};

inline double constant_like(const double&, double v) { return v; }

inline double powi(double x, int k) {
    if (k < 0) return 1.0 / powi(x, -k);
    double r = 1.0, b = x;
    while (k) {
        if (k & 1) r *= b;
        b *= b;
        k >>= 1;
    }
    return r;
}

template <typename T>
void Program::eval(const T* vars, T* scratch, T* out) const {
    using std::cos;
    using std::exp;
    using std::sin;
    using std::sqrt;
    for (std::uint32_t i = 0; i < nvars_; ++i) scratch[i] = vars[i];
    const T& proto = scratch[0];
    for (const Instr& ins : code_) {
        switch (ins.op) {
            case Op::Const: scratch[ins.out] = constant_like(proto, ins.imm); break;
            case Op::Add: scratch[ins.out] = scratch[ins.a] + scratch[ins.b]; break;
            case Op::Sub: scratch[ins.out] = scratch[ins.a] - scratch[ins.b]; break;
            case Op::Neg: scratch[ins.out] = -scratch[ins.a]; break;
            case Op::Mul: scratch[ins.out] = scratch[ins.a] * scratch[ins.b]; break;
            case Op::Div: scratch[ins.out] = scratch[ins.a] / scratch[ins.b]; break;
            case Op::PowI: scratch[ins.out] = powi(scratch[ins.a], static_cast<int>(ins.imm)); break;
            case Op::Sin: scratch[ins.out] = sin(scratch[ins.a]); break;
            case Op::Cos: scratch[ins.out] = cos(scratch[ins.a]); break;
            case Op::Sqrt: scratch[ins.out] = sqrt(scratch[ins.a]); break;
            case Op::Exp: scratch[ins.out] = exp(scratch[ins.a]); break;
        }
    }
    for (std::size_t i = 0; i < outputs_.size(); ++i) out[i] = scratch[outputs_[i]];
}

}  // namespace bochner::sym
