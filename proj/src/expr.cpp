#include "bochner/expr.hpp"

#include <algorithm>
#include <bit>
#include <cassert>
#include <charconv>
#include <cmath>
#include <cstring>
#include <deque>
#include <mutex>
#include <unordered_map>
#include <unordered_set>

namespace bochner::sym {

class ExprNode {
public:
    Kind kind;
    int ipow = 0;
    double value = 0.0;
    std::string name;
    NodeRef a = nullptr;
    NodeRef b = nullptr;
    std::uint64_t id = 0;
};

namespace {

int arity_of(Kind k) {
    switch (k) {
        case Kind::Constant:
        case Kind::Variable: return 0;
        case Kind::Neg:
        case Kind::Pow:
        case Kind::Sin:
        case Kind::Cos:
        case Kind::Sqrt:
        case Kind::Exp: return 1;
        default: return 2;
    }
}

struct NodeKey {
    Kind kind;
    int ipow;
    std::uint64_t value_bits;
    const std::string* name;  // points into candidate or stored node
    NodeRef a;
    NodeRef b;

    bool operator==(const NodeKey& o) const {
        return kind == o.kind && ipow == o.ipow && value_bits == o.value_bits && a == o.a &&
               b == o.b && (name == o.name || (name && o.name && *name == *o.name));
    }
};

struct NodeKeyHash {
    std::size_t operator()(const NodeKey& k) const {
        std::size_t h = std::hash<int>()(static_cast<int>(k.kind));
        auto mix = [&h](std::size_t v) { h ^= v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2); };
        mix(std::hash<int>()(k.ipow));
        mix(std::hash<std::uint64_t>()(k.value_bits));
        if (k.name) mix(std::hash<std::string>()(*k.name));
        mix(std::hash<const void*>()(k.a));
        mix(std::hash<const void*>()(k.b));
        return h;
    }
};

// Global hash-consing table. Nodes live for the program lifetime; insert-or-get
// is the only mutating operation and is guarded by a mutex so expressions can
// be built from several threads.
class Interner {
public:
    static Interner& instance() {
        static Interner it;
        return it;
    }

    NodeRef get(Kind kind, int ipow, double value, const std::string& name, NodeRef a, NodeRef b) {
        NodeKey key{kind, ipow, std::bit_cast<std::uint64_t>(value),
                    kind == Kind::Variable ? &name : nullptr, a, b};
        std::lock_guard<std::mutex> lock(mu_);
        auto it = table_.find(key);
        if (it != table_.end()) return it->second;
        nodes_.emplace_back();
        ExprNode& n = nodes_.back();
        n.kind = kind;
        n.ipow = ipow;
        n.value = value;
        n.name = name;
        n.a = a;
        n.b = b;
        n.id = next_id_++;
        NodeKey stored{kind, ipow, key.value_bits, kind == Kind::Variable ? &n.name : nullptr, a, b};
        table_.emplace(stored, &n);
        return &n;
    }

private:
    std::mutex mu_;
    std::deque<ExprNode> nodes_;
    std::unordered_map<NodeKey, NodeRef, NodeKeyHash> table_;
    std::uint64_t next_id_ = 0;
};

NodeRef intern(Kind k, int ipow, double value, const std::string& name, NodeRef a, NodeRef b) {
    return Interner::instance().get(k, ipow, value, name, a, b);
}

const std::string kEmpty;

}  // namespace

Expr::Expr() : node_(intern(Kind::Constant, 0, 0.0, kEmpty, nullptr, nullptr)) {}

Expr Expr::constant(double v) {
    if (std::isnan(v)) throw std::invalid_argument("Expr::constant: NaN");
    if (v == 0.0) v = 0.0;  // collapse -0
    return Expr(intern(Kind::Constant, 0, v, kEmpty, nullptr, nullptr));
}

Expr Expr::variable(const std::string& name) {
    assert(!name.empty());
    return Expr(intern(Kind::Variable, 0, 0.0, name, nullptr, nullptr));
}

Kind Expr::kind() const { return node_->kind; }
double Expr::constant_value() const {
    assert(kind() == Kind::Constant);
    return node_->value;
}
const std::string& Expr::var_name() const {
    assert(kind() == Kind::Variable);
    return node_->name;
}
int Expr::exponent() const {
    assert(kind() == Kind::Pow);
    return node_->ipow;
}
int Expr::arity() const { return arity_of(node_->kind); }
Expr Expr::child(int i) const {
    assert(i >= 0 && i < arity());
    return Expr(i == 0 ? node_->a : node_->b);
}
std::uint64_t Expr::id() const { return node_->id; }
bool Expr::is_constant() const { return kind() == Kind::Constant; }
bool Expr::is_constant(double v) const { return is_constant() && node_->value == v; }

// ---------------------------------------------------------------------------
// smart constructors

namespace {
Expr make1(Kind k, Expr a, int ipow = 0) {
    return Expr(intern(k, ipow, 0.0, kEmpty, a.node(), nullptr));
}
Expr make2(Kind k, Expr a, Expr b) { return Expr(intern(k, 0, 0.0, kEmpty, a.node(), b.node())); }
}  // namespace

Expr add(Expr a, Expr b) {
    if (a.is_constant() && b.is_constant()) return Expr::constant(a.constant_value() + b.constant_value());
    if (a.is_zero()) return b;
    if (b.is_zero()) return a;
    return make2(Kind::Add, a, b);
}

Expr sub(Expr a, Expr b) {
    if (a.same(b)) return Expr::constant(0.0);
    if (a.is_constant() && b.is_constant()) return Expr::constant(a.constant_value() - b.constant_value());
    if (b.is_zero()) return a;
    if (a.is_zero()) return neg(b);
    return make2(Kind::Sub, a, b);
}

Expr neg(Expr a) {
    if (a.is_constant()) return Expr::constant(-a.constant_value());
    if (a.kind() == Kind::Neg) return a.child(0);
    return make1(Kind::Neg, a);
}

Expr mul(Expr a, Expr b) {
    if (a.is_constant() && b.is_constant()) return Expr::constant(a.constant_value() * b.constant_value());
    if (a.is_zero() || b.is_zero()) return Expr::constant(0.0);
    if (a.is_one()) return b;
    if (b.is_one()) return a;
    if (a.is_constant(-1.0)) return neg(b);
    if (b.is_constant(-1.0)) return neg(a);
    return make2(Kind::Mul, a, b);
}

Expr div(Expr a, Expr b) {
    if (b.is_constant() && b.constant_value() != 0.0) {
        if (a.is_constant()) return Expr::constant(a.constant_value() / b.constant_value());
        if (b.is_one()) return a;
        if (b.is_constant(-1.0)) return neg(a);
    }
    if (a.is_zero() && !b.is_zero()) return Expr::constant(0.0);
    if (a.same(b) && !a.is_constant()) return Expr::constant(1.0);
    return make2(Kind::Div, a, b);
}

Expr pow(Expr a, int k) {
    if (k == 0) return Expr::constant(1.0);
    if (k == 1) return a;
    if (a.is_constant()) return Expr::constant(std::pow(a.constant_value(), k));
    return make1(Kind::Pow, a, k);
}

Expr sin(Expr a) {
    if (a.is_constant()) return Expr::constant(std::sin(a.constant_value()));
    return make1(Kind::Sin, a);
}
Expr cos(Expr a) {
    if (a.is_constant()) return Expr::constant(std::cos(a.constant_value()));
    return make1(Kind::Cos, a);
}
Expr sqrt(Expr a) {
    if (a.is_constant() && a.constant_value() >= 0.0) return Expr::constant(std::sqrt(a.constant_value()));
    return make1(Kind::Sqrt, a);
}
Expr exp(Expr a) {
    if (a.is_constant()) return Expr::constant(std::exp(a.constant_value()));
    return make1(Kind::Exp, a);
}

// ---------------------------------------------------------------------------
// traversal helpers

namespace {

// Post-order over the DAG with an explicit stack; fn(n) runs once per node
// after its children.
template <typename Fn>
void postorder(NodeRef root, Fn&& fn) {
    struct Item {
        NodeRef n;
        bool expanded;
    };
    std::unordered_set<NodeRef> done;
    std::vector<Item> stack{{root, false}};
    while (!stack.empty()) {
        NodeRef n = stack.back().n;
        if (done.count(n)) {
            stack.pop_back();
            continue;
        }
        if (!stack.back().expanded) {
            stack.back().expanded = true;
            int ar = arity_of(n->kind);
            if (ar >= 1 && !done.count(n->a)) stack.push_back({n->a, false});
            if (ar >= 2 && !done.count(n->b)) stack.push_back({n->b, false});
        } else {
            fn(n);
            done.insert(n);
            stack.pop_back();
        }
    }
}

}  // namespace

std::size_t Expr::node_count() const {
    std::size_t n = 0;
    postorder(node_, [&](NodeRef) { ++n; });
    return n;
}

int Expr::depth() const {
    std::unordered_map<NodeRef, int> d;
    postorder(node_, [&](NodeRef n) {
        int ar = arity_of(n->kind);
        int m = 0;
        if (ar >= 1) m = std::max(m, d[n->a]);
        if (ar >= 2) m = std::max(m, d[n->b]);
        d[n] = m + 1;
    });
    return d[node_];
}

void Expr::free_variables(std::set<std::string>& out) const {
    postorder(node_, [&](NodeRef n) {
        if (n->kind == Kind::Variable) out.insert(n->name);
    });
}

bool Expr::depends_on(const std::string& var) const {
    bool found = false;
    postorder(node_, [&](NodeRef n) {
        if (n->kind == Kind::Variable && n->name == var) found = true;
    });
    return found;
}

// ---------------------------------------------------------------------------
// evaluation

double Env::lookup(const std::string& name) const {
    auto it = vals_.find(name);
    if (it == vals_.end()) throw std::out_of_range("unbound variable `" + name + "`");
    return it->second;
}

double Expr::eval(const Env& env) const {
    std::unordered_map<NodeRef, double> val;
    postorder(node_, [&](NodeRef n) {
        double a = n->a ? val[n->a] : 0.0;
        double b = n->b ? val[n->b] : 0.0;
        double r = 0.0;
        switch (n->kind) {
            case Kind::Constant: r = n->value; break;
            case Kind::Variable:
                if (!env.has(n->name)) throw EvalError("unbound variable `" + n->name + "`", Expr(n));
                r = env.lookup(n->name);
                break;
            case Kind::Add: r = a + b; break;
            case Kind::Sub: r = a - b; break;
            case Kind::Neg: r = -a; break;
            case Kind::Mul: r = a * b; break;
            case Kind::Div:
                if (b == 0.0) throw EvalError("division by zero", Expr(n));
                r = a / b;
                break;
            case Kind::Pow:
                if (a == 0.0 && n->ipow < 0) throw EvalError("zero raised to negative power", Expr(n));
                r = std::pow(a, n->ipow);
                break;
            case Kind::Sin: r = std::sin(a); break;
            case Kind::Cos: r = std::cos(a); break;
            case Kind::Sqrt:
                if (a < 0.0) throw EvalError("square root of negative value", Expr(n));
                r = std::sqrt(a);
                break;
            case Kind::Exp: r = std::exp(a); break;
        }
        val[n] = r;
    });
    return val[node_];
}

// ---------------------------------------------------------------------------
// differentiation

namespace {
void diff_into(Expr e, const std::string& var, std::unordered_map<NodeRef, Expr>& d);
}

Expr diff(Expr e, const std::string& var) {
    std::unordered_map<NodeRef, Expr> d;
    diff_into(e, var, d);
    return d.at(e.node());
}

std::vector<Expr> diff_all(const std::vector<Expr>& es, const std::string& var) {
    std::unordered_map<NodeRef, Expr> d;
    std::vector<Expr> out;
    out.reserve(es.size());
    for (const Expr& e : es) {
        diff_into(e, var, d);
        out.push_back(d.at(e.node()));
    }
    return out;
}

namespace {
void diff_into(Expr e, const std::string& var, std::unordered_map<NodeRef, Expr>& d) {
    postorder(e.node(), [&](NodeRef n) {
        if (d.count(n)) return;
        Expr self(n);
        Expr da = n->a ? d.at(n->a) : Expr();
        Expr db = n->b ? d.at(n->b) : Expr();
        Expr r;
        switch (n->kind) {
            case Kind::Constant: r = Expr::constant(0.0); break;
            case Kind::Variable: r = Expr::constant(n->name == var ? 1.0 : 0.0); break;
            case Kind::Add: r = add(da, db); break;
            case Kind::Sub: r = sub(da, db); break;
            case Kind::Neg: r = neg(da); break;
            case Kind::Mul: r = add(mul(da, Expr(n->b)), mul(Expr(n->a), db)); break;
            case Kind::Div:
                r = sub(div(da, Expr(n->b)), div(mul(Expr(n->a), db), pow(Expr(n->b), 2)));
                break;
            case Kind::Pow:
                r = mul(mul(Expr::constant(n->ipow), pow(Expr(n->a), n->ipow - 1)), da);
                break;
            case Kind::Sin: r = mul(cos(Expr(n->a)), da); break;
            case Kind::Cos: r = neg(mul(sin(Expr(n->a)), da)); break;
            case Kind::Sqrt: r = div(da, mul(Expr::constant(2.0), sqrt(Expr(n->a)))); break;
            case Kind::Exp: r = mul(exp(Expr(n->a)), da); break;
        }
        d.emplace(n, r);
    });
}
}  // namespace

Expr Expr::diff(const std::string& var) const { return sym::diff(*this, var); }

// ---------------------------------------------------------------------------
// simplification
//
// One bottom-up pass: children first, then the node is rebuilt through the
// smart constructors, then sums and products are flattened and collected
// (like terms merged, integer exponents merged). Collection sorts by interned
// id, which is stable for the process lifetime, and rebuilds balanced trees
// to keep depth and rounding growth down. The pass is repeated to a fixed
// point with a small cap; each rewrite either reduces the node count or
// reaches the canonical ordering, so the loop terminates.

namespace {

struct ConstFactor {
    double coeff;
    Expr rest;
};

// Peel leading numeric factors: c*x, x*c, x/c, -x chains.
ConstFactor split_const_factor(Expr e) {
    double c = 1.0;
    for (;;) {
        if (e.kind() == Kind::Neg) {
            c = -c;
            e = e.child(0);
        } else if (e.kind() == Kind::Mul && e.child(0).is_constant()) {
            c *= e.child(0).constant_value();
            e = e.child(1);
        } else if (e.kind() == Kind::Mul && e.child(1).is_constant()) {
            c *= e.child(1).constant_value();
            e = e.child(0);
        } else if (e.kind() == Kind::Div && e.child(1).is_constant() &&
                   e.child(1).constant_value() != 0.0) {
            c /= e.child(1).constant_value();
            e = e.child(0);
        } else {
            break;
        }
    }
    return {c, e};
}

Expr balanced_product(const std::vector<Expr>& fs, std::size_t lo, std::size_t hi) {
    if (hi - lo == 1) return fs[lo];
    std::size_t mid = lo + (hi - lo) / 2;
    return mul(balanced_product(fs, lo, mid), balanced_product(fs, mid, hi));
}

Expr balanced_sum(const std::vector<Expr>& ts, std::size_t lo, std::size_t hi) {
    if (hi - lo == 1) return ts[lo];
    std::size_t mid = lo + (hi - lo) / 2;
    return add(balanced_sum(ts, lo, mid), balanced_sum(ts, mid, hi));
}

Expr collect_linear(Expr root) {
    // Flatten the +/-/neg spine.
    std::vector<std::pair<Expr, double>> leaves;
    double constant = 0.0;
    std::vector<std::pair<Expr, double>> stack{{root, 1.0}};
    while (!stack.empty()) {
        auto [e, sign] = stack.back();
        stack.pop_back();
        switch (e.kind()) {
            case Kind::Add:
                stack.push_back({e.child(0), sign});
                stack.push_back({e.child(1), sign});
                break;
            case Kind::Sub:
                stack.push_back({e.child(0), sign});
                stack.push_back({e.child(1), -sign});
                break;
            case Kind::Neg: stack.push_back({e.child(0), -sign}); break;
            case Kind::Constant: constant += sign * e.constant_value(); break;
            default: {
                ConstFactor cf = split_const_factor(e);
                if (cf.rest.is_constant())
                    constant += sign * cf.coeff * cf.rest.constant_value();
                else
                    leaves.push_back({cf.rest, sign * cf.coeff});
            }
        }
    }

    std::map<std::uint64_t, std::pair<Expr, double>> terms;
    for (auto& [t, c] : leaves) {
        auto it = terms.find(t.id());
        if (it == terms.end())
            terms.emplace(t.id(), std::make_pair(t, c));
        else
            it->second.second += c;
    }

    // a*sin(x)^2 + a*cos(x)^2 -> a
    for (auto& [id, tc] : terms) {
        auto& [t, c] = tc;
        if (c == 0.0 || t.kind() != Kind::Pow || t.exponent() != 2) continue;
        Expr base = t.child(0);
        if (base.kind() != Kind::Sin) continue;
        Expr partner = pow(cos(base.child(0)), 2);
        auto it = terms.find(partner.id());
        if (it != terms.end() && it->second.second == c) {
            constant += c;
            it->second.second = 0.0;
            c = 0.0;
        }
    }

    std::vector<Expr> pos, negs;
    for (auto& [id, tc] : terms) {
        auto& [t, c] = tc;
        if (c == 0.0) continue;
        double a = std::abs(c);
        Expr piece = (a == 1.0) ? t : mul(Expr::constant(a), t);
        (c > 0 ? pos : negs).push_back(piece);
    }
    if (constant != 0.0) (constant > 0 ? pos : negs).push_back(Expr::constant(std::abs(constant)));

    if (pos.empty() && negs.empty()) return Expr::constant(0.0);
    Expr r = pos.empty() ? Expr::constant(0.0) : balanced_sum(pos, 0, pos.size());
    if (!negs.empty()) r = sub(r, balanced_sum(negs, 0, negs.size()));
    return r;
}

Expr collect_monomial(Expr root) {
    double coeff = 1.0;
    std::vector<std::pair<Expr, int>> factors;
    std::vector<std::pair<Expr, int>> stack{{root, 1}};
    while (!stack.empty()) {
        auto [e, ex] = stack.back();
        stack.pop_back();
        switch (e.kind()) {
            case Kind::Mul:
                stack.push_back({e.child(0), ex});
                stack.push_back({e.child(1), ex});
                break;
            case Kind::Div:
                stack.push_back({e.child(0), ex});
                stack.push_back({e.child(1), -ex});
                break;
            case Kind::Neg:
                if (ex % 2 != 0) coeff = -coeff;
                stack.push_back({e.child(0), ex});
                break;
            case Kind::Constant: {
                double v = e.constant_value();
                if (v == 0.0 && ex < 0) return root;  // keep explicit division by zero
                coeff *= powi(v, ex);
                break;
            }
            case Kind::Pow: stack.push_back({e.child(0), ex * e.exponent()}); break;
            default: factors.push_back({e, ex});
        }
    }
    if (coeff == 0.0) return Expr::constant(0.0);

    std::map<std::uint64_t, std::pair<Expr, int>> merged;
    for (auto& [b, k] : factors) {
        auto it = merged.find(b.id());
        if (it == merged.end())
            merged.emplace(b.id(), std::make_pair(b, k));
        else
            it->second.second += k;
    }

    std::vector<Expr> num, den;
    for (auto& [id, bk] : merged) {
        auto& [b, k] = bk;
        if (k == 0) continue;
        if (k > 0)
            num.push_back(pow(b, k));
        else
            den.push_back(pow(b, -k));
    }

    Expr n = num.empty() ? Expr::constant(1.0) : balanced_product(num, 0, num.size());
    if (coeff != 1.0) n = mul(Expr::constant(coeff), n);
    if (den.empty()) return n;
    return div(n, balanced_product(den, 0, den.size()));
}

Expr simplify_once(Expr e, std::unordered_map<NodeRef, Expr>& out) {
    postorder(e.node(), [&](NodeRef n) {
        if (out.count(n)) return;
        Expr r;
        Expr a = n->a ? out.at(n->a) : Expr();
        Expr b = n->b ? out.at(n->b) : Expr();
        switch (n->kind) {
            case Kind::Constant:
            case Kind::Variable: r = Expr(n); break;
            case Kind::Add: r = add(a, b); break;
            case Kind::Sub: r = sub(a, b); break;
            case Kind::Neg: r = neg(a); break;
            case Kind::Mul: r = mul(a, b); break;
            case Kind::Div: r = div(a, b); break;
            case Kind::Pow:
                if (a.kind() == Kind::Pow)
                    r = pow(a.child(0), a.exponent() * n->ipow);
                else
                    r = pow(a, n->ipow);
                break;
            case Kind::Sin: r = sin(a); break;
            case Kind::Cos: r = cos(a); break;
            case Kind::Sqrt: r = sqrt(a); break;
            case Kind::Exp: r = exp(a); break;
        }
        switch (r.kind()) {
            case Kind::Add:
            case Kind::Sub: r = collect_linear(r); break;
            case Kind::Mul:
            case Kind::Div: r = collect_monomial(r); break;
            default: break;
        }
        out.emplace(n, r);
    });
    return out.at(e.node());
}

}  // namespace

Expr simplify(Expr e) {
    for (int i = 0; i < 8; ++i) {
        std::unordered_map<NodeRef, Expr> memo;
        Expr r = simplify_once(e, memo);
        if (r.same(e)) return r;
        e = r;
    }
    return e;
}

std::vector<Expr> simplify_all(std::vector<Expr> es) {
    for (int i = 0; i < 8; ++i) {
        std::unordered_map<NodeRef, Expr> memo;
        bool changed = false;
        for (Expr& e : es) {
            Expr r = simplify_once(e, memo);
            if (!r.same(e)) changed = true;
            e = r;
        }
        if (!changed) break;
    }
    return es;
}

Expr Expr::simplified() const { return simplify(*this); }

Expr substitute(Expr e, const std::map<std::string, Expr>& bindings) {
    std::unordered_map<NodeRef, Expr> out;
    postorder(e.node(), [&](NodeRef n) {
        Expr a = n->a ? out.at(n->a) : Expr();
        Expr b = n->b ? out.at(n->b) : Expr();
        Expr r;
        switch (n->kind) {
            case Kind::Constant: r = Expr(n); break;
            case Kind::Variable: {
                auto it = bindings.find(n->name);
                r = it == bindings.end() ? Expr(n) : it->second;
                break;
            }
            case Kind::Add: r = add(a, b); break;
            case Kind::Sub: r = sub(a, b); break;
            case Kind::Neg: r = neg(a); break;
            case Kind::Mul: r = mul(a, b); break;
            case Kind::Div: r = div(a, b); break;
            case Kind::Pow: r = pow(a, n->ipow); break;
            case Kind::Sin: r = sin(a); break;
            case Kind::Cos: r = cos(a); break;
            case Kind::Sqrt: r = sqrt(a); break;
            case Kind::Exp: r = exp(a); break;
        }
        out.emplace(n, r);
    });
    return out.at(e.node());
}

// ---------------------------------------------------------------------------
// printing

namespace {

// precedence: add 1, mul 2, unary minus 2, pow 3, atom 4
void print_node(std::string& s, NodeRef n, int parent_prec);

std::string format_double(double v) {
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

void print_paren(std::string& s, NodeRef n, int prec, int parent_prec) {
    if (prec < parent_prec) {
        s += '(';
        print_node(s, n, 0);
        s += ')';
    } else {
        print_node(s, n, parent_prec);
    }
}

void print_node(std::string& s, NodeRef n, int parent_prec) {
    switch (n->kind) {
        case Kind::Constant: {
            if (n->value < 0) {
                s += '(';
                s += format_double(n->value);
                s += ')';
            } else {
                s += format_double(n->value);
            }
            break;
        }
        case Kind::Variable: s += n->name; break;
        case Kind::Add:
            if (parent_prec > 1) s += '(';
            print_node(s, n->a, 1);
            s += " + ";
            print_node(s, n->b, 2);
            if (parent_prec > 1) s += ')';
            break;
        case Kind::Sub:
            if (parent_prec > 1) s += '(';
            print_node(s, n->a, 1);
            s += " - ";
            print_node(s, n->b, 2);
            if (parent_prec > 1) s += ')';
            break;
        case Kind::Neg:
            if (parent_prec > 2) s += '(';
            s += '-';
            print_node(s, n->a, 3);
            if (parent_prec > 2) s += ')';
            break;
        case Kind::Mul:
            if (parent_prec > 2) s += '(';
            print_node(s, n->a, 2);
            s += "*";
            print_node(s, n->b, 3);
            if (parent_prec > 2) s += ')';
            break;
        case Kind::Div:
            if (parent_prec > 2) s += '(';
            print_node(s, n->a, 2);
            s += "/";
            print_node(s, n->b, 3);
            if (parent_prec > 2) s += ')';
            break;
        case Kind::Pow:
            print_paren(s, n->a, n->a->kind == Kind::Constant || n->a->kind == Kind::Variable ? 4 : 0, 4);
            s += '^';
            if (n->ipow < 0) {
                s += '(';
                s += std::to_string(n->ipow);
                s += ')';
            } else {
                s += std::to_string(n->ipow);
            }
            break;
        case Kind::Sin:
        case Kind::Cos:
        case Kind::Sqrt:
        case Kind::Exp: {
            const char* f = n->kind == Kind::Sin    ? "sin"
                            : n->kind == Kind::Cos  ? "cos"
                            : n->kind == Kind::Sqrt ? "sqrt"
                                                    : "exp";
            s += f;
            s += '(';
            print_node(s, n->a, 0);
            s += ')';
            break;
        }
    }
}

}  // namespace

std::string Expr::str() const {
    std::string s;
    print_node(s, node_, 0);
    return s;
}

// ---------------------------------------------------------------------------
// parser

namespace {

class Parser {
public:
    explicit Parser(const std::string& src) : src_(src) {}

    Expr parse_all() {
        Expr e = parse_expr();
        skip_ws();
        if (pos_ != src_.size()) fail("unexpected trailing input");
        return e;
    }

private:
    const std::string& src_;
    std::size_t pos_ = 0;

    [[noreturn]] void fail(const std::string& msg) { throw ParseError(msg, pos_); }

    void skip_ws() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }

    bool eat(char c) {
        skip_ws();
        if (pos_ < src_.size() && src_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    char peek() {
        skip_ws();
        return pos_ < src_.size() ? src_[pos_] : '\0';
    }

    Expr parse_expr() {
        Expr e = parse_term();
        for (;;) {
            if (eat('+'))
                e = add(e, parse_term());
            else if (eat('-'))
                e = sub(e, parse_term());
            else
                return e;
        }
    }

    Expr parse_term() {
        Expr e = parse_unary();
        for (;;) {
            if (eat('*'))
                e = mul(e, parse_unary());
            else if (eat('/'))
                e = div(e, parse_unary());
            else
                return e;
        }
    }

    Expr parse_unary() {
        bool negate = false;
        for (;;) {
            if (eat('-'))
                negate = !negate;
            else if (eat('+'))
                ;
            else
                break;
        }
        Expr e = parse_power();
        return negate ? neg(e) : e;
    }

    Expr parse_power() {
        Expr base = parse_atom();
        if (eat('^')) {
            int k = parse_int_exponent();
            return pow(base, k);
        }
        return base;
    }

    int parse_int_exponent() {
        skip_ws();
        bool paren = eat('(');
        skip_ws();
        std::size_t start = pos_;
        if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
        int value = 0;
        auto res = std::from_chars(src_.data() + start, src_.data() + pos_, value);
        if (res.ec != std::errc() || res.ptr != src_.data() + pos_ || start == pos_)
            fail("expected integer exponent");
        if (paren && !eat(')')) fail("unbalanced parenthesis");
        return value;
    }

    Expr parse_atom() {
        skip_ws();
        if (pos_ >= src_.size()) fail("unexpected end of input");
        char c = src_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_name();
        if (c == '(') {
            ++pos_;
            Expr e = parse_expr();
            if (!eat(')')) fail("unbalanced parenthesis");
            return e;
        }
        fail(std::string("unexpected character `") + c + "`");
    }

    Expr parse_number() {
        std::size_t start = pos_;
        double v = 0.0;
        auto res = std::from_chars(src_.data() + start, src_.data() + src_.size(), v);
        if (res.ec != std::errc()) fail("malformed number");
        pos_ = res.ptr - src_.data();
        return Expr::constant(v);
    }

    Expr parse_name() {
        std::size_t start = pos_;
        while (pos_ < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
            ++pos_;
        std::string name = src_.substr(start, pos_ - start);
        if (peek() == '(') {
            eat('(');
            Expr arg = parse_expr();
            if (!eat(')')) fail("unbalanced parenthesis");
            if (name == "sin") return sin(arg);
            if (name == "cos") return cos(arg);
            if (name == "sqrt") return sqrt(arg);
            if (name == "exp") return exp(arg);
            pos_ = start;
            fail("unknown function `" + name + "`");
        }
        if (name == "pi") return Expr::constant(M_PI);
        return Expr::variable(name);
    }
};

}  // namespace

Expr parse(const std::string& src) { return Parser(src).parse_all(); }

// ---------------------------------------------------------------------------
// compiled programs

Program Program::compile(const std::vector<Expr>& roots, const std::vector<std::string>& vars) {
    Program p;
    p.nvars_ = static_cast<std::uint32_t>(vars.size());
    std::unordered_map<std::string, std::uint32_t> var_slot;
    for (std::uint32_t i = 0; i < vars.size(); ++i) var_slot[vars[i]] = i;

    std::unordered_map<NodeRef, std::uint32_t> slot;
    std::uint32_t next = p.nvars_;

    auto emit = [&](NodeRef n) {
        if (slot.count(n)) return;
        Instr ins{};
        ins.out = next++;
        switch (n->kind) {
            case Kind::Constant:
                ins.op = Op::Const;
                ins.imm = n->value;
                break;
            case Kind::Variable: {
                auto it = var_slot.find(n->name);
                if (it == var_slot.end())
                    throw std::invalid_argument("Program::compile: unbound variable `" + n->name + "`");
                slot[n] = it->second;
                --next;
                return;
            }
            case Kind::Add: ins.op = Op::Add; break;
            case Kind::Sub: ins.op = Op::Sub; break;
            case Kind::Neg: ins.op = Op::Neg; break;
            case Kind::Mul: ins.op = Op::Mul; break;
            case Kind::Div: ins.op = Op::Div; break;
            case Kind::Pow:
                ins.op = Op::PowI;
                ins.imm = n->ipow;
                break;
            case Kind::Sin: ins.op = Op::Sin; break;
            case Kind::Cos: ins.op = Op::Cos; break;
            case Kind::Sqrt: ins.op = Op::Sqrt; break;
            case Kind::Exp: ins.op = Op::Exp; break;
        }
        if (n->a) ins.a = slot.at(n->a);
        if (n->b) ins.b = slot.at(n->b);
        slot[n] = ins.out;
        p.code_.push_back(ins);
    };

    for (const Expr& r : roots) postorder(r.node(), emit);
    for (const Expr& r : roots) p.outputs_.push_back(slot.at(r.node()));
    p.nslots_ = next;
    return p;
}

void Program::eval_double(const double* vars, double* scratch, double* out) const {
    for (std::uint32_t i = 0; i < nvars_; ++i) scratch[i] = vars[i];
    for (const Instr& ins : code_) {
        switch (ins.op) {
            case Op::Const: scratch[ins.out] = ins.imm; break;
            case Op::Add: scratch[ins.out] = scratch[ins.a] + scratch[ins.b]; break;
            case Op::Sub: scratch[ins.out] = scratch[ins.a] - scratch[ins.b]; break;
            case Op::Neg: scratch[ins.out] = -scratch[ins.a]; break;
            case Op::Mul: scratch[ins.out] = scratch[ins.a] * scratch[ins.b]; break;
            case Op::Div: scratch[ins.out] = scratch[ins.a] / scratch[ins.b]; break;
            case Op::PowI: scratch[ins.out] = powi(scratch[ins.a], static_cast<int>(ins.imm)); break;
            case Op::Sin: scratch[ins.out] = std::sin(scratch[ins.a]); break;
            case Op::Cos: scratch[ins.out] = std::cos(scratch[ins.a]); break;
            case Op::Sqrt: scratch[ins.out] = std::sqrt(scratch[ins.a]); break;
            case Op::Exp: scratch[ins.out] = std::exp(scratch[ins.a]); break;
        }
    }
    for (std::size_t i = 0; i < outputs_.size(); ++i) out[i] = scratch[outputs_[i]];
}

void Program::eval_batch(const double* vars, double* scratch, double* out) const {
    constexpr std::size_t B = kBatch;
    for (std::size_t i = 0; i < nvars_ * B; ++i) scratch[i] = vars[i];
    for (const Instr& ins : code_) {
        double* o = scratch + ins.out * B;
        const double* a = scratch + ins.a * B;
        const double* b = scratch + ins.b * B;
        switch (ins.op) {
            case Op::Const:
                for (std::size_t l = 0; l < B; ++l) o[l] = ins.imm;
                break;
            case Op::Add:
                for (std::size_t l = 0; l < B; ++l) o[l] = a[l] + b[l];
                break;
            case Op::Sub:
                for (std::size_t l = 0; l < B; ++l) o[l] = a[l] - b[l];
                break;
            case Op::Neg:
                for (std::size_t l = 0; l < B; ++l) o[l] = -a[l];
                break;
            case Op::Mul:
                for (std::size_t l = 0; l < B; ++l) o[l] = a[l] * b[l];
                break;
            case Op::Div:
                for (std::size_t l = 0; l < B; ++l) o[l] = a[l] / b[l];
                break;
            case Op::PowI:
                for (std::size_t l = 0; l < B; ++l) o[l] = powi(a[l], static_cast<int>(ins.imm));
                break;
            case Op::Sin:
                for (std::size_t l = 0; l < B; ++l) o[l] = std::sin(a[l]);
                break;
            case Op::Cos:
                for (std::size_t l = 0; l < B; ++l) o[l] = std::cos(a[l]);
                break;
            case Op::Sqrt:
                for (std::size_t l = 0; l < B; ++l) o[l] = std::sqrt(a[l]);
                break;
            case Op::Exp:
                for (std::size_t l = 0; l < B; ++l) o[l] = std::exp(a[l]);
                break;
        }
    }
    for (std::size_t i = 0; i < outputs_.size(); ++i)
        for (std::size_t l = 0; l < B; ++l) out[i * B + l] = scratch[outputs_[i] * B + l];
}

}  // namespace bochner::sym
