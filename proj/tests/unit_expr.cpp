#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "bochner/expr.hpp"
#include "bochner/util.hpp"

using namespace bochner;
using namespace bochner::sym;

namespace {

// Independent derivative oracle: central differences, O(h^2).
double central_diff(const Expr& e, const std::string& var, Env env, double h = 1e-5) {
    double x = env.lookup(var);
    env.bind(var, x + h);
    double fp = e.eval(env);
    env.bind(var, x - h);
    double fm = e.eval(env);
    return (fp - fm) / (2 * h);
}

// Random expression trees for round-trip / property tests.
Expr random_tree(Rng& rng, int depth) {
    if (depth == 0 || rng.uniform() < 0.25) {
        switch (rng.uniform_int(0, 2)) {
            case 0: return Expr::constant(std::round(rng.uniform(-4, 4) * 8) / 8.0);
            case 1: return Expr::variable("u");
            default: return Expr::variable("v");
        }
    }
    switch (rng.uniform_int(0, 8)) {
        case 0: return random_tree(rng, depth - 1) + random_tree(rng, depth - 1);
        case 1: return random_tree(rng, depth - 1) - random_tree(rng, depth - 1);
        case 2: return random_tree(rng, depth - 1) * random_tree(rng, depth - 1);
        case 3: return random_tree(rng, depth - 1) / (Expr::constant(2.0) + sym::exp(random_tree(rng, depth - 1)));
        case 4: return pow(random_tree(rng, depth - 1), rng.uniform_int(2, 3));
        case 5: return sym::sin(random_tree(rng, depth - 1));
        case 6: return sym::cos(random_tree(rng, depth - 1));
        case 7: return -random_tree(rng, depth - 1);
        default: return sym::exp(Expr::constant(0.25) * random_tree(rng, depth - 1));
    }
}

}  // namespace

TEST_CASE("parse basics") {
    Expr e = parse("u^2 + v");
    CHECK(e.kind() == Kind::Add);
    CHECK(e.child(0).kind() == Kind::Pow);
    CHECK(e.child(0).child(0).kind() == Kind::Variable);
    CHECK(e.child(0).exponent() == 2);
    CHECK(e.child(1).var_name() == "v");

    Expr p = parse("sin(u)*cos(v)");
    CHECK(p.kind() == Kind::Mul);
    CHECK(p.child(0).kind() == Kind::Sin);
    CHECK(p.child(1).kind() == Kind::Cos);
}

TEST_CASE("parse errors carry byte offsets") {
    CHECK_THROWS_AS(parse("2*(u"), ParseError);
    try {
        parse("2*(u");
    } catch (const ParseError& pe) {
        CHECK(pe.offset == 4);
        CHECK(std::string(pe.what()).find("unbalanced parenthesis") != std::string::npos);
    }
    CHECK_THROWS_AS(parse("foo(u)"), ParseError);
    try {
        parse("sin(u) + foo(v)");
    } catch (const ParseError& pe) {
        CHECK(std::string(pe.what()).find("unknown function") != std::string::npos);
        CHECK(pe.offset == 9);
    }
    CHECK_THROWS_AS(parse("u^v"), ParseError);
    CHECK_THROWS_AS(parse(""), ParseError);
    CHECK_THROWS_AS(parse("1 + * 2"), ParseError);
}

TEST_CASE("eval") {
    Env env{{"u", 2.0}, {"v", 1.0}};
    CHECK(parse("u^2+v").eval(env) == 5.0);
    CHECK(parse("sin(u)").eval(Env{{"u", 0.0}}) == 0.0);
    CHECK_THROWS_AS(parse("1/u").eval(Env{{"u", 0.0}}), EvalError);
    CHECK_THROWS_AS(parse("sqrt(u)").eval(Env{{"u", -1.0}}), EvalError);
    CHECK_THROWS_AS(parse("u+w").eval(env), EvalError);
    CHECK(parse("u^-2").eval(env) == 0.25);
    CHECK(parse("pi").eval(env) == doctest::Approx(M_PI));
    CHECK(parse("exp(0)").eval(env) == 1.0);
}

TEST_CASE("diff basics") {
    Expr e = diff(parse("u^2"), "u");
    CHECK(simplify(e).eval(Env{{"u", 3.0}}) == 6.0);

    Expr f = simplify(diff(parse("sin(u)*v"), "u"));
    Env env{{"u", 0.3}, {"v", 0.7}};
    CHECK(f.eval(env) == doctest::Approx(std::cos(0.3) * 0.7).epsilon(1e-14));

    // derivative w.r.t. absent variable is zero
    CHECK(simplify(diff(parse("sin(u)"), "w")).is_zero());
}

TEST_CASE("diff agrees with central differences") {
    Expr e = parse("exp(u)*cos(v)");
    Env env{{"u", 0.3}, {"v", 0.7}};
    double sym_du = diff(e, "u").eval(env);
    double fd_du = central_diff(e, "u", env);
    CHECK(std::abs(sym_du - fd_du) < 1e-8);
    double sym_dv = diff(e, "v").eval(env);
    double fd_dv = central_diff(e, "v", env);
    CHECK(std::abs(sym_dv - fd_dv) < 1e-8);

    // third-order chains stay consistent
    Expr g = parse("sqrt(1 + u^2) / (2 + sin(v))");
    Expr g3 = diff(diff(diff(g, "u"), "u"), "v");
    Expr g2 = diff(diff(g, "u"), "u");
    CHECK(std::abs(g3.eval(env) - central_diff(g2, "v", env)) < 1e-6);
}

TEST_CASE("simplify required rules") {
    CHECK(simplify(parse("0*u + 1*v")).same(Expr::variable("v")));
    CHECK(simplify(parse("u - u")).is_zero());
    CHECK(simplify(parse("u*0")).is_zero());
    CHECK(simplify(parse("(u + v) - (v + u)")).is_zero());
    CHECK(simplify(parse("2*u + 3*u")).eval(Env{{"u", 1.5}}) == 7.5);
    CHECK(simplify(parse("u*u*u")).same(pow(Expr::variable("u"), 3)));
    CHECK(simplify(parse("u^2/u^2")).is_one());
    CHECK(simplify(parse("(u^2)^3")).same(pow(Expr::variable("u"), 6)));
    CHECK(simplify(parse("1+2*3")).is_constant(7.0));
}

TEST_CASE("hash consing shares structurally equal trees") {
    Expr a = parse("sin(u) + v^2");
    Expr b = parse("sin( u ) + v^2");
    CHECK(a.same(b));
    CHECK(a.id() == b.id());
    // shared subterm identity
    Expr c = parse("sin(u)*sin(u)");
    CHECK(c.child(0).id() == c.child(1).id());
}

TEST_CASE("print/parse round trip on random trees") {
    Rng rng(20240901);
    for (int i = 0; i < 1000; ++i) {
        Expr e = random_tree(rng, rng.uniform_int(1, 8));
        Expr back = parse(e.str());
        CHECK(back.same(e));
    }
}

TEST_CASE("simplify preserves values on random trees") {
    Rng rng(77);
    int checked = 0;
    for (int i = 0; i < 400; ++i) {
        Expr e = random_tree(rng, rng.uniform_int(1, 6));
        Expr s = simplify(e);
        for (int k = 0; k < 5; ++k) {
            Env env{{"u", rng.uniform(-2, 2)}, {"v", rng.uniform(-2, 2)}};
            double a, b;
            try {
                a = e.eval(env);
                b = s.eval(env);
            } catch (const EvalError&) {
                continue;  // both-defined environments only
            }
            if (!std::isfinite(a) || std::abs(a) > 1e8) continue;
            CHECK(std::abs(a - b) <= 1e-9 * (1.0 + std::abs(a)));
            ++checked;
        }
        CHECK(simplify(s).same(s));  // idempotent
    }
    CHECK(checked > 1000);
}

TEST_CASE("derivative linearity and product rule on random trees") {
    Rng rng(123);
    for (int i = 0; i < 100; ++i) {
        Expr f = random_tree(rng, 4);
        Expr g = random_tree(rng, 4);
        Expr sum_rule = simplify(diff(f + g, "u") - (diff(f, "u") + diff(g, "u")));
        Expr prod_rule = simplify(diff(f * g, "u") - (diff(f, "u") * g + f * diff(g, "u")));
        for (int k = 0; k < 10; ++k) {
            Env env{{"u", rng.uniform(-1.5, 1.5)}, {"v", rng.uniform(-1.5, 1.5)}};
            try {
                CHECK(std::abs(sum_rule.eval(env)) < 1e-9);
                CHECK(std::abs(prod_rule.eval(env)) < 1e-9);
            } catch (const EvalError&) {
            }
        }
    }
}

TEST_CASE("compiled program matches tree evaluation") {
    Rng rng(5150);
    std::vector<Expr> roots;
    for (int i = 0; i < 25; ++i) roots.push_back(random_tree(rng, 5));
    Program prog = Program::compile(roots, {"u", "v"});
    std::vector<double> scratch(prog.slot_count()), out(prog.output_count());
    for (int k = 0; k < 50; ++k) {
        double uv[2] = {rng.uniform(-2, 2), rng.uniform(-2, 2)};
        prog.eval_double(uv, scratch.data(), out.data());
        Env env{{"u", uv[0]}, {"v", uv[1]}};
        for (std::size_t i = 0; i < roots.size(); ++i) {
            double want;
            try {
                want = roots[i].eval(env);
            } catch (const EvalError&) {
                continue;
            }
            if (!std::isfinite(want)) continue;
            CHECK(out[i] == doctest::Approx(want).epsilon(1e-12));
        }
    }
    CHECK_THROWS_AS(Program::compile({parse("u + missing")}, {"u"}), std::invalid_argument);
}

TEST_CASE("simplified Christoffel-grade expressions shrink") {
    // stand-in for the S^2 chart factor pipeline: derivatives of the
    // stereographic conformal factor blow up before collection
    Expr lam = parse("4/(1 + u^2 + v^2)^2");
    Expr raw = diff(diff(lam, "u"), "v") * lam + diff(lam, "u") * diff(lam, "v");
    Expr s = simplify(raw);
    CHECK(s.node_count() < raw.node_count());
    Env env{{"u", 0.4}, {"v", -1.2}};
    CHECK(s.eval(env) == doctest::Approx(raw.eval(env)).epsilon(1e-12));
}
