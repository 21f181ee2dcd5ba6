#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "bochner/expr.hpp"
#include "bochner/jet.hpp"
#include "bochner/util.hpp"

using namespace bochner;
using namespace bochner::sym;

TEST_CASE("jet arithmetic matches symbolic derivatives") {
    // oracle: exact symbolic differentiation of the same expression
    Expr e = parse("sin(u)*exp(0.3*v) + u^3/(2 + cos(v)) - sqrt(1 + u^2)");
    std::vector<std::string> vars{"u", "v"};
    Program prog = Program::compile({e}, vars);

    const JetSpace* sp = JetSpace::get(2, 3);
    double u0 = 0.7, v0 = -0.4;
    std::vector<Jet> scratch(prog.slot_count()), out(1);
    Jet in[2] = {Jet::variable(sp, u0, 0), Jet::variable(sp, v0, 1)};
    prog.eval(in, scratch.data(), out.data());

    Env env{{"u", u0}, {"v", v0}};
    CHECK(out[0].value() == doctest::Approx(e.eval(env)).epsilon(1e-13));

    Expr eu = diff(e, "u"), ev = diff(e, "v");
    CHECK(out[0].d1(0) == doctest::Approx(eu.eval(env)).epsilon(1e-12));
    CHECK(out[0].d1(1) == doctest::Approx(ev.eval(env)).epsilon(1e-12));

    CHECK(out[0].d2(0, 0) == doctest::Approx(diff(eu, "u").eval(env)).epsilon(1e-12));
    CHECK(out[0].d2(0, 1) == doctest::Approx(diff(eu, "v").eval(env)).epsilon(1e-12));
    CHECK(out[0].d2(1, 1) == doctest::Approx(diff(ev, "v").eval(env)).epsilon(1e-12));

    Expr euuv = diff(diff(eu, "u"), "v");
    Expr euvv = diff(diff(eu, "v"), "v");
    CHECK(out[0].d3(0, 0, 1) == doctest::Approx(euuv.eval(env)).epsilon(1e-11));
    CHECK(out[0].d3(0, 1, 1) == doctest::Approx(euvv.eval(env)).epsilon(1e-11));
}

TEST_CASE("jet division and integer powers") {
    const JetSpace* sp = JetSpace::get(3, 2);
    Jet x = Jet::variable(sp, 1.5, 0);
    Jet y = Jet::variable(sp, -0.5, 1);
    Jet z = Jet::variable(sp, 2.0, 2);

    Jet f = powi(x, -2) * y + z / x;
    // f = y/x^2 + z/x
    double u = 1.5;
    CHECK(f.value() == doctest::Approx(-0.5 / (u * u) + 2.0 / u));
    CHECK(f.d1(1) == doctest::Approx(1.0 / (u * u)));
    CHECK(f.d1(0) == doctest::Approx(2.0 * 0.5 / (u * u * u) - 2.0 / (u * u)));
    CHECK(f.d2(0, 2) == doctest::Approx(-1.0 / (u * u)));
    CHECK(f.d2(0, 0) == doctest::Approx(-6.0 * 0.5 / (u * u * u * u) + 4.0 / (u * u * u)));
}

TEST_CASE("jet space sizes") {
    CHECK(JetSpace::get(6, 3)->size() == 84);
    CHECK(JetSpace::get(6, 2)->size() == 28);
    CHECK(JetSpace::get(2, 3)->size() == 10);
}
