#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "bochner/geometry.hpp"
#include "bochner/octonion.hpp"

namespace bochner::geom {

using sym::Expr;

namespace {

Expr C(double v) { return Expr::constant(v); }

// Stereographic chart of the radius-R sphere S^d in R^{d+1}. pole = +1
// projects from the north pole (covers height <= 0, |u| <= 1), pole = -1
// from the south pole.
Chart stereographic_chart(int d, double R, int pole) {
    Chart ch;
    ch.name = pole > 0 ? "north" : "south";
    ch.dim = d;
    for (int i = 0; i < d; ++i) {
        ch.coords.push_back("u" + std::to_string(i + 1));
        ch.domain.push_back({-1.5, 1.5});
    }
    ch.usable_margin = 0.2;

    Expr r2 = C(0.0);
    for (int i = 0; i < d; ++i) r2 = r2 + pow(Expr::variable(ch.coords[i]), 2);
    Expr D = C(1.0) + r2;

    for (int i = 0; i < d; ++i)
        ch.embedding.push_back(simplify(C(2.0 * R) * Expr::variable(ch.coords[i]) / D));
    Expr h = simplify(C(static_cast<double>(pole)) * (r2 - C(1.0)) / D * C(R));
    ch.embedding.push_back(h);

    ch.conformal_hint = simplify(C(4.0 * R * R) / pow(D, 2));
    return ch;
}

// J^i_j = lambda^{-1} (dF)^T [Fx] (dF): the cross-product structure pulled
// back through a conformal embedding of factor lambda.
std::vector<Expr> cross_product_structure(const Chart& ch, double R) {
    const int d = ch.dim;
    const int N = ch.ambient_dim();
    if (N != 3 && N != 7) throw std::invalid_argument("cross-product structure needs ambient dim 3 or 7");
    CrossProduct cp(N);

    std::vector<Expr> dF(static_cast<std::size_t>(d) * N);
    for (int i = 0; i < d; ++i)
        for (int k = 0; k < N; ++k) dF[i * N + k] = sym::diff(ch.embedding[k], ch.coords[i]);

    // [Fx]_{a,c} = sum_b K_{bca} F_b / R  (unit-sphere point)
    std::vector<Expr> fx(static_cast<std::size_t>(N) * N, C(0.0));
    for (const auto& e : cp.table()) fx[e.c * N + e.b] = fx[e.c * N + e.b] + C(e.k / R) * ch.embedding[e.a];

    Expr lambda = *ch.conformal_hint;
    std::vector<Expr> J(static_cast<std::size_t>(d) * d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            Expr acc = C(0.0);
            for (int a = 0; a < N; ++a) {
                Expr row = C(0.0);
                for (int c = 0; c < N; ++c) row = row + fx[a * N + c] * dF[j * N + c];
                acc = acc + dF[i * N + a] * row;
            }
            J[i * d + j] = simplify(acc / lambda);
        }
    return J;
}

ManifoldSpec sphere_spec(const std::string& name, int d, double R) {
    ManifoldSpec s;
    s.name = name;
    s.dim = d;
    s.sphere_radius = R;
    s.grid = GridKind::Sphere;
    s.charts.push_back(stereographic_chart(d, R, +1));
    s.charts.push_back(stereographic_chart(d, R, -1));
    s.structure = StructureKind::CrossProduct;
    for (const Chart& ch : s.charts) s.j_charts.push_back(cross_product_structure(ch, R));
    return s;
}

}  // namespace

ManifoldSpec flat_torus(int half_dim, bool compatible) {
    const int d = 2 * half_dim;
    ManifoldSpec s;
    s.name = "flat_torus_" + std::to_string(d) + (compatible ? "" : "_skew");
    s.dim = d;
    s.grid = GridKind::PeriodicBox;

    Chart ch;
    ch.name = "main";
    ch.dim = d;
    for (int i = 0; i < d; ++i) {
        ch.coords.push_back("u" + std::to_string(i + 1));
        ch.domain.push_back({0.0, 2.0 * M_PI});
        ch.embedding.push_back(cos(Expr::variable(ch.coords[i])));
        ch.embedding.push_back(sin(Expr::variable(ch.coords[i])));
    }
    s.charts.push_back(ch);

    // constant block structure: compatible rotation blocks, or the
    // non-orthogonal [[1,-2],[1,-1]] blocks (J^2 = -id but J not an isometry)
    std::vector<Expr> J(static_cast<std::size_t>(d) * d, C(0.0));
    for (int b = 0; b < half_dim; ++b) {
        int i = 2 * b;
        if (compatible) {
            J[i * d + (i + 1)] = C(-1.0);
            J[(i + 1) * d + i] = C(1.0);
        } else {
            J[i * d + i] = C(1.0);
            J[i * d + (i + 1)] = C(-2.0);
            J[(i + 1) * d + i] = C(1.0);
            J[(i + 1) * d + (i + 1)] = C(-1.0);
        }
    }
    s.structure = StructureKind::Explicit;
    s.j_charts.push_back(J);
    s.description = compatible ? "flat torus, constant compatible J (Kahler)"
                               : "flat torus, constant non-compatible J";
    return s;
}

ManifoldSpec round_sphere_2() {
    ManifoldSpec s = sphere_spec("round_sphere_2", 2, 1.0);
    s.description = "unit round S^2, standard Kahler J (cross product)";
    return s;
}

ManifoldSpec s6_octonionic() {
    ManifoldSpec s = sphere_spec("s6_octonionic", 6, 1.0);
    s.description = "unit round S^6, octonionic nearly Kahler J";
    return s;
}

ManifoldSpec s6_perturbed(double eps) {
    ManifoldSpec s = sphere_spec("s6_perturbed", 6, 1.0);
    s.conformal_ambient = C(1.0) + C(eps) * Expr::variable("x7");
    s.description = "round S^6 metric scaled by (1 + " + std::to_string(eps) + "*x7), octonionic J";
    return s;
}

ManifoldSpec t4_conformal() {
    ManifoldSpec s = flat_torus(2, true);
    s.name = "t4_conformal";
    s.conformal_ambient = C(1.0) + C(0.3) * Expr::variable("x2");  // x2 = sin(u1)
    s.description = "T^4 with conformal metric (1 + 0.3*sin(u1)), constant compatible J";
    return s;
}

std::vector<ManifoldSpec> zoo() {
    std::vector<ManifoldSpec> z;
    z.push_back(flat_torus(1, true));
    z.push_back(flat_torus(1, false));
    z.push_back(flat_torus(2, true));
    z.push_back(flat_torus(2, false));
    z.push_back(round_sphere_2());
    z.push_back(s6_octonionic());
    z.push_back(s6_perturbed(0.05));
    z.push_back(t4_conformal());
    std::sort(z.begin(), z.end(),
              [](const ManifoldSpec& a, const ManifoldSpec& b) { return a.name < b.name; });
    return z;
}

ManifoldSpec zoo_member(const std::string& name) {
    for (ManifoldSpec& s : zoo())
        if (s.name == name) return s;
    throw std::out_of_range("unknown zoo manifold `" + name + "`");
}

}  // namespace bochner::geom
