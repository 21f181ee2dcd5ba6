#include "bochner/connection.hpp"

#include <stdexcept>

namespace bochner::conn {

ChartConnection christoffel(const Chart& chart, const MetricData& metric) {
    const int d = metric.dim;
    ChartConnection conn;
    conn.dim = d;
    conn.gamma.assign(static_cast<std::size_t>(d) * d * d, Expr::constant(0.0));

    if (metric.conformal) {
        // s_m = d_m log(factor)
        std::vector<Expr> s(d);
        for (int m = 0; m < d; ++m)
            s[m] = sym::simplify(sym::div(sym::diff(metric.factor, chart.coords[m]), metric.factor));
        for (int k = 0; k < d; ++k)
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j) {
                    Expr acc = Expr::constant(0.0);
                    if (i == k) acc = acc + s[j];
                    if (j == k) acc = acc + s[i];
                    if (i == j) acc = acc - s[k];
                    conn.gamma[(k * d + i) * d + j] = sym::simplify(Expr::constant(0.5) * acc);
                }
        return conn;
    }

    if (!metric.has_symbolic_inverse) {
        // symbolic inverse unavailable (non-conformal, dim > 4): pointwise mode
        conn.symbolic = false;
        conn.gamma.clear();
        return conn;
    }

    // Gamma^k_ij = g^{kl} (d_i g_jl + d_j g_il - d_l g_ij) / 2
    std::vector<Expr> dg(static_cast<std::size_t>(d) * d * d);  // [m][i][j] = d_m g_ij
    for (int m = 0; m < d; ++m)
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
                dg[(m * d + i) * d + j] = sym::diff(metric.at(i, j), chart.coords[m]);

    for (int k = 0; k < d; ++k)
        for (int i = 0; i < d; ++i)
            for (int j = i; j < d; ++j) {
                Expr acc = Expr::constant(0.0);
                for (int l = 0; l < d; ++l) {
                    Expr t = dg[(i * d + j) * d + l] + dg[(j * d + i) * d + l] - dg[(l * d + i) * d + j];
                    acc = acc + metric.inv_at(k, l) * t;
                }
                Expr val = sym::simplify(Expr::constant(0.5) * acc);
                conn.gamma[(k * d + i) * d + j] = val;
                conn.gamma[(k * d + j) * d + i] = val;
            }
    return conn;
}

void build_riemann(ChartConnection& conn, const Chart& chart) {
    if (!conn.symbolic) return;
    const int d = conn.dim;
    conn.riemann.assign(static_cast<std::size_t>(d) * d * d * d, Expr::constant(0.0));

    // paper sign: R^l_kij = d_j Gamma^l_ik - d_i Gamma^l_jk
    //                       + Gamma^l_jm Gamma^m_ik - Gamma^l_im Gamma^m_jk
    for (int l = 0; l < d; ++l)
        for (int k = 0; k < d; ++k)
            for (int i = 0; i < d; ++i)
                for (int j = i + 1; j < d; ++j) {
                    Expr acc = sym::diff(conn.gamma_at(l, i, k), chart.coords[j]) -
                               sym::diff(conn.gamma_at(l, j, k), chart.coords[i]);
                    for (int m = 0; m < d; ++m)
                        acc = acc + conn.gamma_at(l, j, m) * conn.gamma_at(m, i, k) -
                              conn.gamma_at(l, i, m) * conn.gamma_at(m, j, k);
                    Expr val = sym::simplify(acc);
                    conn.riemann[((l * d + k) * d + i) * d + j] = val;
                    conn.riemann[((l * d + k) * d + j) * d + i] = sym::simplify(sym::neg(val));
                }
}

Expr scalar_curvature_expr(const MetricData& metric, const ChartConnection& conn) {
    const int d = metric.dim;
    Expr acc = Expr::constant(0.0);
    if (metric.conformal) {
        Expr inv2 = sym::simplify(sym::div(Expr::constant(1.0), sym::pow(metric.factor, 2)));
        Expr sum = Expr::constant(0.0);
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b) {
                // g^{aa} g^{bb} g_ll R^l_cab with c=a, l=b
                sum = sum + conn.riemann_at(b, a, a, b);
            }
        acc = inv2 * metric.factor * sum;  // two inverse factors, one metric factor
        return sym::simplify(acc);
    }
    for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b)
            for (int c = 0; c < d; ++c)
                for (int e = 0; e < d; ++e)
                    for (int l = 0; l < d; ++l)
                        acc = acc + metric.inv_at(a, c) * metric.inv_at(b, e) *
                                        conn.riemann_at(l, c, a, b) * metric.at(l, e);
    return sym::simplify(acc);
}

ChartGeometry::ChartGeometry(const Chart& chart, const MetricData& metric,
                             const ChartConnection& conn)
    : chart_(&chart), dim_(metric.dim), metric_(metric), conn_(conn) {
    if (!conn.symbolic)
        throw std::invalid_argument("ChartGeometry requires a symbolic connection");
    std::vector<Expr> geo;
    geo.insert(geo.end(), metric.g.begin(), metric.g.end());
    geo.insert(geo.end(), metric.ginv.begin(), metric.ginv.end());
    geo.insert(geo.end(), conn.gamma.begin(), conn.gamma.end());
    geo_prog_ = Program::compile(geo, chart.coords);
    if (!conn.riemann.empty()) riem_prog_ = Program::compile(conn.riemann, chart.coords);
}

FramedPoint ChartGeometry::frame_point(const double* x) const {
    const int d = dim_;
    FramedPoint p;
    p.x.assign(x, x + d);
    std::vector<double> scratch(geo_prog_.slot_count()), out(geo_prog_.output_count());
    geo_prog_.eval_double(x, scratch.data(), out.data());
    p.g.resize(d, d);
    p.ginv.resize(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            p.g(i, j) = out[i * d + j];
            p.ginv(i, j) = out[d * d + i * d + j];
        }
    p.gamma.assign(out.begin() + 2 * d * d, out.end());
    p.frame = geom::orthonormal_frame(p.g);
    return p;
}

void ChartGeometry::riemann_values(const double* x, std::vector<double>& out) const {
    std::vector<double> scratch(riem_prog_.slot_count());
    out.resize(riem_prog_.output_count());
    riem_prog_.eval_double(x, scratch.data(), out.data());
}

Eigen::VectorXd riemann_apply(const FramedPoint& p, const std::vector<double>& riem,
                              const Eigen::VectorXd& X, const Eigen::VectorXd& Y,
                              const Eigen::VectorXd& Z) {
    const int d = static_cast<int>(p.x.size());
    Eigen::VectorXd out = Eigen::VectorXd::Zero(d);
    for (int l = 0; l < d; ++l) {
        double acc = 0.0;
        for (int k = 0; k < d; ++k)
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j)
                    acc += riem[((l * d + k) * d + i) * d + j] * Z[k] * X[i] * Y[j];
        out[l] = acc;
    }
    return out;
}

double ChartGeometry::scalar_curvature(const FramedPoint& p) const {
    const int d = dim_;
    std::vector<double> riem;
    riemann_values(p.x.data(), riem);
    double s = 0.0;
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            Eigen::VectorXd ei = p.frame.col(i), ej = p.frame.col(j);
            Eigen::VectorXd r = riemann_apply(p, riem, ei, ej, ei);
            s += r.dot(p.g * ej);
        }
    return s;
}

}  // namespace bochner::conn
