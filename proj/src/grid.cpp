#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "bochner/geometry.hpp"
#include "bochner/util.hpp"

namespace bochner::geom {

using sym::Env;
using sym::Expr;
using sym::Program;

void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
    nodes.resize(n);
    weights.resize(n);
    for (int i = 0; i < n; ++i) {
        // Newton from the Chebyshev-based initial guess
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 0; j < n; ++j) {
                double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
            }
            pp = n * (x * p0 - p1) / (x * x - 1.0);
            double dx = p0 / pp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        nodes[n - 1 - i] = x;
        weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * pp * pp);
    }
}

void sphere_point_to_chart(const std::vector<double>& x, int& chart, std::vector<double>& u) {
    int d = static_cast<int>(x.size()) - 1;
    double h = x[d];
    chart = h <= 0.0 ? 0 : 1;
    double denom = chart == 0 ? 1.0 - h : 1.0 + h;
    u.resize(d);
    for (int i = 0; i < d; ++i) u[i] = x[i] / denom;
}

namespace {

void append_node(QuadratureGrid& grid, int chart, const std::vector<double>& x, double w) {
    grid.chart.push_back(chart);
    grid.coords.insert(grid.coords.end(), x.begin(), x.end());
    grid.weight.push_back(w);
}

// smallest singular value of the embedding Jacobian at a node subsample
void validate_rank(const ManifoldSpec& spec, const QuadratureGrid& grid) {
    std::vector<Program> jac;
    for (const Chart& ch : spec.charts) {
        std::vector<Expr> entries;
        for (int k = 0; k < ch.ambient_dim(); ++k)
            for (int i = 0; i < ch.dim; ++i) entries.push_back(sym::diff(ch.embedding[k], ch.coords[i]));
        jac.push_back(Program::compile(entries, ch.coords));
    }
    std::size_t n = grid.size();
    std::size_t stride = std::max<std::size_t>(1, n / 512);
    std::vector<double> scratch, out;
    for (std::size_t i = 0; i < n; i += stride) {
        int c = grid.chart[i];
        const Chart& ch = spec.charts[c];
        scratch.resize(jac[c].slot_count());
        out.resize(jac[c].output_count());
        jac[c].eval_double(grid.node(i), scratch.data(), out.data());
        Eigen::MatrixXd J(ch.ambient_dim(), ch.dim);
        for (int r = 0; r < ch.ambient_dim(); ++r)
            for (int s = 0; s < ch.dim; ++s) J(r, s) = out[r * ch.dim + s];
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(J);
        if (svd.singularValues().minCoeff() <= 1e-8)
            throw std::runtime_error("build_grid: embedding Jacobian rank-deficient at a node of chart `" +
                                     ch.name + "`");
    }
}

void build_periodic_box(const ManifoldSpec& spec, int res, QuadratureGrid& grid) {
    const Chart& ch = spec.charts[0];
    const int d = ch.dim;
    MetricData metric = induced_metric(ch, spec.metric_conformal(0));

    // sqrt(det g) per node: symbolic when available, numeric otherwise
    Program vol_prog;
    bool symbolic_vol = metric.has_symbolic_inverse;
    Program g_prog;
    if (symbolic_vol)
        vol_prog = Program::compile({metric.sqrt_det}, ch.coords);
    else
        g_prog = Program::compile(metric.g, ch.coords);

    double cell = 1.0;
    std::vector<double> h(d), lo(d);
    std::vector<int> idx(d, 0);
    for (int i = 0; i < d; ++i) {
        lo[i] = ch.domain[i].first;
        h[i] = (ch.domain[i].second - ch.domain[i].first) / res;
        cell *= h[i];
    }

    std::vector<double> x(d), scratch, out;
    for (;;) {
        for (int i = 0; i < d; ++i) x[i] = lo[i] + (idx[i] + 0.5) * h[i];
        double dens;
        if (symbolic_vol) {
            scratch.resize(vol_prog.slot_count());
            out.resize(1);
            vol_prog.eval_double(x.data(), scratch.data(), out.data());
            dens = out[0];
        } else {
            scratch.resize(g_prog.slot_count());
            out.resize(g_prog.output_count());
            g_prog.eval_double(x.data(), scratch.data(), out.data());
            Eigen::MatrixXd G(d, d);
            for (int r = 0; r < d; ++r)
                for (int s = 0; s < d; ++s) G(r, s) = out[r * d + s];
            dens = std::sqrt(G.determinant());
        }
        append_node(grid, 0, x, cell * dens);

        int carry = 0;
        while (carry < d && ++idx[carry] == res) idx[carry++] = 0;
        if (carry == d) break;
    }
}

void build_sphere(const ManifoldSpec& spec, int res, QuadratureGrid& grid) {
    const int d = spec.dim;
    const int N = d + 1;
    const double R = spec.sphere_radius;

    std::vector<double> gl_nodes, gl_weights;
    gauss_legendre(res, gl_nodes, gl_weights);

    // polar angles theta_k in (0, pi) carrying sin^{d-k}; azimuth uniform
    std::vector<std::vector<double>> theta(d - 1), tw(d - 1);
    for (int k = 0; k < d - 1; ++k) {
        theta[k].resize(res);
        tw[k].resize(res);
        int spow = d - 1 - k;
        for (int i = 0; i < res; ++i) {
            double t = 0.5 * M_PI * (gl_nodes[i] + 1.0);
            theta[k][i] = t;
            tw[k][i] = 0.5 * M_PI * gl_weights[i] * std::pow(std::sin(t), spow);
        }
    }
    int nphi = res;
    double wphi = 2.0 * M_PI / nphi;

    // extra conformal factor in ambient variables
    Program conf_prog;
    bool has_conf = spec.conformal_ambient.has_value();
    std::vector<std::string> ambient_vars;
    if (has_conf) {
        for (int k = 0; k < N; ++k) ambient_vars.push_back("x" + std::to_string(k + 1));
        conf_prog = Program::compile({*spec.conformal_ambient}, ambient_vars);
    }

    std::vector<int> idx(d, 0);  // d-1 polar indices + 1 azimuth index
    std::vector<double> x(N), u, scratch, out(1);
    for (;;) {
        double w = std::pow(R, d);
        double sin_prod = 1.0;
        for (int k = 0; k < d - 1; ++k) {
            double t = theta[k][idx[k]];
            x[k] = R * sin_prod * std::cos(t);
            w *= tw[k][idx[k]];
            sin_prod *= std::sin(t);
        }
        double phi = (idx[d - 1] + 0.5) * wphi;
        x[d - 1] = R * sin_prod * std::cos(phi);
        x[d] = R * sin_prod * std::sin(phi);
        w *= wphi;

        if (has_conf) {
            scratch.resize(conf_prog.slot_count());
            conf_prog.eval_double(x.data(), scratch.data(), out.data());
            w *= std::pow(out[0], 0.5 * d);
        }

        // chart coordinates live on the unit sphere
        std::vector<double> xu(N);
        for (int k = 0; k < N; ++k) xu[k] = x[k] / R;
        int c;
        sphere_point_to_chart(xu, c, u);
        if (!spec.charts[c].usable(u.data()))
            throw std::runtime_error("build_grid: node falls outside the usable region of every chart");
        append_node(grid, c, u, w);

        int carry = 0;
        while (carry < d && ++idx[carry] == res) idx[carry++] = 0;
        if (carry == d) break;
    }
}

}  // namespace

QuadratureGrid build_grid(const ManifoldSpec& spec, int resolution) {
    if (resolution < 2) throw std::invalid_argument("build_grid: resolution must be >= 2");
    QuadratureGrid grid;
    grid.dim = spec.dim;
    grid.resolution = resolution;
    if (spec.grid == GridKind::PeriodicBox)
        build_periodic_box(spec, resolution, grid);
    else
        build_sphere(spec, resolution, grid);
    validate_rank(spec, grid);
    return grid;
}

}  // namespace bochner::geom
