#include "bochner/geometry.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "bochner/util.hpp"

namespace bochner::geom {

using sym::Env;
using sym::Program;

bool Chart::usable(const double* x) const {
    for (int i = 0; i < dim; ++i) {
        double lo = domain[i].first + usable_margin;
        double hi = domain[i].second - usable_margin;
        if (x[i] < lo || x[i] > hi) return false;
    }
    return true;
}

Expr ManifoldSpec::chart_conformal(int chart) const {
    if (!conformal_ambient) return Expr::constant(1.0);
    std::map<std::string, Expr> bind;
    const Chart& ch = charts[chart];
    for (int k = 0; k < ch.ambient_dim(); ++k)
        bind["x" + std::to_string(k + 1)] = ch.embedding[k];
    return sym::simplify(sym::substitute(*conformal_ambient, bind));
}

std::optional<Expr> ManifoldSpec::metric_conformal(int chart) const {
    if (!conformal_ambient) return std::nullopt;
    return chart_conformal(chart);
}

namespace {

// Deterministic interior sample of the chart box.
std::vector<std::vector<double>> chart_samples(const Chart& chart, int count) {
    Rng rng(0x9d2c5680u ^ static_cast<std::uint64_t>(chart.dim));
    std::vector<std::vector<double>> pts;
    for (int s = 0; s < count; ++s) {
        std::vector<double> x(chart.dim);
        for (int i = 0; i < chart.dim; ++i) {
            double lo = chart.domain[i].first, hi = chart.domain[i].second;
            double mid = 0.5 * (lo + hi), half = 0.45 * (hi - lo);
            x[i] = mid + half * (2.0 * rng.uniform() - 1.0);
        }
        pts.push_back(std::move(x));
    }
    return pts;
}

double eval_at(const Expr& e, const Chart& chart, const std::vector<double>& x) {
    Env env;
    for (int i = 0; i < chart.dim; ++i) env.bind(chart.coords[i], x[i]);
    return e.eval(env);
}

}  // namespace

void symbolic_matrix_inverse(int d, const std::vector<Expr>& g, std::vector<Expr>& ginv, Expr& det) {
    auto minor_det = [&](auto&& self, const std::vector<int>& rows,
                         const std::vector<int>& cols) -> Expr {
        int n = static_cast<int>(rows.size());
        if (n == 1) return g[rows[0] * d + cols[0]];
        Expr acc = Expr::constant(0.0);
        std::vector<int> sub_rows(rows.begin() + 1, rows.end());
        for (int j = 0; j < n; ++j) {
            std::vector<int> sub_cols;
            for (int k = 0; k < n; ++k)
                if (k != j) sub_cols.push_back(cols[k]);
            Expr term = sym::mul(g[rows[0] * d + cols[j]], self(self, sub_rows, sub_cols));
            acc = (j % 2 == 0) ? sym::add(acc, term) : sym::sub(acc, term);
        }
        return acc;
    };

    std::vector<int> all(d);
    for (int i = 0; i < d; ++i) all[i] = i;
    det = sym::simplify(minor_det(minor_det, all, all));

    ginv.assign(d * d, Expr());
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            std::vector<int> rows, cols;
            for (int k = 0; k < d; ++k) {
                if (k != j) rows.push_back(k);
                if (k != i) cols.push_back(k);
            }
            Expr cof = d == 1 ? Expr::constant(1.0) : minor_det(minor_det, rows, cols);
            if ((i + j) % 2 != 0) cof = sym::neg(cof);
            ginv[i * d + j] = sym::simplify(sym::div(cof, det));
        }
}

MetricData induced_metric(const Chart& chart, const std::optional<Expr>& conformal) {
    const int d = chart.dim;
    const int N = chart.ambient_dim();
    MetricData m;
    m.dim = d;

    std::vector<Expr> dF(static_cast<std::size_t>(d) * N);
    for (int i = 0; i < d; ++i)
        for (int k = 0; k < N; ++k) dF[i * N + k] = sym::diff(chart.embedding[k], chart.coords[i]);

    m.g.assign(static_cast<std::size_t>(d) * d, Expr());
    for (int i = 0; i < d; ++i)
        for (int j = i; j < d; ++j) {
            Expr acc = Expr::constant(0.0);
            for (int k = 0; k < N; ++k) acc = sym::add(acc, sym::mul(dF[i * N + k], dF[j * N + k]));
            if (conformal) acc = sym::mul(*conformal, acc);
            Expr s = sym::simplify(acc);
            m.g[i * d + j] = s;
            m.g[j * d + i] = s;
        }

    // Conformality: exact structural recognition, a supplied closed form
    // checked against the induced entries, or a numeric sample check.
    auto numeric_equal = [&](const Expr& a, const Expr& b) {
        for (const auto& x : chart_samples(chart, 32)) {
            double va = eval_at(a, chart, x), vb = eval_at(b, chart, x);
            if (std::abs(va - vb) > 1e-10 * (1.0 + std::abs(va) + std::abs(vb))) return false;
        }
        return true;
    };
    auto numeric_zero = [&](const Expr& e) {
        for (const auto& x : chart_samples(chart, 32))
            if (std::abs(eval_at(e, chart, x)) > 1e-10) return false;
        return true;
    };

    bool structural = true;
    for (int i = 0; i < d && structural; ++i)
        for (int j = 0; j < d && structural; ++j) {
            if (i == j)
                structural = m.g[i * d + j].same(m.g[0]);
            else
                structural = m.g[i * d + j].is_zero();
        }

    if (structural) {
        m.conformal = true;
        m.factor = m.g[0];
    } else {
        Expr candidate;
        if (chart.conformal_hint) {
            candidate = conformal ? sym::simplify(sym::mul(*conformal, *chart.conformal_hint))
                                  : *chart.conformal_hint;
        } else {
            candidate = m.g[0];
        }
        bool ok = true;
        for (int i = 0; i < d && ok; ++i)
            for (int j = 0; j < d && ok; ++j) {
                if (i == j)
                    ok = numeric_equal(m.g[i * d + j], candidate);
                else
                    ok = numeric_zero(m.g[i * d + j]);
            }
        if (chart.conformal_hint && !ok)
            throw std::runtime_error("chart `" + chart.name +
                                     "`: declared conformal factor disagrees with embedding");
        if (ok) {
            m.conformal = true;
            m.factor = candidate;
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j)
                    m.g[i * d + j] = (i == j) ? candidate : Expr::constant(0.0);
        }
    }

    if (m.conformal) {
        m.ginv.assign(static_cast<std::size_t>(d) * d, Expr::constant(0.0));
        Expr inv = sym::simplify(sym::div(Expr::constant(1.0), m.factor));
        for (int i = 0; i < d; ++i) m.ginv[i * d + i] = inv;
        m.has_symbolic_inverse = true;
        m.sqrt_det = sym::simplify(sym::sqrt(sym::pow(m.factor, d)));
    } else if (d <= 4) {
        Expr det;
        symbolic_matrix_inverse(d, m.g, m.ginv, det);
        m.has_symbolic_inverse = true;
        m.sqrt_det = sym::simplify(sym::sqrt(det));
    }
    return m;
}

Eigen::MatrixXd orthonormal_frame(const Eigen::MatrixXd& g) {
    Eigen::LLT<Eigen::MatrixXd> llt(g);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("orthonormal_frame: metric not positive definite");
    Eigen::MatrixXd L = llt.matrixL();
    // frame = L^{-T}: upper triangular, positive diagonal = Gram-Schmidt of
    // the coordinate basis in index order
    return L.transpose()
        .triangularView<Eigen::Upper>()
        .solve(Eigen::MatrixXd::Identity(g.rows(), g.cols()));
}

double QuadratureGrid::total_weight() const {
    // blocked compensated sum; block boundaries fixed so the result does not
    // depend on the thread count
    std::size_t n = weight.size();
    std::size_t block = 4096;
    std::size_t nblocks = (n + block - 1) / block;
    std::vector<double> partial(nblocks, 0.0);
    for (std::size_t b = 0; b < nblocks; ++b) {
        KahanSum s;
        for (std::size_t i = b * block; i < std::min(n, (b + 1) * block); ++i) s.add(weight[i]);
        partial[b] = s.value();
    }
    KahanSum total;
    for (double p : partial) total.add(p);
    return total.value();
}

}  // namespace bochner::geom
