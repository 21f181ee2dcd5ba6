#include "bochner/forms.hpp"

#include <algorithm>
#include <cassert>
#include <limits>
#include <stdexcept>

#include "bochner/util.hpp"

namespace bochner::jcalc {

using sym::Env;

// ---------------------------------------------------------------------------
// multi-index machinery

namespace {
int binom(int n, int k) {
    if (k < 0 || k > n) return 0;
    long r = 1;
    for (int i = 0; i < k; ++i) r = r * (n - i) / (i + 1);
    return static_cast<int>(r);
}
}  // namespace

int MultiIndex::count(int d, int p) { return binom(d, p); }

int MultiIndex::rank(int d, int p, const int* idx) {
    int r = 0, prev = -1;
    for (int t = 0; t < p; ++t) {
        for (int j = prev + 1; j < idx[t]; ++j) r += binom(d - 1 - j, p - 1 - t);
        prev = idx[t];
    }
    return r;
}

void MultiIndex::unrank(int d, int p, int r, int* idx) {
    int prev = -1;
    for (int t = 0; t < p; ++t) {
        for (int j = prev + 1;; ++j) {
            int c = binom(d - 1 - j, p - 1 - t);
            if (r < c) {
                idx[t] = j;
                prev = j;
                break;
            }
            r -= c;
        }
    }
}

int MultiIndex::lookup(int d, int p, const int* idx, int& sign) {
    int buf[4];
    std::copy(idx, idx + p, buf);
    sign = 1;
    // insertion sort, counting transpositions
    for (int i = 1; i < p; ++i) {
        int v = buf[i], j = i;
        while (j > 0 && buf[j - 1] > v) {
            buf[j] = buf[j - 1];
            --j;
            sign = -sign;
        }
        buf[j] = v;
    }
    for (int i = 1; i < p; ++i)
        if (buf[i] == buf[i - 1]) {
            sign = 0;
            return 0;
        }
    return rank(d, p, buf);
}

Expr TBFormChart::lookup(const int* idx, int k) const {
    int sign;
    int r = MultiIndex::lookup(dim, degree, idx, sign);
    if (sign == 0) return Expr::constant(0.0);
    const Expr& e = at(r, k);
    return sign > 0 ? e : sym::neg(e);
}

Expr& CovTensor::at(std::span<const int> e, int r, int k) {
    std::size_t base = 0;
    for (int i = 0; i < extra; ++i) base = base * dim + e[i];
    std::size_t ranks = MultiIndex::count(dim, degree);
    return comp[(base * ranks + r) * dim + k];
}

const Expr& CovTensor::at(std::span<const int> e, int r, int k) const {
    return const_cast<CovTensor*>(this)->at(e, r, k);
}

// ---------------------------------------------------------------------------
// FormCalc

FormCalc::FormCalc(const Chart& chart, const MetricData& metric, const ChartConnection& conn)
    : chart_(&chart), metric_(&metric), conn_(&conn), dim_(metric.dim) {
    if (!conn.symbolic)
        throw std::invalid_argument("FormCalc: chart is in numeric-pointwise mode (no symbolic connection)");
}

CovTensor FormCalc::nabla(const TBFormChart& w) const {
    const int d = dim_;
    const int p = w.degree;
    const int nr = w.ranks();
    CovTensor out;
    out.dim = d;
    out.degree = p;
    out.extra = 1;
    out.comp.resize(static_cast<std::size_t>(d) * nr * d);

    std::vector<int> I(std::max(p, 1)), tup(std::max(p, 1));
    for (int a = 0; a < d; ++a) {
        std::vector<Expr> dcomp = sym::diff_all(w.comp, chart_->coords[a]);
        std::vector<Expr> batch(static_cast<std::size_t>(nr) * d);
        for (int r = 0; r < nr; ++r) {
            MultiIndex::unrank(d, p, r, I.data());
            for (int k = 0; k < d; ++k) {
                Expr acc = dcomp[static_cast<std::size_t>(r) * d + k];
                for (int m = 0; m < d; ++m) {
                    const Expr& gkm = conn_->gamma_at(k, a, m);
                    if (!gkm.is_zero()) acc = acc + gkm * w.at(r, m);
                }
                for (int s = 0; s < p; ++s) {
                    std::copy(I.begin(), I.begin() + p, tup.begin());
                    for (int m = 0; m < d; ++m) {
                        const Expr& g = conn_->gamma_at(m, a, I[s]);
                        if (g.is_zero()) continue;
                        tup[s] = m;
                        Expr wrep = w.lookup(tup.data(), k);
                        if (!wrep.is_zero()) acc = acc - g * wrep;
                    }
                }
                batch[static_cast<std::size_t>(r) * d + k] = acc;
            }
        }
        batch = sym::simplify_all(std::move(batch));
        int e[1] = {a};
        for (int r = 0; r < nr; ++r)
            for (int k = 0; k < d; ++k) out.at(e, r, k) = batch[static_cast<std::size_t>(r) * d + k];
    }
    return out;
}

CovTensor FormCalc::nabla(const CovTensor& t) const {
    assert(t.extra == 1);
    const int d = dim_;
    const int p = t.degree;
    const int nr = MultiIndex::count(d, p);
    CovTensor out;
    out.dim = d;
    out.degree = p;
    out.extra = 2;
    out.comp.resize(static_cast<std::size_t>(d) * d * nr * d);

    std::vector<int> I(std::max(p, 1)), tup(std::max(p, 1));
    for (int a = 0; a < d; ++a) {
        // derivatives of all slices share one memo per direction
        std::vector<Expr> dall = sym::diff_all(t.comp, chart_->coords[a]);
        std::vector<Expr> batch(static_cast<std::size_t>(d) * nr * d);
        for (int b = 0; b < d; ++b) {
            int eb[1] = {b};
            for (int r = 0; r < nr; ++r) {
                MultiIndex::unrank(d, p, r, I.data());
                for (int k = 0; k < d; ++k) {
                    std::size_t flat = (static_cast<std::size_t>(b) * nr + r) * d + k;
                    Expr acc = dall[flat];
                    for (int m = 0; m < d; ++m) {
                        const Expr& gkm = conn_->gamma_at(k, a, m);
                        if (!gkm.is_zero()) acc = acc + gkm * t.at(eb, r, m);
                    }
                    for (int m = 0; m < d; ++m) {
                        const Expr& gab = conn_->gamma_at(m, a, b);
                        if (!gab.is_zero()) {
                            int em[1] = {m};
                            acc = acc - gab * t.at(em, r, k);
                        }
                    }
                    for (int s = 0; s < p; ++s) {
                        std::copy(I.begin(), I.begin() + p, tup.begin());
                        for (int m = 0; m < d; ++m) {
                            const Expr& g = conn_->gamma_at(m, a, I[s]);
                            if (g.is_zero()) continue;
                            tup[s] = m;
                            int sign;
                            int rr = MultiIndex::lookup(d, p, tup.data(), sign);
                            if (sign == 0) continue;
                            Expr tv = t.at(eb, rr, k);
                            if (tv.is_zero()) continue;
                            acc = sign > 0 ? acc - g * tv : acc + g * tv;
                        }
                    }
                    batch[flat] = acc;
                }
            }
        }
        batch = sym::simplify_all(std::move(batch));
        for (int b = 0; b < d; ++b)
            for (int r = 0; r < nr; ++r)
                for (int k = 0; k < d; ++k) {
                    int e[2] = {a, b};
                    out.at(e, r, k) = batch[(static_cast<std::size_t>(b) * nr + r) * d + k];
                }
    }
    return out;
}

TBFormChart FormCalc::exterior_d(const TBFormChart& w) const {
    if (w.degree > 2) throw std::invalid_argument("exterior_d: degree overflow (p <= 2)");
    const int d = dim_;
    const int p = w.degree;
    CovTensor N = nabla(w);
    TBFormChart out(d, p + 1);
    if (p + 1 > d) return out;  // no components

    std::vector<int> J(p + 1), rest(std::max(p, 1));
    for (int r = 0; r < out.ranks(); ++r) {
        MultiIndex::unrank(d, p + 1, r, J.data());
        for (int k = 0; k < d; ++k) {
            Expr acc = Expr::constant(0.0);
            for (int s = 0; s <= p; ++s) {
                int pos = 0;
                for (int t = 0; t <= p; ++t)
                    if (t != s) rest[pos++] = J[t];
                int e[1] = {J[s]};
                int rr = p == 0 ? 0 : MultiIndex::rank(d, p, rest.data());
                const Expr& term = N.at(e, rr, k);
                acc = (s % 2 == 0) ? acc + term : acc - term;
            }
            out.at(r, k) = acc;
        }
    }
    out.comp = sym::simplify_all(std::move(out.comp));
    return out;
}

TBFormChart FormCalc::codifferential(const TBFormChart& w) const {
    if (w.degree < 1) throw std::invalid_argument("codifferential: degree underflow (p >= 1)");
    const int d = dim_;
    const int p = w.degree;
    CovTensor N = nabla(w);
    TBFormChart out(d, p - 1);

    std::vector<int> I(std::max(p - 1, 1)), tup(p);
    Expr inv_factor;
    if (metric_->conformal) inv_factor = sym::div(Expr::constant(1.0), metric_->factor);

    for (int r = 0; r < out.ranks(); ++r) {
        if (p - 1 > 0) MultiIndex::unrank(d, p - 1, r, I.data());
        for (int k = 0; k < d; ++k) {
            Expr acc = Expr::constant(0.0);
            for (int a = 0; a < d; ++a) {
                for (int b = 0; b < d; ++b) {
                    if (metric_->conformal && a != b) continue;
                    tup[0] = b;
                    std::copy(I.begin(), I.begin() + (p - 1), tup.begin() + 1);
                    int sign;
                    int rr = MultiIndex::lookup(d, p, tup.data(), sign);
                    if (sign == 0) continue;
                    int e[1] = {a};
                    Expr val = N.at(e, rr, k);
                    if (val.is_zero()) continue;
                    if (sign < 0) val = sym::neg(val);
                    acc = metric_->conformal ? acc + val : acc + metric_->inv_at(a, b) * val;
                }
            }
            if (metric_->conformal) acc = inv_factor * acc;
            out.at(r, k) = sym::neg(acc);
        }
    }
    out.comp = sym::simplify_all(std::move(out.comp));
    return out;
}

TBFormChart FormCalc::hodge_laplace(const TBFormChart& w) const {
    TBFormChart ddelta(dim_, w.degree);
    if (w.degree >= 1) ddelta = exterior_d(codifferential(w));
    TBFormChart deltad = codifferential(exterior_d(w));
    TBFormChart out(dim_, w.degree);
    for (std::size_t i = 0; i < out.comp.size(); ++i) out.comp[i] = ddelta.comp[i] + deltad.comp[i];
    out.comp = sym::simplify_all(std::move(out.comp));
    return out;
}

TBFormChart FormCalc::rough_laplacian(const TBFormChart& w) const {
    const int d = dim_;
    CovTensor U = nabla(nabla(w));
    TBFormChart out(d, w.degree);
    Expr inv_factor;
    if (metric_->conformal) inv_factor = sym::div(Expr::constant(1.0), metric_->factor);
    for (int r = 0; r < out.ranks(); ++r)
        for (int k = 0; k < d; ++k) {
            Expr acc = Expr::constant(0.0);
            for (int a = 0; a < d; ++a)
                for (int b = 0; b < d; ++b) {
                    if (metric_->conformal && a != b) continue;
                    int e[2] = {a, b};
                    const Expr& val = U.at(e, r, k);
                    if (val.is_zero()) continue;
                    acc = metric_->conformal ? acc + val : acc + metric_->inv_at(a, b) * val;
                }
            if (metric_->conformal) acc = inv_factor * acc;
            out.at(r, k) = acc;
        }
    out.comp = sym::simplify_all(std::move(out.comp));
    return out;
}

TBFormChart FormCalc::weitzenbock_term(const TBFormChart& w) const {
    const int d = dim_;
    const int p = w.degree;
    if (conn_->riemann.empty())
        throw std::invalid_argument("weitzenbock_term: curvature components not built");
    TBFormChart out(d, p);
    if (p == 0) {
        out.comp = std::vector<Expr>(d, Expr::constant(0.0));
        return out;
    }

    Expr inv_factor;
    if (metric_->conformal) inv_factor = sym::div(Expr::constant(1.0), metric_->factor);

    std::vector<int> I(p), tup(p), rep(p);
    for (int r = 0; r < out.ranks(); ++r) {
        MultiIndex::unrank(d, p, r, I.data());
        for (int k = 0; k < d; ++k) {
            Expr acc = Expr::constant(0.0);
            for (int s = 0; s < p; ++s) {
                int is = I[s];
                double sgn = ((s + 1) % 2 == 0) ? 1.0 : -1.0;  // (-1)^s, 1-based slot
                for (int a = 0; a < d; ++a)
                    for (int b = 0; b < d; ++b) {
                        if (metric_->conformal && a != b) continue;
                        // argument tuple (b, I minus slot s)
                        tup[0] = b;
                        int pos = 1;
                        for (int t = 0; t < p; ++t)
                            if (t != s) tup[pos++] = I[t];

                        Expr term = Expr::constant(0.0);
                        // R acting on the value slot
                        for (int l = 0; l < d; ++l) {
                            const Expr& rie = conn_->riemann_at(k, l, a, is);
                            if (rie.is_zero()) continue;
                            Expr wv = w.lookup(tup.data(), l);
                            if (!wv.is_zero()) term = term + rie * wv;
                        }
                        // R acting on each argument slot
                        for (int q = 0; q < p; ++q) {
                            for (int m = 0; m < d; ++m) {
                                const Expr& rie = conn_->riemann_at(m, tup[q], a, is);
                                if (rie.is_zero()) continue;
                                std::copy(tup.begin(), tup.end(), rep.begin());
                                rep[q] = m;
                                Expr wv = w.lookup(rep.data(), k);
                                if (!wv.is_zero()) term = term - rie * wv;
                            }
                        }
                        if (term.is_zero()) continue;
                        if (!metric_->conformal) term = metric_->inv_at(a, b) * term;
                        acc = sgn > 0 ? acc + term : acc - term;
                    }
            }
            if (metric_->conformal) acc = inv_factor * acc;
            out.at(r, k) = acc;
        }
    }
    out.comp = sym::simplify_all(std::move(out.comp));
    return out;
}

namespace {

// Gram determinant of the inverse metric over two multi-indices.
Expr inverse_gram(const MetricData& m, const int* I, const int* J, int p) {
    if (p == 0) return Expr::constant(1.0);
    if (p == 1) return m.inv_at(I[0], J[0]);
    if (p == 2)
        return m.inv_at(I[0], J[0]) * m.inv_at(I[1], J[1]) -
               m.inv_at(I[0], J[1]) * m.inv_at(I[1], J[0]);
    // p == 3: cofactor expansion
    Expr acc = Expr::constant(0.0);
    for (int c = 0; c < 3; ++c) {
        int j1 = J[(c + 1) % 3], j2 = J[(c + 2) % 3];
        Expr minor = m.inv_at(I[1], j1) * m.inv_at(I[2], j2) - m.inv_at(I[1], j2) * m.inv_at(I[2], j1);
        acc = acc + m.inv_at(I[0], J[c]) * minor;
    }
    return acc;
}

}  // namespace

Expr FormCalc::inner_expr(const TBFormChart& a, const TBFormChart& b) const {
    if (a.degree != b.degree) throw std::invalid_argument("inner_expr: degree mismatch");
    const int d = dim_;
    const int p = a.degree;
    Expr acc = Expr::constant(0.0);

    if (metric_->conformal) {
        for (int r = 0; r < a.ranks(); ++r)
            for (int k = 0; k < d; ++k) acc = acc + a.at(r, k) * b.at(r, k);
        // factor^{1-p}: p inverse factors from the form slots, one factor
        // from the value inner product
        int e = 1 - p;
        if (e != 0) acc = acc * sym::pow(metric_->factor, e);
        return sym::simplify(acc);
    }

    std::vector<int> I(std::max(p, 1)), J(std::max(p, 1));
    for (int ri = 0; ri < a.ranks(); ++ri) {
        MultiIndex::unrank(d, p, ri, I.data());
        for (int rj = 0; rj < b.ranks(); ++rj) {
            MultiIndex::unrank(d, p, rj, J.data());
            Expr gram = inverse_gram(*metric_, I.data(), J.data(), p);
            Expr val = Expr::constant(0.0);
            for (int k = 0; k < d; ++k)
                for (int l = 0; l < d; ++l) val = val + a.at(ri, k) * metric_->at(k, l) * b.at(rj, l);
            acc = acc + gram * val;
        }
    }
    return sym::simplify(acc);
}

Expr FormCalc::energy_density_expr(const TBFormChart& J) const {
    return sym::simplify(Expr::constant(0.5) * inner_expr(J, J));
}

Expr FormCalc::laplace_scalar_expr(const Expr& f) const {
    const int d = dim_;
    std::vector<Expr> df(d), ddf;
    for (int a = 0; a < d; ++a) df[a] = sym::diff(f, chart_->coords[a]);
    Expr acc = Expr::constant(0.0);
    for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b) {
            if (metric_->conformal && a != b) continue;
            Expr hess = sym::diff(df[a], chart_->coords[b]);
            for (int m = 0; m < d; ++m) {
                const Expr& g = conn_->gamma_at(m, a, b);
                if (!g.is_zero()) hess = hess - g * df[m];
            }
            acc = metric_->conformal ? acc + hess : acc + metric_->inv_at(a, b) * hess;
        }
    if (metric_->conformal) acc = acc / metric_->factor;
    return sym::simplify(acc);
}

// ---------------------------------------------------------------------------
// numeric point operations (frame route)

namespace {

Env env_at(const Chart& chart, const FramedPoint& p) {
    Env env;
    for (std::size_t i = 0; i < p.x.size(); ++i) env.bind(chart.coords[i], p.x[i]);
    return env;
}

// omega(v_1, ..., v_p) as a coordinate vector
Eigen::VectorXd apply_form(const TBFormChart& w, const Env& env,
                           const std::vector<Eigen::VectorXd>& args) {
    const int d = w.dim;
    const int p = w.degree;
    Eigen::VectorXd out = Eigen::VectorXd::Zero(d);
    std::vector<int> I(std::max(p, 1));
    for (int r = 0; r < w.ranks(); ++r) {
        MultiIndex::unrank(d, p, r, I.data());
        // sum over permutations with signs = det of the arg components
        double coef;
        if (p == 0)
            coef = 1.0;
        else if (p == 1)
            coef = args[0][I[0]];
        else if (p == 2)
            coef = args[0][I[0]] * args[1][I[1]] - args[0][I[1]] * args[1][I[0]];
        else {
            Eigen::Matrix3d M;
            for (int s = 0; s < 3; ++s)
                for (int t = 0; t < 3; ++t) M(s, t) = args[s][I[t]];
            coef = M.determinant();
        }
        if (coef == 0.0) continue;
        for (int k = 0; k < d; ++k) {
            double c = w.at(r, k).eval(env);
            out[k] += coef * c;
        }
    }
    return out;
}

}  // namespace

TBForm acs_from_spec(const geom::ManifoldSpec& spec) {
    TBForm J;
    J.degree = 1;
    J.is_acs = true;
    const int d = spec.dim;
    for (const auto& jc : spec.j_charts) {
        TBFormChart c(d, 1);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) c.at(j, i) = jc[i * d + j];
        J.charts.push_back(std::move(c));
    }
    return J;
}

Eigen::VectorXd form_value(const TBFormChart& w, const Chart& chart, const FramedPoint& p,
                           const std::vector<Eigen::VectorXd>& args) {
    return apply_form(w, env_at(chart, p), args);
}

double pointwise_inner(const TBFormChart& a, const TBFormChart& b, const Chart& chart,
                       const FramedPoint& p) {
    if (a.degree != b.degree) throw std::invalid_argument("pointwise_inner: degree mismatch");
    const int d = a.dim;
    const int deg = a.degree;
    Env env = env_at(chart, p);
    double acc = 0.0;
    std::vector<int> I(std::max(deg, 1));
    for (int r = 0; r < MultiIndex::count(d, deg); ++r) {
        MultiIndex::unrank(d, deg, r, I.data());
        std::vector<Eigen::VectorXd> args;
        for (int s = 0; s < deg; ++s) args.push_back(p.frame.col(I[s]));
        Eigen::VectorXd va = apply_form(a, env, args);
        Eigen::VectorXd vb = (&a == &b) ? va : apply_form(b, env, args);
        acc += va.dot(p.g * vb);
    }
    return acc;
}

double energy_density(const TBFormChart& J, const Chart& chart, const FramedPoint& p) {
    return 0.5 * pointwise_inner(J, J, chart, p);
}

namespace {

struct FieldEval {
    Eigen::VectorXd value;
    Eigen::MatrixXd deriv;  // deriv(a, k) = d_a V^k
};

FieldEval eval_field(const std::vector<Expr>& comp, const Chart& chart, const Env& env) {
    const int d = chart.dim;
    FieldEval f;
    f.value.resize(d);
    f.deriv.resize(d, d);
    for (int k = 0; k < d; ++k) {
        f.value[k] = comp[k].eval(env);
        for (int a = 0; a < d; ++a) f.deriv(a, k) = sym::diff(comp[k], chart.coords[a]).eval(env);
    }
    return f;
}

// nabla_V W at the point
Eigen::VectorXd cov(const FieldEval& V, const FieldEval& W, const FramedPoint& p) {
    const int d = static_cast<int>(p.x.size());
    Eigen::VectorXd out = Eigen::VectorXd::Zero(d);
    for (int k = 0; k < d; ++k) {
        double acc = 0.0;
        for (int a = 0; a < d; ++a) {
            acc += V.value[a] * W.deriv(a, k);
            for (int m = 0; m < d; ++m) acc += V.value[a] * p.gamma_at(k, a, m) * W.value[m];
        }
        out[k] = acc;
    }
    return out;
}

Eigen::VectorXd bracket(const FieldEval& V, const FieldEval& W, const FramedPoint& p) {
    return cov(V, W, p) - cov(W, V, p);
}

}  // namespace

Eigen::VectorXd nijenhuis(const TBFormChart& J, const VectorField& X, const VectorField& Y,
                          const Chart& chart, const FramedPoint& p) {
    const int d = J.dim;
    Env env = env_at(chart, p);

    // JX as an expression field, so brackets see its derivatives
    auto apply_J = [&](const std::vector<Expr>& v) {
        std::vector<Expr> out(d, Expr::constant(0.0));
        for (int k = 0; k < d; ++k) {
            Expr acc = Expr::constant(0.0);
            for (int m = 0; m < d; ++m) acc = acc + J.at(m, k) * v[m];
            out[k] = acc;
        }
        return out;
    };

    FieldEval fX = eval_field(X.comp, chart, env);
    FieldEval fY = eval_field(Y.comp, chart, env);
    FieldEval fJX = eval_field(apply_J(X.comp), chart, env);
    FieldEval fJY = eval_field(apply_J(Y.comp), chart, env);

    Eigen::MatrixXd Jv(d, d);
    for (int k = 0; k < d; ++k)
        for (int m = 0; m < d; ++m) Jv(k, m) = J.at(m, k).eval(env);

    Eigen::VectorXd n = Jv * bracket(fJX, fY, p) + Jv * bracket(fX, fJY, p) + bracket(fX, fY, p) -
                        bracket(fJX, fJY, p);
    return n;
}

Eigen::VectorXd nijenhuis_tensor_oracle(const TBFormChart& J, const Eigen::VectorXd& X,
                                        const Eigen::VectorXd& Y, const Chart& chart,
                                        const FramedPoint& p) {
    const int d = J.dim;
    Env env;
    for (int i = 0; i < d; ++i) env.bind(chart.coords[i], p.x[i]);
    // values and coordinate derivatives of J
    std::vector<double> Jv(d * d), dJ(d * d * d);  // Jv[m*d+k] = J^k_m; dJ[a][m][k]
    for (int m = 0; m < d; ++m)
        for (int k = 0; k < d; ++k) {
            Jv[m * d + k] = J.at(m, k).eval(env);
            for (int a = 0; a < d; ++a)
                dJ[(a * d + m) * d + k] = sym::diff(J.at(m, k), chart.coords[a]).eval(env);
        }
    auto Jc = [&](int k, int m) { return Jv[m * d + k]; };          // J^k_m
    auto dJc = [&](int a, int k, int m) { return dJ[(a * d + m) * d + k]; };  // d_a J^k_m

    // N^a_bc = J^a_e (d_b J^e_c - d_c J^e_b) - J^m_b d_m J^a_c + J^m_c d_m J^a_b
    Eigen::VectorXd out = Eigen::VectorXd::Zero(d);
    for (int a = 0; a < d; ++a) {
        double acc = 0.0;
        for (int b = 0; b < d; ++b)
            for (int c = 0; c < d; ++c) {
                double t = 0.0;
                for (int e = 0; e < d; ++e) t += Jc(a, e) * (dJc(b, e, c) - dJc(c, e, b));
                for (int m = 0; m < d; ++m)
                    t += -Jc(m, b) * dJc(m, a, c) + Jc(m, c) * dJc(m, a, b);
                acc += t * X[b] * Y[c];
            }
        out[a] = acc;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Hermitian form, conjugation

HermitianFormData hermitian_form(const FormCalc& calc, const TBFormChart& J) {
    const Chart& chart = calc.chart();
    const MetricData& metric = calc.metric();
    const int d = J.dim;

    // compatibility precondition: J^T g J = g on deterministic chart samples
    {
        Rng rng(0xACD5u);
        for (int s = 0; s < 24; ++s) {
            Env env;
            std::vector<double> x(d);
            for (int i = 0; i < d; ++i) {
                double lo = chart.domain[i].first, hi = chart.domain[i].second;
                x[i] = 0.5 * (lo + hi) + 0.4 * (hi - lo) * (2.0 * rng.uniform() - 1.0);
                env.bind(chart.coords[i], x[i]);
            }
            Eigen::MatrixXd g(d, d), Jm(d, d);
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j) {
                    g(i, j) = metric.at(i, j).eval(env);
                    Jm(i, j) = J.at(j, i).eval(env);  // (Jm)_ij = J^i_j
                }
            double err = (Jm.transpose() * g * Jm - g).cwiseAbs().maxCoeff();
            if (err > 1e-8 * g.cwiseAbs().maxCoeff())
                throw std::invalid_argument("hermitian_form: J is not compatible with the metric");
        }
    }

    HermitianFormData out;
    out.omega.dim = d;
    out.omega.degree = 2;
    int n2 = MultiIndex::count(d, 2);
    out.omega.comp.assign(n2, Expr::constant(0.0));

    // omega_ij = <d_i, J d_j> = g_ik J^k_j
    auto omega_entry = [&](int i, int j) {
        Expr acc = Expr::constant(0.0);
        for (int k = 0; k < d; ++k) acc = acc + metric.at(i, k) * J.at(j, k);
        return acc;
    };
    std::vector<int> I(2);
    std::vector<Expr> omega_full(static_cast<std::size_t>(d) * d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) omega_full[i * d + j] = omega_entry(i, j);
    omega_full = sym::simplify_all(std::move(omega_full));
    for (int r = 0; r < n2; ++r) {
        MultiIndex::unrank(d, 2, r, I.data());
        out.omega.comp[r] = omega_full[I[0] * d + I[1]];
    }

    // (delta omega)_j = -g^{ab} (nabla_a omega)_{b j}
    const ChartConnection& conn = calc.connection();
    auto omega_at = [&](int i, int j) { return omega_full[i * d + j]; };
    out.delta_omega.assign(d, Expr::constant(0.0));
    for (int j = 0; j < d; ++j) {
        Expr acc = Expr::constant(0.0);
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b) {
                if (metric.conformal && a != b) continue;
                Expr nab = sym::diff(omega_at(b, j), chart.coords[a]);
                for (int m = 0; m < d; ++m) {
                    const Expr& g1 = conn.gamma_at(m, a, b);
                    if (!g1.is_zero()) nab = nab - g1 * omega_at(m, j);
                    const Expr& g2 = conn.gamma_at(m, a, j);
                    if (!g2.is_zero()) nab = nab - g2 * omega_at(b, m);
                }
                acc = metric.conformal ? acc + nab : acc + metric.inv_at(a, b) * nab;
            }
        if (metric.conformal) acc = acc / metric.factor;
        out.delta_omega[j] = sym::neg(acc);
    }
    out.delta_omega = sym::simplify_all(std::move(out.delta_omega));

    // d omega (coordinate exterior derivative; zero object when dim < 3)
    out.d_omega.dim = d;
    out.d_omega.degree = 3;
    int n3 = MultiIndex::count(d, 3);
    out.d_omega.comp.assign(n3, Expr::constant(0.0));
    std::vector<int> K(3);
    for (int r = 0; r < n3; ++r) {
        MultiIndex::unrank(d, 3, r, K.data());
        Expr acc = sym::diff(omega_at(K[1], K[2]), chart.coords[K[0]]) -
                   sym::diff(omega_at(K[0], K[2]), chart.coords[K[1]]) +
                   sym::diff(omega_at(K[0], K[1]), chart.coords[K[2]]);
        out.d_omega.comp[r] = sym::simplify(acc);
    }
    return out;
}

TBFormChart conjugate_acs(const TBFormChart& J0, const std::vector<Expr>& B, double eps) {
    const int d = J0.dim;
    std::vector<Expr> A(static_cast<std::size_t>(d) * d);
    bool constant = true;
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            A[i * d + j] = (i == j ? Expr::constant(1.0) : Expr::constant(0.0)) +
                           Expr::constant(eps) * B[i * d + j];
            constant = constant && A[i * d + j].is_constant();
        }

    std::vector<Expr> Ainv(static_cast<std::size_t>(d) * d);
    if (constant) {
        Eigen::MatrixXd Am(d, d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) Am(i, j) = A[i * d + j].constant_value();
        if (std::abs(Am.determinant()) < 1e-6)
            throw std::invalid_argument("conjugate_acs: A numerically singular");
        Eigen::MatrixXd Ai = Am.inverse();
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) Ainv[i * d + j] = Expr::constant(Ai(i, j));
    } else if (d <= 4) {
        Expr det;
        geom::symbolic_matrix_inverse(d, A, Ainv, det);
    } else {
        throw std::invalid_argument("conjugate_acs: non-constant B requires dim <= 4");
    }

    // J' = A J0 A^{-1}; storage is J.at(j, i) = J^i_j
    TBFormChart out(d, 1);
    out.dim = d;
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            Expr acc = Expr::constant(0.0);
            for (int k = 0; k < d; ++k)
                for (int l = 0; l < d; ++l)
                    acc = acc + A[i * d + k] * J0.at(l, k) * Ainv[l * d + j];
            out.at(j, i) = acc;
        }
    out.comp = sym::simplify_all(std::move(out.comp));
    return out;
}

double min_abs_det(const std::vector<Expr>& B, double eps, const Chart& chart,
                   const std::vector<std::vector<double>>& points) {
    const int d = chart.dim;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& x : points) {
        Env env;
        for (int i = 0; i < d; ++i) env.bind(chart.coords[i], x[i]);
        Eigen::MatrixXd A(d, d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
                A(i, j) = (i == j ? 1.0 : 0.0) + eps * B[i * d + j].eval(env);
        best = std::min(best, std::abs(A.determinant()));
    }
    return best;
}

}  // namespace bochner::jcalc
