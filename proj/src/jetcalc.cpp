#include "bochner/jetcalc.hpp"

#include <cassert>
#include <stdexcept>

namespace bochner::jetcalc {

using sym::Expr;
using sym::Program;

struct JetCalc::Frame {
    const JetSpace* sp2;
    const JetSpace* sp1;
    std::vector<Jet> gamma;   // [k][i][j], order >= 1
    std::vector<Jet> ginv;    // [a][b], order >= 1
    std::vector<double> riem;  // [l][k][i][j]
    std::vector<Jet> g;        // [i][j] (generic mode only; may be empty)
};

JetCalc::JetCalc(const Chart& chart, const MetricData& metric, const ChartConnection& conn)
    : chart_(&chart), dim_(metric.dim), generic_(false) {
    if (!conn.symbolic) throw std::invalid_argument("JetCalc: use generic() for pointwise-mode charts");
    gamma_prog_ = Program::compile(conn.gamma, chart.coords);
    ginv_prog_ = Program::compile(metric.ginv, chart.coords);
    if (!conn.riemann.empty()) riem_prog_ = Program::compile(conn.riemann, chart.coords);
}

JetCalc JetCalc::generic(const Chart& chart, const MetricData& metric) {
    JetCalc jc;
    jc.chart_ = &chart;
    jc.dim_ = metric.dim;
    jc.generic_ = true;
    jc.metric_prog_ = Program::compile(metric.g, chart.coords);
    return jc;
}

namespace {

// Gauss-Jordan inverse over the jet ring (pivot constant terms must be
// nonzero; fine for positive definite metrics).
std::vector<Jet> jet_matrix_inverse(const std::vector<Jet>& m, int d, const JetSpace* sp) {
    std::vector<Jet> a = m;
    std::vector<Jet> inv(static_cast<std::size_t>(d) * d, Jet::constant(sp, 0.0));
    for (int i = 0; i < d; ++i) inv[i * d + i] = Jet::constant(sp, 1.0);
    for (int col = 0; col < d; ++col) {
        int piv = col;
        for (int r = col + 1; r < d; ++r)
            if (std::abs(a[r * d + col].value()) > std::abs(a[piv * d + col].value())) piv = r;
        if (a[piv * d + col].value() == 0.0) throw std::runtime_error("jet inverse: singular matrix");
        if (piv != col)
            for (int c = 0; c < d; ++c) {
                std::swap(a[piv * d + c], a[col * d + c]);
                std::swap(inv[piv * d + c], inv[col * d + c]);
            }
        Jet pinv = Jet::constant(sp, 1.0) / a[col * d + col];
        for (int c = 0; c < d; ++c) {
            a[col * d + c] = a[col * d + c] * pinv;
            inv[col * d + c] = inv[col * d + c] * pinv;
        }
        for (int r = 0; r < d; ++r) {
            if (r == col) continue;
            Jet f = a[r * d + col];
            if (f.value() == 0.0) {
                bool zero = true;
                for (int k = 0; k < sp->size(); ++k)
                    if (f.coeff(k) != 0.0) {
                        zero = false;
                        break;
                    }
                if (zero) continue;
            }
            for (int c = 0; c < d; ++c) {
                a[r * d + c] = a[r * d + c] - f * a[col * d + c];
                inv[r * d + c] = inv[r * d + c] - f * inv[col * d + c];
            }
        }
    }
    return inv;
}

template <typename T>
T signed_lookup(const std::vector<T>& comp, int d, int p, const int* idx, int k, const T& zero) {
    int sign;
    int r = MultiIndex::lookup(d, p, idx, sign);
    if (sign == 0) return zero;
    T v = comp[static_cast<std::size_t>(r) * d + k];
    return sign > 0 ? v : -v;
}

double signed_lookup_val(const std::vector<double>& comp, int d, int p, const int* idx, int k) {
    int sign;
    int r = MultiIndex::lookup(d, p, idx, sign);
    if (sign == 0) return 0.0;
    return sign * comp[static_cast<std::size_t>(r) * d + k];
}

}  // namespace

void JetCalc::load_frame(Frame& f, const double* x) const {
    const int d = dim_;
    f.sp2 = JetSpace::get(d, 2);
    f.sp1 = JetSpace::get(d, 1);

    if (!generic_) {
        {
            std::vector<Jet> vars, scratch(gamma_prog_.slot_count());
            for (int i = 0; i < d; ++i) vars.push_back(Jet::variable(f.sp1, x[i], i));
            f.gamma.resize(gamma_prog_.output_count());
            gamma_prog_.eval(vars.data(), scratch.data(), f.gamma.data());
            scratch.assign(ginv_prog_.slot_count(), Jet());
            f.ginv.resize(ginv_prog_.output_count());
            ginv_prog_.eval(vars.data(), scratch.data(), f.ginv.data());
        }
        {
            std::vector<double> vars(x, x + d), scratch(riem_prog_.slot_count());
            f.riem.resize(riem_prog_.output_count());
            riem_prog_.eval_double(vars.data(), scratch.data(), f.riem.data());
        }
        return;
    }

    // generic mode: third-order metric jets carry everything
    const JetSpace* sp3 = JetSpace::get(d, 3);
    const JetSpace* sp2 = f.sp2;
    std::vector<Jet> vars;
    for (int i = 0; i < d; ++i) vars.push_back(Jet::variable(sp3, x[i], i));
    std::vector<Jet> scratch(metric_prog_.slot_count());
    std::vector<Jet> g3(metric_prog_.output_count());
    metric_prog_.eval(vars.data(), scratch.data(), g3.data());

    std::vector<Jet> ginv3 = jet_matrix_inverse(g3, d, sp3);

    // Gamma^k_ij at order 2
    std::vector<Jet> dg(static_cast<std::size_t>(d) * d * d, Jet());  // [m][i][j] = d_m g_ij
    for (int m = 0; m < d; ++m)
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) dg[(m * d + i) * d + j] = g3[i * d + j].derivative(m, sp2);
    f.gamma.assign(static_cast<std::size_t>(d) * d * d, Jet::constant(sp2, 0.0));
    for (int k = 0; k < d; ++k)
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) {
                Jet acc = Jet::constant(sp2, 0.0);
                for (int l = 0; l < d; ++l) {
                    Jet t = dg[(i * d + j) * d + l] + dg[(j * d + i) * d + l] - dg[(l * d + i) * d + j];
                    acc += ginv3[k * d + l].truncated(sp2) * t;
                }
                f.gamma[(k * d + i) * d + j] = acc * 0.5;
            }

    // curvature values (paper sign)
    f.riem.assign(static_cast<std::size_t>(d) * d * d * d, 0.0);
    auto gam = [&](int k, int i, int j) { return f.gamma[(k * d + i) * d + j]; };
    for (int l = 0; l < d; ++l)
        for (int k = 0; k < d; ++k)
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j) {
                    double acc = gam(l, i, k).d1(j) - gam(l, j, k).d1(i);
                    for (int m = 0; m < d; ++m)
                        acc += gam(l, j, m).value() * gam(m, i, k).value() -
                               gam(l, i, m).value() * gam(m, j, k).value();
                    f.riem[((l * d + k) * d + i) * d + j] = acc;
                }

    f.ginv.resize(ginv3.size());
    f.g.resize(g3.size());
    for (std::size_t i = 0; i < ginv3.size(); ++i) {
        f.ginv[i] = ginv3[i].truncated(sp2);
        f.g[i] = g3[i].truncated(sp2);
    }
    // reduce gamma to the order the pipeline needs alongside ginv
}

namespace {

// covariant derivative of a degree-q form with jet components (order k ->
// order k-1 output), extra == 0
std::vector<Jet> jet_nabla(const std::vector<Jet>& w, int d, int q, const std::vector<Jet>& gamma,
                           const JetSpace* out_sp) {
    int nr = MultiIndex::count(d, q);
    std::vector<Jet> out(static_cast<std::size_t>(d) * nr * d, Jet::constant(out_sp, 0.0));
    std::vector<int> I(std::max(q, 1)), tup(std::max(q, 1));
    Jet zero = Jet::constant(out_sp, 0.0);
    for (int a = 0; a < d; ++a)
        for (int r = 0; r < nr; ++r) {
            MultiIndex::unrank(d, q, r, I.data());
            for (int k = 0; k < d; ++k) {
                Jet acc = w[static_cast<std::size_t>(r) * d + k].derivative(a, out_sp);
                for (int m = 0; m < d; ++m) {
                    const Jet& G = gamma[(k * d + a) * d + m];
                    acc += G.truncated(out_sp) * w[static_cast<std::size_t>(r) * d + m].truncated(out_sp);
                }
                for (int s = 0; s < q; ++s) {
                    std::copy(I.begin(), I.begin() + q, tup.begin());
                    for (int m = 0; m < d; ++m) {
                        const Jet& G = gamma[(m * d + a) * d + I[s]];
                        tup[s] = m;
                        int sign;
                        int rr = MultiIndex::lookup(d, q, tup.data(), sign);
                        if (sign == 0) continue;
                        Jet term = G.truncated(out_sp) *
                                   w[static_cast<std::size_t>(rr) * d + k].truncated(out_sp);
                        acc = sign > 0 ? acc - term : acc + term;
                    }
                }
                out[(static_cast<std::size_t>(a) * nr + r) * d + k] = acc;
            }
        }
    return out;
}

// covariant derivative of a degree-q form with order-1 jet components,
// producing plain values
std::vector<double> jet_nabla_values(const std::vector<Jet>& w, int d, int q,
                                     const std::vector<Jet>& gamma) {
    int nr = MultiIndex::count(d, q);
    std::vector<double> out(static_cast<std::size_t>(d) * nr * d, 0.0);
    std::vector<int> I(std::max(q, 1)), tup(std::max(q, 1));
    for (int a = 0; a < d; ++a)
        for (int r = 0; r < nr; ++r) {
            MultiIndex::unrank(d, q, r, I.data());
            for (int k = 0; k < d; ++k) {
                double acc = w[static_cast<std::size_t>(r) * d + k].d1(a);
                for (int m = 0; m < d; ++m)
                    acc += gamma[(k * d + a) * d + m].value() *
                           w[static_cast<std::size_t>(r) * d + m].value();
                for (int s = 0; s < q; ++s) {
                    std::copy(I.begin(), I.begin() + q, tup.begin());
                    for (int m = 0; m < d; ++m) {
                        double G = gamma[(m * d + a) * d + I[s]].value();
                        if (G == 0.0) continue;
                        tup[s] = m;
                        int sign;
                        int rr = MultiIndex::lookup(d, q, tup.data(), sign);
                        if (sign == 0) continue;
                        acc -= sign * G * w[static_cast<std::size_t>(rr) * d + k].value();
                    }
                }
                out[(static_cast<std::size_t>(a) * nr + r) * d + k] = acc;
            }
        }
    return out;
}

// alternation: degree q -> q+1 from a nabla stack N[a][r][k]
template <typename T>
std::vector<T> alternate(const std::vector<T>& N, int d, int q, const T& zero) {
    int nr_out = MultiIndex::count(d, q + 1);
    int nr_in = MultiIndex::count(d, q);
    std::vector<T> out(static_cast<std::size_t>(nr_out) * d, zero);
    std::vector<int> J(q + 1), rest(std::max(q, 1));
    for (int r = 0; r < nr_out; ++r) {
        MultiIndex::unrank(d, q + 1, r, J.data());
        for (int k = 0; k < d; ++k) {
            T acc = zero;
            for (int s = 0; s <= q; ++s) {
                int pos = 0;
                for (int t = 0; t <= q; ++t)
                    if (t != s) rest[pos++] = J[t];
                int rr = q == 0 ? 0 : MultiIndex::rank(d, q, rest.data());
                const T& term = N[(static_cast<std::size_t>(J[s]) * nr_in + rr) * d + k];
                acc = (s % 2 == 0) ? acc + term : acc - term;
            }
            out[static_cast<std::size_t>(r) * d + k] = acc;
        }
    }
    return out;
}

// delta: degree q -> q-1 from a nabla stack, contracting with ginv
template <typename T, typename G>
std::vector<T> contract_delta(const std::vector<T>& N, int d, int q, const G& ginv_at, const T& zero) {
    int nr_out = MultiIndex::count(d, q - 1);
    int nr_in = MultiIndex::count(d, q);
    std::vector<T> out(static_cast<std::size_t>(nr_out) * d, zero);
    std::vector<int> I(std::max(q - 1, 1)), tup(q);
    for (int r = 0; r < nr_out; ++r) {
        if (q - 1 > 0) MultiIndex::unrank(d, q - 1, r, I.data());
        for (int k = 0; k < d; ++k) {
            T acc = zero;
            for (int a = 0; a < d; ++a)
                for (int b = 0; b < d; ++b) {
                    tup[0] = b;
                    std::copy(I.begin(), I.begin() + (q - 1), tup.begin() + 1);
                    int sign;
                    int rr = MultiIndex::lookup(d, q, tup.data(), sign);
                    if (sign == 0) continue;
                    T term = ginv_at(a, b) * N[(static_cast<std::size_t>(a) * nr_in + rr) * d + k];
                    acc = sign > 0 ? acc - term : acc + term;
                }
            out[static_cast<std::size_t>(r) * d + k] = acc;
        }
    }
    return out;
}

}  // namespace

JetCalc::FormOps JetCalc::form_ops(const TBFormChart& w, const double* x) const {
    const int d = dim_;
    const int p = w.degree;
    assert(p >= 1 && p <= 2);
    Frame f;
    load_frame(f, x);

    // omega as order-2 jets
    Program wprog = Program::compile(w.comp, chart_->coords);
    std::vector<Jet> vars;
    for (int i = 0; i < d; ++i) vars.push_back(Jet::variable(f.sp2, x[i], i));
    std::vector<Jet> scratch(wprog.slot_count());
    std::vector<Jet> w2(wprog.output_count());
    wprog.eval(vars.data(), scratch.data(), w2.data());

    Jet jzero1 = Jet::constant(f.sp1, 0.0);

    // first-stage operators as order-1 jets
    std::vector<Jet> N1 = jet_nabla(w2, d, p, f.gamma, f.sp1);
    std::vector<Jet> dw = alternate(N1, d, p, jzero1);
    auto ginv_jet = [&](int a, int b) { return f.ginv[a * d + b].truncated(f.sp1); };
    std::vector<Jet> deltaw = contract_delta(N1, d, p, ginv_jet, jzero1);

    FormOps ops;
    ops.d.resize(dw.size());
    for (std::size_t i = 0; i < dw.size(); ++i) ops.d[i] = dw[i].value();
    ops.delta.resize(deltaw.size());
    for (std::size_t i = 0; i < deltaw.size(); ++i) ops.delta[i] = deltaw[i].value();

    // second stage: values
    auto ginv_val = [&](int a, int b) { return f.ginv[a * d + b].value(); };

    std::vector<double> n_dw = jet_nabla_values(dw, d, p + 1, f.gamma);
    std::vector<double> delta_dw = contract_delta(n_dw, d, p + 1, ginv_val, 0.0);

    std::vector<double> n_deltaw = jet_nabla_values(deltaw, d, p - 1, f.gamma);
    std::vector<double> d_deltaw = alternate(n_deltaw, d, p - 1, 0.0);

    ops.laplace.resize(delta_dw.size());
    for (std::size_t i = 0; i < ops.laplace.size(); ++i) ops.laplace[i] = delta_dw[i] + d_deltaw[i];

    // rough laplacian: contract the second covariant derivative; the
    // extra-slot correction uses the same jet stack
    {
        int nr = MultiIndex::count(d, p);
        std::vector<double> rough(static_cast<std::size_t>(nr) * d, 0.0);
        std::vector<int> I(p), tup(p);
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b) {
                double gv = ginv_val(a, b);
                if (gv == 0.0) continue;
                for (int r = 0; r < nr; ++r) {
                    MultiIndex::unrank(d, p, r, I.data());
                    for (int k = 0; k < d; ++k) {
                        // (nabla_a N)_{b, I}^k
                        std::size_t flat = (static_cast<std::size_t>(b) * nr + r) * d + k;
                        double acc = N1[flat].d1(a);
                        for (int m = 0; m < d; ++m) {
                            acc += f.gamma[(k * d + a) * d + m].value() *
                                   N1[(static_cast<std::size_t>(b) * nr + r) * d + m].value();
                            acc -= f.gamma[(m * d + a) * d + b].value() *
                                   N1[(static_cast<std::size_t>(m) * nr + r) * d + k].value();
                        }
                        for (int s = 0; s < p; ++s) {
                            std::copy(I.begin(), I.begin() + p, tup.begin());
                            for (int m = 0; m < d; ++m) {
                                double G = f.gamma[(m * d + a) * d + I[s]].value();
                                if (G == 0.0) continue;
                                tup[s] = m;
                                int sign;
                                int rr = MultiIndex::lookup(d, p, tup.data(), sign);
                                if (sign == 0) continue;
                                acc -= sign * G *
                                       N1[(static_cast<std::size_t>(b) * nr + rr) * d + k].value();
                            }
                        }
                        rough[static_cast<std::size_t>(r) * d + k] += gv * acc;
                    }
                }
            }
        ops.rough = std::move(rough);
    }

    // Weitzenboeck curvature term from R values and omega values
    {
        int nr = MultiIndex::count(d, p);
        std::vector<double> wv(w2.size());
        for (std::size_t i = 0; i < w2.size(); ++i) wv[i] = w2[i].value();
        std::vector<double> S(static_cast<std::size_t>(nr) * d, 0.0);
        auto R = [&](int l, int k, int i, int j) { return f.riem[((l * d + k) * d + i) * d + j]; };
        std::vector<int> I(p), tup(p), rep(p);
        for (int r = 0; r < nr; ++r) {
            MultiIndex::unrank(d, p, r, I.data());
            for (int k = 0; k < d; ++k) {
                double acc = 0.0;
                for (int s = 0; s < p; ++s) {
                    double sgn = (s % 2 == 0) ? -1.0 : 1.0;  // (-1)^{s+1} with 1-based slots
                    for (int a = 0; a < d; ++a)
                        for (int b = 0; b < d; ++b) {
                            double gv = ginv_val(a, b);
                            if (gv == 0.0) continue;
                            tup[0] = b;
                            int pos = 1;
                            for (int t = 0; t < p; ++t)
                                if (t != s) tup[pos++] = I[t];
                            double term = 0.0;
                            for (int l = 0; l < d; ++l) {
                                double rv = R(k, l, a, I[s]);
                                if (rv != 0.0) term += rv * signed_lookup_val(wv, d, p, tup.data(), l);
                            }
                            for (int q = 0; q < p; ++q)
                                for (int m = 0; m < d; ++m) {
                                    double rv = R(m, tup[q], a, I[s]);
                                    if (rv == 0.0) continue;
                                    std::copy(tup.begin(), tup.end(), rep.begin());
                                    rep[q] = m;
                                    term -= rv * signed_lookup_val(wv, d, p, rep.data(), k);
                                }
                            acc += sgn * gv * term;
                        }
                }
                S[static_cast<std::size_t>(r) * d + k] = acc;
            }
        }
        ops.weitzenbock = std::move(S);
    }
    return ops;
}

double JetCalc::laplace_scalar(const Expr& f, const double* x) const {
    const int d = dim_;
    Frame fr;
    load_frame(fr, x);
    Program prog = Program::compile({f}, chart_->coords);
    std::vector<Jet> vars;
    for (int i = 0; i < d; ++i) vars.push_back(Jet::variable(fr.sp2, x[i], i));
    std::vector<Jet> scratch(prog.slot_count());
    std::vector<Jet> out(1);
    prog.eval(vars.data(), scratch.data(), out.data());
    double acc = 0.0;
    for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b) {
            double gv = fr.ginv[a * d + b].value();
            if (gv == 0.0) continue;
            double hess = out[0].d2(a, b);
            for (int m = 0; m < d; ++m) hess -= fr.gamma[(m * d + a) * d + b].value() * out[0].d1(m);
            acc += gv * hess;
        }
    return acc;
}

JetCalc::GeometryValues JetCalc::geometry_values(const double* x) const {
    const int d = dim_;
    Frame f;
    load_frame(f, x);
    GeometryValues gv;
    gv.ginv.resize(d, d);
    gv.g.resize(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) gv.ginv(i, j) = f.ginv[i * d + j].value();
    if (!f.g.empty()) {
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) gv.g(i, j) = f.g[i * d + j].value();
    } else {
        gv.g = gv.ginv.inverse();
    }
    gv.gamma.resize(f.gamma.size());
    for (std::size_t i = 0; i < f.gamma.size(); ++i) gv.gamma[i] = f.gamma[i].value();
    gv.riemann = f.riem;
    return gv;
}

}  // namespace bochner::jetcalc
