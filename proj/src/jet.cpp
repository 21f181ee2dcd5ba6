#include "bochner/jet.hpp"

#include <cassert>
#include <cmath>
#include <mutex>
#include <stdexcept>

namespace bochner {

namespace {

std::uint64_t pack(const std::array<std::uint8_t, 8>& e) {
    std::uint64_t p = 0;
    for (int i = 0; i < 8; ++i) p |= static_cast<std::uint64_t>(e[i]) << (8 * i);
    return p;
}

void enumerate(int dim, int order, int pos, int remaining, std::array<std::uint8_t, 8>& cur,
               std::vector<std::array<std::uint8_t, 8>>& out) {
    if (pos == dim) {
        out.push_back(cur);
        return;
    }
    for (int k = 0; k <= remaining; ++k) {
        cur[pos] = static_cast<std::uint8_t>(k);
        enumerate(dim, order, pos + 1, remaining - k, cur, out);
    }
    cur[pos] = 0;
}

}  // namespace

JetSpace::JetSpace(int dim, int order) : dim_(dim), order_(order) {
    assert(dim >= 1 && dim <= 8 && order >= 1 && order <= 3);
    // enumerate by total degree, lex within a degree
    std::vector<std::array<std::uint8_t, 8>> all;
    std::array<std::uint8_t, 8> cur{};
    enumerate(dim, order, 0, order, cur, all);
    for (int deg = 0; deg <= order; ++deg)
        for (auto& e : all) {
            int t = 0;
            for (int i = 0; i < dim; ++i) t += e[i];
            if (t == deg) expo_.push_back(e);
        }
    for (int k = 0; k < size(); ++k) lookup_[pack(expo_[k])] = k;

    var_index_.resize(dim);
    for (int i = 0; i < dim; ++i) {
        std::array<std::uint8_t, 8> e{};
        e[i] = 1;
        var_index_[i] = lookup_.at(pack(e));
    }

    mult_.resize(size());
    for (int k = 0; k < size(); ++k) {
        double m = 1.0;
        for (int i = 0; i < dim; ++i)
            for (int f = 2; f <= expo_[k][i]; ++f) m *= f;
        mult_[k] = m;
    }

    prod_.assign(static_cast<std::size_t>(size()) * size(), -1);
    for (int i = 0; i < size(); ++i)
        for (int j = 0; j < size(); ++j) {
            std::array<std::uint8_t, 8> s{};
            int tot = 0;
            for (int v = 0; v < dim; ++v) {
                s[v] = static_cast<std::uint8_t>(expo_[i][v] + expo_[j][v]);
                tot += s[v];
            }
            if (tot <= order) prod_[i * size() + j] = lookup_.at(pack(s));
        }
}

const JetSpace* JetSpace::get(int dim, int order) {
    static std::mutex mu;
    static std::unordered_map<int, std::unique_ptr<JetSpace>> cache;
    std::lock_guard<std::mutex> lock(mu);
    int key = dim * 16 + order;
    auto it = cache.find(key);
    if (it == cache.end()) it = cache.emplace(key, std::unique_ptr<JetSpace>(new JetSpace(dim, order))).first;
    return it->second.get();
}

int JetSpace::index_of(const std::array<std::uint8_t, 8>& e) const {
    auto it = lookup_.find(pack(e));
    return it == lookup_.end() ? -1 : it->second;
}

double Jet::d1(int i) const { return c_[sp_->index_of_var(i)]; }

double Jet::d2(int i, int j) const {
    std::array<std::uint8_t, 8> e{};
    e[i] += 1;
    e[j] += 1;
    int k = sp_->index_of(e);
    return c_[k] * sp_->multiplicity(k);
}

double Jet::d3(int i, int j, int k) const {
    std::array<std::uint8_t, 8> e{};
    e[i] += 1;
    e[j] += 1;
    e[k] += 1;
    int idx = sp_->index_of(e);
    return c_[idx] * sp_->multiplicity(idx);
}

Jet Jet::operator-() const {
    Jet r = *this;
    for (double& x : r.c_) x = -x;
    return r;
}

Jet& Jet::operator+=(const Jet& o) {
    for (std::size_t i = 0; i < c_.size(); ++i) c_[i] += o.c_[i];
    return *this;
}

Jet& Jet::operator-=(const Jet& o) {
    for (std::size_t i = 0; i < c_.size(); ++i) c_[i] -= o.c_[i];
    return *this;
}

Jet operator+(const Jet& a, const Jet& b) {
    Jet r = a;
    r += b;
    return r;
}

Jet operator-(const Jet& a, const Jet& b) {
    Jet r = a;
    r -= b;
    return r;
}

Jet operator*(const Jet& a, double s) {
    Jet r = a;
    for (double& x : r.c_) x *= s;
    return r;
}

Jet operator*(double s, const Jet& a) { return a * s; }

Jet operator*(const Jet& a, const Jet& b) {
    const JetSpace* sp = a.sp_;
    int n = sp->size();
    Jet r(sp, 0.0);
    for (int i = 0; i < n; ++i) {
        double ai = a.c_[i];
        if (ai == 0.0) continue;
        for (int j = 0; j < n; ++j) {
            int k = sp->product_index(i, j);
            if (k >= 0) r.c_[k] += ai * b.c_[j];
        }
    }
    return r;
}

Jet Jet::compose(const Jet& a, const double* df) {
    const JetSpace* sp = a.sp_;
    int order = sp->order();
    // nilpotent part
    Jet p = a;
    p.c_[0] = 0.0;
    // Horner over p with scaled derivative coefficients
    double fact = 1.0;
    std::vector<double> coef(order + 1);
    for (int k = 0; k <= order; ++k) {
        if (k >= 2) fact *= k;
        coef[k] = df[k] / fact;
    }
    Jet r = Jet::constant(sp, coef[order]);
    for (int k = order - 1; k >= 0; --k) {
        r = r * p;
        r.c_[0] += coef[k];
    }
    return r;
}

Jet sin(const Jet& a) {
    double s = std::sin(a.value()), c = std::cos(a.value());
    double df[4] = {s, c, -s, -c};
    return Jet::compose(a, df);
}

Jet cos(const Jet& a) {
    double s = std::sin(a.value()), c = std::cos(a.value());
    double df[4] = {c, -s, -c, s};
    return Jet::compose(a, df);
}

Jet exp(const Jet& a) {
    double e = std::exp(a.value());
    double df[4] = {e, e, e, e};
    return Jet::compose(a, df);
}

Jet sqrt(const Jet& a) {
    double v = a.value();
    if (v <= 0.0) throw std::domain_error("jet sqrt of non-positive value");
    double s = std::sqrt(v);
    double df[4] = {s, 0.5 / s, -0.25 / (s * v), 0.375 / (s * v * v)};
    return Jet::compose(a, df);
}

namespace {
Jet inverse(const Jet& a) {
    double v = a.value();
    if (v == 0.0) throw std::domain_error("jet division by zero");
    double iv = 1.0 / v;
    double df[4] = {iv, -iv * iv, 2.0 * iv * iv * iv, -6.0 * iv * iv * iv * iv};
    return Jet::compose(a, df);
}
}  // namespace

Jet operator/(const Jet& a, const Jet& b) { return a * inverse(b); }

Jet Jet::truncated(const JetSpace* to) const {
    Jet r(to, 0.0);
    int n = to->size();
    for (int k = 0; k < n; ++k) r.c_[k] = c_[k];
    return r;
}

Jet Jet::derivative(int i, const JetSpace* to) const {
    Jet r(to, 0.0);
    for (int k = 0; k < to->size(); ++k) {
        std::array<std::uint8_t, 8> e = to->exponents(k);
        e[i] += 1;
        int src = sp_->index_of(e);
        r.c_[k] = c_[src] * (e[i]);
    }
    return r;
}

Jet powi(const Jet& a, int k) {
    if (k < 0) return powi(inverse(a), -k);
    Jet r = Jet::constant(a.space(), 1.0);
    Jet b = a;
    while (k) {
        if (k & 1) r = r * b;
        if (k >>= 1) b = b * b;
    }
    return r;
}

}  // namespace bochner
