#include "bochner/octonion.hpp"

#include <cassert>
#include <stdexcept>

namespace bochner::geom {

namespace {

// (a,b)(c,d) = (ac - d*b, da + bc*) with * the lower-level conjugation;
// conj(e_0) = e_0 and conj(e_i) = -e_i for i > 0 at every level.
std::pair<int, int> cd_mul(int level, int i, int j) {
    if (level == 0) return {1, 0};
    int h = 1 << (level - 1);
    bool ih = i >= h, jh = j >= h;
    if (!ih && !jh) return cd_mul(level - 1, i, j);
    if (!ih && jh) {  // (a,0)(0,d) = (0, d a)
        auto [s, k] = cd_mul(level - 1, j - h, i);
        return {s, k + h};
    }
    if (ih && !jh) {  // (0,b)(c,0) = (0, b c*)
        auto [s, k] = cd_mul(level - 1, i - h, j);
        return {j == 0 ? s : -s, k + h};
    }
    // (0,b)(0,d) = (-d* b, 0)
    auto [s, k] = cd_mul(level - 1, j - h, i - h);
    return {(j - h) == 0 ? -s : s, k};
}

}  // namespace

CayleyDickson::CayleyDickson(int level) : dim_(1 << level) {
    table_.resize(static_cast<std::size_t>(dim_) * dim_);
    for (int i = 0; i < dim_; ++i)
        for (int j = 0; j < dim_; ++j) table_[i * dim_ + j] = cd_mul(level, i, j);
}

CrossProduct::CrossProduct(int dim) : dim_(dim) {
    if (dim != 3 && dim != 7) throw std::invalid_argument("cross product requires dim 3 or 7");
    CayleyDickson alg(dim == 3 ? 2 : 3);
    for (int a = 1; a <= dim; ++a)
        for (int b = 1; b <= dim; ++b) {
            auto [s, k] = alg.mul(a, b);
            if (k == 0) continue;  // real part, -<u,v>
            entries_.push_back({a - 1, b - 1, k - 1, static_cast<double>(s)});
        }
}

std::vector<double> CrossProduct::cross(const std::vector<double>& u,
                                        const std::vector<double>& v) const {
    assert(static_cast<int>(u.size()) == dim_ && static_cast<int>(v.size()) == dim_);
    std::vector<double> w(dim_, 0.0);
    for (const Entry& e : entries_) w[e.c] += e.k * u[e.a] * v[e.b];
    return w;
}

}  // namespace bochner::geom
