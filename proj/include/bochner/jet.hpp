#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <unordered_map>
#include <vector>

namespace bochner {

/// Shared descriptor for truncated Taylor arithmetic in `dim` variables up to
/// total degree `order` (1..3). Holds the monomial basis and the product
/// index table. Instances are cached per (dim, order).
class JetSpace {
public:
    static const JetSpace* get(int dim, int order);

    int dim() const { return dim_; }
    int order() const { return order_; }
    int size() const { return static_cast<int>(expo_.size()); }

    int index_of_var(int i) const { return var_index_[i]; }
    /// Basis index of the monomial with the given exponents, or -1.
    int index_of(const std::array<std::uint8_t, 8>& e) const;
    int product_index(int i, int j) const { return prod_[i * size() + j]; }
    /// alpha! for basis monomial k (converts coefficients to derivatives).
    double multiplicity(int k) const { return mult_[k]; }
    const std::array<std::uint8_t, 8>& exponents(int k) const { return expo_[k]; }

private:
    JetSpace(int dim, int order);
    int dim_, order_;
    std::vector<std::array<std::uint8_t, 8>> expo_;
    std::vector<int> var_index_;
    std::vector<int> prod_;
    std::vector<double> mult_;
    std::unordered_map<std::uint64_t, int> lookup_;
};

/// Truncated Taylor polynomial (value plus derivatives) around a point.
/// Exact through the space's order; the workhorse of the numeric-pointwise
/// fallback pipeline.
class Jet {
public:
    Jet() : sp_(nullptr) {}
    Jet(const JetSpace* sp, double value) : sp_(sp), c_(sp->size(), 0.0) { c_[0] = value; }

    static Jet constant(const JetSpace* sp, double v) { return Jet(sp, v); }
    static Jet variable(const JetSpace* sp, double v, int i) {
        Jet j(sp, v);
        j.c_[sp->index_of_var(i)] = 1.0;
        return j;
    }

    const JetSpace* space() const { return sp_; }
    double value() const { return c_[0]; }
    double d1(int i) const;
    double d2(int i, int j) const;
    double d3(int i, int j, int k) const;
    double coeff(int k) const { return c_[k]; }

    Jet operator-() const;
    Jet& operator+=(const Jet& o);
    Jet& operator-=(const Jet& o);

    friend Jet operator+(const Jet& a, const Jet& b);
    friend Jet operator-(const Jet& a, const Jet& b);
    friend Jet operator*(const Jet& a, const Jet& b);
    friend Jet operator/(const Jet& a, const Jet& b);
    friend Jet operator*(const Jet& a, double s);
    friend Jet operator*(double s, const Jet& a);

    friend Jet sin(const Jet& a);
    friend Jet cos(const Jet& a);
    friend Jet sqrt(const Jet& a);
    friend Jet exp(const Jet& a);
    friend Jet powi(const Jet& a, int k);

    /// f(a) for analytic f with derivative values df[0..order] at a.value().
    static Jet compose(const Jet& a, const double* df);

    /// Coefficientwise truncation to a lower-order space over the same
    /// variables (the basis enumerations nest, so this is a prefix copy).
    Jet truncated(const JetSpace* to) const;

    /// Polynomial derivative d/dx_i, landing in `to` (order one less).
    Jet derivative(int i, const JetSpace* to) const;

private:
    const JetSpace* sp_;
    std::vector<double> c_;
};

inline Jet constant_like(const Jet& proto, double v) { return Jet::constant(proto.space(), v); }

}  // namespace bochner
