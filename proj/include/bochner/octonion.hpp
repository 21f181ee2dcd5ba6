#pragma once

#include <array>
#include <vector>

namespace bochner::geom {

/// Basis multiplication table of the 2^level Cayley-Dickson algebra over the
/// reals (level 2 = quaternions, level 3 = octonions), generated by doubling.
class CayleyDickson {
public:
    explicit CayleyDickson(int level);

    int dim() const { return dim_; }
    /// e_i * e_j = sign * e_index
    std::pair<int, int> mul(int i, int j) const { return table_[i * dim_ + j]; }

private:
    int dim_;
    std::vector<std::pair<int, int>> table_;  // (sign, index)
};

/// The cross product on the imaginary part: R^3 (from quaternions) or R^7
/// (from octonions). u x v = Im(u * v) for imaginary u, v.
class CrossProduct {
public:
    explicit CrossProduct(int dim);  // 3 or 7

    int dim() const { return dim_; }

    /// Nonzero structure constants: e_a x e_b = sum K[abc] e_c, 0-based a,b,c.
    struct Entry {
        int a, b, c;
        double k;
    };
    const std::vector<Entry>& table() const { return entries_; }

    std::vector<double> cross(const std::vector<double>& u, const std::vector<double>& v) const;

private:
    int dim_;
    std::vector<Entry> entries_;
};

}  // namespace bochner::geom
