#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "bochner/expr.hpp"

namespace bochner::geom {

using sym::Expr;

/// One coordinate patch: a box in R^d mapped into R^N by closed-form
/// expressions. `usable_margin` shrinks the box for the region where sample
/// points may be assigned to this chart.
struct Chart {
    std::string name;
    int dim = 0;
    std::vector<std::string> coords;
    std::vector<std::pair<double, double>> domain;
    std::vector<Expr> embedding;
    double usable_margin = 0.0;
    /// Known closed form of a conformal induced metric (g = factor * id),
    /// verified against the embedding at build time when present.
    std::optional<Expr> conformal_hint;

    int ambient_dim() const { return static_cast<int>(embedding.size()); }
    bool usable(const double* x) const;
};

/// Induced metric of a chart. Conformal charts carry the factor expression;
/// generic charts of dimension <= 4 carry a symbolic inverse; anything else
/// is marked for pointwise-numeric treatment.
struct MetricData {
    int dim = 0;
    bool conformal = false;
    Expr factor;               // conformal factor (valid when conformal)
    std::vector<Expr> g;       // d*d entries, row major, symmetric
    std::vector<Expr> ginv;    // d*d entries when symbolic inverse available
    bool has_symbolic_inverse = false;
    Expr sqrt_det;             // sqrt(det g) when available symbolically

    const Expr& at(int i, int j) const { return g[i * dim + j]; }
    const Expr& inv_at(int i, int j) const { return ginv[i * dim + j]; }
};

enum class StructureKind {
    Explicit,       // J component expressions given per chart
    CrossProduct,   // J_p(v) = p x v pulled back through the embedding
};

enum class GridKind {
    PeriodicBox,  // product trapezoid grid over each chart box (tori)
    Sphere,       // Gauss-Legendre x uniform grid in hyperspherical angles
};

/// A manifold: an atlas of charts plus the almost complex structure and an
/// optional conformal rescaling of the induced metric.
struct ManifoldSpec {
    std::string name;
    int dim = 0;
    std::vector<Chart> charts;

    StructureKind structure = StructureKind::Explicit;
    /// Explicit structure: per chart, d*d component expressions J^i_j
    /// (row i = value index) in chart coordinates.
    std::vector<std::vector<Expr>> j_charts;

    /// Extra conformal factor on the induced metric, as an expression in the
    /// ambient variables x1..xN (composed per chart internally). Empty = 1.
    std::optional<Expr> conformal_ambient;

    GridKind grid = GridKind::PeriodicBox;
    double sphere_radius = 1.0;

    std::string description;

    /// The extra conformal factor composed into chart coordinates (1 if none).
    Expr chart_conformal(int chart) const;
    /// Full metric conformal input for induced_metric (hint * extra factor).
    std::optional<Expr> metric_conformal(int chart) const;
};

/// g_ij = conformal * sum_k d_iF^k d_jF^k, simplified. Conformality is
/// recognized structurally or, failing that, numerically at deterministic
/// sample points (the charts in use are analytic, so agreement on a sample
/// certifies the form).
MetricData induced_metric(const Chart& chart, const std::optional<Expr>& conformal);

/// Metric values at a point with the Gram-Schmidt orthonormal frame of the
/// coordinate basis (fixed index order) and cached Christoffel values.
struct FramedPoint {
    int chart = 0;
    std::vector<double> x;
    Eigen::MatrixXd g, ginv, frame;
    std::vector<double> gamma;  // [k][i][j] -> Gamma^k_ij

    double gamma_at(int k, int i, int j) const {
        int d = static_cast<int>(x.size());
        return gamma[(k * d + i) * d + j];
    }
};

/// Columns e_i with e_i^T g e_j = delta_ij, Gram-Schmidt of the coordinate
/// basis in index order. Throws on a non-positive-definite metric.
Eigen::MatrixXd orthonormal_frame(const Eigen::MatrixXd& g);

/// Quadrature nodes over the whole manifold; weights carry the full volume
/// element, so an integral is a plain weighted sum of point values.
struct QuadratureGrid {
    int dim = 0;
    int resolution = 0;
    std::vector<int> chart;      // per node
    std::vector<double> coords;  // node-major, dim entries per node
    std::vector<double> weight;

    std::size_t size() const { return weight.size(); }
    const double* node(std::size_t i) const { return coords.data() + i * dim; }
    double total_weight() const;
};

/// Build the quadrature grid for a manifold; resolution >= 2 is the number of
/// points per angular/box dimension. Validates embedding rank on a node
/// subsample (smallest singular value > 1e-8); full validation in tests.
QuadratureGrid build_grid(const ManifoldSpec& spec, int resolution);

/// Gauss-Legendre nodes and weights on [-1, 1].
void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights);

/// Adjugate/determinant inverse of a symbolic matrix (practical for d <= 4).
void symbolic_matrix_inverse(int d, const std::vector<Expr>& m, std::vector<Expr>& minv, Expr& det);

/// Map a point of the unit sphere S^d in R^{d+1} to (chart index, chart
/// coords) under the two-chart stereographic atlas used here.
void sphere_point_to_chart(const std::vector<double>& x, int& chart, std::vector<double>& u);

/// The built-in manifolds.
std::vector<ManifoldSpec> zoo();
ManifoldSpec zoo_member(const std::string& name);  // throws std::out_of_range

ManifoldSpec flat_torus(int half_dim, bool compatible);
ManifoldSpec round_sphere_2();
ManifoldSpec s6_octonionic();
ManifoldSpec s6_perturbed(double eps);
ManifoldSpec t4_conformal();

}  // namespace bochner::geom
