#pragma once

#include <vector>

#include "bochner/expr.hpp"
#include "bochner/geometry.hpp"

namespace bochner::conn {

using geom::Chart;
using geom::FramedPoint;
using geom::MetricData;
using sym::Expr;
using sym::Program;

/// Levi-Civita data of one chart. Curvature uses the sign convention
/// R(X,Y) = -nabla_X nabla_Y + nabla_Y nabla_X + nabla_[X,Y], under which the
/// unit sphere satisfies R(X,Y)Z = <X,Z>Y - <Y,Z>X and round scalar curvature
/// is positive (see docs/conventions.md for the map to the common convention).
struct ChartConnection {
    int dim = 0;
    /// False when the metric has no symbolic inverse (non-conformal, dim > 4):
    /// callers must use the pointwise jet pipeline instead of the expression
    /// pipeline.
    bool symbolic = true;
    std::vector<Expr> gamma;    // [k][i][j] -> Gamma^k_ij
    std::vector<Expr> riemann;  // [l][k][i][j] -> R^l_kij, R(d_i,d_j)d_k = R^l_kij d_l

    const Expr& gamma_at(int k, int i, int j) const { return gamma[(k * dim + i) * dim + j]; }
    const Expr& riemann_at(int l, int k, int i, int j) const {
        return riemann[((l * dim + k) * dim + i) * dim + j];
    }
};

/// Christoffel symbols of the induced metric. Conformal metrics use the
/// closed form Gamma^k_ij = (d_ik s_j + d_jk s_i - d_ij s_k)/2 with
/// s = grad log(factor); generic metrics use the standard formula through the
/// symbolic inverse. Non-conformal metrics of dimension > 4 return
/// symbolic = false (numeric-pointwise mode).
ChartConnection christoffel(const Chart& chart, const MetricData& metric);

/// Adds the curvature components R^l_kij (paper sign) to a symbolic connection.
void build_riemann(ChartConnection& conn, const Chart& chart);

/// Scalar curvature S = sum_ij <R(e_i,e_j)e_i, e_j> as a chart expression
/// (double metric contraction, frame free).
Expr scalar_curvature_expr(const MetricData& metric, const ChartConnection& conn);

/// Compiled pointwise access to one chart's geometry.
class ChartGeometry {
public:
    ChartGeometry(const Chart& chart, const MetricData& metric, const ChartConnection& conn);

    int dim() const { return dim_; }
    const Chart& chart() const { return *chart_; }
    const MetricData& metric() const { return metric_; }
    const ChartConnection& connection() const { return conn_; }

    FramedPoint frame_point(const double* x) const;

    /// R^l_kij values (paper sign), [l][k][i][j] flattened.
    void riemann_values(const double* x, std::vector<double>& out) const;

    /// Frame route: S = sum_ij <R(e_i,e_j)e_i, e_j> over the orthonormal frame.
    double scalar_curvature(const FramedPoint& p) const;

private:
    const Chart* chart_;
    int dim_;
    MetricData metric_;
    ChartConnection conn_;
    Program geo_prog_;   // g, ginv, gamma
    Program riem_prog_;  // riemann components
};

/// R(X,Y)Z at a framed point from precomputed component values.
Eigen::VectorXd riemann_apply(const FramedPoint& p, const std::vector<double>& riem,
                              const Eigen::VectorXd& X, const Eigen::VectorXd& Y,
                              const Eigen::VectorXd& Z);

}  // namespace bochner::conn
