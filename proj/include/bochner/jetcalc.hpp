#pragma once

#include <vector>

#include "bochner/connection.hpp"
#include "bochner/forms.hpp"
#include "bochner/geometry.hpp"
#include "bochner/jet.hpp"

namespace bochner::jetcalc {

using conn::ChartConnection;
using geom::Chart;
using geom::MetricData;
using jcalc::MultiIndex;
using jcalc::TBFormChart;

/// Numeric-pointwise operator pipeline on truncated jets. Derivatives are
/// exact (no finite differencing), so this is both the fallback when the
/// expression route is unavailable (non-conformal metrics of dimension > 4,
/// or component DAGs past the node budget) and an independent cross-check of
/// the symbolic operators.
class JetCalc {
public:
    /// Chart with a symbolic connection: Gamma/ginv/R evaluated as jets of
    /// the existing expressions.
    JetCalc(const Chart& chart, const MetricData& metric, const ChartConnection& conn);

    /// Chart without a symbolic connection: everything is derived pointwise
    /// from third-order jets of the metric entries (inverse by jet Gaussian
    /// elimination, then Christoffels and curvature).
    static JetCalc generic(const Chart& chart, const MetricData& metric);

    int dim() const { return dim_; }

    struct FormOps {
        std::vector<double> d;            // (p+1)-form components
        std::vector<double> delta;        // (p-1)-form components
        std::vector<double> laplace;      // p-form components of (d delta + delta d)
        std::vector<double> rough;        // p-form components of nabla^2
        std::vector<double> weitzenbock;  // p-form components of the curvature term
    };

    /// All second-order operators of a degree-p form (p in {1,2}) at x.
    FormOps form_ops(const TBFormChart& w, const double* x) const;

    /// Trace-Hessian Laplacian of a scalar expression at x.
    double laplace_scalar(const sym::Expr& f, const double* x) const;

    /// Metric/Christoffel/curvature values at x (generic-mode accessors).
    struct GeometryValues {
        Eigen::MatrixXd g, ginv;
        std::vector<double> gamma;    // [k][i][j]
        std::vector<double> riemann;  // [l][k][i][j], paper sign
    };
    GeometryValues geometry_values(const double* x) const;

private:
    JetCalc() = default;

    struct Frame;  // per-point jet data
    void load_frame(Frame& f, const double* x) const;

    const Chart* chart_ = nullptr;
    int dim_ = 0;
    bool generic_ = false;
    sym::Program gamma_prog_;   // symbolic mode: Gamma exprs
    sym::Program ginv_prog_;    // symbolic mode: inverse metric exprs
    sym::Program riem_prog_;    // symbolic mode: curvature exprs
    sym::Program metric_prog_;  // generic mode: metric entries
};

}  // namespace bochner::jetcalc
