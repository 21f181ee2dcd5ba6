#pragma once

#include <span>
#include <vector>

#include "bochner/connection.hpp"
#include "bochner/expr.hpp"
#include "bochner/geometry.hpp"

namespace bochner::jcalc {

using conn::ChartConnection;
using geom::Chart;
using geom::FramedPoint;
using geom::MetricData;
using sym::Expr;

/// Strictly-increasing multi-index enumeration (lexicographic) for
/// antisymmetric storage.
struct MultiIndex {
    static int count(int d, int p);  // C(d, p)
    static int rank(int d, int p, const int* idx);
    static void unrank(int d, int p, int r, int* idx);
    /// Sort an arbitrary tuple; returns the rank and the permutation sign, or
    /// sign 0 when an index repeats.
    static int lookup(int d, int p, const int* idx, int& sign);
};

/// Tangent-bundle-valued p-form on one chart: component expressions
/// omega^k_I for increasing I, stored [rank(I) * dim + k].
struct TBFormChart {
    int dim = 0;
    int degree = 0;
    std::vector<Expr> comp;

    TBFormChart() = default;
    TBFormChart(int d, int p)
        : dim(d), degree(p),
          comp(static_cast<std::size_t>(MultiIndex::count(d, p)) * d, Expr::constant(0.0)) {}

    Expr& at(int r, int k) { return comp[static_cast<std::size_t>(r) * dim + k]; }
    const Expr& at(int r, int k) const { return comp[static_cast<std::size_t>(r) * dim + k]; }
    /// Signed lookup with an arbitrary (possibly unsorted) index tuple.
    Expr lookup(const int* idx, int k) const;
    int ranks() const { return MultiIndex::count(dim, degree); }
};

/// A form over the whole atlas plus the almost-complex-structure flag.
struct TBForm {
    int degree = 0;
    bool is_acs = false;
    std::vector<TBFormChart> charts;
};

/// Covariant-derivative stack of a form: `extra` leading non-antisymmetric
/// lower slots (1 for nabla omega, 2 for nabla^2 omega).
struct CovTensor {
    int dim = 0;
    int degree = 0;
    int extra = 0;
    std::vector<Expr> comp;  // [(e1*d + e2)... * ranks + I] * d + k

    Expr& at(std::span<const int> e, int r, int k);
    const Expr& at(std::span<const int> e, int r, int k) const;
};

/// Symbolic operator calculus on one chart. Requires a symbolic connection;
/// charts in numeric-pointwise mode go through jetcalc instead.
class FormCalc {
public:
    FormCalc(const Chart& chart, const MetricData& metric, const ChartConnection& conn);

    int dim() const { return dim_; }
    const Chart& chart() const { return *chart_; }
    const MetricData& metric() const { return *metric_; }
    const ChartConnection& connection() const { return *conn_; }

    /// Full covariant derivative, adding one leading slot.
    CovTensor nabla(const TBFormChart& w) const;
    CovTensor nabla(const CovTensor& t) const;

    /// d omega via the alternation of nabla (degree + 1).
    TBFormChart exterior_d(const TBFormChart& w) const;
    /// delta omega = -trace_g nabla omega (degree - 1).
    TBFormChart codifferential(const TBFormChart& w) const;
    /// dd* + d*d, simplified between stages.
    TBFormChart hodge_laplace(const TBFormChart& w) const;
    /// trace of the second covariant derivative.
    TBFormChart rough_laplacian(const TBFormChart& w) const;
    /// curvature term of the Weitzenboeck splitting (R acts as a derivation).
    TBFormChart weitzenbock_term(const TBFormChart& w) const;

    /// Pointwise inner product <omega, theta> as a chart expression.
    Expr inner_expr(const TBFormChart& a, const TBFormChart& b) const;
    Expr norm_sq_expr(const TBFormChart& a) const { return inner_expr(a, a); }
    /// e(J) = |J|^2 / 2.
    Expr energy_density_expr(const TBFormChart& J) const;
    /// Trace-Hessian Laplacian of a scalar (the convention entering the
    /// Bochner identity).
    Expr laplace_scalar_expr(const Expr& f) const;

private:
    const Chart* chart_;
    const MetricData* metric_;
    const ChartConnection* conn_;
    int dim_;

    Expr trace_g(const std::vector<Expr>& per_ab) const;  // sum g^{ab} t_{ab}
};

/// Wrap a spec's J matrices (stored J[i*d+j] = J^i_j) as degree-1 forms;
/// TBFormChart stores components form-slot first, so this transposes.
TBForm acs_from_spec(const geom::ManifoldSpec& spec);

/// omega(v_1,...,v_p) at a framed point, as a coordinate vector.
Eigen::VectorXd form_value(const TBFormChart& w, const Chart& chart, const FramedPoint& p,
                           const std::vector<Eigen::VectorXd>& args);

/// <omega, theta> at a framed point, summed over the orthonormal frame
/// (the frame route; tested against the metric-contraction expressions).
double pointwise_inner(const TBFormChart& a, const TBFormChart& b, const Chart& chart,
                       const FramedPoint& p);

/// e(J) at a framed point via the frame route.
double energy_density(const TBFormChart& J, const Chart& chart, const FramedPoint& p);

/// Vector field with expression coefficients (constant or varying).
struct VectorField {
    std::vector<Expr> comp;
};

/// N(J)(X,Y) = J[JX,Y] + J[X,JY] + [X,Y] - [JX,JY] at a point, with brackets
/// computed as [V,W] = nabla_V W - nabla_W V.
Eigen::VectorXd nijenhuis(const TBFormChart& J, const VectorField& X, const VectorField& Y,
                          const Chart& chart, const FramedPoint& p);

/// Coordinate-derivative tensor formula for N(J); independent oracle for the
/// bracket route.
Eigen::VectorXd nijenhuis_tensor_oracle(const TBFormChart& J, const Eigen::VectorXd& X,
                                        const Eigen::VectorXd& Y, const Chart& chart,
                                        const FramedPoint& p);

/// Scalar-valued p-form on a chart (components for increasing multi-indices).
struct ScalarFormChart {
    int dim = 0;
    int degree = 0;
    std::vector<Expr> comp;
};

struct HermitianFormData {
    ScalarFormChart omega;            // omega_ij = g_ik J^k_j
    std::vector<Expr> delta_omega;    // 1-form components (delta omega)_j
    ScalarFormChart d_omega;          // 3-form (zero object when dim < 3)
};

/// Almost-Hermitian form of a compatible J; throws if J fails the
/// compatibility check on chart samples.
HermitianFormData hermitian_form(const FormCalc& calc, const TBFormChart& J);

/// A J0 A^{-1} for A = id + eps B. B entries must be constants when dim > 4
/// (no symbolic inverse); singularity of A is checked by the caller against
/// grid nodes via `min_abs_det`.
TBFormChart conjugate_acs(const TBFormChart& J0, const std::vector<Expr>& B, double eps);

/// min |det A| over sample points, A = id + eps B.
double min_abs_det(const std::vector<Expr>& B, double eps, const Chart& chart,
                   const std::vector<std::vector<double>>& points);

}  // namespace bochner::jcalc
