#pragma once

#include <optional>
#include <vector>

#include "stochorder/diffusion1d.hpp"
#include "stochorder/grid_operator.hpp"
#include "stochorder/multid.hpp"
#include "stochorder/order.hpp"

namespace stochorder {

/// Uniform grid x_0 < ... < x_N with N ≥ 4.
struct Grid {
    std::vector<double> points;
    double step = 0.0;
    std::optional<double> truncation;  // set when an infinite end was cut at ±L

    static Grid uniform(double left, double right, int intervals);
    /// Grid over the model interval; infinite ends are cut at `truncation`
    /// (or an automatically chosen L when it is not given).
    static Grid for_model(const DiffusionModel& model, int intervals, std::optional<double> truncation = {});

    [[nodiscard]] std::size_t size() const noexcept { return points.size(); }
    [[nodiscard]] GridInfo info() const;
};

/// Tensor product of uniform grids (d ≤ 2), flattened row-major.
struct TensorGrid {
    std::vector<Grid> axes;
    [[nodiscard]] std::size_t size() const;
    [[nodiscard]] std::vector<std::size_t> shape() const;
    [[nodiscard]] GridInfo info() const;
    [[nodiscard]] TestDomain domain() const;
};

/// Upwind birth–death generator with Feller boundary rows.
GridOperator build_generator(const DiffusionModel& model, const Grid& grid);

/// Monotone 9-point generator for a d ≤ 2 diffusion with mirrored-ghost
/// (reflecting) boundaries. Throws std::domain_error when the stencil would
/// need a negative rate.
GridOperator build_generator_md(const CoefficientField& coeffs, const TensorGrid& grid);

/// Discrete order map Φ_h with an exact right inverse on its range.
struct DiscreteOrderMap {
    OrderSpec order;
    GridOperator phi;
    DenseMatrix pseudo_inverse;               // Φ⁺ with Φ Φ⁺ = I on range(Φ); Φ⁺ Φ = I − (kernel part)
    std::vector<Eigen::Index> block_sizes;    // row counts of the stacked components
    bool surjective = true;                   // Φ maps onto R^rows
    TestDomain domain;
};

DiscreteOrderMap build_phi(OrderKind order, const Grid& grid);
DiscreteOrderMap build_phi_md(const IndexSet& index_set, const TensorGrid& grid);

enum class SplitPolicy {
    metzler,    // B = diagonal + positive off-diagonal part of M, C = remainder
    transport,  // 1-D increasing only: B carries the chain's own rates moved to difference space
};

struct MatrixEntry {
    Eigen::Index row = 0;
    Eigen::Index col = 0;
    double value = 0.0;
};

struct DiscreteIntertwiner {
    DenseMatrix M;        // Φ A Φ⁺ (or least squares when inexact)
    GridOperator B;
    GridOperator C;
    double residual = 0.0;   // max |Φ A − M Φ|
    double tolerance = 0.0;  // 1e-10 ‖A‖ ‖Φ‖ ‖Φ⁺‖
    bool exact = false;
    bool c_nonnegative = false;
    bool m_metzler = false;
    std::optional<MatrixEntry> negative_c;  // most negative C entry
    std::optional<MatrixEntry> negative_m;  // most negative off-diagonal of M
};

DiscreteIntertwiner derive_discrete_intertwiner(const GridOperator& generator, const DiscreteOrderMap& phi,
                                                SplitPolicy policy = SplitPolicy::metzler);

}  // namespace stochorder
