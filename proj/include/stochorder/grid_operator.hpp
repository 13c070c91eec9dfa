#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace stochorder {

using Vector = Eigen::VectorXd;
using DenseMatrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Triplet = Eigen::Triplet<double>;

enum class OperatorKind { generator, order_map, resolvent, general };

std::string to_string(OperatorKind kind);
OperatorKind operator_kind_from_string(const std::string& name);

/// Grid metadata carried alongside a matrix. `shape` lists points per axis
/// (row-major flattening, last axis fastest); `points` are the 1-D abscissae
/// when the grid is one-dimensional.
struct GridInfo {
    std::vector<int> shape;
    std::vector<double> points;
    double step = 0.0;
    std::optional<double> truncation;
};

/// Immutable sparse operator with a kind tag. Construction validates the
/// tag: generators must be Metzler with non-positive row sums, order maps
/// must have zero row sums.
class GridOperator {
public:
    GridOperator() = default;
    GridOperator(SparseMatrix matrix, OperatorKind kind, GridInfo grid = {});
    static GridOperator from_dense(const DenseMatrix& dense, OperatorKind kind, GridInfo grid = {},
                                   double drop_below = 0.0);

    [[nodiscard]] Eigen::Index rows() const noexcept { return matrix_.rows(); }
    [[nodiscard]] Eigen::Index cols() const noexcept { return matrix_.cols(); }
    [[nodiscard]] const SparseMatrix& matrix() const noexcept { return matrix_; }
    [[nodiscard]] OperatorKind kind() const noexcept { return kind_; }
    [[nodiscard]] const GridInfo& grid() const noexcept { return grid_; }

    [[nodiscard]] Vector apply(const Vector& f) const { return matrix_ * f; }
    [[nodiscard]] DenseMatrix dense() const { return DenseMatrix(matrix_); }

    /// Induced max-norm: largest absolute row sum.
    [[nodiscard]] double norm_inf() const;
    [[nodiscard]] double max_abs_entry() const;
    /// Largest row sum (positive values indicate creation of mass).
    [[nodiscard]] double max_row_sum() const;
    /// Smallest off-diagonal entry (+inf when there is none).
    [[nodiscard]] double min_off_diagonal() const;

    [[nodiscard]] nlohmann::json to_json() const;
    static GridOperator from_json(const nlohmann::json& j);

private:
    void validate() const;

    SparseMatrix matrix_;
    OperatorKind kind_ = OperatorKind::general;
    GridInfo grid_;
};

}  // namespace stochorder
