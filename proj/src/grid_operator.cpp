#include "stochorder/grid_operator.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace stochorder {

std::string to_string(OperatorKind kind) {
    switch (kind) {
        case OperatorKind::generator: return "generator";
        case OperatorKind::order_map: return "order_map";
        case OperatorKind::resolvent: return "resolvent";
        case OperatorKind::general: return "general";
    }
    return "general";
}

OperatorKind operator_kind_from_string(const std::string& name) {
    if (name == "generator") return OperatorKind::generator;
    if (name == "order_map") return OperatorKind::order_map;
    if (name == "resolvent") return OperatorKind::resolvent;
    if (name == "general") return OperatorKind::general;
    throw std::invalid_argument("unknown operator kind '" + name + "'");
}

GridOperator::GridOperator(SparseMatrix matrix, OperatorKind kind, GridInfo grid)
    : matrix_(std::move(matrix)), kind_(kind), grid_(std::move(grid)) {
    matrix_.makeCompressed();
    validate();
}

GridOperator GridOperator::from_dense(const DenseMatrix& dense, OperatorKind kind, GridInfo grid,
                                      double drop_below) {
    std::vector<Triplet> entries;
    for (Eigen::Index i = 0; i < dense.rows(); ++i) {
        for (Eigen::Index j = 0; j < dense.cols(); ++j) {
            double v = dense(i, j);
            if (v != 0.0 && std::abs(v) > drop_below) {
                entries.emplace_back(static_cast<int>(i), static_cast<int>(j), v);
            }
        }
    }
    SparseMatrix m(dense.rows(), dense.cols());
    m.setFromTriplets(entries.begin(), entries.end());
    return GridOperator(std::move(m), kind, std::move(grid));
}

void GridOperator::validate() const {
    if (kind_ != OperatorKind::generator && kind_ != OperatorKind::order_map) return;
    double scale = std::max(1.0, max_abs_entry());
    double slack = 1e-12 * scale;
    for (Eigen::Index i = 0; i < matrix_.outerSize(); ++i) {
        double sum = 0.0;
        for (SparseMatrix::InnerIterator it(matrix_, i); it; ++it) {
            sum += it.value();
            if (kind_ == OperatorKind::generator && it.col() != it.row() && it.value() < 0.0) {
                throw std::invalid_argument("generator has a negative off-diagonal entry at (" +
                                            std::to_string(it.row()) + "," + std::to_string(it.col()) + ")");
            }
        }
        if (kind_ == OperatorKind::generator && sum > slack) {
            throw std::invalid_argument("generator row " + std::to_string(i) + " has positive row sum");
        }
        if (kind_ == OperatorKind::order_map && std::abs(sum) > slack) {
            throw std::invalid_argument("order map row " + std::to_string(i) + " does not sum to zero");
        }
    }
}

double GridOperator::norm_inf() const {
    double best = 0.0;
    for (Eigen::Index i = 0; i < matrix_.outerSize(); ++i) {
        double sum = 0.0;
        for (SparseMatrix::InnerIterator it(matrix_, i); it; ++it) sum += std::abs(it.value());
        best = std::max(best, sum);
    }
    return best;
}

double GridOperator::max_abs_entry() const {
    double best = 0.0;
    for (Eigen::Index k = 0; k < matrix_.nonZeros(); ++k) best = std::max(best, std::abs(matrix_.valuePtr()[k]));
    return best;
}

double GridOperator::max_row_sum() const {
    double best = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < matrix_.outerSize(); ++i) {
        double sum = 0.0;
        for (SparseMatrix::InnerIterator it(matrix_, i); it; ++it) sum += it.value();
        best = std::max(best, sum);
    }
    return best;
}

double GridOperator::min_off_diagonal() const {
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < matrix_.outerSize(); ++i) {
        for (SparseMatrix::InnerIterator it(matrix_, i); it; ++it) {
            if (it.col() != it.row()) best = std::min(best, it.value());
        }
    }
    return best;
}

nlohmann::json GridOperator::to_json() const {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < matrix_.outerSize(); ++i) {
        for (SparseMatrix::InnerIterator it(matrix_, i); it; ++it) {
            rows.push_back(nlohmann::json::array({it.row(), it.col(), it.value()}));
        }
    }
    nlohmann::json out{{"n", matrix_.rows()}, {"kind", to_string(kind_)}, {"rows", std::move(rows)}};
    if (matrix_.cols() != matrix_.rows()) out["cols"] = matrix_.cols();
    if (!grid_.points.empty()) out["grid"] = grid_.points;
    if (!grid_.shape.empty()) out["shape"] = grid_.shape;
    if (grid_.step > 0.0) out["step"] = grid_.step;
    if (grid_.truncation) out["truncation"] = *grid_.truncation;
    return out;
}

GridOperator GridOperator::from_json(const nlohmann::json& j) {
    auto n = j.at("n").get<Eigen::Index>();
    auto cols = j.value("cols", n);
    std::vector<Triplet> entries;
    for (const auto& row : j.at("rows")) {
        auto i = row.at(0).get<int>();
        auto k = row.at(1).get<int>();
        if (i < 0 || i >= n || k < 0 || k >= cols) throw std::invalid_argument("triplet index out of range");
        entries.emplace_back(i, k, row.at(2).get<double>());
    }
    SparseMatrix m(n, cols);
    m.setFromTriplets(entries.begin(), entries.end());
    GridInfo grid;
    if (j.contains("grid")) grid.points = j["grid"].get<std::vector<double>>();
    if (j.contains("shape")) grid.shape = j["shape"].get<std::vector<int>>();
    grid.step = j.value("step", 0.0);
    if (j.contains("truncation")) grid.truncation = j["truncation"].get<double>();
    return GridOperator(std::move(m), operator_kind_from_string(j.value("kind", std::string("general"))),
                        std::move(grid));
}

}  // namespace stochorder
