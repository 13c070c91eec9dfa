#include "stochorder/discretize.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>

namespace stochorder {

// ---------------------------------------------------------------------------
// Grids

Grid Grid::uniform(double left, double right, int intervals) {
    if (intervals < 4) throw std::invalid_argument("grid needs at least 4 intervals");
    if (!(std::isfinite(left) && std::isfinite(right) && left < right)) {
        throw std::invalid_argument("grid needs finite endpoints with left < right");
    }
    Grid g;
    g.step = (right - left) / intervals;
    g.points.resize(static_cast<std::size_t>(intervals) + 1);
    for (int i = 0; i <= intervals; ++i) g.points[static_cast<std::size_t>(i)] = left + g.step * i;
    g.points.back() = right;
    return g;
}

namespace {

/// Smallest L = 2^k (from the base point) with relative speed mass beyond L
/// below 1e-6.
double automatic_truncation(const DiffusionModel& model) {
    const double base = default_base_point(model);
    ScaleSpeedKilling measures(model, base);
    auto mass_within = [&](double length) {
        double lo = std::isfinite(model.left) ? model.left : base - length;
        double hi = std::isfinite(model.right) ? model.right : base + length;
        return std::abs(measures.m(hi)) + std::abs(measures.m(lo));
    };
    for (int k = 1; k <= 10; ++k) {
        double length = std::ldexp(1.0, k);
        double inner = 0.0;
        double outer = 0.0;
        try {
            inner = mass_within(length);
            outer = mass_within(2.0 * length);
        } catch (const DomainError&) {
            break;
        }
        if (std::isfinite(outer) && outer > 0.0 && outer - inner <= 1e-6 * outer) return length;
    }
    throw std::invalid_argument(
        "speed measure does not settle within 2^10 of the base point; set numeric.truncation explicitly");
}

}  // namespace

Grid Grid::for_model(const DiffusionModel& model, int intervals, std::optional<double> truncation) {
    model.validate();
    if (model.bounded()) return uniform(model.left, model.right, intervals);
    const double length = truncation ? *truncation : automatic_truncation(model);
    if (!(length > 0.0)) throw std::invalid_argument("truncation must be positive");
    const double base = default_base_point(model);
    double lo = std::isfinite(model.left) ? model.left : base - length;
    double hi = std::isfinite(model.right) ? model.right : base + length;
    Grid g = uniform(lo, hi, intervals);
    g.truncation = length;
    return g;
}

GridInfo Grid::info() const {
    GridInfo info;
    info.shape = {static_cast<int>(points.size())};
    info.points = points;
    info.step = step;
    info.truncation = truncation;
    return info;
}

std::size_t TensorGrid::size() const {
    std::size_t n = 1;
    for (const auto& axis : axes) n *= axis.size();
    return axes.empty() ? 0 : n;
}

std::vector<std::size_t> TensorGrid::shape() const {
    std::vector<std::size_t> s;
    for (const auto& axis : axes) s.push_back(axis.size());
    return s;
}

GridInfo TensorGrid::info() const {
    GridInfo info;
    for (const auto& axis : axes) info.shape.push_back(static_cast<int>(axis.size()));
    if (axes.size() == 1) info.points = axes[0].points;
    info.step = axes.empty() ? 0.0 : axes[0].step;
    return info;
}

TestDomain TensorGrid::domain() const {
    TestDomain d;
    for (const auto& axis : axes) d.axes.push_back(axis.points);
    return d;
}

// ---------------------------------------------------------------------------
// 1-D generator

namespace {

class RowBuilder {
public:
    explicit RowBuilder(std::size_t n) : n_(n) {}
    void jump(std::size_t from, std::size_t to, double rate) {
        if (rate < 0.0) throw std::logic_error("negative rate in generator construction");
        if (rate == 0.0 || from == to) return;
        entries_.emplace_back(static_cast<int>(from), static_cast<int>(to), rate);
        entries_.emplace_back(static_cast<int>(from), static_cast<int>(from), -rate);
    }
    void kill(std::size_t at, double rate) {
        if (rate < 0.0) throw std::invalid_argument("negative killing rate is not representable as a generator");
        if (rate > 0.0) entries_.emplace_back(static_cast<int>(at), static_cast<int>(at), -rate);
    }
    SparseMatrix finish() const {
        SparseMatrix m(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(n_));
        m.setFromTriplets(entries_.begin(), entries_.end());
        return m;
    }

private:
    std::size_t n_;
    std::vector<Triplet> entries_;
};

}  // namespace

GridOperator build_generator(const DiffusionModel& model, const Grid& grid) {
    model.validate();
    const std::size_t n = grid.size();
    const std::size_t last = n - 1;
    const double h = grid.step;
    RowBuilder rows(n);

    auto boundary_row = [&](std::size_t at, std::size_t inward, Endpoint side) {
        const double x = grid.points[at];
        const double a = model.a.evaluate(x);
        const double b = model.b.evaluate(x);
        const double c = model.c.evaluate(x);
        const bool truncated = !std::isfinite(model.endpoint(side));
        const FellerBoundary bc = truncated ? FellerBoundary::reflecting() : model.boundary(side);
        switch (bc.kind) {
            case BoundaryKind::reflecting:
                // Ghost point f_{-1} = f_1: ½a (2f_1 − 2f_0)/h².
                rows.jump(at, inward, a / (h * h));
                rows.kill(at, c);
                break;
            case BoundaryKind::sticky:
                // Flux condition g(e) m({e}) = ±f'(e) with Λ(e) = 0.
                rows.jump(at, inward, 1.0 / (h * bc.parameter));
                rows.kill(at, c);
                break;
            case BoundaryKind::elastic: {
                // Ghost point from f'(e) = ±k f(e).
                double outward_drift = side == Endpoint::left ? -b : b;
                rows.jump(at, inward, a / (h * h));
                rows.kill(at, c + std::max(0.0, bc.parameter * (a / h + outward_drift)));
                break;
            }
            case BoundaryKind::absorbing:
                break;
            case BoundaryKind::killing:
                rows.kill(at, std::max(a / (h * h), 1.0 / h));
                break;
            case BoundaryKind::trap:
                throw std::invalid_argument("trap boundaries are representable but not discretized");
            case BoundaryKind::natural:
                throw std::invalid_argument("a natural boundary cannot sit at a finite grid endpoint");
        }
    };

    for (std::size_t i = 0; i < n; ++i) {
        if (i == 0) {
            boundary_row(0, 1, Endpoint::left);
            continue;
        }
        if (i == last) {
            boundary_row(last, last - 1, Endpoint::right);
            continue;
        }
        const double x = grid.points[i];
        const double a = model.a.evaluate(x);
        const double b = model.b.evaluate(x);
        if (!(a > 0.0)) {
            std::ostringstream msg;
            msg << "diffusion coefficient a(" << x << ") = " << a << " is not positive";
            throw std::invalid_argument(msg.str());
        }
        const double diffusive = a / (2.0 * h * h);
        rows.jump(i, i + 1, diffusive + std::max(b, 0.0) / h);
        rows.jump(i, i - 1, diffusive + std::max(-b, 0.0) / h);
        rows.kill(i, model.c.evaluate(x));
    }
    return GridOperator(rows.finish(), OperatorKind::generator, grid.info());
}

// ---------------------------------------------------------------------------
// 2-D generator

GridOperator build_generator_md(const CoefficientField& coeffs, const TensorGrid& grid) {
    coeffs.validate();
    const auto d = grid.axes.size();
    if (d == 0 || d > 2) throw std::invalid_argument("build_generator_md supports one or two dimensions");
    if (static_cast<int>(d) != coeffs.dim) throw std::invalid_argument("coefficient dimension does not match grid");
    const auto shape = grid.shape();
    const std::size_t stride0 = d == 2 ? shape[1] : 1;
    const std::size_t total = grid.size();
    RowBuilder rows(total);

    auto mirror = [](long idx, long n) {
        if (idx < 0) return -idx;
        if (idx >= n) return 2 * (n - 1) - idx;
        return idx;
    };
    auto flat = [&](long i, long j) {
        long mi = mirror(i, static_cast<long>(shape[0]));
        long mj = d == 2 ? mirror(j, static_cast<long>(shape[1])) : 0;
        return static_cast<std::size_t>(mi) * stride0 + static_cast<std::size_t>(mj);
    };

    std::vector<double> x(d);
    for (std::size_t p = 0; p < total; ++p) {
        const long i = static_cast<long>(p / stride0);
        const long j = d == 2 ? static_cast<long>(p % stride0) : 0;
        x[0] = grid.axes[0].points[static_cast<std::size_t>(i)];
        if (d == 2) x[1] = grid.axes[1].points[static_cast<std::size_t>(j)];
        const double cross = d == 2 ? coeffs.a[0][1].evaluate(x) : 0.0;
        const double cross_rate = d == 2 ? std::abs(cross) / (2.0 * grid.axes[0].step * grid.axes[1].step) : 0.0;
        for (std::size_t k = 0; k < d; ++k) {
            const double h = grid.axes[k].step;
            const double akk = coeffs.a[k][k].evaluate(x);
            const double bk = coeffs.b[k].evaluate(x);
            const double axial = akk / (2.0 * h * h) - cross_rate;
            if (axial < -1e-14 * std::max(1.0, akk / (h * h))) {
                std::ostringstream msg;
                msg << "stencil positivity violated at (";
                for (std::size_t q = 0; q < d; ++q) msg << (q ? ", " : "") << x[q];
                msg << "): a_" << k + 1 << k + 1 << " = " << akk << " does not dominate |a_12| = " << std::abs(cross);
                throw std::domain_error(msg.str());
            }
            const double diffusive = std::max(axial, 0.0);
            const long di = k == 0 ? 1 : 0;
            const long dj = k == 1 ? 1 : 0;
            rows.jump(p, flat(i + di, j + dj), diffusive + std::max(bk, 0.0) / h);
            rows.jump(p, flat(i - di, j - dj), diffusive + std::max(-bk, 0.0) / h);
        }
        if (cross > 0.0) {
            rows.jump(p, flat(i + 1, j + 1), cross_rate);
            rows.jump(p, flat(i - 1, j - 1), cross_rate);
        } else if (cross < 0.0) {
            rows.jump(p, flat(i + 1, j - 1), cross_rate);
            rows.jump(p, flat(i - 1, j + 1), cross_rate);
        }
        rows.kill(p, coeffs.c.evaluate(x));
    }
    return GridOperator(rows.finish(), OperatorKind::generator, grid.info());
}

// ---------------------------------------------------------------------------
// Order maps

namespace {

/// f_j = h Σ_{k<j} g_k.
DenseMatrix increasing_right_inverse(Eigen::Index n, double h) {
    DenseMatrix inv = DenseMatrix::Zero(n, n - 1);
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index k = 0; k < j; ++k) inv(j, k) = h;
    }
    return inv;
}

/// f_0 = f_1 = 0, f_j = h² Σ_{i<j} (j − i) g_i over interior nodes i ≥ 1.
DenseMatrix convex_right_inverse(Eigen::Index n, double h) {
    DenseMatrix inv = DenseMatrix::Zero(n, n - 2);
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = 1; i < j && i <= n - 2; ++i) inv(j, i - 1) = h * h * static_cast<double>(j - i);
    }
    return inv;
}

}  // namespace

DiscreteOrderMap build_phi(OrderKind order, const Grid& grid) {
    const auto n = static_cast<Eigen::Index>(grid.size());
    if (n < 5) throw std::invalid_argument("order map needs at least 5 grid points");
    const double h = grid.step;
    std::vector<Triplet> entries;
    Eigen::Index row = 0;
    DiscreteOrderMap out;
    out.order = OrderSpec::simple(order);
    out.domain = TestDomain::line(grid.points);
    if (order != OrderKind::convex) {
        for (Eigen::Index i = 0; i + 1 < n; ++i, ++row) {
            entries.emplace_back(static_cast<int>(row), static_cast<int>(i), -1.0 / h);
            entries.emplace_back(static_cast<int>(row), static_cast<int>(i + 1), 1.0 / h);
        }
        out.block_sizes.push_back(n - 1);
    }
    if (order != OrderKind::increasing) {
        for (Eigen::Index i = 1; i + 1 < n; ++i, ++row) {
            entries.emplace_back(static_cast<int>(row), static_cast<int>(i - 1), 1.0 / (h * h));
            entries.emplace_back(static_cast<int>(row), static_cast<int>(i), -2.0 / (h * h));
            entries.emplace_back(static_cast<int>(row), static_cast<int>(i + 1), 1.0 / (h * h));
        }
        out.block_sizes.push_back(n - 2);
    }
    if (order != OrderKind::increasing && order != OrderKind::convex && order != OrderKind::increasing_convex) {
        throw std::invalid_argument("build_phi supports the 1-D orders only");
    }
    SparseMatrix phi(row, n);
    phi.setFromTriplets(entries.begin(), entries.end());
    out.phi = GridOperator(std::move(phi), OperatorKind::order_map, grid.info());

    switch (order) {
        case OrderKind::increasing:
            out.pseudo_inverse = increasing_right_inverse(n, h);
            break;
        case OrderKind::convex:
            out.pseudo_inverse = convex_right_inverse(n, h);
            break;
        default: {
            // (g1, g2) ↦ (g1)_0 ℓ + Φ₂⁺ g2 with ℓ_j = x_j − x_0.
            out.pseudo_inverse = DenseMatrix::Zero(n, row);
            for (Eigen::Index j = 0; j < n; ++j) out.pseudo_inverse(j, 0) = h * static_cast<double>(j);
            out.pseudo_inverse.rightCols(n - 2) = convex_right_inverse(n, h);
            out.surjective = false;
        }
    }
    return out;
}

DiscreteOrderMap build_phi_md(const IndexSet& index_set, const TensorGrid& grid) {
    const auto d = grid.axes.size();
    if (d == 0 || d > 2 || static_cast<int>(d) != index_set.dim()) {
        throw std::invalid_argument("build_phi_md supports one or two dimensions matching the index set");
    }
    if (index_set.size() == 0) throw std::invalid_argument("empty index set");
    if (d == 1) {
        auto out = build_phi(OrderKind::increasing, grid.axes[0]);
        out.order = OrderSpec::multi(index_set);
        return out;
    }
    const auto shape = grid.shape();
    const auto n0 = static_cast<long>(shape[0]);
    const auto n1 = static_cast<long>(shape[1]);
    const double h0 = grid.axes[0].step;
    const double h1 = grid.axes[1].step;
    const MultiIndex e0 = MultiIndex::unit(2, 0);
    const MultiIndex e1 = MultiIndex::unit(2, 1);
    const MultiIndex e01 = e0 + e1;
    auto flat = [&](long i, long j) { return static_cast<int>(i * n1 + j); };

    std::vector<Triplet> entries;
    std::map<MultiIndex, long> offset;
    long row = 0;
    for (const auto& alpha : index_set.members()) {
        offset[alpha] = row;
        const long ext0 = n0 - alpha[0];
        const long ext1 = n1 - alpha[1];
        const double scale = (alpha[0] ? h0 : 1.0) * (alpha[1] ? h1 : 1.0);
        for (long i = 0; i < ext0; ++i) {
            for (long j = 0; j < ext1; ++j, ++row) {
                const int r = static_cast<int>(row);
                if (alpha == e01) {
                    entries.emplace_back(r, flat(i + 1, j + 1), 1.0 / scale);
                    entries.emplace_back(r, flat(i + 1, j), -1.0 / scale);
                    entries.emplace_back(r, flat(i, j + 1), -1.0 / scale);
                    entries.emplace_back(r, flat(i, j), 1.0 / scale);
                } else {
                    entries.emplace_back(r, flat(i + alpha[0], j + alpha[1]), 1.0 / scale);
                    entries.emplace_back(r, flat(i, j), -1.0 / scale);
                }
            }
        }
    }
    const auto n = static_cast<Eigen::Index>(n0 * n1);
    SparseMatrix phi(row, n);
    phi.setFromTriplets(entries.begin(), entries.end());

    DiscreteOrderMap out;
    out.order = OrderSpec::multi(index_set);
    out.domain = grid.domain();
    out.phi = GridOperator(std::move(phi), OperatorKind::order_map, grid.info());
    for (const auto& alpha : index_set.members()) {
        out.block_sizes.push_back((n0 - alpha[0]) * (n1 - alpha[1]));
    }
    out.surjective = index_set.size() == 1;

    // Right inverse anchored at the first row/column of the grid.
    DenseMatrix& inv = out.pseudo_inverse;
    inv = DenseMatrix::Zero(n, row);
    const bool has0 = index_set.contains(e0);
    const bool has1 = index_set.contains(e1);
    const bool has01 = index_set.contains(e01);
    auto row_e0 = [&](long i, long j) { return offset[e0] + i * n1 + j; };
    auto row_e1 = [&](long i, long j) { return offset[e1] + i * (n1 - 1) + j; };
    auto row_e01 = [&](long i, long j) { return offset[e01] + i * (n1 - 1) + j; };
    for (long i = 0; i < n0; ++i) {
        for (long j = 0; j < n1; ++j) {
            const auto target = static_cast<Eigen::Index>(flat(i, j));
            if (has0 && has1) {
                for (long k = 0; k < i; ++k) inv(target, row_e0(k, 0)) += h0;
                for (long k = 0; k < j; ++k) inv(target, row_e1(i, k)) += h1;
            } else if (has01) {
                if (has0) for (long k = 0; k < i; ++k) inv(target, row_e0(k, 0)) += h0;
                if (has1) for (long k = 0; k < j; ++k) inv(target, row_e1(0, k)) += h1;
                for (long k = 0; k < i; ++k) {
                    for (long l = 0; l < j; ++l) inv(target, row_e01(k, l)) += h0 * h1;
                }
            } else if (has0) {
                for (long k = 0; k < i; ++k) inv(target, row_e0(k, j)) += h0;
            } else {
                for (long k = 0; k < j; ++k) inv(target, row_e1(i, k)) += h1;
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Intertwiner

namespace {

/// Lawson–Hanson non-negative least squares: argmin ‖E y − target‖ over y ≥ 0.
Vector nnls(const DenseMatrix& E, const Vector& target, double tol) {
    const Eigen::Index n = E.cols();
    Vector y = Vector::Zero(n);
    std::vector<bool> active(static_cast<std::size_t>(n), false);  // true = in the passive (free) set
    for (int outer = 0; outer < 3 * static_cast<int>(n) + 10; ++outer) {
        Vector w = E.transpose() * (target - E * y);
        Eigen::Index best = -1;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (!active[static_cast<std::size_t>(j)] && w[j] > tol && (best < 0 || w[j] > w[best])) best = j;
        }
        if (best < 0) break;
        active[static_cast<std::size_t>(best)] = true;
        for (int inner = 0; inner < 3 * static_cast<int>(n) + 10; ++inner) {
            std::vector<Eigen::Index> free;
            for (Eigen::Index j = 0; j < n; ++j)
                if (active[static_cast<std::size_t>(j)]) free.push_back(j);
            DenseMatrix sub(E.rows(), static_cast<Eigen::Index>(free.size()));
            for (std::size_t k = 0; k < free.size(); ++k) sub.col(static_cast<Eigen::Index>(k)) = E.col(free[k]);
            Vector z_sub = sub.colPivHouseholderQr().solve(target);
            Vector z = Vector::Zero(n);
            for (std::size_t k = 0; k < free.size(); ++k) z[free[k]] = z_sub[static_cast<Eigen::Index>(k)];
            bool feasible = true;
            for (auto j : free) feasible = feasible && z[j] > 0.0;
            if (feasible) {
                y = z;
                break;
            }
            double alpha = 1.0;
            for (auto j : free) {
                if (z[j] <= 0.0) alpha = std::min(alpha, y[j] / (y[j] - z[j]));
            }
            y += alpha * (z - y);
            for (auto j : free) {
                if (y[j] <= tol) {
                    y[j] = 0.0;
                    active[static_cast<std::size_t>(j)] = false;
                }
            }
        }
    }
    return y;
}

using RowSparse = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Row i of a Metzler M with (MΦ)_i = (ΦA)_i, built only from rows of Φ
/// supported inside the support of Φ_i and (ΦA)_i. Empty when none exists.
std::optional<Vector> local_metzler_row(const RowSparse& P, const RowSparse& PA, Eigen::Index i,
                                        const std::vector<std::vector<Eigen::Index>>& rows_touching, double tol) {
    std::vector<Eigen::Index> states;
    for (RowSparse::InnerIterator it(P, i); it; ++it) states.push_back(it.col());
    for (RowSparse::InnerIterator it(PA, i); it; ++it) states.push_back(it.col());
    std::sort(states.begin(), states.end());
    states.erase(std::unique(states.begin(), states.end()), states.end());
    auto inside = [&](Eigen::Index j) {
        for (RowSparse::InnerIterator it(P, j); it; ++it)
            if (!std::binary_search(states.begin(), states.end(), it.col())) return false;
        return true;
    };
    std::vector<Eigen::Index> rows;
    for (auto state : states)
        for (auto j : rows_touching[static_cast<std::size_t>(state)]) rows.push_back(j);
    std::sort(rows.begin(), rows.end());
    rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
    rows.erase(std::remove_if(rows.begin(), rows.end(), [&](Eigen::Index j) { return !inside(j); }), rows.end());

    auto local = [&](Eigen::Index state) {
        return static_cast<Eigen::Index>(std::lower_bound(states.begin(), states.end(), state) - states.begin());
    };
    // One column per neighbouring row, plus −Φ_i so the diagonal entry is free.
    const auto cols = static_cast<Eigen::Index>(rows.size()) + 1;
    DenseMatrix E = DenseMatrix::Zero(static_cast<Eigen::Index>(states.size()), cols);
    Eigen::Index self = -1;
    for (std::size_t k = 0; k < rows.size(); ++k) {
        if (rows[k] == i) self = static_cast<Eigen::Index>(k);
        for (RowSparse::InnerIterator it(P, rows[k]); it; ++it) E(local(it.col()), static_cast<Eigen::Index>(k)) = it.value();
    }
    if (self < 0) return std::nullopt;
    E.col(cols - 1) = -E.col(self);
    Vector target = Vector::Zero(E.rows());
    for (RowSparse::InnerIterator it(PA, i); it; ++it) target[local(it.col())] = it.value();

    Vector y = nnls(E, target, 1e-14 * std::max(1.0, target.cwiseAbs().maxCoeff()));
    if ((E * y - target).cwiseAbs().maxCoeff() > tol) return std::nullopt;
    Vector row = Vector::Zero(P.rows());
    for (std::size_t k = 0; k < rows.size(); ++k) row[rows[k]] = y[static_cast<Eigen::Index>(k)];
    row[i] -= y[cols - 1];
    return row;
}

/// Replaces rows of M that have negative off-diagonal entries by local
/// Metzler solutions where they exist. Meaningful when Φ is not surjective,
/// so that MΦ = ΦA leaves M undetermined.
void metzler_repair(DenseMatrix& M, const SparseMatrix& P, const SparseMatrix& PA, double tol) {
    const RowSparse P_rows = P;
    const RowSparse PA_rows = PA;
    std::vector<std::vector<Eigen::Index>> rows_touching(static_cast<std::size_t>(P.cols()));
    for (Eigen::Index i = 0; i < P_rows.rows(); ++i)
        for (RowSparse::InnerIterator it(P_rows, i); it; ++it) rows_touching[static_cast<std::size_t>(it.col())].push_back(i);
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        bool negative = false;
        for (Eigen::Index j = 0; j < M.cols() && !negative; ++j) negative = j != i && M(i, j) < 0.0;
        if (!negative) continue;
        if (auto row = local_metzler_row(P_rows, PA_rows, i, rows_touching, tol)) M.row(i) = row->transpose();
    }
}

}  // namespace

DiscreteIntertwiner derive_discrete_intertwiner(const GridOperator& generator, const DiscreteOrderMap& phi,
                                                SplitPolicy policy) {
    const SparseMatrix& A = generator.matrix();
    const SparseMatrix& P = phi.phi.matrix();
    if (P.cols() != A.rows()) throw std::invalid_argument("order map and generator sizes differ");
    const DenseMatrix PA = DenseMatrix(SparseMatrix(P * A));
    const DenseMatrix P_dense(P);
    const Eigen::Index r = P.rows();
    const Eigen::Index n = A.rows();

    DiscreteIntertwiner out;
    // Rounding in ΦAΦ⁺ grows with the conditioning ‖Φ‖‖Φ⁺‖ of the order map.
    const double conditioning =
        std::max(1.0, phi.phi.norm_inf() * phi.pseudo_inverse.cwiseAbs().rowwise().sum().maxCoeff());
    const double scale = std::max(generator.norm_inf(), 1.0) * conditioning;
    out.tolerance = 1e-10 * scale;

    if (phi.order.kind == OrderKind::increasing_convex) {
        // Block lower-triangular form: first block from the increasing map,
        // second from the convex map, coupling through the slope at x_0.
        const Eigen::Index r1 = phi.block_sizes.at(0);
        const Eigen::Index r2 = phi.block_sizes.at(1);
        const double h = phi.phi.grid().step;
        out.M = DenseMatrix::Zero(r, r);
        out.M.topLeftCorner(r1, r1) = PA.topRows(r1) * increasing_right_inverse(n, h);
        out.M.bottomRightCorner(r2, r2) = PA.bottomRows(r2) * convex_right_inverse(n, h);
        out.M.block(r1, 0, r2, 1) = PA.bottomRows(r2) * phi.pseudo_inverse.col(0);
    } else {
        out.M = PA * phi.pseudo_inverse;
    }
    out.residual = (PA - out.M * P_dense).cwiseAbs().maxCoeff();
    out.exact = out.residual <= out.tolerance;
    if (!out.exact && phi.surjective) {
        // Least-squares intertwiner M = ΦA Φᵀ(ΦΦᵀ)⁻¹.
        DenseMatrix gram = P_dense * P_dense.transpose();
        out.M = gram.ldlt().solve(P_dense * PA.transpose()).transpose();
        out.residual = (PA - out.M * P_dense).cwiseAbs().maxCoeff();
    }
    const double clean = 1e-12 * scale;
    out.M = out.M.unaryExpr([clean](double v) { return std::abs(v) <= clean ? 0.0 : v; });
    if (!phi.surjective && policy == SplitPolicy::metzler && phi.order.kind == OrderKind::multi_index) {
        metzler_repair(out.M, P, SparseMatrix(P * A), out.tolerance);
        out.residual = (PA - out.M * P_dense).cwiseAbs().maxCoeff();
        out.exact = out.residual <= out.tolerance;
    }

    DenseMatrix B = DenseMatrix::Zero(r, r);
    if (policy == SplitPolicy::metzler) {
        for (Eigen::Index i = 0; i < r; ++i) {
            for (Eigen::Index j = 0; j < r; ++j) {
                if (i == j || out.M(i, j) > 0.0) B(i, j) = out.M(i, j);
            }
        }
    } else {
        if (phi.order.kind != OrderKind::increasing || phi.block_sizes.size() != 1) {
            throw std::invalid_argument("transport split applies to the 1-D increasing order only");
        }
        const DenseMatrix A_dense(A);
        for (Eigen::Index i = 0; i < r; ++i) {
            B(i, i) = out.M(i, i);
            if (i + 1 < r) B(i, i + 1) = A_dense(i, i + 1);
            if (i >= 1) B(i, i - 1) = A_dense(i + 1, i);
        }
    }
    DenseMatrix C = out.M - B;
    C = C.unaryExpr([clean](double v) { return std::abs(v) <= clean ? 0.0 : v; });

    auto most_negative = [](const DenseMatrix& m, bool off_diagonal_only) -> std::optional<MatrixEntry> {
        std::optional<MatrixEntry> worst;
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            for (Eigen::Index j = 0; j < m.cols(); ++j) {
                if (off_diagonal_only && i == j) continue;
                if (m(i, j) < 0.0 && (!worst || m(i, j) < worst->value)) worst = MatrixEntry{i, j, m(i, j)};
            }
        }
        return worst;
    };
    out.negative_c = most_negative(C, false);
    out.negative_m = most_negative(out.M, true);
    out.c_nonnegative = !out.negative_c.has_value();
    out.m_metzler = !out.negative_m.has_value();
    out.B = GridOperator::from_dense(B, OperatorKind::general, phi.phi.grid());
    out.C = GridOperator::from_dense(C, OperatorKind::general, phi.phi.grid());
    return out;
}

}  // namespace stochorder
