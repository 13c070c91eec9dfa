#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <cmath>

#include "stochorder/discretize.hpp"

using namespace stochorder;

namespace {

DiffusionModel model_on_unit(const std::string& a, const std::string& b, FellerBoundary lbc, FellerBoundary rbc) {
    DiffusionModel m;
    m.name = "test";
    m.left = 0.0;
    m.right = 1.0;
    m.a = Expr::parse(a, 1);
    m.b = Expr::parse(b, 1);
    m.left_bc = lbc;
    m.right_bc = rbc;
    return m;
}

CoefficientField field_2d(const std::string& a11, const std::string& a12, const std::string& a22,
                          const std::string& b1, const std::string& b2) {
    CoefficientField field;
    field.dim = 2;
    field.a = {{Expr::parse(a11, 2), Expr::parse(a12, 2)}, {Expr::parse(a12, 2), Expr::parse(a22, 2)}};
    field.b = {Expr::parse(b1, 2), Expr::parse(b2, 2)};
    field.c = Expr::constant(0.0);
    return field;
}

TensorGrid square_grid(int intervals) {
    TensorGrid grid;
    grid.axes = {Grid::uniform(0.0, 1.0, intervals), Grid::uniform(0.0, 1.0, intervals)};
    return grid;
}

/// Stationary vector from the null space of Aᵀ, normalised to total mass 1.
Vector stationary(const GridOperator& op) {
    DenseMatrix transpose = op.dense().transpose();
    Eigen::FullPivLU<DenseMatrix> lu(transpose);
    DenseMatrix kernel = lu.kernel();
    Vector pi = kernel.col(0);
    return pi / pi.sum();
}

}  // namespace

TEST(Generator, BrownianInteriorRatesMatchCentralDifference) {
    auto bm = model_on_unit("1", "0", FellerBoundary::reflecting(), FellerBoundary::reflecting());
    auto grid = Grid::uniform(0.0, 1.0, 10);
    auto dense = build_generator(bm, grid).dense();
    const double h = 0.1;
    for (int i = 1; i < 10; ++i) {
        EXPECT_NEAR(dense(i, i - 1), 1.0 / (2 * h * h), 1e-9);
        EXPECT_NEAR(dense(i, i + 1), 1.0 / (2 * h * h), 1e-9);
        EXPECT_NEAR(dense.row(i).sum(), 0.0, 1e-9);
    }
    // Reflecting row from the mirrored ghost point.
    EXPECT_NEAR(dense(0, 1), 1.0 / (h * h), 1e-9);
}

TEST(Generator, UpwindDriftKeepsRatesNonNegative) {
    auto ou = model_on_unit("0.01", "5*(0.5 - x)", FellerBoundary::reflecting(), FellerBoundary::reflecting());
    auto op = build_generator(ou, Grid::uniform(0.0, 1.0, 20));
    EXPECT_GE(op.min_off_diagonal(), 0.0);
    EXPECT_LE(op.max_row_sum(), 1e-12);
}

TEST(Generator, AbsorbingEndpointsHaveZeroRows) {
    auto bm = model_on_unit("1", "0", FellerBoundary::absorbing(), FellerBoundary::absorbing());
    auto dense = build_generator(bm, Grid::uniform(0.0, 1.0, 8)).dense();
    EXPECT_EQ(dense.row(0).cwiseAbs().sum(), 0.0);
    EXPECT_EQ(dense.row(8).cwiseAbs().sum(), 0.0);
}

TEST(Generator, StickyAtomMatchesContinuumOccupation) {
    // Stationary law of sticky BM: density 2 on the interior plus atoms of
    // the sticky mass m at each end, so atom/density = m/2.
    for (double mass : {0.25, 1.0, 3.0}) {
        auto bm = model_on_unit("1", "0", FellerBoundary::sticky(mass), FellerBoundary::sticky(mass));
        const int intervals = 40;
        auto grid = Grid::uniform(0.0, 1.0, intervals);
        auto pi = stationary(build_generator(bm, grid));
        const double interior_density = pi[intervals / 2] / grid.step;
        EXPECT_NEAR(pi[0] / interior_density, mass / 2.0, 1e-9 * mass) << mass;
        EXPECT_NEAR(pi[intervals] / interior_density, mass / 2.0, 1e-9 * mass) << mass;
    }
}

TEST(Generator, NaturalBoundaryAtFiniteEndRejected) {
    auto bm = model_on_unit("1", "0", FellerBoundary::natural(), FellerBoundary::reflecting());
    EXPECT_THROW((void)build_generator(bm, Grid::uniform(0.0, 1.0, 10)), std::invalid_argument);
}

TEST(OrderMapInverse, InvertsOnTheRange) {
    auto grid = Grid::uniform(0.0, 2.0, 12);
    for (auto kind : {OrderKind::increasing, OrderKind::convex, OrderKind::increasing_convex}) {
        auto phi = build_phi(kind, grid);
        const DenseMatrix dense = phi.phi.dense();
        DenseMatrix product = dense * phi.pseudo_inverse;
        // Stacked first and second differences are not onto; there Φ⁺ inverts on range(Φ) only.
        DenseMatrix error = phi.surjective ? DenseMatrix(product - DenseMatrix::Identity(product.rows(), product.cols()))
                                           : DenseMatrix(product * dense - dense);
        EXPECT_NEAR(error.cwiseAbs().maxCoeff(), 0.0, 1e-9) << to_string(kind);
        EXPECT_EQ(phi.surjective, kind != OrderKind::increasing_convex);
    }
}

TEST(OrderMapInverse, TooFewPointsRejected) {
    EXPECT_THROW((void)build_phi(OrderKind::convex, Grid::uniform(0.0, 1.0, 3)), std::invalid_argument);
}

TEST(Intertwiner, IncreasingMatchesBirthDeathDifferenceDynamics) {
    // For g_i = f_{i+1} − f_i the chain gives
    //   (Af)_{i+1} − (Af)_i = u_{i+1} g_{i+1} − (d_{i+1} + u_i) g_i + d_i g_{i−1}
    // with u, d the up and down rates.
    auto model = model_on_unit("1 + x", "0.3 - x", FellerBoundary::reflecting(), FellerBoundary::reflecting());
    auto grid = Grid::uniform(0.0, 1.0, 12);
    auto generator = build_generator(model, grid);
    auto phi = build_phi(OrderKind::increasing, grid);
    auto result = derive_discrete_intertwiner(generator, phi);
    ASSERT_TRUE(result.exact);
    const DenseMatrix A = generator.dense();
    const Eigen::Index rows = result.M.rows();
    for (Eigen::Index i = 0; i < rows; ++i) {
        EXPECT_NEAR(result.M(i, i), -A(i + 1, i) - A(i, i + 1), 1e-7);
        if (i + 1 < rows) EXPECT_NEAR(result.M(i, i + 1), A(i + 1, i + 2), 1e-7);
        if (i >= 1) EXPECT_NEAR(result.M(i, i - 1), A(i, i - 1), 1e-7);
    }
    EXPECT_TRUE(result.m_metzler);
    EXPECT_TRUE(result.c_nonnegative);
}

TEST(Intertwiner, SplitRecombinesAndTransportPolicyAgrees) {
    auto model = model_on_unit("2", "1 - 2*x", FellerBoundary::reflecting(), FellerBoundary::reflecting());
    auto grid = Grid::uniform(0.0, 1.0, 16);
    auto generator = build_generator(model, grid);
    auto phi = build_phi(OrderKind::increasing, grid);
    for (auto policy : {SplitPolicy::metzler, SplitPolicy::transport}) {
        auto result = derive_discrete_intertwiner(generator, phi, policy);
        DenseMatrix recombined = result.B.dense() + result.C.dense();
        EXPECT_LE((recombined - result.M).cwiseAbs().maxCoeff(), 1e-9);
        // Independent residual of ΦA = MΦ.
        DenseMatrix lhs = phi.phi.dense() * generator.dense();
        DenseMatrix rhs = result.M * phi.phi.dense();
        EXPECT_LE((lhs - rhs).cwiseAbs().maxCoeff(), result.tolerance);
    }
}

TEST(Intertwiner, TransportRejectedForConvexOrder) {
    auto bm = model_on_unit("1", "0", FellerBoundary::absorbing(), FellerBoundary::absorbing());
    auto grid = Grid::uniform(0.0, 1.0, 10);
    EXPECT_THROW((void)derive_discrete_intertwiner(build_generator(bm, grid), build_phi(OrderKind::convex, grid),
                                                   SplitPolicy::transport),
                 std::invalid_argument);
}

TEST(Intertwiner, ConvexAbsorbingBrownianIsExactAndMetzler) {
    auto bm = model_on_unit("1", "0", FellerBoundary::absorbing(), FellerBoundary::absorbing());
    auto grid = Grid::uniform(0.0, 1.0, 50);
    auto result = derive_discrete_intertwiner(build_generator(bm, grid), build_phi(OrderKind::convex, grid));
    EXPECT_TRUE(result.exact) << result.residual << " > " << result.tolerance;
    EXPECT_TRUE(result.m_metzler);
}

TEST(GeneratorMd, IsotropicInteriorRowIsFivePointLaplacian) {
    auto field = field_2d("1", "0", "1", "0", "0");
    auto grid = square_grid(8);
    auto dense = build_generator_md(field, grid).dense();
    const double h = 1.0 / 8;
    const Eigen::Index centre = 4 * 9 + 4;
    for (Eigen::Index neighbour : {centre - 1, centre + 1, centre - 9, centre + 9})
        EXPECT_NEAR(dense(centre, neighbour), 1.0 / (2 * h * h), 1e-9);
    EXPECT_NEAR(dense.row(centre).sum(), 0.0, 1e-9);
    EXPECT_NEAR(dense.row(centre).cwiseAbs().sum(), 4.0 / (h * h), 1e-9);
}

TEST(GeneratorMd, CorrelatedDiffusionStaysMetzler) {
    auto field = field_2d("1", "0.5", "1", "-x1", "-x2");
    auto op = build_generator_md(field, square_grid(10));
    EXPECT_GE(op.min_off_diagonal(), 0.0);
    EXPECT_LE(op.max_row_sum(), 1e-12);
}

TEST(MetzlerRepair, ComponentwiseIndependentDriftsCertifiable) {
    // Non-surjective Φ: the plain ΦAΦ⁺ has negative off-diagonals, the
    // repaired M must be Metzler while still intertwining exactly.
    auto field = field_2d("1", "0", "1", "-x1", "-x2");
    auto grid = square_grid(8);
    auto generator = build_generator_md(field, grid);
    auto phi = build_phi_md(IndexSet::coordinates(2), grid);
    EXPECT_FALSE(phi.surjective);
    auto result = derive_discrete_intertwiner(generator, phi);
    EXPECT_TRUE(result.exact) << result.residual;
    EXPECT_TRUE(result.m_metzler);
    DenseMatrix lhs = phi.phi.dense() * generator.dense();
    DenseMatrix rhs = result.M * phi.phi.dense();
    EXPECT_LE((lhs - rhs).cwiseAbs().maxCoeff(), result.tolerance);
}

TEST(MetzlerRepair, CrossDriftAgainstOrderStaysNonMetzler) {
    // b1 decreasing in x2 breaks componentwise monotonicity; no Metzler M exists.
    auto field = field_2d("1", "0", "1", "-x1 - x2", "-x2");
    auto grid = square_grid(8);
    auto result = derive_discrete_intertwiner(build_generator_md(field, grid),
                                              build_phi_md(IndexSet::coordinates(2), grid));
    EXPECT_FALSE(result.m_metzler);
    ASSERT_TRUE(result.negative_m.has_value());
    EXPECT_LT(result.negative_m->value, 0.0);
}
