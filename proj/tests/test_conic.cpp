#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "anonphy/conic.hpp"

using namespace anonphy;
using namespace anonphy::conic;

namespace {

// Optimal pairs built from complementary (x*, s*) and an arbitrary y*:
// c = A' y* + s*, b = A x*. Any solver output must match c' x* = b' y*.
struct Planted {
    ConicProgram prog;
    double optimum = 0.0;
};

RealVector random_vec(std::mt19937_64& rng, int n) {
    std::normal_distribution<double> g;
    RealVector v(n);
    for (int i = 0; i < n; ++i) v(i) = g(rng);
    return v;
}

Planted planted_program(std::mt19937_64& rng, int lp, int soc, int psd, int m) {
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> u(0.5, 2.0);
    Planted p;
    std::vector<RealVector> xs, ss;
    if (lp > 0) {
        p.prog.cones.push_back(Cone::nonnegative(lp));
        RealVector x(lp), s(lp);
        for (int i = 0; i < lp; ++i) {
            if (i % 2 == 0) { x(i) = u(rng); s(i) = 0.0; }
            else { x(i) = 0.0; s(i) = u(rng); }
        }
        xs.push_back(x);
        ss.push_back(s);
    }
    if (soc > 0) {
        // boundary x = (|a|, a), s = (|a|, -a) scaled: x's = 0
        p.prog.cones.push_back(Cone::second_order(soc));
        RealVector a = random_vec(rng, soc - 1);
        RealVector x(soc), s(soc);
        x(0) = a.norm();
        x.tail(soc - 1) = a;
        s(0) = a.norm();
        s.tail(soc - 1) = -a;
        xs.push_back(x * u(rng));
        ss.push_back(s * u(rng));
    }
    if (psd > 0) {
        p.prog.cones.push_back(Cone::semidefinite(psd));
        RealMatrix q = Eigen::HouseholderQR<RealMatrix>(RealMatrix::NullaryExpr(psd, psd, [&] { return g(rng); }))
                           .householderQ();
        const int r = psd / 2;
        RealVector dx = RealVector::Zero(psd), ds = RealVector::Zero(psd);
        for (int i = 0; i < psd; ++i) (i < r ? dx(i) : ds(i)) = u(rng);
        xs.push_back(svec(RealMatrix(q * dx.asDiagonal() * q.transpose())));
        ss.push_back(svec(RealMatrix(q * ds.asDiagonal() * q.transpose())));
    }
    int n = 0;
    for (auto& v : xs) n += static_cast<int>(v.size());
    RealVector x(n), s(n);
    int off = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        x.segment(off, xs[i].size()) = xs[i];
        s.segment(off, ss[i].size()) = ss[i];
        off += static_cast<int>(xs[i].size());
    }
    p.prog.A = RealMatrix::NullaryExpr(m, n, [&] { return g(rng); });
    RealVector y = random_vec(rng, m);
    p.prog.b = p.prog.A * x;
    p.prog.c = p.prog.A.transpose() * y + s;
    p.optimum = p.prog.c.dot(x);
    return p;
}

}  // namespace

TEST(Conic, LinearLowerBound) {
    // min x s.t. x >= 1, written as x - slack = 1 with (x, slack) >= 0
    ConicProgram p;
    p.c = RealVector::Zero(2);
    p.c(0) = 1.0;
    p.A = RealMatrix(1, 2);
    p.A << 1.0, -1.0;
    p.b = RealVector::Ones(1);
    p.cones = {Cone::nonnegative(2)};
    const Solution s = solve_conic(p);
    ASSERT_EQ(s.status, SolveStatus::Optimal) << s.message;
    EXPECT_NEAR(s.x(0), 1.0, 1e-7);
    EXPECT_NEAR(s.objective, 1.0, 1e-7);
    EXPECT_LE(s.gap, 1e-7);
}

TEST(Conic, SecondOrderNorm) {
    // min t s.t. ||(3, 4)|| <= t
    ConicProgram p;
    p.c = RealVector::Zero(3);
    p.c(0) = 1.0;
    p.A = RealMatrix::Zero(2, 3);
    p.A(0, 1) = 1.0;
    p.A(1, 2) = 1.0;
    p.b = RealVector(2);
    p.b << 3.0, 4.0;
    p.cones = {Cone::second_order(3)};
    const Solution s = solve_conic(p);
    ASSERT_EQ(s.status, SolveStatus::Optimal) << s.message;
    EXPECT_NEAR(s.objective, 5.0, 1e-7);
}

TEST(Conic, SemidefiniteCorner) {
    // min Tr X s.t. X >= 0, X11 = 1  ->  X = e1 e1'
    ConicProgram p;
    p.c = svec(RealMatrix(RealMatrix::Identity(2, 2)));
    RealMatrix e11 = RealMatrix::Zero(2, 2);
    e11(0, 0) = 1.0;
    p.A = svec(e11).transpose();
    p.b = RealVector::Ones(1);
    p.cones = {Cone::semidefinite(2)};
    const Solution s = solve_conic(p);
    ASSERT_EQ(s.status, SolveStatus::Optimal) << s.message;
    EXPECT_NEAR(s.objective, 1.0, 1e-7);
    RealMatrix x = smat(s.x, 2);
    EXPECT_NEAR(x(0, 0), 1.0, 1e-6);
    EXPECT_NEAR(x(1, 1), 0.0, 1e-6);
    EXPECT_NEAR(x(0, 1), 0.0, 1e-6);
}

TEST(Conic, ReportedObjectiveMatchesPrimal) {
    std::mt19937_64 rng(11);
    auto pl = planted_program(rng, 4, 4, 3, 5);
    const Solution s = solve_conic(pl.prog);
    ASSERT_EQ(s.status, SolveStatus::Optimal);
    EXPECT_NEAR(s.objective, pl.prog.c.dot(s.x), 1e-9);
}

TEST(Conic, PlantedOptimaMixedCones) {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 25; ++trial) {
        const int lp = 2 + trial % 4, soc = 2 + trial % 5, psd = 2 + trial % 4;
        const int n = lp + soc + psd * (psd + 1) / 2;
        const int m = 1 + trial % (n - 1);
        auto pl = planted_program(rng, lp, soc, psd, m);
        const Solution s = solve_conic(pl.prog);
        ASSERT_EQ(s.status, SolveStatus::Optimal) << "trial " << trial << ": " << s.message;
        EXPECT_NEAR(s.objective, pl.optimum, 1e-6 * std::max(1.0, std::abs(pl.optimum))) << "trial " << trial;
        EXPECT_LE(s.primal_residual, 1e-7);
        EXPECT_LE(s.dual_residual, 1e-7);
        EXPECT_LE(s.gap, 1e-7);
    }
}

TEST(Conic, DetectsInfeasibility) {
    // x1 + x2 = -1 with x >= 0
    ConicProgram p;
    p.c = RealVector::Ones(2);
    p.A = RealMatrix::Ones(1, 2);
    p.b = -RealVector::Ones(1);
    p.cones = {Cone::nonnegative(2)};
    EXPECT_EQ(solve_conic(p).status, SolveStatus::Infeasible);
}

TEST(Conic, DetectsUnboundedness) {
    // min -x1 s.t. x1 - x2 = 0, x >= 0
    ConicProgram p;
    p.c = RealVector::Zero(2);
    p.c(0) = -1.0;
    p.A = RealMatrix(1, 2);
    p.A << 1.0, -1.0;
    p.b = RealVector::Zero(1);
    p.cones = {Cone::nonnegative(2)};
    EXPECT_EQ(solve_conic(p).status, SolveStatus::Unbounded);
}

TEST(Conic, IterationLimitReportsNumericalFailure) {
    std::mt19937_64 rng(5);
    auto pl = planted_program(rng, 3, 3, 3, 4);
    SolverSettings opt;
    opt.max_iterations = 2;
    EXPECT_EQ(solve_conic(pl.prog, opt).status, SolveStatus::NumericalFailure);
}

TEST(Conic, MalformedProgramRejected) {
    ConicProgram p;
    p.c = RealVector::Ones(3);
    p.A = RealMatrix::Ones(1, 3);
    p.b = RealVector::Ones(1);
    p.cones = {Cone::nonnegative(2)};
    EXPECT_THROW(solve_conic(p), std::invalid_argument);
    p.cones = {Cone::nonnegative(3)};
    p.A = RealMatrix::Ones(2, 3);
    EXPECT_THROW(solve_conic(p), std::invalid_argument);
}

TEST(Conic, Deterministic) {
    std::mt19937_64 rng(8);
    auto pl = planted_program(rng, 3, 4, 3, 4);
    const Solution a = solve_conic(pl.prog);
    const Solution b = solve_conic(pl.prog);
    EXPECT_EQ(a.iterations, b.iterations);
    EXPECT_EQ((a.x - b.x).norm(), 0.0);
}

TEST(Conic, SvecRoundTripAndInnerProduct) {
    std::mt19937_64 rng(3);
    RealMatrix a = RealMatrix::NullaryExpr(4, 4, [&] { return std::normal_distribution<double>()(rng); });
    RealMatrix b = RealMatrix::NullaryExpr(4, 4, [&] { return std::normal_distribution<double>()(rng); });
    a = (a + a.transpose()).eval();
    b = (b + b.transpose()).eval();
    EXPECT_EQ(svec(a).size(), 10);
    EXPECT_LT((smat(svec(a), 4) - a).norm(), 1e-12);
    EXPECT_NEAR(svec(a).dot(svec(b)), (a * b).trace(), 1e-12);
}

TEST(Embedding, ScalarOne) {
    ComplexMatrix one = ComplexMatrix::Ones(1, 1);
    RealMatrix e = embed_hermitian_psd(one);
    EXPECT_TRUE(e.isApprox(RealMatrix::Identity(2, 2)));
}

TEST(Embedding, RejectsNonHermitian) {
    ComplexMatrix i1(1, 1);
    i1(0, 0) = cdouble(0.0, 1.0);
    EXPECT_THROW(embed_hermitian_psd(i1), std::invalid_argument);
}

TEST(Embedding, EigenvaluesDouble) {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> g;
    ComplexMatrix b = ComplexMatrix::NullaryExpr(3, 3, [&] { return cdouble(g(rng), g(rng)); });
    ComplexMatrix m = b * b.adjoint();
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(m);
    Eigen::SelfAdjointEigenSolver<RealMatrix> er(embed_hermitian_psd(m));
    RealVector expect(6);
    for (int i = 0; i < 3; ++i) expect(2 * i) = expect(2 * i + 1) = es.eigenvalues()(i);
    EXPECT_LT((er.eigenvalues() - expect).norm(), 1e-10);
    EXPECT_NEAR(embed_hermitian_psd(m).trace(), 2.0 * m.trace().real(), 1e-10);
}

TEST(Embedding, TraceFormIsHalved) {
    std::mt19937_64 rng(19);
    std::normal_distribution<double> g;
    ComplexMatrix a = ComplexMatrix::NullaryExpr(3, 3, [&] { return cdouble(g(rng), g(rng)); });
    ComplexMatrix x = ComplexMatrix::NullaryExpr(3, 3, [&] { return cdouble(g(rng), g(rng)); });
    a = (a + a.adjoint()).eval();
    x = (x * x.adjoint()).eval();
    const double lhs = trace_form_coefficients(a).dot(svec(embed_hermitian_psd(x)));
    EXPECT_NEAR(lhs, (a * x).trace().real(), 1e-10);
}

TEST(Embedding, RoundTripThroughSolver) {
    // min Tr(C Q) s.t. Tr(Q) = 1, Q >= 0 complex: optimum at the bottom eigenvector of C.
    std::mt19937_64 rng(23);
    std::normal_distribution<double> g;
    ComplexMatrix cm = ComplexMatrix::NullaryExpr(3, 3, [&] { return cdouble(g(rng), g(rng)); });
    cm = (cm + cm.adjoint()).eval();
    ConicProgram p;
    p.c = trace_form_coefficients(cm);
    p.A = trace_form_coefficients(ComplexMatrix::Identity(3, 3)).transpose();
    p.b = RealVector::Ones(1);
    p.cones = {Cone::semidefinite(6)};
    const Solution s = solve_conic(p);
    ASSERT_EQ(s.status, SolveStatus::Optimal);
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(cm);
    EXPECT_NEAR(s.objective, es.eigenvalues()(0), 1e-7);
    RealMatrix block = smat(s.x, 6);
    ComplexMatrix q = extract_hermitian(block);
    EXPECT_LT((embed_hermitian_psd(q) - block).norm(), 1e-8);
}

TEST(Conic, DumpHasHeaderAndCones) {
    ConicProgram p;
    p.c = RealVector::Ones(3);
    p.A = RealMatrix::Ones(1, 3);
    p.b = RealVector::Ones(1);
    p.cones = {Cone::second_order(3)};
    std::ostringstream os;
    dump_program(p, os);
    EXPECT_NE(os.str().find("conic-program 1"), std::string::npos);
    EXPECT_NE(os.str().find("q 3"), std::string::npos);
}
