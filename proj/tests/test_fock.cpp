#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "qthermo/fock.hpp"

using namespace qthermo;

namespace {

double block_max_abs(const CMatrix& m, int block)
{
    return m.topLeftCorner(block, block).cwiseAbs().maxCoeff();
}

} // namespace

TEST(Ladder, TwoLevelLowering)
{
    const auto [a, adag] = ladder_operators(2);
    EXPECT_DOUBLE_EQ(a(0, 1).real(), 1.0);
    EXPECT_DOUBLE_EQ(std::abs(a(0, 0)) + std::abs(a(1, 0)) + std::abs(a(1, 1)), 0.0);
    EXPECT_DOUBLE_EQ(adag(1, 0).real(), 1.0);
}

TEST(Ladder, RaisingElement)
{
    const auto [a, adag] = ladder_operators(3);
    EXPECT_DOUBLE_EQ(adag(2, 1).real(), std::sqrt(2.0));
    EXPECT_EQ(adag.matrix(), a.matrix().adjoint());
}

TEST(Ladder, CommutatorIsIdentityAwayFromEdge)
{
    const int dim = 20;
    const auto [a, adag] = ladder_operators(dim);
    const CMatrix comm = a.matrix() * adag.matrix() - adag.matrix() * a.matrix();
    const int block = dim - 1;
    EXPECT_LT(block_max_abs(comm - CMatrix::Identity(dim, dim), block), 1e-14);
    // The last diagonal entry carries the truncation defect 1 - dim.
    EXPECT_NEAR(comm(dim - 1, dim - 1).real(), 1.0 - dim, 1e-12);
}

TEST(Ladder, RejectsSmallDimension)
{
    EXPECT_THROW(ladder_operators(1), InvalidDimension);
    EXPECT_THROW(displacement_operator({0.1, 0.0}, 0), InvalidDimension);
}

TEST(Displacement, ZeroIsIdentity)
{
    const auto d = displacement_operator({0.0, 0.0}, 8);
    EXPECT_EQ(d.matrix(), CMatrix::Identity(8, 8));
}

TEST(Displacement, VacuumOverlap)
{
    const auto d = displacement_operator({0.3, 0.0}, 32);
    EXPECT_NEAR(std::norm(d(0, 0)), std::exp(-0.09), 1e-13);
}

TEST(Displacement, VacuumColumnIsCoherentState)
{
    const cplx alpha{0.7, -0.4};
    const int dim = 48;
    const auto d = displacement_operator(alpha, dim);
    // alpha^m e^{-|alpha|^2/2} / sqrt(m!)
    for (int m = 0; m < dim / 2; ++m) {
        const cplx expected = std::exp(-0.5 * std::norm(alpha) - 0.5 * std::lgamma(m + 1.0))
                              * std::pow(alpha, m);
        EXPECT_LT(std::abs(d(m, 0) - expected), 1e-12) << "m=" << m;
    }
}

TEST(Displacement, ShiftsAnnihilator)
{
    const cplx alpha{0.5, 0.25};
    const int dim = 64;
    const auto d = displacement_operator(alpha, dim);
    const auto [a, adag] = ladder_operators(dim);
    const CMatrix lhs = d.matrix().adjoint() * a.matrix() * d.matrix();
    const CMatrix rhs = a.matrix() + alpha * CMatrix::Identity(dim, dim);
    EXPECT_LT(block_max_abs(lhs - rhs, dim / 2), unitarity_tol);
}

TEST(Displacement, RejectsNonFinite)
{
    EXPECT_THROW(displacement_operator({std::nan(""), 0.0}, 8), InvalidParameter);
    EXPECT_THROW(displacement_operator({0.0, INFINITY}, 8), InvalidParameter);
}

TEST(Squeezing, ZeroIsIdentity)
{
    EXPECT_EQ(squeezing_operator(0.0, 1.3, 6).matrix(), CMatrix::Identity(6, 6));
}

TEST(Squeezing, OddAmplitudesFromVacuumVanish)
{
    const auto s = squeezing_operator(0.4, 0.9, 40);
    for (int m = 1; m < 40; m += 2)
        EXPECT_LT(std::abs(s(m, 0)), 1e-14) << "m=" << m;
}

TEST(Squeezing, VacuumAmplitude)
{
    const double r = 0.5 * std::atanh(0.6);
    const auto s = squeezing_operator(r, 0.0, 64);
    EXPECT_NEAR(std::norm(s(0, 0)), 1.0 / std::cosh(r), 1e-13);
}

TEST(Squeezing, BogoliubovAction)
{
    const double r = 0.35;
    const double theta = 0.8;
    const int dim = 96;
    const auto s = squeezing_operator(r, theta, dim);
    const auto [a, adag] = ladder_operators(dim);
    const CMatrix lhs = s.matrix().adjoint() * a.matrix() * s.matrix();
    const CMatrix rhs = a.matrix() * std::cosh(r) - adag.matrix() * std::exp(I * theta) * std::sinh(r);
    EXPECT_LT(block_max_abs(lhs - rhs, dim / 4), unitarity_tol);
}

TEST(Squeezing, RejectsNegativeR)
{
    EXPECT_THROW(squeezing_operator(-0.1, 0.0, 8), InvalidParameter);
}

TEST(Operators, BraidingAndUnitarity)
{
    const int dim = 64;
    const cplx alpha{0.4, -0.3};
    const auto d = displacement_operator(alpha, dim);
    const auto dm = displacement_operator(-alpha, dim);
    EXPECT_LT(block_max_abs((d * dm).matrix() - CMatrix::Identity(dim, dim), dim / 2), unitarity_tol);
    const auto s = squeezing_operator(0.3, 0.2, dim);
    EXPECT_LT(block_max_abs((s * s.adjoint()).matrix() - CMatrix::Identity(dim, dim), dim / 2), unitarity_tol);
    EXPECT_LT(unitarity_defect(d), unitarity_tol);
    EXPECT_LT(unitarity_defect(s), unitarity_tol);
}

// Random operators: unitarity on the central block and stability of the
// top-left block under doubling of the truncation.
TEST(Operators, PropertyDoublingStability)
{
    std::mt19937_64 rng(20240611);
    std::uniform_real_distribution<double> mag(0.0, 0.6);
    std::uniform_real_distribution<double> phase(-pi, pi);
    std::uniform_real_distribution<double> sq(0.0, 0.45);
    for (int trial = 0; trial < 8; ++trial) {
        const cplx alpha = std::polar(mag(rng), phase(rng));
        const double r = sq(rng);
        const double theta = phase(rng);
        const auto d1 = converged_operator([&](int dim) { return displacement_operator(alpha, dim); });
        const auto s1 = converged_operator([&](int dim) { return squeezing_operator(r, theta, dim); });
        const int dd = d1.dim();
        const int ds = s1.dim();
        const auto d2 = displacement_operator(alpha, 2 * dd);
        const auto s2 = squeezing_operator(r, theta, 2 * ds);
        EXPECT_LT(block_max_abs(d1.matrix() - d2.matrix().topLeftCorner(dd, dd), dd / 2), 1e-9);
        EXPECT_LT(block_max_abs(s1.matrix() - s2.matrix().topLeftCorner(ds, ds), ds / 2), 1e-9);
        EXPECT_LT(unitarity_defect(d1), unitarity_tol);
        EXPECT_LT(unitarity_defect(s1), unitarity_tol);
        const CMatrix braid = (d1 * displacement_operator(-alpha, dd)).matrix();
        EXPECT_LT(block_max_abs(braid - CMatrix::Identity(dd, dd), dd / 2), unitarity_tol);
    }
}

TEST(Thermal, GroundStateFreezeOut)
{
    RVector e(6);
    for (int n = 0; n < 6; ++n)
        e(n) = n + 0.5;
    const auto t = thermal_populations(1e3, e);
    EXPECT_DOUBLE_EQ(t.probs(0), 1.0);
    for (int n = 1; n < 6; ++n)
        EXPECT_LT(t.probs(n), 1e-300);
}

TEST(Thermal, GeometricSeries)
{
    const int dim = 64;
    RVector e(dim);
    for (int n = 0; n < dim; ++n)
        e(n) = n + 0.5;
    const auto t = thermal_populations(1.0, e);
    for (int n = 0; n < 20; ++n)
        EXPECT_NEAR(t.probs(n), (1.0 - std::exp(-1.0)) * std::exp(-n), 1e-15);
    EXPECT_NEAR(t.probs.sum(), 1.0, 1e-12);
    EXPECT_LT(t.tail_mass, 1e-8);
    // Z of the truncated ladder vs e^{-1/2}/(1 - e^{-1}) (tail ~ e^{-64}).
    EXPECT_NEAR(t.partition_value, std::exp(-0.5) / (1.0 - std::exp(-1.0)), 1e-14);
}

TEST(Thermal, DegenerateSpectrumIsUniform)
{
    const RVector e = RVector::Constant(5, 2.5);
    const auto t = thermal_populations(0.7, e);
    for (int n = 0; n < 5; ++n)
        EXPECT_DOUBLE_EQ(t.probs(n), 0.2);
}

TEST(Thermal, MonotoneForIncreasingSpectrum)
{
    RVector e(30);
    for (int n = 0; n < 30; ++n)
        e(n) = 0.8 * (n + 0.5) - 0.3;
    const auto t = thermal_populations(0.5, e);
    for (int n = 1; n < 30; ++n)
        EXPECT_LE(t.probs(n), t.probs(n - 1));
}

TEST(Thermal, RejectsNonPositiveBeta)
{
    const RVector e = RVector::LinSpaced(4, 0.5, 3.5);
    EXPECT_THROW(thermal_populations(0.0, e), InvalidParameter);
    EXPECT_THROW(thermal_populations(-1.0, e), InvalidParameter);
}

TEST(Convergence, DoublesUntilStable)
{
    // Observable: truncated geometric sum, converges once e^{-dim} < tol.
    auto evaluate = [](int dim) {
        double s = 0.0;
        for (int n = 0; n < dim; ++n)
            s += std::exp(-0.5 * n);
        return s;
    };
    auto obs = [](double v) { return std::vector<double>{v}; };
    const auto c = converge_dimension(evaluate, obs, {.initial_dim = 8, .max_dim = 1024, .tolerance = 1e-9});
    EXPECT_EQ(c.dim, 128); // 32 -> 64 still moves by ~3e-7
    EXPECT_LT(c.change, 1e-9);
    EXPECT_THROW(converge_dimension(evaluate, obs, {.initial_dim = 8, .max_dim = 16, .tolerance = 1e-9}),
                 ConvergenceError);
}
