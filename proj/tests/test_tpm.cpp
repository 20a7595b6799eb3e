#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "qthermo/tpm.hpp"

using namespace qthermo;

namespace {

QuenchSpec drive(double eta, double gamma, double eta_phase = 0.0, double gamma_phase = 0.0)
{
    return {.omega = 1.0, .eta_mag = eta, .eta_phase = eta_phase, .gamma_mag = gamma, .gamma_phase = gamma_phase};
}

struct Quench {
    double beta;
    QuenchSpec initial;
    QuenchSpec final_;
};

Converged<TwoPointProtocol> converged(const Quench& q)
{
    return converged_two_point(q.beta, diagonalize(q.initial), diagonalize(q.final_));
}

double converged_trace_work(const Quench& q)
{
    auto eval = [&](int dim) { return trace_average_work(q.beta, q.initial, q.final_, dim); };
    return converge_dimension(eval, [](double v) { return std::vector<double>{v}; }).value;
}

} // namespace

TEST(WorkDistribution, MergesNearbyValues)
{
    const auto d = WorkDistribution::merge({{1.0, 0.2}, {0.0, 0.3}, {1.0 + 5e-10, 0.1}, {2.0, 0.0}, {3.0, 0.4}});
    ASSERT_EQ(d.size(), 3u);
    EXPECT_DOUBLE_EQ(d.atoms()[0].work, 0.0);
    EXPECT_NEAR(d.atoms()[1].probability, 0.3, 1e-15);
    EXPECT_NEAR(d.total_probability(), 1.0, 1e-15);
    EXPECT_NEAR(d.probability_at(1.0), 0.3, 1e-15);
    EXPECT_EQ(d.probability_at(2.0), 0.0);
    EXPECT_NEAR(d.mass_below(1.0), 0.3, 1e-15);
    EXPECT_THROW(WorkDistribution::merge({{0.0, -0.1}}), InvalidParameter);
    EXPECT_THROW(WorkDistribution::merge({{NAN, 0.1}}), InvalidParameter);
}

TEST(TwoPoint, IdenticalHamiltoniansGiveZeroWork)
{
    const auto d = diagonalize(drive(0.2, 0.1, 0.4, 1.3));
    const auto dist = work_distribution(1.0, d, d, 64);
    ASSERT_EQ(dist.size(), 1u);
    EXPECT_EQ(dist.atoms()[0].work, 0.0);
    EXPECT_NEAR(dist.atoms()[0].probability, 1.0, 1e-14);
    const auto ep = entropy_production(dist, 1.0, free_energy_change(1.0, d, d));
    EXPECT_EQ(ep.sigma, 0.0);
    EXPECT_NEAR(ep.ift, 1.0, 1e-14);
}

// Sudden displacement of the bare oscillator: column n = 0 is Poissonian,
// |<m|alpha>|^2 = e^{-|alpha|^2} |alpha|^{2m}/m!.
TEST(TwoPoint, DisplacementColumnIsPoissonian)
{
    const double a = 0.7;
    const RMatrix p = transition_matrix(diagonalize(drive(0.0, 0.0)), diagonalize(drive(a, 0.0)), 64);
    for (int m = 0; m < 20; ++m) {
        const double oracle = std::exp(-a * a + 2.0 * m * std::log(a) - std::lgamma(m + 1.0));
        EXPECT_NEAR(p(m, 0), oracle, 1e-13) << "m=" << m;
    }
}

TEST(TwoPoint, PureSqueezeConservesParity)
{
    const RMatrix p = transition_matrix(diagonalize(drive(0.0, 0.0)), diagonalize(drive(0.0, 0.3, 0.0, 0.9)), 128);
    double odd = 0.0;
    for (int n = 0; n < 64; ++n)
        for (int m = 0; m < 128; ++m)
            if ((m - n) % 2 != 0)
                odd = std::max(odd, p(m, n));
    EXPECT_EQ(odd, 0.0);
}

TEST(TwoPoint, TrustedColumnsAreNormalized)
{
    const auto tp = prepare_two_point(0.7, diagonalize(drive(0.1, 0.2, 0.3, -0.4)),
                                      diagonalize(drive(0.4, 0.1, 1.1, 2.0)), 256);
    EXPECT_LT(tp.column_defect(), 1e-9);
    EXPECT_NEAR(work_distribution(tp).total_probability(), 1.0, 1e-9);
}

TEST(TwoPoint, DisplacementRowsHaveZeroMeanWork)
{
    for (double eta : {0.3, 0.5}) {
        const Quench q{1.0, drive(0.0, 0.0), drive(eta, 0.0)};
        const auto c = converged(q);
        const auto dist = work_distribution(c.value);
        EXPECT_NEAR(dist.mean(), 0.0, 1e-10);
        const double df = free_energy_change(1.0, diagonalize(q.initial), diagonalize(q.final_));
        EXPECT_NEAR(df, -eta * eta, 1e-15);
        EXPECT_NEAR(jarzynski_average(dist, 1.0, df).exp_dissipated, 1.0, 1e-9);
    }
}

// Switching off |gamma| = 0.3 at beta omega = 1/2. The work operator is
// -(gamma a^dag^2 + h.c.), whose thermal average closes to 0.5625 * 0.4 * coth(0.2).
TEST(TwoPoint, UnsqueezingWorkMatchesClosedForm)
{
    const Quench q{0.5, drive(0.0, 0.3), drive(0.0, 0.0)};
    const auto c = converged(q);
    const auto dist = work_distribution(c.value);
    const double closed = 0.5625 * 0.4 / std::tanh(0.2);
    EXPECT_NEAR(dist.mean(), closed, 1e-9);
    EXPECT_NEAR(dist.mean(), 1.1400, 5e-5);
    const double df = free_energy_change(0.5, diagonalize(q.initial), diagonalize(q.final_));
    EXPECT_NEAR(jarzynski_average(dist, 0.5, df).exp_dissipated, 1.0, 1e-8);
}

TEST(TwoPoint, MeanWorkMatchesDirectTrace)
{
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> eta(0.0, 0.5);
    std::uniform_real_distribution<double> gam(0.0, 0.3);
    std::uniform_real_distribution<double> ph(-pi, pi);
    for (int k = 0; k < 4; ++k) {
        const Quench q{1.0, drive(eta(rng), gam(rng), ph(rng), ph(rng)), drive(eta(rng), gam(rng), ph(rng), ph(rng))};
        const auto dist = work_distribution(converged(q).value);
        EXPECT_NEAR(dist.mean(), converged_trace_work(q), 1e-8);
    }
}

// <e^{-beta W}> as an explicit double sum over (m, n) of a small truncated
// problem, without any grouping of work values.
TEST(Jarzynski, MatchesUngroupedEnumeration)
{
    const double beta = 0.8;
    const auto a = diagonalize(drive(0.2, 0.1, 0.3, 0.5));
    const auto b = diagonalize(drive(0.1, 0.15, -1.0, 2.0));
    const int dim = 8;
    const RMatrix p = transition_matrix(a, b, dim);
    double z = 0.0;
    for (int n = 0; n < dim / 2; ++n)
        z += std::exp(-beta * a.level(n));
    double sum = 0.0;
    for (int n = 0; n < dim / 2; ++n)
        for (int m = 0; m < dim; ++m)
            sum += std::exp(-beta * a.level(n)) / z * p(m, n) * std::exp(-beta * (b.level(m) - a.level(n)));
    const auto dist = work_distribution(beta, a, b, dim);
    EXPECT_NEAR(dist.exp_average(beta), sum, 1e-13);
}

TEST(Jarzynski, HoldsForRandomQuenches)
{
    std::mt19937_64 rng(19);
    std::uniform_real_distribution<double> eta(0.0, 0.5);
    std::uniform_real_distribution<double> gam(0.0, 0.3);
    std::uniform_real_distribution<double> ph(-pi, pi);
    std::uniform_real_distribution<double> bet(0.5, 2.0);
    for (int k = 0; k < 6; ++k) {
        const double beta = bet(rng);
        const auto a = diagonalize(drive(eta(rng), gam(rng), ph(rng), ph(rng)));
        const auto b = diagonalize(drive(eta(rng), gam(rng), ph(rng), ph(rng)));
        const auto dist = work_distribution(converged_two_point(beta, a, b).value);
        const double df = free_energy_change(beta, a, b);
        const auto jr = jarzynski_average(dist, beta, df);
        EXPECT_NEAR(jr.exp_dissipated, 1.0, 1e-8);
        // Jensen: <W> >= dF.
        EXPECT_GE(dist.mean(), df - 1e-10);
        EXPECT_GE(entropy_production(dist, beta, df).sigma, -1e-10);
    }
}

TEST(EntropyProduction, EqualsRelativeEntropyToFinalThermalState)
{
    const Quench quenches[] = {
        {0.5, drive(0.0, 0.0), drive(0.0, 0.3)},
        {1.0, drive(0.1, 0.05, 0.2, 0.1), drive(0.3, 0.2, -0.7, 1.2)},
    };
    for (const auto& q : quenches) {
        const auto a = diagonalize(q.initial);
        const auto b = diagonalize(q.final_);
        const auto dist = work_distribution(converged_two_point(q.beta, a, b).value);
        const double sigma = entropy_production(dist, q.beta, free_energy_change(q.beta, a, b)).sigma;
        auto eval = [&](int dim) { return relative_entropy_production(q.beta, q.initial, q.final_, dim); };
        const double rel = converge_dimension(eval, [](double v) { return std::vector<double>{v}; }).value;
        EXPECT_NEAR(sigma, rel, 1e-6);
    }
    // Squeezing the bare oscillator at beta omega = 1/2 does no average work.
    const auto a = diagonalize(drive(0.0, 0.0));
    const auto b = diagonalize(drive(0.0, 0.3));
    EXPECT_NEAR(relative_entropy_production(0.5, drive(0.0, 0.0), drive(0.0, 0.3), 128),
                -0.5 * free_energy_change(0.5, a, b), 1e-9);
}

TEST(QuantumState, RejectsInvalidMatrices)
{
    CMatrix rho = CMatrix::Zero(2, 2);
    rho(0, 0) = 0.6;
    rho(1, 1) = 0.5;
    EXPECT_THROW(QuantumState{rho}, StateValidityError);
    rho(1, 1) = 0.4;
    rho(0, 1) = 0.1;
    EXPECT_THROW(QuantumState{rho}, StateValidityError);
    rho(1, 0) = 0.1;
    EXPECT_NO_THROW(QuantumState{rho});
    CMatrix neg = CMatrix::Zero(2, 2);
    neg(0, 0) = 1.2;
    neg(1, 1) = -0.2;
    EXPECT_THROW(QuantumState{neg}, StateValidityError);
}

TEST(QuantumState, RelativeEntropyOfDiagonalStates)
{
    CMatrix p = CMatrix::Zero(2, 2);
    CMatrix q = CMatrix::Zero(2, 2);
    p(0, 0) = 0.7;
    p(1, 1) = 0.3;
    q(0, 0) = 0.4;
    q(1, 1) = 0.6;
    const double expected = 0.7 * std::log(0.7 / 0.4) + 0.3 * std::log(0.3 / 0.6);
    EXPECT_NEAR(relative_entropy(QuantumState{p}, QuantumState{q}), expected, 1e-14);
    EXPECT_NEAR(relative_entropy(QuantumState{p}, QuantumState{p}), 0.0, 1e-14);
}

TEST(TwoPoint, DefaultTruncationLeavesNegligibleTail)
{
    const auto tp = prepare_two_point(1.0, diagonalize(drive(0.0, 0.0)), diagonalize(drive(0.3, 0.0)), 64);
    EXPECT_LT(tp.populations.tail_mass, 1e-8);
}

TEST(Output, CsvRoundTripsValues)
{
    const auto d = WorkDistribution::merge({{-0.25, 0.5}, {0.1, 0.5}});
    std::ostringstream os;
    write_csv(os, d);
    EXPECT_EQ(os.str(), "work,probability\n-0.25,0.5\n0.1,0.5\n");
    EXPECT_EQ(std::stod(format_double(0.1 + 0.2)), 0.1 + 0.2);
}

TEST(Output, BroadenedDensityIntegratesToOne)
{
    const auto d = WorkDistribution::merge({{-1.0, 0.25}, {0.5, 0.75}});
    std::vector<double> grid;
    for (int i = 0; i <= 4000; ++i)
        grid.push_back(-6.0 + 12.0 * i / 4000.0);
    const auto rho = broadened_density(d, grid, 0.2);
    double integral = 0.0;
    for (double v : rho)
        integral += v * 12.0 / 4000.0;
    EXPECT_NEAR(integral, 1.0, 1e-9);
}
