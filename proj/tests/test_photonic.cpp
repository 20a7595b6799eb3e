#include <cmath>
#include <random>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <gtest/gtest.h>

#include "qthermo/photonic.hpp"

using namespace qthermo;

namespace {

QubitState random_state(std::mt19937_64& rng)
{
    std::normal_distribution<double> g;
    Qubit m;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            m(i, j) = {g(rng), g(rng)};
    Qubit rho = m * m.adjoint();
    rho /= rho.trace();
    return QubitState(0.5 * (rho + rho.adjoint()));
}

// Sum over n of P(n) f(n), cut where the Bose-Einstein tail is negligible.
template <class F>
double be_expectation(double n_bar, F f)
{
    double s = 0.0;
    for (std::int64_t n = 0; n < 2000; ++n)
        s += bose_einstein_pmf(n_bar, n) * f(static_cast<double>(n));
    return s;
}

} // namespace

TEST(ThermalSampler, ChiSquareAgainstBoseEinstein)
{
    const double n_bar = 1.5;
    const int samples = 1000000;
    const int bins = 25; // last bin collects the tail
    std::mt19937_64 rng(11);
    std::vector<double> counts(bins, 0.0);
    for (int i = 0; i < samples; ++i) {
        const auto n = thermal_photon_sample(n_bar, rng);
        counts[std::min<std::int64_t>(n, bins - 1)] += 1.0;
    }
    double chi2 = 0.0, head = 0.0;
    for (int k = 0; k < bins; ++k) {
        double p = k < bins - 1 ? bose_einstein_pmf(n_bar, k) : 1.0 - head;
        head += p;
        const double expect = p * samples;
        chi2 += (counts[k] - expect) * (counts[k] - expect) / expect;
    }
    const boost::math::chi_squared dist(bins - 1);
    EXPECT_GT(boost::math::cdf(boost::math::complement(dist, chi2)), 1e-3) << "chi2=" << chi2;
}

TEST(ThermalSampler, VacuumAndBadMean)
{
    std::mt19937_64 rng(1);
    for (int i = 0; i < 100; ++i)
        EXPECT_EQ(thermal_photon_sample(0.0, rng), 0);
    EXPECT_THROW(thermal_photon_sample(-0.1, rng), InvalidParameter);
    EXPECT_THROW(thermal_photon_sample(std::nan(""), rng), InvalidParameter);
}

TEST(BeamSplitter, BinomialMean)
{
    std::mt19937_64 rng(5);
    const int trials = 100000;
    double sum = 0.0;
    for (int i = 0; i < trials; ++i) {
        const auto s = beam_splitter_partition(100, 0.05, rng);
        ASSERT_EQ(s.reflected + s.transmitted, 100);
        sum += static_cast<double>(s.reflected);
    }
    const double sigma = std::sqrt(100 * 0.05 * 0.95 / trials);
    EXPECT_NEAR(sum / trials, 5.0, 3.0 * sigma);
    EXPECT_EQ(beam_splitter_partition(7, 0.0, rng).transmitted, 7);
    EXPECT_EQ(beam_splitter_partition(7, 1.0, rng).reflected, 7);
    EXPECT_THROW(beam_splitter_partition(-1, 0.5, rng), InvalidParameter);
    EXPECT_THROW(beam_splitter_partition(1, 1.5, rng), InvalidParameter);
}

TEST(Demon, ThermalLightIsBunched)
{
    DemonConfig cfg;
    cfg.n_bar = 2.0;
    cfg.trials = 200000;
    cfg.rng_seed = 3;
    const auto st = demon_run(cfg);
    const auto g2 = st.g2();
    EXPECT_NEAR(g2.mean, 2.0, 4.0 * g2.stderr_);
    EXPECT_NEAR(st.mean_photons(), 2.0, 0.02);
}

// Per photon: transmitted (1 - R), reflected and detected (R eta), or lost.
// E[t 1{click} | n] = n(1 - R) - n(1 - R)(1 - R eta)^{n-1}.
TEST(Demon, ConditionalIntensityMatchesAnalyticOracle)
{
    DemonConfig cfg;
    cfg.n_bar = 2.0;
    cfg.bs_reflectivity = 0.05;
    cfg.detector_efficiency = 0.8;
    cfg.trials = 1000000;
    cfg.rng_seed = 21;
    const double r = cfg.bs_reflectivity, q = 1.0 - r * cfg.detector_efficiency;
    const double p_click = 1.0 - be_expectation(cfg.n_bar, [&](double n) { return std::pow(q, n); });
    EXPECT_NEAR(p_click, 1.0 - 1.0 / (1.0 + cfg.n_bar * r * cfg.detector_efficiency), 1e-12);
    const double joint = be_expectation(cfg.n_bar, [&](double n) {
        return n <= 0.0 ? 0.0 : n * (1.0 - r) - n * (1.0 - r) * std::pow(q, n - 1.0);
    });
    const double oracle = joint / p_click;

    const auto st = demon_run(cfg);
    const auto c = st.transmitted_given_click();
    EXPECT_NEAR(static_cast<double>(st.clicks[0]) / cfg.trials, p_click, 4.0 * std::sqrt(p_click / cfg.trials));
    EXPECT_NEAR(c.mean, oracle, 4.0 * c.stderr_);
    EXPECT_GT(st.click_significance(), 5.0);
}

TEST(Demon, UnconditionalDifferenceVanishes)
{
    DemonConfig cfg;
    cfg.trials = 300000;
    cfg.rng_seed = 8;
    const auto d = demon_run(cfg).intensity_difference();
    EXPECT_NEAR(d.mean, 0.0, 3.0 * d.stderr_);
}

TEST(Demon, ChargeFollowsPolarityRule)
{
    DemonConfig cfg;
    cfg.trials = 10000;
    cfg.rng_seed = 2;
    std::int64_t charge = 0;
    std::uint64_t seen = 0;
    const auto st = demon_run(cfg, [&](std::uint64_t i, const DemonTrial& t) {
        EXPECT_EQ(i, seen++);
        int pol = 0;
        if (t.click[0] && !t.click[1])
            pol = 1;
        if (!t.click[0] && t.click[1])
            pol = -1;
        EXPECT_EQ(t.polarity(), pol);
        EXPECT_LE(t.transmitted[0], t.photons[0]);
        charge += pol * (t.transmitted[0] - t.transmitted[1]);
    });
    EXPECT_EQ(seen, cfg.trials);
    EXPECT_EQ(st.charge, charge);
    EXPECT_EQ(st.both + st.neither + st.only_first + st.only_second, cfg.trials);
    // Sorting on clicks charges the battery.
    EXPECT_GT(st.conditional_difference().mean, 0.0);
}

TEST(Demon, BlindDetectorIsDegenerate)
{
    DemonConfig cfg;
    cfg.detector_efficiency = 0.0;
    cfg.trials = 5000;
    const auto st = demon_run(cfg);
    EXPECT_TRUE(st.degenerate());
    EXPECT_EQ(st.charge, 0);
    EXPECT_TRUE(std::isnan(st.transmitted_given_click().mean));
}

TEST(Demon, ConfigValidation)
{
    DemonConfig cfg;
    cfg.trials = 0;
    EXPECT_THROW(demon_run(cfg), ConfigError);
    cfg = {};
    cfg.bs_reflectivity = 1.0;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = {};
    cfg.detector_efficiency = 1.2;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = {};
    cfg.n_bar = 0.0;
    EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Demon, SeedReplayIsExact)
{
    DemonConfig cfg;
    cfg.trials = 3 * demon_block_size + 17;
    cfg.rng_seed = 99;
    EXPECT_EQ(demon_run(cfg), demon_run(cfg));
    auto other = cfg;
    other.rng_seed = 100;
    EXPECT_NE(demon_run(cfg).sum_t, demon_run(other).sum_t);
    // A prefix of whole blocks is reproduced by a shorter run.
    auto prefix = cfg;
    prefix.trials = 2 * demon_block_size;
    DemonStats head;
    demon_run(cfg, [&](std::uint64_t i, const DemonTrial& t) {
        if (i < prefix.trials)
            head.add(t);
    });
    EXPECT_EQ(head, demon_run(prefix));
}

TEST(Gad, KrausCompleteness)
{
    for (double p : {0.0, 0.3, 1.0})
        for (double q : {0.0, 0.4, 1.0}) {
            Qubit s = Qubit::Zero();
            for (const auto& k : gad_kraus(p, q))
                s += k.adjoint() * k;
            EXPECT_LT((s - Qubit::Identity()).cwiseAbs().maxCoeff(), 1e-15);
        }
    EXPECT_THROW(gad_kraus(1.1, 0.5), InvalidParameter);
    EXPECT_THROW(gad_kraus(0.5, -0.1), InvalidParameter);
}

TEST(Gad, SpecialCases)
{
    std::mt19937_64 rng(7);
    const auto rho = random_state(rng);
    EXPECT_LT((gad_channel(rho, 0.0, 0.3).matrix() - rho.matrix()).cwiseAbs().maxCoeff(), 1e-15);
    const auto out = gad_channel(QubitState::plus(), 1.0, 1.0);
    EXPECT_LT((out.matrix() - QubitState::ground().matrix()).cwiseAbs().maxCoeff(), 1e-15);
    // p = 1 lands on the fixed point diag(1 - q, q) from anywhere.
    const auto fixed = gad_channel(rho, 1.0, 0.3);
    EXPECT_NEAR(fixed.excited_population(), 0.7, 1e-15);
    EXPECT_NEAR(std::abs(fixed.matrix()(0, 1)), 0.0, 1e-15);
    const auto again = gad_channel(fixed, 0.45, 0.3);
    EXPECT_LT((again.matrix() - fixed.matrix()).cwiseAbs().maxCoeff(), 1e-15);
}

// Trace preservation, positivity, contraction of trace distance; the Bloch
// length itself shrinks only in the unital case q = 1/2.
TEST(Gad, RandomStateProperties)
{
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 1000; ++i) {
        const auto a = random_state(rng);
        const auto b = random_state(rng);
        const double p = u(rng), q = u(rng);
        const auto ga = gad_channel(a, p, q);
        const auto gb = gad_channel(b, p, q);
        EXPECT_NEAR(ga.matrix().trace().real(), 1.0, 1e-12);
        EXPECT_LE(trace_norm(ga.matrix() - gb.matrix()), trace_norm(a.matrix() - b.matrix()) + 1e-12);
        EXPECT_LE(gad_channel(a, p, 0.5).bloch().norm(), a.bloch().norm() + 1e-12);
    }
    const QubitState mixed(0.5 * Qubit::Identity());
    EXPECT_NEAR(gad_channel(mixed, 1.0, 0.2).bloch().norm(), 0.6, 1e-15);
}

// Hot and cold channels differ only in populations, by p (q_h - q_c).
TEST(Thermometer, HelstromAndSignals)
{
    std::mt19937_64 rng(1);
    const double qh = 0.3, qc = 0.9;
    for (double p : {0.0, 0.1, 0.5, 1.0}) {
        std::vector<double> signals;
        for (const auto& in : {QubitState::vertical(), QubitState::horizontal(), QubitState::plus()}) {
            const auto r = thermometer_discriminate(in, p, qh, qc, 0, rng);
            EXPECT_NEAR(r.helstrom, 0.5 + 0.5 * p * (qc - qh), 1e-14);
            EXPECT_NEAR(r.measured_optimum, r.helstrom, 1e-14);
            signals.push_back(r.signal);
        }
        EXPECT_NEAR(signals[0], 2.0 * p * (qc - qh), 1e-14);
        EXPECT_NEAR(signals[1], signals[0], 1e-14);
        EXPECT_NEAR(signals[2], signals[0], 1e-14);
    }
}

TEST(Thermometer, ShotsConvergeToOptimum)
{
    std::mt19937_64 rng(17);
    const auto blind = thermometer_discriminate(QubitState::plus(), 0.0, 0.3, 0.9, 20000, rng);
    EXPECT_NEAR(blind.success(), 0.5, 4.0 * blind.success_stderr());
    const auto r = thermometer_discriminate(QubitState::vertical(), 0.6, 0.3, 0.9, 50000, rng);
    EXPECT_NEAR(r.success(), r.helstrom, 4.0 * r.success_stderr());
}

TEST(QubitState, Validation)
{
    Qubit bad = Qubit::Identity();
    EXPECT_THROW(QubitState{bad}, StateValidityError);
    bad << 1.5, 0.0, 0.0, -0.5;
    EXPECT_THROW(QubitState{bad}, StateValidityError);
    bad << 0.5, 0.1, 0.3, 0.5;
    EXPECT_THROW(QubitState{bad}, StateValidityError);
    EXPECT_NEAR(QubitState::plus().bloch()(0), 1.0, 1e-15);
    EXPECT_NEAR(QubitState::excited().bloch()(2), 1.0, 1e-15);
}
