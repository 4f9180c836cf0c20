#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "anonphy/detection.hpp"
#include "anonphy/rng.hpp"

using namespace anonphy;

namespace {

ComplexVector vec(std::initializer_list<cdouble> v) {
    ComplexVector out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (auto x : v) out(i++) = x;
    return out;
}

ComplexMatrix col(std::initializer_list<cdouble> v) { return vec(v); }

}  // namespace

TEST(EnergyDetector, Examples) {
    std::vector<ComplexVector> zeros(5, ComplexVector::Zero(4));
    auto d = energy_detect(zeros, 0.01, 4);
    EXPECT_EQ(d.statistic, 0.0);
    EXPECT_FALSE(d.active);

    std::vector<ComplexVector> ones{ComplexVector::Ones(4)};
    d = energy_detect(ones, 0.01, 4);
    EXPECT_NEAR(d.statistic, 1.0, 1e-15);
    EXPECT_TRUE(d.active);

    EXPECT_THROW(energy_detect(std::vector<ComplexVector>{}, 0.01, 4), std::invalid_argument);
}

TEST(EnergyDetector, FalseAlarmMatchesMonteCarlo) {
    // A single noise sample per decision keeps the activity rate away from 0 and 1.
    const int n_r = 4;
    const double beta = 1.2, sigma2 = 1.0;
    const double pfa = false_alarm_probability(beta, n_r, sigma2);
    Engine rng = substream(2024, {});
    const int trials = 20000;
    int active = 0;
    for (int t = 0; t < trials; ++t) {
        std::vector<ComplexVector> block{cscg_matrix(rng, n_r, 1, sigma2).col(0)};
        if (energy_detect(block, beta, n_r).active) ++active;
    }
    const double rate = static_cast<double>(active) / trials;
    const double se = std::sqrt(pfa * (1.0 - pfa) / trials);
    EXPECT_NEAR(rate, pfa, 3.0 * se);
}

TEST(FalseAlarm, ClosedForms) {
    EXPECT_EQ(false_alarm_probability(0.0, 4, 1.0), 1.0);
    EXPECT_LT(false_alarm_probability(1e6, 4, 1.0), 1e-12);
    for (double b : {0.1, 0.5, 1.0, 3.0}) EXPECT_NEAR(false_alarm_probability(b, 1, 1.0), std::exp(-b), 1e-14);
    // Erlang tail with shape 2: exp(-x)(1 + x), x = N_r beta / sigma2
    EXPECT_NEAR(false_alarm_probability(0.5, 2, 1.0), std::exp(-1.0) * 2.0, 1e-14);
    double prev = 1.0;
    for (double b = 0.0; b < 5.0; b += 0.25) {
        const double p = false_alarm_probability(b, 10, 0.7);
        EXPECT_LE(p, prev);
        prev = p;
    }
    EXPECT_THROW(false_alarm_probability(0.1, 4, 0.0), std::invalid_argument);
}

TEST(MleDetector, ProjectorAnnihilation) {
    const ChannelSet cs({col({1.0, 0.0}), col({0.0, 1.0})});
    std::vector<ComplexVector> block{vec({1.0, 0.0})};
    const auto r = detect_mle(block, cs);
    EXPECT_EQ(r.declared, 0);
    EXPECT_NEAR(r.statistics[0], 0.0, 1e-15);
    EXPECT_NEAR(r.statistics[1], 1.0, 1e-15);
}

TEST(MleDetector, SingleCandidateAndUnsupported) {
    Engine rng = substream(3, {});
    const ChannelSet one({cscg_matrix(rng, 3, 1)});
    std::vector<ComplexVector> block{cscg_matrix(rng, 3, 1).col(0)};
    EXPECT_EQ(detect_mle(block, one).declared, 0);

    const ChannelSet square = generate_channel_set(2, 2, 2, 5);
    std::vector<ComplexVector> b2{ComplexVector::Ones(2)};
    EXPECT_THROW(detect_mle(b2, square), UnsupportedConfiguration);
}

TEST(MleDetector, NoiselessIdentifiability) {
    Engine rng = substream(8, {});
    for (int trial = 0; trial < 50; ++trial) {
        const ChannelSet cs = generate_channel_set(4, 6, 3, rng);
        const int k = trial % 4;
        std::vector<ComplexVector> block{cs.channel(k) * cscg_matrix(rng, 3, 1).col(0)};
        const auto r = detect_mle(block, cs);
        EXPECT_EQ(r.declared, k);
        EXPECT_LE(r.statistics[k], 1e-12 * std::max(1.0, block[0].squaredNorm()));
        for (int j = 0; j < 4; ++j)
            if (j != k) EXPECT_GT(r.statistics[j], 0.0);
    }
}

// Independent GLRT: maximise over candidates the concentrated Gaussian
// likelihood exp(-min_x ||y - H_k x||^2 / sigma2), with the inner least
// squares solved through the normal equations per symbol.
TEST(MleDetector, MatchesGlrtOracle) {
    Engine rng = substream(77, {});
    const double sigma2 = 0.5;
    for (int trial = 0; trial < 1000; ++trial) {
        const ChannelSet cs = generate_channel_set(3, 3, 1, rng);
        const int k = uniform_index(rng, 3);
        std::vector<ComplexVector> block;
        for (int t = 0; t < 4; ++t) {
            ComplexVector y = cs.channel(k) * cscg_matrix(rng, 1, 1).col(0);
            for (Eigen::Index i = 0; i < y.size(); ++i) y(i) += cscg(rng, sigma2);
            block.push_back(y);
        }
        std::vector<double> likelihood;
        for (int c = 0; c < 3; ++c) {
            const ComplexMatrix& h = cs.channel(c);
            double log_l = 0.0;
            for (const auto& y : block) {
                const cdouble x = (h.adjoint() * y)(0) / h.squaredNorm();
                log_l -= (y - h * x).squaredNorm() / sigma2;
            }
            likelihood.push_back(std::exp(log_l));
        }
        const int oracle = static_cast<int>(std::max_element(likelihood.begin(), likelihood.end()) - likelihood.begin());
        ASSERT_EQ(detect_mle(block, cs).declared, oracle) << "trial " << trial;
    }
}

TEST(MnormDetector, Examples) {
    ComplexMatrix h1 = ComplexMatrix::Identity(2, 2);
    ComplexMatrix h2 = ComplexMatrix::Identity(2, 2);
    h2(0, 0) = 0.1;
    const ChannelSet cs({h1, h2});
    std::vector<ComplexVector> block{vec({1.0, 0.0})};
    auto r = detect_mnorm(block, cs);
    EXPECT_EQ(r.declared, 0);
    EXPECT_NEAR(r.statistics[0], 1.0, 1e-15);
    EXPECT_NEAR(r.statistics[1], 0.01, 1e-15);

    std::vector<ComplexVector> scaled{vec({3.5, 0.0})};
    EXPECT_EQ(detect_mnorm(scaled, cs).declared, 0);
}

TEST(MnormDetector, MaximumRatioDetectionRate) {
    Engine rng = substream(4242, {});
    int hits = 0;
    const int trials = 1000;
    for (int t = 0; t < trials; ++t) {
        const ChannelSet cs = generate_channel_set(2, 2, 2, rng);
        const ComplexMatrix& h = cs.channel(0);
        // Maximum-ratio transmission of one symbol per receive antenna
        const ComplexMatrix w = h.adjoint() / h.norm();
        std::vector<ComplexVector> block;
        for (int sym = 0; sym < 50; ++sym) {
            ComplexVector s(2);
            for (int i = 0; i < 2; ++i) s(i) = std::polar(1.0, (2 * uniform_index(rng, 4) + 1) * std::numbers::pi / 4);
            block.push_back(h * w * s);
        }
        if (detect_mnorm(block, cs).declared == 0) ++hits;
    }
    // Chance level is 0.5; an independent simulation of this setup gives about 0.75.
    EXPECT_GT(static_cast<double>(hits) / trials, 0.7);
}

TEST(MmseDetector, ConvergesToMle) {
    Engine rng = substream(31, {});
    const ChannelSet cs = generate_channel_set(3, 5, 2, rng);
    std::vector<ComplexVector> block;
    for (int t = 0; t < 3; ++t) block.push_back(cscg_matrix(rng, 5, 1).col(0));
    const auto mle = detect_mle(block, cs);
    const auto mmse = detect_mmse(block, cs, 1.0, 1e-10);
    for (int k = 0; k < 3; ++k) EXPECT_LE(std::abs(mle.statistics[k] - mmse.statistics[k]) / mle.statistics[k], 1e-6);
    EXPECT_EQ(mle.declared, mmse.declared);
}

TEST(MmseDetector, ExplicitExpression) {
    Engine rng = substream(32, {});
    const ChannelSet cs = generate_channel_set(2, 2, 2, rng);
    std::vector<ComplexVector> block{cscg_matrix(rng, 2, 1).col(0)};
    const double p = 1.0, sigma2 = 0.3;
    const auto r = detect_mmse(block, cs, p, sigma2);
    for (int k = 0; k < 2; ++k) {
        const ComplexMatrix& h = cs.channel(k);
        // 2x2 inverse written out by cofactors
        ComplexMatrix a = h.adjoint() * h;
        a(0, 0) += sigma2 * 2 / p;
        a(1, 1) += sigma2 * 2 / p;
        const cdouble det = a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0);
        ComplexMatrix inv(2, 2);
        inv << a(1, 1) / det, -a(0, 1) / det, -a(1, 0) / det, a(0, 0) / det;
        const ComplexMatrix f = ComplexMatrix::Identity(2, 2) - h * inv * h.adjoint();
        double stat = 0.0;
        for (int i = 0; i < 2; ++i) {
            cdouble e = 0.0;
            for (int j = 0; j < 2; ++j) e += f(i, j) * block[0](j);
            stat += std::norm(e);
        }
        EXPECT_NEAR(r.statistics[k], stat, 1e-12);
    }
    const ChannelSet one({cs.channel(0)});
    EXPECT_EQ(detect_mmse(block, one, p, sigma2).declared, 0);
}

TEST(Detectors, ScaleInvariance) {
    Engine rng = substream(55, {});
    for (int trial = 0; trial < 20; ++trial) {
        const ChannelSet cs = generate_channel_set(4, 5, 3, rng);
        std::vector<ComplexVector> block, scaled;
        for (int t = 0; t < 5; ++t) {
            block.push_back(cscg_matrix(rng, 5, 1).col(0));
            scaled.push_back(7.3 * block.back());
        }
        EXPECT_EQ(detect_mle(block, cs).declared, detect_mle(scaled, cs).declared);
        EXPECT_EQ(detect_mnorm(block, cs).declared, detect_mnorm(scaled, cs).declared);
        EXPECT_EQ(detect_mmse(block, cs, 1.0, 0.1).declared, detect_mmse(scaled, cs, 1.0, 0.1).declared);
    }
}

TEST(Entropy, Examples) {
    const std::vector<double> uniform(5, 0.2);
    EXPECT_NEAR(anonymity_entropy(uniform), std::log2(5.0), 1e-12);
    EXPECT_NEAR(anonymity_entropy(uniform), 2.3219, 1e-4);
    EXPECT_EQ(anonymity_entropy(std::vector<double>{1, 0, 0, 0, 0}), 0.0);
    EXPECT_NEAR(anonymity_entropy(std::vector<double>{0.5, 0.5}), 1.0, 1e-15);
    EXPECT_THROW(anonymity_entropy(std::vector<double>{0.5, 0.6}), std::invalid_argument);
    EXPECT_THROW(anonymity_entropy(std::vector<double>{1.5, -0.5}), std::invalid_argument);
}

TEST(Complexity, TableValues) {
    EXPECT_EQ(detector_complexity(DetectorRule::MLE, 5, 10, 10), 349400.0);
    EXPECT_EQ(detector_complexity(DetectorRule::MNorm, 5, 10, 10), 4400.0);
    EXPECT_EQ(detector_complexity(DetectorRule::MLE, 0, 3, 2), 0.0);
    EXPECT_EQ(detector_complexity(DetectorRule::MNorm, 0, 3, 2), 0.0);
    EXPECT_THROW(detector_complexity(DetectorRule::MMSE, 5, 10, 10), std::invalid_argument);
    for (int n_r = 1; n_r < 6; ++n_r)
        for (int n_t = 1; n_t < 6; ++n_t)
            EXPECT_LT(detector_complexity(DetectorRule::MNorm, 3, n_r, n_t),
                      detector_complexity(DetectorRule::MLE, 3, n_r, n_t));
}
