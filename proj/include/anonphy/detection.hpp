#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "anonphy/channel.hpp"
#include "anonphy/numerics.hpp"

namespace anonphy {

enum class DetectorRule { MLE, MNorm, MMSE };

inline const char* to_string(DetectorRule r) {
    switch (r) {
        case DetectorRule::MLE: return "MLE";
        case DetectorRule::MNorm: return "MNorm";
        case DetectorRule::MMSE: return "MMSE";
    }
    return "?";
}

struct DetectionResult {
    int declared = 0;                // 0-based user index
    std::vector<double> statistics;  // one per candidate
    DetectorRule rule = DetectorRule::MLE;
};

struct EnergyDecision {
    double statistic = 0.0;
    bool active = false;
    double threshold = 0.0;
};

using SignalBlock = std::span<const ComplexVector>;

namespace detail {

inline void check_block(SignalBlock block, int n_r, const char* who) {
    if (block.empty()) throw std::invalid_argument(std::string(who) + ": empty block");
    for (const auto& y : block) {
        if (y.size() != n_r) throw std::invalid_argument(std::string(who) + ": signal length mismatch");
    }
}

inline int argmin(const std::vector<double>& v) {
    return static_cast<int>(std::min_element(v.begin(), v.end()) - v.begin());
}

inline int argmax(const std::vector<double>& v) {
    return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

/// sum_t ||F y_t||^2
inline double block_energy(const ComplexMatrix& f, SignalBlock block) {
    double acc = 0.0;
    for (const auto& y : block) acc += (f * y).squaredNorm();
    return acc;
}

}  // namespace detail

/// Energy detector: T = mean over symbols of ||y||^2 / N_r; active iff T > beta.
inline EnergyDecision energy_detect(SignalBlock block, double beta, int n_r) {
    if (beta < 0.0) throw std::invalid_argument("energy_detect: negative threshold");
    detail::check_block(block, n_r, "energy_detect");
    double acc = 0.0;
    for (const auto& y : block) acc += y.squaredNorm() / n_r;
    const double t = acc / static_cast<double>(block.size());
    return {t, t > beta, beta};
}

/// P(T > beta | H0) with 2 N_r T / sigma2 ~ chi-square(2 N_r), i.e. the
/// regularized upper incomplete gamma Q(N_r, N_r beta / sigma2).
inline double false_alarm_probability(double beta, int n_r, double sigma2) {
    if (!(sigma2 > 0.0)) throw std::invalid_argument("false_alarm_probability: sigma2 must be positive");
    if (beta < 0.0) throw std::invalid_argument("false_alarm_probability: negative threshold");
    if (n_r < 1) throw std::invalid_argument("false_alarm_probability: N_r must be positive");
    return boost::math::gamma_q(static_cast<double>(n_r), n_r * beta / sigma2);
}

/// Projection-residual detector for N_r > N_t: minimises
/// sum_t ||(I - H_k H_k^dagger) y_t||^2.
inline DetectionResult detect_mle(SignalBlock block, const ChannelSet& cs) {
    if (!cs.strong_receiver()) {
        throw UnsupportedConfiguration("detect_mle: requires N_r > N_t (projector is the identity otherwise)");
    }
    detail::check_block(block, cs.n_r(), "detect_mle");
    DetectionResult r;
    r.rule = DetectorRule::MLE;
    const ComplexMatrix eye = ComplexMatrix::Identity(cs.n_r(), cs.n_r());
    for (int k = 0; k < cs.users(); ++k) {
        r.statistics.push_back(detail::block_energy(eye - cs.projector(k), block));
    }
    r.declared = detail::argmin(r.statistics);
    return r;
}

/// Maximum-norm detector: maximises sum_t ||H_k^H y_t||^2.
inline DetectionResult detect_mnorm(SignalBlock block, const ChannelSet& cs) {
    detail::check_block(block, cs.n_r(), "detect_mnorm");
    DetectionResult r;
    r.rule = DetectorRule::MNorm;
    for (int k = 0; k < cs.users(); ++k) {
        r.statistics.push_back(detail::block_energy(cs.channel(k).adjoint(), block));
    }
    r.declared = detail::argmax(r.statistics);
    return r;
}

/// Regularised residual detector, usable for any antenna ratio.
inline DetectionResult detect_mmse(SignalBlock block, const ChannelSet& cs, double p, double sigma2) {
    if (!(p > 0.0) || !(sigma2 > 0.0)) {
        throw std::invalid_argument("detect_mmse: p and sigma2 must be positive");
    }
    detail::check_block(block, cs.n_r(), "detect_mmse");
    DetectionResult r;
    r.rule = DetectorRule::MMSE;
    const int n_t = cs.n_t();
    const double reg = sigma2 * n_t / p;
    const ComplexMatrix eye_r = ComplexMatrix::Identity(cs.n_r(), cs.n_r());
    const ComplexMatrix eye_t = ComplexMatrix::Identity(n_t, n_t);
    for (int k = 0; k < cs.users(); ++k) {
        const ComplexMatrix& h = cs.channel(k);
        ComplexMatrix gram = h.adjoint() * h + reg * eye_t;
        ComplexMatrix f = eye_r - h * gram.ldlt().solve(h.adjoint());
        r.statistics.push_back(detail::block_energy(f, block));
    }
    r.declared = detail::argmin(r.statistics);
    return r;
}

/// Shannon entropy in bits of the receiver's suspicion distribution.
inline double anonymity_entropy(std::span<const double> p) {
    if (p.empty()) throw std::invalid_argument("anonymity_entropy: empty distribution");
    double sum = 0.0;
    for (double v : p) {
        if (!(v >= 0.0)) throw std::invalid_argument("anonymity_entropy: negative probability");
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("anonymity_entropy: probabilities do not sum to one");
    double h = 0.0;
    for (double v : p) {
        if (v > 0.0) h -= v * std::log2(v);
    }
    return std::max(0.0, h);
}

/// Real-operation counts of the detectors as a function of the problem size.
inline double detector_complexity(DetectorRule rule, std::int64_t k, std::int64_t n_r, std::int64_t n_t) {
    if (k < 0 || n_r < 1 || n_t < 1) throw std::invalid_argument("detector_complexity: invalid dimensions");
    switch (rule) {
        case DetectorRule::MLE:
            return static_cast<double>(k * (16 * n_r * n_r * n_t + 24 * n_r * n_t * n_t + 29 * n_t * n_t * n_t +
                                             8 * n_r * n_t + 8 * n_r));
        case DetectorRule::MNorm:
            return static_cast<double>(k * (8 * n_t * n_r + 8 * n_t));
        case DetectorRule::MMSE:
            break;
    }
    throw std::invalid_argument("detector_complexity: no operation count for rule " + std::string(to_string(rule)));
}

}  // namespace anonphy
