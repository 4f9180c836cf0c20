#pragma once

#include <stdexcept>
#include <string>

namespace anonphy {

// Invalid arguments are reported with std::invalid_argument throughout.

/// A tall matrix whose numerical column rank is below its column count.
class RankDeficientError : public std::runtime_error {
public:
    RankDeficientError(const std::string& what, int estimated_rank)
        : std::runtime_error(what), rank_(estimated_rank) {}

    int estimated_rank() const noexcept { return rank_; }

private:
    int rank_;
};

/// Requested operation is not defined for the antenna configuration.
class UnsupportedConfiguration : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Rank reduction could not bring a beamforming matrix close enough to rank one.
class RankExtractionFailure : public std::runtime_error {
public:
    RankExtractionFailure(const std::string& what, double fidelity)
        : std::runtime_error(what), fidelity_(fidelity) {}

    double fidelity() const noexcept { return fidelity_; }

private:
    double fidelity_;
};

/// The conic solver stopped without an optimal point or a certificate.
class NumericalFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace anonphy
