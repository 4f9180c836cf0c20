#pragma once

#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "anonphy/numerics.hpp"
#include "anonphy/rng.hpp"

namespace anonphy {

/// The K candidate channels H_k (N_r x N_t) known to the receiver, with the
/// per-user caches the detectors and precoders need. Immutable once built.
class ChannelSet {
public:
    ChannelSet() = default;

    explicit ChannelSet(std::vector<ComplexMatrix> channels) : h_(std::move(channels)) {
        if (h_.empty()) throw std::invalid_argument("ChannelSet: no channels");
        n_r_ = static_cast<int>(h_.front().rows());
        n_t_ = static_cast<int>(h_.front().cols());
        if (n_r_ == 0 || n_t_ == 0) throw std::invalid_argument("ChannelSet: zero dimension");
        for (const auto& h : h_) {
            if (h.rows() != n_r_ || h.cols() != n_t_) {
                throw std::invalid_argument("ChannelSet: inconsistent channel shapes");
            }
            require_finite(h, "ChannelSet");
        }
        build_caches();
    }

    int users() const noexcept { return static_cast<int>(h_.size()); }
    int n_r() const noexcept { return n_r_; }
    int n_t() const noexcept { return n_t_; }

    const ComplexMatrix& channel(int k) const { return h_.at(k); }
    const std::vector<ComplexMatrix>& channels() const noexcept { return h_; }

    /// H_k^dagger, N_t x N_r.
    const ComplexMatrix& pinv(int k) const { return pinv_.at(k); }
    /// H_k H_k^dagger, N_r x N_r.
    const ComplexMatrix& projector(int k) const { return proj_.at(k); }
    /// (H_k^H H_k)^2, N_t x N_t.
    const ComplexMatrix& gram_square(int k) const { return gram2_.at(k); }

    bool strong_receiver() const noexcept { return n_r_ > n_t_; }

private:
    void build_caches() {
        pinv_.clear();
        proj_.clear();
        gram2_.clear();
        for (const auto& h : h_) {
            ComplexMatrix p = pseudo_inverse(h);
            proj_.push_back(h * p);
            pinv_.push_back(std::move(p));
            ComplexMatrix g = h.adjoint() * h;
            gram2_.push_back(g * g);
        }
    }

    std::vector<ComplexMatrix> h_;
    std::vector<ComplexMatrix> pinv_;
    std::vector<ComplexMatrix> proj_;
    std::vector<ComplexMatrix> gram2_;
    int n_r_ = 0;
    int n_t_ = 0;
};

/// Rayleigh block fading: i.i.d. unit-variance CSCG entries.
inline ChannelSet generate_channel_set(int k, int n_r, int n_t, Engine& rng) {
    if (k < 1 || n_r < 1 || n_t < 1) {
        throw std::invalid_argument("generate_channel_set: dimensions must be positive");
    }
    std::vector<ComplexMatrix> hs;
    hs.reserve(k);
    for (int i = 0; i < k; ++i) hs.push_back(cscg_matrix(rng, n_r, n_t));
    return ChannelSet(std::move(hs));
}

inline ChannelSet generate_channel_set(int k, int n_r, int n_t, std::uint64_t seed) {
    if (k < 1 || n_r < 1 || n_t < 1) {
        throw std::invalid_argument("generate_channel_set: dimensions must be positive");
    }
    Engine rng = substream(seed, {});
    return generate_channel_set(k, n_r, n_t, rng);
}

// Fixture format: {"k","n_r","n_t","rng","channels":[[re,im,re,im,...], ...]},
// each channel row-major with interleaved real and imaginary parts.
inline nlohmann::json channel_set_to_json(const ChannelSet& cs) {
    nlohmann::json j;
    j["k"] = cs.users();
    j["n_r"] = cs.n_r();
    j["n_t"] = cs.n_t();
    j["rng"] = kRngIdentity;
    auto arr = nlohmann::json::array();
    for (const auto& h : cs.channels()) {
        std::vector<double> flat;
        flat.reserve(2 * h.size());
        for (Eigen::Index r = 0; r < h.rows(); ++r)
            for (Eigen::Index c = 0; c < h.cols(); ++c) {
                flat.push_back(h(r, c).real());
                flat.push_back(h(r, c).imag());
            }
        arr.push_back(flat);
    }
    j["channels"] = arr;
    return j;
}

inline ChannelSet channel_set_from_json(const nlohmann::json& j) {
    const int k = j.at("k").get<int>();
    const int n_r = j.at("n_r").get<int>();
    const int n_t = j.at("n_t").get<int>();
    const auto& arr = j.at("channels");
    if (k < 1 || n_r < 1 || n_t < 1 || static_cast<int>(arr.size()) != k) {
        throw std::invalid_argument("channel_set_from_json: inconsistent header");
    }
    std::vector<ComplexMatrix> hs;
    for (const auto& flat_j : arr) {
        auto flat = flat_j.get<std::vector<double>>();
        if (static_cast<int>(flat.size()) != 2 * n_r * n_t) {
            throw std::invalid_argument("channel_set_from_json: wrong entry count");
        }
        ComplexMatrix h(n_r, n_t);
        std::size_t i = 0;
        for (int r = 0; r < n_r; ++r)
            for (int c = 0; c < n_t; ++c, i += 2) h(r, c) = {flat[i], flat[i + 1]};
        hs.push_back(std::move(h));
    }
    return ChannelSet(std::move(hs));
}

inline void dump_channel_set(const ChannelSet& cs, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("dump_channel_set: cannot open " + path);
    out << channel_set_to_json(cs).dump(2) << '\n';
}

inline ChannelSet load_channel_set(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_channel_set: cannot open " + path);
    return channel_set_from_json(nlohmann::json::parse(in));
}

}  // namespace anonphy
