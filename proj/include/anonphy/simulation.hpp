#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "anonphy/channel.hpp"
#include "anonphy/detection.hpp"
#include "anonphy/errors.hpp"
#include "anonphy/modulation.hpp"
#include "anonphy/precoding.hpp"
#include "anonphy/rng.hpp"

namespace anonphy {

enum class Scenario { StrongSender, StrongReceiver };
enum class Precoder { ISA, CIA, MMSE, SVD, CI };
// Uniform declares a sender uniformly at random; it is the chance baseline.
enum class DetectorChoice { Auto, MLE, MNorm, MMSE, Uniform };
// Block: one declaration per block from summed statistics. Symbol: one per symbol.
enum class Aggregation { Block, Symbol };

inline const char* to_string(Scenario s) { return s == Scenario::StrongSender ? "strong-sender" : "strong-receiver"; }

inline const char* to_string(Precoder p) {
    switch (p) {
        case Precoder::ISA: return "ISA";
        case Precoder::CIA: return "CIA";
        case Precoder::MMSE: return "MMSE";
        case Precoder::SVD: return "SVD";
        case Precoder::CI: return "CI";
    }
    return "?";
}

inline const char* to_string(DetectorChoice d) {
    switch (d) {
        case DetectorChoice::Auto: return "Auto";
        case DetectorChoice::MLE: return "MLE";
        case DetectorChoice::MNorm: return "MNorm";
        case DetectorChoice::MMSE: return "MMSE";
        case DetectorChoice::Uniform: return "Uniform";
    }
    return "?";
}

inline const char* to_string(Aggregation a) { return a == Aggregation::Block ? "block" : "symbol"; }

struct SystemConfig {
    int k = 5;
    int n_r = 10;
    int n_t = 10;
    double p_max = 1.0;
    std::vector<double> snr_grid{0.0, 10.0, 20.0, 30.0};
    int m = 4;
    double epsilon = 20.0;
    double zeta = 8.0;
    double delta = 0.03;
    double beta = 1e-2;
    double tau = 0.1;
    double gamma_l = 0.0;
    double gamma_r = 20.0;
    int block_len = 50;
    int n_blocks = 500;
    std::uint64_t seed = 1;
    Scenario scenario = Scenario::StrongSender;
    Precoder precoder = Precoder::ISA;
    DetectorChoice detector = DetectorChoice::Auto;

    Aggregation aggregation = Aggregation::Block;
    bool svd_genie = false;           // SVD combiner built from the true channel
    bool mmse_instantaneous = false;  // rescale W per symbol vector to ||W s||^2 = p_max
    double failure_budget = 0.01;     // tolerated fraction of blocks lost to solver failures

    /// Noise variance for SNR_dB = 10 log10(p_max / sigma2).
    double sigma2(double snr_db) const { return p_max / std::pow(10.0, snr_db / 10.0); }

    DetectorChoice resolved_detector() const {
        if (detector != DetectorChoice::Auto) return detector;
        return scenario == Scenario::StrongSender ? DetectorChoice::MNorm : DetectorChoice::MLE;
    }

    /// Number of data streams per symbol time.
    int streams() const { return precoder == Precoder::SVD ? std::min(n_r, n_t) : n_r; }

    void validate() const {
        auto fail = [](const std::string& msg) { throw std::invalid_argument("invalid configuration: " + msg); };
        if (k < 1) fail("k must be at least 1");
        if (n_r < 1 || n_t < 1) fail("antenna counts must be positive");
        if (!(p_max > 0.0)) fail("p_max must be positive");
        if (snr_grid.empty()) fail("snr_grid must not be empty");
        for (double s : snr_grid)
            if (!std::isfinite(s)) fail("snr_grid entries must be finite");
        if (m < 2) fail("PSK order m must be at least 2");
        if (!(epsilon > 0.0)) fail("epsilon must be positive");
        if (!(zeta >= 0.0)) fail("zeta must be non-negative");
        if (!(delta >= 0.0)) fail("delta must be non-negative");
        if (!(beta >= 0.0)) fail("beta must be non-negative");
        if (!(tau > 0.0)) fail("tau must be positive");
        if (!(gamma_l >= 0.0) || !(gamma_l < gamma_r)) fail("bisection bounds need 0 <= gamma_l < gamma_r");
        if (block_len < 1) fail("block_len must be positive");
        if (n_blocks < 1) fail("n_blocks must be positive");
        if (!(failure_budget >= 0.0 && failure_budget <= 1.0)) fail("failure_budget must lie in [0, 1]");
        if (scenario == Scenario::StrongSender && n_r > n_t) fail("strong sender requires n_r <= n_t");
        if (scenario == Scenario::StrongReceiver && n_r <= n_t) fail("strong receiver requires n_r > n_t");
        if (precoder == Precoder::ISA && scenario != Scenario::StrongSender) fail("ISA requires the strong sender scenario");
        if (precoder == Precoder::CIA && scenario == Scenario::StrongReceiver && k < 2) {
            fail("CIA in the strong receiver scenario needs an alias sender (k >= 2)");
        }
        const DetectorChoice d = resolved_detector();
        if (d == DetectorChoice::MLE && n_r <= n_t) fail("the MLE detector requires n_r > n_t");
    }
};

enum class BlockOutcome { Ok, Infeasible, SolverFailure };

inline const char* to_string(BlockOutcome o) {
    switch (o) {
        case BlockOutcome::Ok: return "ok";
        case BlockOutcome::Infeasible: return "infeasible";
        case BlockOutcome::SolverFailure: return "solver-failure";
    }
    return "?";
}

struct BlockRecord {
    BlockOutcome outcome = BlockOutcome::Ok;
    std::string message;
    int true_sender = 0;
    int declared = 0;                 // block-level declaration
    std::vector<int> symbol_declared; // per-symbol declarations (Aggregation::Symbol)
    long symbols = 0;
    long symbol_errors = 0;
    double objective = std::numeric_limits<double>::quiet_NaN();  // Gamma* or mean gamma*
    int iterations = 0;                                           // ISA bisection rounds
    bool degraded = false;

    // Constraint audit, each a ratio to its budget (<= 1 means satisfied).
    double power_ratio = 0.0;
    double anonymity_ratio = 0.0;
    // min over symbols and antennas of (noiseless margin - gamma*); +inf when not applicable
    double margin_slack = std::numeric_limits<double>::infinity();
};

namespace detail {

struct BlockDraw {
    ChannelSet cs;
    int sender = 0;
    int alias = 0;
    std::vector<std::vector<int>> symbols;  // [t][stream]
    std::vector<ComplexVector> noise;       // unit variance, [t]
};

// Fixed draw order so every precoder sees the same realisation for a block.
inline BlockDraw draw_block(const SystemConfig& cfg, Engine& rng) {
    BlockDraw d;
    d.cs = generate_channel_set(cfg.k, cfg.n_r, cfg.n_t, rng);
    d.sender = uniform_index(rng, cfg.k);
    d.alias = cfg.k > 1 ? uniform_index(rng, cfg.k - 1) : 0;
    if (d.alias >= d.sender && cfg.k > 1) ++d.alias;
    d.symbols.assign(cfg.block_len, std::vector<int>(cfg.n_r));
    for (auto& row : d.symbols)
        for (auto& v : row) v = uniform_index(rng, cfg.m);
    for (int t = 0; t < cfg.block_len; ++t) d.noise.push_back(cscg_matrix(rng, cfg.n_r, 1).col(0));
    return d;
}

inline DetectionResult run_detector(DetectorChoice d, SignalBlock block, const ChannelSet& cs, double p, double sigma2) {
    switch (d) {
        case DetectorChoice::MLE: return detect_mle(block, cs);
        case DetectorChoice::MNorm: return detect_mnorm(block, cs);
        case DetectorChoice::MMSE: return detect_mmse(block, cs, p, sigma2);
        default: break;
    }
    throw std::invalid_argument("run_detector: detector is not a statistic-based rule");
}

}  // namespace detail

/// One block: channel draw, precoding, transmission, sender detection and demodulation.
inline BlockRecord run_block(const SystemConfig& cfg, double snr_db, Engine& rng) {
    const detail::BlockDraw d = detail::draw_block(cfg, rng);
    const double sigma2 = cfg.sigma2(snr_db);
    const double noise_amp = std::sqrt(sigma2);
    const ComplexMatrix& h = d.cs.channel(d.sender);
    const int ns = cfg.streams();
    const int T = cfg.block_len;

    BlockRecord rec;
    rec.true_sender = d.sender;

    std::vector<ComplexVector> s(T);
    for (int t = 0; t < T; ++t) {
        std::vector<int> idx(d.symbols[t].begin(), d.symbols[t].begin() + ns);
        s[t] = psk_modulate(idx, cfg.m);
    }

    // Transmit vectors x_t = W_t s_t.
    std::vector<ComplexVector> x(T);
    std::optional<SvdPrecoder> svd;
    try {
        switch (cfg.precoder) {
            case Precoder::ISA: {
                IsaSettings isa;
                isa.tau = cfg.tau;
                isa.gamma_l = cfg.gamma_l;
                isa.gamma_r = cfg.gamma_r;
                const PrecodeResult r = isa_precode(h, sigma2, cfg.epsilon, cfg.p_max, isa);
                rec.iterations = r.iterations;
                rec.objective = r.achieved;
                if (r.status == PrecodeStatus::Infeasible) {
                    rec.outcome = BlockOutcome::Infeasible;
                    rec.message = r.diagnostics.note;
                    return rec;
                }
                rec.degraded = r.status == PrecodeStatus::Degraded;
                const ComplexMatrix g = h.adjoint() * h;
                rec.power_ratio = r.W.squaredNorm() / cfg.p_max;
                rec.anonymity_ratio = (g * r.W).squaredNorm() / cfg.epsilon;
                for (int t = 0; t < T; ++t) x[t] = r.W * s[t];
                break;
            }
            case Precoder::CIA:
            case Precoder::CI: {
                ComplexMatrix anon;
                double thr = 0.0;
                if (cfg.precoder == Precoder::CIA) {
                    if (cfg.scenario == Scenario::StrongSender) {
                        anon = h.adjoint() * h;
                        thr = cfg.zeta;
                    } else {
                        anon = (d.cs.projector(d.alias) - d.cs.projector(d.sender)) * h;
                        thr = cfg.delta;
                    }
                }
                double sum_gamma = 0.0;
                for (int t = 0; t < T; ++t) {
                    PrecodeResult r;
                    if (cfg.precoder == Precoder::CI) {
                        r = benchmark_ci(h, s[t], cfg.p_max, cfg.m);
                    } else if (cfg.scenario == Scenario::StrongSender) {
                        r = cia_precode_ss(h, s[t], cfg.zeta, cfg.p_max, cfg.m);
                    } else {
                        r = cia_precode_sr(d.cs, d.sender, d.alias, s[t], cfg.delta, cfg.p_max, cfg.m);
                    }
                    x[t] = r.W * s[t];
                    sum_gamma += r.achieved;
                    rec.power_ratio = std::max(rec.power_ratio, x[t].squaredNorm() / cfg.p_max);
                    if (anon.size() > 0) {
                        const double lhs = (anon * x[t]).squaredNorm();
                        const double ratio = thr > 0.0 ? lhs / thr : (lhs > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
                        rec.anonymity_ratio = std::max(rec.anonymity_ratio, ratio);
                    }
                    const ComplexVector rx = h * x[t];
                    for (int i = 0; i < cfg.n_r; ++i) {
                        rec.margin_slack = std::min(rec.margin_slack, constructive_margin(rx(i), s[t](i), cfg.m) - r.achieved);
                    }
                }
                rec.objective = sum_gamma / T;
                break;
            }
            case Precoder::MMSE: {
                const ComplexMatrix w = benchmark_mmse(h, sigma2, cfg.p_max);
                rec.power_ratio = w.squaredNorm() / cfg.p_max;
                for (int t = 0; t < T; ++t) {
                    x[t] = cfg.mmse_instantaneous ? ComplexVector(normalize_instantaneous(w, s[t], cfg.p_max) * s[t])
                                                  : ComplexVector(w * s[t]);
                }
                break;
            }
            case Precoder::SVD: {
                svd = benchmark_svd(h, cfg.p_max);
                rec.power_ratio = svd->W.squaredNorm() / cfg.p_max;
                for (int t = 0; t < T; ++t) x[t] = svd->W * s[t];
                break;
            }
        }
    } catch (const NumericalFailure& e) {
        rec.outcome = BlockOutcome::SolverFailure;
        rec.message = e.what();
        return rec;
    }

    std::vector<ComplexVector> y(T);
    for (int t = 0; t < T; ++t) y[t] = h * x[t] + noise_amp * d.noise[t];

    // Sender detection.
    const DetectorChoice det = cfg.resolved_detector();
    if (det == DetectorChoice::Uniform) {
        // Drawn after the block realisation so the other draws are unaffected.
        rec.declared = uniform_index(rng, cfg.k);
        if (cfg.aggregation == Aggregation::Symbol) {
            for (int t = 0; t < T; ++t) rec.symbol_declared.push_back(uniform_index(rng, cfg.k));
        }
    } else {
        rec.declared = detail::run_detector(det, y, d.cs, cfg.p_max, sigma2).declared;
        if (cfg.aggregation == Aggregation::Symbol) {
            for (int t = 0; t < T; ++t) {
                rec.symbol_declared.push_back(
                    detail::run_detector(det, SignalBlock(&y[t], 1), d.cs, cfg.p_max, sigma2).declared);
            }
        }
    }

    // Demodulation.
    if (cfg.precoder == Precoder::SVD) {
        const int who = cfg.svd_genie ? d.sender : rec.declared;
        const SvdCombiner comb(d.cs.channel(who), cfg.p_max);
        for (int t = 0; t < T; ++t) {
            const ComplexVector est = comb.apply(y[t]);
            for (int i = 0; i < ns; ++i) rec.symbol_errors += psk_demodulate(est(i), cfg.m) != d.symbols[t][i];
        }
    } else {
        for (int t = 0; t < T; ++t) {
            for (int i = 0; i < cfg.n_r; ++i) rec.symbol_errors += psk_demodulate(y[t](i), cfg.m) != d.symbols[t][i];
        }
    }
    rec.symbols = static_cast<long>(T) * ns;
    return rec;
}

/// Aggregated statistics of one operating point.
struct PointMetrics {
    long blocks = 0;          // blocks that carried data (outcome Ok)
    long failed = 0;          // solver failures
    long infeasible = 0;      // precoder declared the design infeasible
    long degraded = 0;
    long decisions = 0;       // blocks (or symbols, per aggregation) with a declaration
    long misdeclared = 0;
    long symbols = 0;
    long symbol_errors = 0;
    double der = 0.0;
    double ser = 0.0;
    std::vector<double> declared_distribution;
    double entropy_bits = 0.0;
    double mean_objective = std::numeric_limits<double>::quiet_NaN();
    double mean_iterations = 0.0;
    int max_iterations = 0;
    double max_power_ratio = 0.0;
    double max_anonymity_ratio = 0.0;
    double min_margin_slack = std::numeric_limits<double>::infinity();
};

/// Count-based rates over the blocks that carried data. `k` is the number of candidates.
inline PointMetrics compute_metrics(const std::vector<BlockRecord>& records, int k) {
    if (records.empty()) throw std::invalid_argument("compute_metrics: no block records");
    if (k < 1) throw std::invalid_argument("compute_metrics: k must be positive");
    PointMetrics pm;
    std::vector<long> hist(k, 0);
    double obj_sum = 0.0;
    long obj_n = 0;
    long iter_sum = 0;
    for (const auto& r : records) {
        if (r.outcome == BlockOutcome::SolverFailure) {
            ++pm.failed;
            continue;
        }
        pm.max_power_ratio = std::max(pm.max_power_ratio, r.power_ratio);
        pm.max_anonymity_ratio = std::max(pm.max_anonymity_ratio, r.anonymity_ratio);
        pm.min_margin_slack = std::min(pm.min_margin_slack, r.margin_slack);
        pm.max_iterations = std::max(pm.max_iterations, r.iterations);
        iter_sum += r.iterations;
        if (r.outcome == BlockOutcome::Infeasible) {
            ++pm.infeasible;
            continue;
        }
        ++pm.blocks;
        if (r.degraded) ++pm.degraded;
        if (std::isfinite(r.objective)) {
            obj_sum += r.objective;
            ++obj_n;
        }
        if (r.symbol_declared.empty()) {
            ++pm.decisions;
            pm.misdeclared += r.declared != r.true_sender;
            ++hist.at(r.declared);
        } else {
            for (int dcl : r.symbol_declared) {
                ++pm.decisions;
                pm.misdeclared += dcl != r.true_sender;
                ++hist.at(dcl);
            }
        }
        pm.symbols += r.symbols;
        pm.symbol_errors += r.symbol_errors;
    }
    const long solved = static_cast<long>(records.size()) - pm.failed;
    pm.mean_iterations = solved > 0 ? static_cast<double>(iter_sum) / solved : 0.0;
    if (obj_n > 0) pm.mean_objective = obj_sum / obj_n;
    pm.declared_distribution.assign(k, 0.0);
    if (pm.decisions > 0) {
        pm.der = static_cast<double>(pm.misdeclared) / pm.decisions;
        for (int i = 0; i < k; ++i) pm.declared_distribution[i] = static_cast<double>(hist[i]) / pm.decisions;
        pm.entropy_bits = anonymity_entropy(pm.declared_distribution);
    }
    if (pm.symbols > 0) pm.ser = static_cast<double>(pm.symbol_errors) / pm.symbols;
    return pm;
}

// ---------------------------------------------------------------------------
// Sweeps

enum class AxisKind { Snr, Antennas, Threshold };

inline const char* to_string(AxisKind a) {
    switch (a) {
        case AxisKind::Snr: return "snr";
        case AxisKind::Antennas: return "antennas";
        case AxisKind::Threshold: return "threshold";
    }
    return "?";
}

struct AntennaPoint {
    int n_r = 0;
    int n_t = 0;
};

struct ThresholdPoint {
    double epsilon = 0.0;
    double zeta = 0.0;
    double delta = 0.0;
};

/// Sweep axis. Snr uses cfg.snr_grid; the other axes run at cfg.snr_grid.front().
struct SweepAxis {
    AxisKind kind = AxisKind::Snr;
    std::vector<AntennaPoint> antennas;
    std::vector<ThresholdPoint> thresholds;
};

struct SweepPoint {
    SystemConfig cfg;  // fully resolved for this point
    double snr_db = 0.0;
    PointMetrics metrics;
    std::vector<BlockRecord> records;
};

struct SweepReport {
    AxisKind axis = AxisKind::Snr;
    std::vector<SweepPoint> points;

    long total_blocks() const {
        long n = 0;
        for (const auto& p : points) n += p.metrics.blocks + p.metrics.infeasible + p.metrics.failed;
        return n;
    }
    long failed_blocks() const {
        long n = 0;
        for (const auto& p : points) n += p.metrics.failed;
        return n;
    }
};

struct SweepOptions {
    int jobs = 1;
    bool keep_records = true;
    // Called after each finished block with (done, total); may be empty.
    std::function<void(long, long)> progress;
};

/// Runs cfg.n_blocks blocks at one operating point. Block b uses the
/// substream (seed, point, b), so results do not depend on scheduling.
inline std::vector<BlockRecord> run_point(const SystemConfig& cfg, double snr_db, std::uint64_t point,
                                          const SweepOptions& opt = {}, long done_before = 0, long total = 0) {
    cfg.validate();
    std::vector<BlockRecord> records(cfg.n_blocks);
    std::atomic<int> next{0};
    std::atomic<long> done{0};
    std::mutex progress_mutex;
    auto worker = [&] {
        for (int b = next++; b < cfg.n_blocks; b = next++) {
            Engine rng = substream(cfg.seed, {point, static_cast<std::uint64_t>(b)});
            records[b] = run_block(cfg, snr_db, rng);
            const long finished = ++done;
            if (opt.progress) {
                std::lock_guard<std::mutex> lock(progress_mutex);
                opt.progress(done_before + finished, total);
            }
        }
    };
    const int jobs = std::max(1, std::min(opt.jobs, cfg.n_blocks));
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    return records;
}

/// Operating points of a sweep, in axis order.
inline std::vector<std::pair<SystemConfig, double>> sweep_points(const SystemConfig& cfg, const SweepAxis& axis) {
    std::vector<std::pair<SystemConfig, double>> pts;
    switch (axis.kind) {
        case AxisKind::Snr:
            for (double snr : cfg.snr_grid) pts.emplace_back(cfg, snr);
            break;
        case AxisKind::Antennas:
            for (const auto& a : axis.antennas) {
                SystemConfig c = cfg;
                c.n_r = a.n_r;
                c.n_t = a.n_t;
                pts.emplace_back(c, cfg.snr_grid.front());
            }
            break;
        case AxisKind::Threshold:
            for (const auto& t : axis.thresholds) {
                SystemConfig c = cfg;
                c.epsilon = t.epsilon;
                c.zeta = t.zeta;
                c.delta = t.delta;
                pts.emplace_back(c, cfg.snr_grid.front());
            }
            break;
    }
    if (pts.empty()) throw std::invalid_argument("run_sweep: empty sweep grid");
    return pts;
}

inline SweepReport run_sweep(const SystemConfig& cfg, const SweepAxis& axis, const SweepOptions& opt = {}) {
    const auto pts = sweep_points(cfg, axis);
    for (const auto& [c, snr] : pts) c.validate();
    SweepReport rep;
    rep.axis = axis.kind;
    const long total = static_cast<long>(pts.size()) * cfg.n_blocks;
    long done = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        SweepPoint sp;
        sp.cfg = pts[i].first;
        sp.snr_db = pts[i].second;
        auto records = run_point(sp.cfg, sp.snr_db, i, opt, done, total);
        done += sp.cfg.n_blocks;
        sp.metrics = compute_metrics(records, sp.cfg.k);
        if (opt.keep_records) sp.records = std::move(records);
        rep.points.push_back(std::move(sp));
    }
    return rep;
}

}  // namespace anonphy
