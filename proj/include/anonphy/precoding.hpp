#pragma once

// Anonymous precoders and their benchmarks.
//
// Every precoder returns W (N_t x streams). Interference suppression (ISA)
// designs one W per block from the channel alone; the constructive
// interference designs (CIA, CI) are symbol-level and return a rank-one W
// with W s = x for the symbol vector they were given.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "anonphy/channel.hpp"
#include "anonphy/conic.hpp"
#include "anonphy/errors.hpp"
#include "anonphy/modulation.hpp"
#include "anonphy/numerics.hpp"

namespace anonphy {

enum class PrecodeStatus { Optimal, Infeasible, Degraded };

inline const char* to_string(PrecodeStatus s) {
    switch (s) {
        case PrecodeStatus::Optimal: return "optimal";
        case PrecodeStatus::Infeasible: return "infeasible";
        case PrecodeStatus::Degraded: return "degraded";
    }
    return "?";
}

struct PrecodeDiagnostics {
    double power = 0.0;                // sum_i ||q_i||^2 (ISA) or ||W s||^2 (symbol level)
    double anonymity_lhs = 0.0;        // left-hand side of the anonymity constraint
    double anonymity_threshold = 0.0;  // its threshold (infinity when absent)
    std::vector<double> rank_ratios;   // ISA: lambda_1 / Tr(Q_i) of the relaxed solution
    double fidelity = 1.0;             // ISA: worst lambda_1 / Tr after rank reduction
    std::vector<int> unequalized;      // ISA: columns with h_i q_i = 0
    int solver_iterations = 0;         // interior-point iterations over all solves
    int uncertified_targets = 0;       // ISA: bisection targets the solver could not settle
    std::string note;
};

struct PrecodeResult {
    ComplexMatrix W;
    double achieved = 0.0;  // Gamma* (ISA, linear SINR) or gamma* (CIA/CI, amplitude)
    PrecodeStatus status = PrecodeStatus::Optimal;
    int iterations = 0;     // ISA bisection rounds
    PrecodeDiagnostics diagnostics;
};

// ---------------------------------------------------------------------------
// P1(b): power minimisation for a per-antenna SINR target Gamma
//
// Variable layout of the conic program:
//   [ SINR surplus (N_r) | anonymity slack (1) | svec(embed(Q_1)) ... svec(embed(Q_Nr)) ]
// with one nonnegative cone of size N_r + 1 and N_r PSD cones of order 2 N_t.
// Rows 0..N_r-1 are the SINR constraints, row N_r the anonymity constraint.

struct P1bLayout {
    int n_r = 0;
    int n_t = 0;
    int block_size() const { return conic::svec_size(2 * n_t); }
    int block_offset(int i) const { return n_r + 1 + i * block_size(); }
};

/// Coefficients of P1(b) in the complex domain: constraint u touches block l
/// through Tr(A[u][l] Q_l). The last entry is the objective.
inline std::vector<std::vector<ComplexMatrix>> p1b_coefficients(double gamma, const ComplexMatrix& h) {
    const int n_r = static_cast<int>(h.rows());
    const int n_t = static_cast<int>(h.cols());
    const ComplexMatrix g = h.adjoint() * h;
    const ComplexMatrix pi = g * g;
    std::vector<std::vector<ComplexMatrix>> a;
    for (int i = 0; i < n_r; ++i) {
        const ComplexMatrix gi = h.row(i).adjoint() * h.row(i);
        std::vector<ComplexMatrix> row;
        for (int l = 0; l < n_r; ++l) row.push_back(l == i ? gi : ComplexMatrix(-gamma * gi));
        a.push_back(std::move(row));
    }
    a.emplace_back(n_r, pi);
    a.emplace_back(n_r, ComplexMatrix::Identity(n_t, n_t));
    return a;
}

inline conic::ConicProgram build_p1b(double gamma, const ComplexMatrix& h, double sigma2, double epsilon) {
    if (!(gamma >= 0.0)) throw std::invalid_argument("build_p1b: Gamma must be non-negative");
    if (!(sigma2 > 0.0)) throw std::invalid_argument("build_p1b: sigma2 must be positive");
    if (!(epsilon > 0.0)) throw std::invalid_argument("build_p1b: epsilon must be positive");
    if (h.size() == 0) throw std::invalid_argument("build_p1b: empty channel");
    require_finite(h, "build_p1b");

    const P1bLayout lay{static_cast<int>(h.rows()), static_cast<int>(h.cols())};
    const int n = lay.block_offset(lay.n_r);
    const int m = lay.n_r + 1;
    const auto coeff = p1b_coefficients(gamma, h);

    conic::ConicProgram p;
    p.c = RealVector::Zero(n);
    p.A = RealMatrix::Zero(m, n);
    p.b = RealVector::Zero(m);
    for (int u = 0; u < m; ++u) {
        for (int l = 0; l < lay.n_r; ++l) {
            p.A.row(u).segment(lay.block_offset(l), lay.block_size()) =
                conic::trace_form_coefficients(coeff[u][l]).transpose();
        }
    }
    for (int i = 0; i < lay.n_r; ++i) {
        p.A(i, i) = -1.0;  // surplus
        p.b(i) = gamma * sigma2;
    }
    p.A(lay.n_r, lay.n_r) = 1.0;  // slack
    p.b(lay.n_r) = epsilon;
    for (int l = 0; l < lay.n_r; ++l) {
        p.c.segment(lay.block_offset(l), lay.block_size()) = conic::trace_form_coefficients(coeff[m][l]);
    }
    p.cones.push_back(conic::Cone::nonnegative(lay.n_r + 1));
    for (int l = 0; l < lay.n_r; ++l) p.cones.push_back(conic::Cone::semidefinite(2 * lay.n_t));
    return p;
}

/// The complex Q_i blocks of a P1(b) primal solution.
inline std::vector<ComplexMatrix> p1b_beamformers(const RealVector& x, int n_r, int n_t) {
    const P1bLayout lay{n_r, n_t};
    if (x.size() != lay.block_offset(n_r)) throw std::invalid_argument("p1b_beamformers: layout mismatch");
    std::vector<ComplexMatrix> q;
    for (int l = 0; l < n_r; ++l) {
        q.push_back(conic::extract_hermitian(conic::smat(x.segment(lay.block_offset(l), lay.block_size()), 2 * n_t)));
    }
    return q;
}

// ---------------------------------------------------------------------------
// Rank reduction for separable SDPs

inline double rank_one_fidelity(const ComplexMatrix& q) {
    const double tr = q.trace().real();
    if (!(tr > 0.0)) return 0.0;
    return hermitian_eig(q).values(0) / tr;
}

namespace detail {

inline ComplexMatrix hermitian_part(const ComplexMatrix& m) { return 0.5 * (m + m.adjoint()); }

// r x r Hermitian matrices as r^2 reals: diagonal, then (re, im) of the strict upper triangle.
inline ComplexMatrix unpack_hermitian(const RealVector& z, int off, int r) {
    ComplexMatrix d = ComplexMatrix::Zero(r, r);
    int k = off;
    for (int j = 0; j < r; ++j) d(j, j) = z(k++);
    for (int j = 0; j < r; ++j)
        for (int i = j + 1; i < r; ++i) {
            d(j, i) = cdouble(z(k), z(k + 1));
            d(i, j) = std::conj(d(j, i));
            k += 2;
        }
    return d;
}

}  // namespace detail

/// Shrinks the ranks of PSD blocks X_l while keeping every Tr(sum_l A[u][l] X_l)
/// fixed. Each round finds Hermitian Delta_l in the span of the current
/// factors with sum_l Tr(V_l^H A[u][l] V_l Delta_l) = 0 and steps until one
/// eigenvalue vanishes. Returns the reduced blocks; `fidelity` receives the
/// worst lambda_1 / Tr over blocks.
inline std::vector<ComplexMatrix> reduce_rank(std::vector<ComplexMatrix> x,
                                              const std::vector<std::vector<ComplexMatrix>>& a,
                                              double* fidelity = nullptr) {
    const int nb = static_cast<int>(x.size());
    for (const auto& row : a) {
        if (static_cast<int>(row.size()) != nb) throw std::invalid_argument("reduce_rank: coefficient layout mismatch");
    }
    const int max_rounds = 4 * std::max(1, nb) * (x.empty() ? 1 : static_cast<int>(x.front().rows()));
    for (int round = 0; round < max_rounds; ++round) {
        std::vector<ComplexMatrix> v(nb);
        std::vector<int> r(nb);
        int unknowns = 0;
        bool all_rank_one = true;
        for (int l = 0; l < nb; ++l) {
            x[l] = detail::hermitian_part(x[l]);
            const HermitianEig e = hermitian_eig(x[l]);
            const double top = std::max(e.values(0), 0.0);
            int rank = 0;
            while (rank < e.values.size() && e.values(rank) > 1e-9 * top) ++rank;
            r[l] = rank;
            if (rank > 1) all_rank_one = false;
            v[l] = e.vectors.leftCols(rank) * e.values.head(rank).cwiseSqrt().asDiagonal();
            unknowns += rank * rank;
        }
        if (all_rank_one || unknowns == 0) break;

        const int u_count = static_cast<int>(a.size());
        RealMatrix t = RealMatrix::Zero(u_count, unknowns);
        for (int u = 0; u < u_count; ++u) {
            int col = 0;
            for (int l = 0; l < nb; ++l) {
                const ComplexMatrix b = v[l].adjoint() * a[u][l] * v[l];
                for (int j = 0; j < r[l]; ++j) t(u, col++) = b(j, j).real();
                for (int j = 0; j < r[l]; ++j)
                    for (int i = j + 1; i < r[l]; ++i) {
                        // Tr(B D) picks up 2 Re(conj(B_ji) D_ji) from each off-diagonal pair
                        t(u, col++) = 2.0 * b(j, i).real();
                        t(u, col++) = 2.0 * b(j, i).imag();
                    }
            }
        }
        Eigen::JacobiSVD<RealMatrix> svd(t, Eigen::ComputeFullV);
        const RealVector& sv = svd.singularValues();
        const double smax = sv.size() > 0 ? sv(0) : 0.0;
        int trank = 0;
        for (Eigen::Index i = 0; i < sv.size(); ++i)
            if (sv(i) > 1e-10 * std::max(1.0, smax)) ++trank;
        if (trank >= unknowns) break;  // no direction preserves every constraint
        const RealVector z = svd.matrixV().col(unknowns - 1);

        std::vector<ComplexMatrix> delta(nb);
        double top = 0.0, bottom = 0.0;
        int off = 0;
        for (int l = 0; l < nb; ++l) {
            delta[l] = detail::unpack_hermitian(z, off, r[l]);
            off += r[l] * r[l];
            if (r[l] == 0) continue;
            Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(delta[l], Eigen::EigenvaluesOnly);
            top = std::max(top, es.eigenvalues().maxCoeff());
            bottom = std::min(bottom, es.eigenvalues().minCoeff());
        }
        double scale = top;
        if (-bottom > top) {
            scale = bottom;  // flip so the largest-magnitude eigenvalue is positive
        }
        if (scale == 0.0) break;
        for (int l = 0; l < nb; ++l) {
            if (r[l] == 0) continue;
            const ComplexMatrix step = ComplexMatrix::Identity(r[l], r[l]) - delta[l] / scale;
            x[l] = detail::hermitian_part(v[l] * step * v[l].adjoint());
        }
    }
    if (fidelity) {
        double f = 1.0;
        for (const auto& q : x) f = std::min(f, rank_one_fidelity(q));
        *fidelity = f;
    }
    return x;
}

/// Rank-one factor of a single PSD block whose constraint values Tr(A_u Q)
/// must be preserved. Exact rank one (to 1e-6 of the trace) is returned as
/// sqrt(lambda_1) v_1 directly; otherwise the block is reduced first.
inline ComplexVector rank_extract(const ComplexMatrix& q, std::span<const ComplexMatrix> constraints,
                                  double* fidelity = nullptr) {
    if (!is_hermitian(q, 1e-8)) throw std::invalid_argument("rank_extract: Q is not Hermitian");
    HermitianEig e = hermitian_eig(detail::hermitian_part(q));
    if (e.values(e.values.size() - 1) < -1e-8 * std::max(1.0, std::abs(e.values(0)))) {
        throw std::invalid_argument("rank_extract: Q is not positive semidefinite");
    }
    const double tr = q.trace().real();
    double f = tr > 0.0 ? e.values(0) / tr : 1.0;
    if (f < 1.0 - 1e-6) {
        std::vector<std::vector<ComplexMatrix>> a;
        for (const auto& c : constraints) a.push_back({c});
        const auto reduced = reduce_rank({q}, a, &f);
        e = hermitian_eig(reduced.front());
        if (f < 1.0 - 1e-3) throw RankExtractionFailure("rank_extract: reduction stalled above rank one", f);
    }
    if (fidelity) *fidelity = f;
    return e.vectors.col(0) * std::sqrt(std::max(e.values(0), 0.0));
}

/// Rotates each column so that h_i q_i is real and non-negative. Columns with
/// h_i q_i = 0 keep their phase and are listed in `unchanged`.
inline ComplexMatrix transmit_phase_equalize(const ComplexMatrix& w, const ComplexMatrix& h,
                                             std::vector<int>* unchanged = nullptr) {
    if (w.cols() != h.rows() || w.rows() != h.cols()) {
        throw std::invalid_argument("transmit_phase_equalize: W must be N_t x N_r");
    }
    ComplexMatrix out = w;
    for (Eigen::Index i = 0; i < w.cols(); ++i) {
        const cdouble hq = (h.row(i) * w.col(i)).value();
        if (hq == cdouble(0.0, 0.0)) {
            if (unchanged) unchanged->push_back(static_cast<int>(i));
            continue;
        }
        out.col(i) *= std::polar(1.0, -std::arg(hq));
    }
    return out;
}

/// Per-antenna SINR |h_i q_i|^2 / (sigma2 + sum_{i' != i} |h_i q_i'|^2).
inline RealVector per_antenna_sinr(const ComplexMatrix& w, const ComplexMatrix& h, double sigma2) {
    const ComplexMatrix g = h * w;
    RealVector out(g.rows());
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
        const double desired = std::norm(g(i, i));
        const double interference = g.row(i).squaredNorm() - desired;
        out(i) = desired / (sigma2 + interference);
    }
    return out;
}

// ---------------------------------------------------------------------------
// ISA

struct IsaSettings {
    double tau = 0.1;
    double gamma_l = 0.0;
    double gamma_r = 20.0;
    conic::SolverSettings solver;
};

namespace detail {

inline PrecodeResult finish_isa(const ComplexMatrix& h, std::vector<ComplexMatrix> q, double gamma, double sigma2,
                                double epsilon, double p_max, PrecodeResult r) {
    const int n_r = static_cast<int>(h.rows());
    const int n_t = static_cast<int>(h.cols());
    for (const auto& qi : q) r.diagnostics.rank_ratios.push_back(rank_one_fidelity(qi));

    double fidelity = *std::min_element(r.diagnostics.rank_ratios.begin(), r.diagnostics.rank_ratios.end());
    if (fidelity < 1.0 - 1e-6) {
        q = reduce_rank(std::move(q), p1b_coefficients(gamma, h), &fidelity);
    }
    r.diagnostics.fidelity = fidelity;
    if (fidelity < 1.0 - 1e-3) {
        r.status = PrecodeStatus::Degraded;
        r.diagnostics.note = "rank reduction stalled above rank one";
    }

    ComplexMatrix w(n_t, n_r);
    for (int i = 0; i < n_r; ++i) {
        const HermitianEig e = hermitian_eig(detail::hermitian_part(q[i]));
        w.col(i) = e.vectors.col(0) * std::sqrt(std::max(e.values(0), 0.0));
    }
    w = transmit_phase_equalize(w, h, &r.diagnostics.unequalized);

    // Solver tolerances can leave the budgets exceeded by ~1e-9; shrink onto them.
    const ComplexMatrix g = h.adjoint() * h;
    const double power = w.squaredNorm();
    const double anon = (g * w).squaredNorm();
    double shrink = 1.0;
    if (power > p_max) shrink = std::min(shrink, std::sqrt(p_max / power));
    if (anon > epsilon) shrink = std::min(shrink, std::sqrt(epsilon / anon));
    w *= shrink;

    r.W = w;
    r.diagnostics.power = w.squaredNorm();
    r.diagnostics.anonymity_lhs = (g * w).squaredNorm();
    r.diagnostics.anonymity_threshold = epsilon;
    if (r.status == PrecodeStatus::Degraded) r.achieved = per_antenna_sinr(w, h, sigma2).minCoeff();
    return r;
}

}  // namespace detail

/// Interference-suppression anonymous precoder: bisection on the SINR target
/// over the relaxed power-minimisation SDP, rank-one extraction and transmit
/// phase equalisation. Requires N_r <= N_t.
inline PrecodeResult isa_precode(const ComplexMatrix& h, double sigma2, double epsilon, double p_max,
                                 const IsaSettings& cfg = {}) {
    if (h.rows() > h.cols()) throw std::invalid_argument("isa_precode: requires N_r <= N_t");
    if (!(p_max > 0.0)) throw std::invalid_argument("isa_precode: p_max must be positive");
    if (!(cfg.tau > 0.0) || !(cfg.gamma_l < cfg.gamma_r) || cfg.gamma_l < 0.0) {
        throw std::invalid_argument("isa_precode: invalid bisection bounds");
    }
    const int n_r = static_cast<int>(h.rows());
    const int n_t = static_cast<int>(h.cols());

    PrecodeResult r;
    double gl = cfg.gamma_l, gr = cfg.gamma_r;
    std::vector<ComplexMatrix> accepted;
    double accepted_gamma = 0.0;
    while (std::abs(gr - gl) >= cfg.tau) {
        const double gamma = 0.5 * (gl + gr);
        ++r.iterations;
        const conic::Solution sol = conic::solve_conic(build_p1b(gamma, h, sigma2, epsilon), cfg.solver);
        r.diagnostics.solver_iterations += sol.iterations;
        if (sol.status == conic::SolveStatus::Optimal) {
            const double reward = p_max - sol.objective;
            if (reward >= 0.0) {
                gl = gamma;
                accepted = p1b_beamformers(sol.x, n_r, n_t);
                accepted_gamma = gamma;
            } else {
                gr = gamma;
            }
        } else if (sol.status == conic::SolveStatus::Infeasible) {
            gr = gamma;  // anonymity budget cannot support this SINR target
        } else {
            // Targets right at the edge of the feasible set drive the
            // homogeneous iterate towards an unnormalised infeasibility ray.
            // Only certified targets are ever accepted, so reject it.
            gr = gamma;
            ++r.diagnostics.uncertified_targets;
        }
    }

    if (accepted.empty()) {
        // Nothing met the power budget; probe the smallest target.
        const double gamma = cfg.gamma_l + cfg.tau;
        const conic::Solution sol = conic::solve_conic(build_p1b(gamma, h, sigma2, epsilon), cfg.solver);
        r.diagnostics.solver_iterations += sol.iterations;
        if (sol.status == conic::SolveStatus::Infeasible) {
            r.status = PrecodeStatus::Infeasible;
            r.W = ComplexMatrix::Zero(n_t, n_r);
            r.diagnostics.anonymity_threshold = epsilon;
            r.diagnostics.note = "anonymity constraint infeasible at the minimum SINR target";
            return r;
        }
        if (sol.status != conic::SolveStatus::Optimal) {
            throw NumericalFailure(std::string("isa_precode: P1(b) solve failed (") + sol.message + ")");
        }
        auto q = p1b_beamformers(sol.x, n_r, n_t);
        const double scale = std::min(1.0, p_max / sol.objective);
        for (auto& qi : q) qi *= scale;
        r.status = PrecodeStatus::Degraded;
        r.diagnostics.note = "power budget below the minimum SINR target; scaled to budget";
        return detail::finish_isa(h, std::move(q), gamma, sigma2, epsilon, p_max, std::move(r));
    }

    r.achieved = accepted_gamma;
    return detail::finish_isa(h, std::move(accepted), accepted_gamma, sigma2, epsilon, p_max, std::move(r));
}

// ---------------------------------------------------------------------------
// Symbol-level constructive interference designs
//
// Solved in dual form over y = (Re x, Im x, gamma), x = W s:
//   maximise gamma  s.t.  c - G y in K.

namespace detail {

/// Orthonormal basis of the null space of b (columns), possibly empty.
inline ComplexMatrix null_space(const ComplexMatrix& b) {
    Eigen::JacobiSVD<ComplexMatrix> svd(b, Eigen::ComputeFullV);
    const RealVector& sv = svd.singularValues();
    const double smax = sv.size() > 0 ? sv(0) : 0.0;
    int rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) > 1e-12 * std::max(1.0, smax) * std::max(b.rows(), b.cols())) ++rank;
    return svd.matrixV().rightCols(b.cols() - rank);
}

/// Real 2n x 2d form of a complex n x d map acting on (Re z, Im z).
inline RealMatrix real_form(const ComplexMatrix& m) {
    const Eigen::Index r = m.rows(), c = m.cols();
    RealMatrix out(2 * r, 2 * c);
    out << m.real(), -m.imag(), m.imag(), m.real();
    return out;
}

struct CiOutcome {
    ComplexVector x;
    int iterations = 0;
};

/// Max-margin design for received signals H x. `anon` (may be empty) with
/// threshold `thr` adds ||anon x||^2 <= thr.
inline CiOutcome solve_ci(const ComplexMatrix& h, const ComplexVector& s, double p_max, int m,
                          const ComplexMatrix& anon, double thr, const conic::SolverSettings& opt) {
    const int n_t = static_cast<int>(h.cols());
    const int n_r = static_cast<int>(h.rows());

    // A zero threshold confines x to the null space of the anonymity map.
    ComplexMatrix basis = ComplexMatrix::Identity(n_t, n_t);
    bool soc_anon = anon.size() > 0;
    if (soc_anon && thr == 0.0) {
        basis = null_space(anon);
        soc_anon = false;
        if (basis.cols() == 0) return {ComplexVector::Zero(n_t), 0};
    }
    const int d = static_cast<int>(basis.cols());
    const int dim = 2 * d + 1;
    const ComplexMatrix heff = h * basis;

    const bool bpsk = (m == 2);
    const double t = bpsk ? 0.0 : std::tan(std::numbers::pi / m);
    const int lp_rows = bpsk ? n_r : 2 * n_r;
    const int anon_rows = soc_anon ? 2 * static_cast<int>(anon.rows()) + 1 : 0;
    const int n = lp_rows + (2 * d + 1) + anon_rows;

    RealMatrix g = RealMatrix::Zero(n, dim);
    RealVector c = RealVector::Zero(n);
    int row = 0;
    for (int i = 0; i < n_r; ++i) {
        // z_i = h_i x s_i^* = a_i + j b_i, both linear in (Re x, Im x)
        const Eigen::RowVectorXcd gi = heff.row(i) * std::conj(s(i));
        Eigen::RowVectorXd ra(2 * d), rb(2 * d);
        ra << gi.real(), -gi.imag();
        rb << gi.imag(), gi.real();
        if (bpsk) {
            // a_i - gamma >= 0
            g.row(row).head(2 * d) = -ra;
            g(row, 2 * d) = 1.0;
            ++row;
        } else {
            // (a_i - gamma) tan(theta) -/+ b_i >= 0
            g.row(row).head(2 * d) = -(t * ra - rb);
            g(row, 2 * d) = t;
            ++row;
            g.row(row).head(2 * d) = -(t * ra + rb);
            g(row, 2 * d) = t;
            ++row;
        }
    }
    // (sqrt(p), x) in SOC
    c(row) = std::sqrt(p_max);
    g.block(row + 1, 0, 2 * d, 2 * d) = -RealMatrix::Identity(2 * d, 2 * d);
    row += 2 * d + 1;
    if (soc_anon) {
        const ComplexMatrix beff = anon * basis;
        c(row) = std::sqrt(thr);
        g.block(row + 1, 0, 2 * beff.rows(), 2 * d) = -real_form(beff);
        row += anon_rows;
    }

    conic::ConicProgram p;
    p.c = c;
    p.A = g.transpose();
    p.b = RealVector::Zero(dim);
    p.b(2 * d) = 1.0;
    p.cones.push_back(conic::Cone::nonnegative(lp_rows));
    p.cones.push_back(conic::Cone::second_order(2 * d + 1));
    if (soc_anon) p.cones.push_back(conic::Cone::second_order(anon_rows));

    const conic::Solution sol = conic::solve_conic(p, opt);
    if (sol.status != conic::SolveStatus::Optimal) {
        throw NumericalFailure(std::string("constructive-interference solve failed (") + sol.message + ")");
    }
    ComplexVector z(d);
    for (int j = 0; j < d; ++j) z(j) = cdouble(sol.y(j), sol.y(d + j));
    return {basis * z, sol.iterations};
}

inline PrecodeResult finish_ci(const ComplexMatrix& h, const ComplexVector& s, ComplexVector x, double p_max, int m,
                               const ComplexMatrix& anon, double thr, int iterations) {
    // Pull the solver's ~1e-9 constraint slop back inside both budgets.
    double shrink = 1.0;
    const double power = x.squaredNorm();
    if (power > p_max) shrink = std::min(shrink, std::sqrt(p_max / power));
    if (anon.size() > 0) {
        const double lhs = (anon * x).squaredNorm();
        if (lhs > thr) shrink = std::min(shrink, thr > 0.0 ? std::sqrt(thr / lhs) : 0.0);
    }
    x *= shrink;

    PrecodeResult r;
    r.W = x * s.adjoint() / s.squaredNorm();
    const ComplexVector rx = h * x;
    double margin = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < rx.size(); ++i) margin = std::min(margin, constructive_margin(rx(i), s(i), m));
    r.achieved = margin;
    r.diagnostics.power = x.squaredNorm();
    r.diagnostics.anonymity_lhs = anon.size() > 0 ? (anon * x).squaredNorm() : 0.0;
    r.diagnostics.anonymity_threshold = anon.size() > 0 ? thr : std::numeric_limits<double>::infinity();
    r.diagnostics.solver_iterations = iterations;
    return r;
}

inline void check_symbols(const ComplexVector& s, Eigen::Index n_r, int m, const char* who) {
    check_psk_order(m);
    if (s.size() != n_r) throw std::invalid_argument(std::string(who) + ": symbol vector length must equal N_r");
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        if (std::abs(std::abs(s(i)) - 1.0) > 1e-9) throw std::invalid_argument(std::string(who) + ": symbols must be unit modulus");
    }
}

}  // namespace detail

/// CIA for the strong sender: ||H^H H W s||^2 <= zeta hides the sender from
/// the maximum-norm detector.
inline PrecodeResult cia_precode_ss(const ComplexMatrix& h, const ComplexVector& s, double zeta, double p_max, int m,
                                    const conic::SolverSettings& opt = {}) {
    detail::check_symbols(s, h.rows(), m, "cia_precode_ss");
    if (h.rows() > h.cols()) throw std::invalid_argument("cia_precode_ss: requires N_r <= N_t");
    if (!(zeta >= 0.0) || !(p_max > 0.0)) throw std::invalid_argument("cia_precode_ss: invalid thresholds");
    const ComplexMatrix anon = h.adjoint() * h;
    auto out = detail::solve_ci(h, s, p_max, m, anon, zeta, opt);
    return detail::finish_ci(h, s, std::move(out.x), p_max, m, anon, zeta, out.iterations);
}

/// CIA for the strong receiver: ||(P_alias - P_k) H_k W s||^2 <= delta makes
/// the alias as plausible as the true sender to the projection detector.
inline PrecodeResult cia_precode_sr(const ChannelSet& cs, int k, int k_alias, const ComplexVector& s, double delta,
                                    double p_max, int m, const conic::SolverSettings& opt = {}) {
    if (k < 0 || k >= cs.users() || k_alias < 0 || k_alias >= cs.users() || k == k_alias) {
        throw std::invalid_argument("cia_precode_sr: invalid sender/alias pair");
    }
    const ComplexMatrix& h = cs.channel(k);
    detail::check_symbols(s, h.rows(), m, "cia_precode_sr");
    if (!(delta >= 0.0) || !(p_max > 0.0)) throw std::invalid_argument("cia_precode_sr: invalid thresholds");
    const ComplexMatrix anon = (cs.projector(k_alias) - cs.projector(k)) * h;
    auto out = detail::solve_ci(h, s, p_max, m, anon, delta, opt);
    return detail::finish_ci(h, s, std::move(out.x), p_max, m, anon, delta, out.iterations);
}

/// Constructive-interference benchmark: power and margin constraints only.
inline PrecodeResult benchmark_ci(const ComplexMatrix& h, const ComplexVector& s, double p_max, int m,
                                  const conic::SolverSettings& opt = {}) {
    detail::check_symbols(s, h.rows(), m, "benchmark_ci");
    if (!(p_max > 0.0)) throw std::invalid_argument("benchmark_ci: p_max must be positive");
    const ComplexMatrix none;
    auto out = detail::solve_ci(h, s, p_max, m, none, 0.0, opt);
    return detail::finish_ci(h, s, std::move(out.x), p_max, m, none, 0.0, out.iterations);
}

// ---------------------------------------------------------------------------
// Linear benchmarks

/// Regularised zero-forcing c H^H (H H^H + (N_r sigma2 / p) I)^{-1}, with
/// c chosen for Tr(W W^H) = p_max.
inline ComplexMatrix benchmark_mmse(const ComplexMatrix& h, double sigma2, double p_max) {
    if (!(sigma2 > 0.0) || !(p_max > 0.0)) throw std::invalid_argument("benchmark_mmse: sigma2 and p_max must be positive");
    const Eigen::Index n_r = h.rows();
    const ComplexMatrix gram = h * h.adjoint() + (static_cast<double>(n_r) * sigma2 / p_max) *
                                                      ComplexMatrix::Identity(n_r, n_r);
    // W = H^H gram^{-1}, computed as (gram^{-1} H)^H since gram is Hermitian
    const ComplexMatrix w = gram.ldlt().solve(h).adjoint();
    return w * std::sqrt(p_max / w.squaredNorm());
}

/// Instantaneous-power variant: rescales W so that ||W s||^2 = p_max.
inline ComplexMatrix normalize_instantaneous(const ComplexMatrix& w, const ComplexVector& s, double p_max) {
    const double e = (w * s).squaredNorm();
    if (!(e > 0.0)) return w;
    return w * std::sqrt(p_max / e);
}

struct SvdPrecoder {
    ComplexMatrix W;  // N_t x N_s
    int streams = 0;
};

/// Equal-power eigenmode transmission over the N_s = min(N_t, N_r) strongest modes.
inline SvdPrecoder benchmark_svd(const ComplexMatrix& h, double p_max) {
    if (!(p_max > 0.0)) throw std::invalid_argument("benchmark_svd: p_max must be positive");
    const int ns = static_cast<int>(std::min(h.rows(), h.cols()));
    Eigen::JacobiSVD<ComplexMatrix> svd(h, Eigen::ComputeFullV);
    return {std::sqrt(p_max / ns) * svd.matrixV().leftCols(ns), ns};
}

/// Receiver side of the SVD benchmark, built from the channel the receiver
/// believes carried the block.
class SvdCombiner {
public:
    SvdCombiner(const ComplexMatrix& declared, double p_max) {
        const int ns = static_cast<int>(std::min(declared.rows(), declared.cols()));
        Eigen::JacobiSVD<ComplexMatrix> svd(declared, Eigen::ComputeFullU);
        uh_ = svd.matrixU().leftCols(ns).adjoint();
        gain_ = svd.singularValues().head(ns) * std::sqrt(p_max / ns);
    }

    ComplexVector apply(const ComplexVector& y) const {
        ComplexVector r = uh_ * y;
        for (Eigen::Index i = 0; i < r.size(); ++i) r(i) /= gain_(i);
        return r;
    }

    int streams() const { return static_cast<int>(gain_.size()); }

private:
    ComplexMatrix uh_;
    RealVector gain_;
};

}  // namespace anonphy
