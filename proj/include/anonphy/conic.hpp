#pragma once

// Convex cone programs in standard form
//
//     minimize    c' x
//     subject to  A x = b,   x in K
//
// with dual
//
//     maximize    b' y
//     subject to  A' y + s = c,   s in K*  (= K, all cones are self-dual)
//
// K is a product of nonnegative orthants, second-order cones
// {(t, u) : t >= ||u||} and real symmetric PSD cones. A PSD block of order d
// occupies d(d+1)/2 entries of x in packed "svec" layout: the lower triangle
// column by column, off-diagonal entries multiplied by sqrt(2), so that
// svec(U)' svec(V) = Tr(U V).
//
// Problems whose decision variables are naturally free (max-margin SOCPs,
// for instance) are stated in the dual form and read back from `y`.

#include <algorithm>
#include <initializer_list>
#include <cmath>
#include <iomanip>
#include <iostream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "anonphy/numerics.hpp"

namespace anonphy::conic {

enum class ConeKind { Nonnegative, SecondOrder, Semidefinite };

struct Cone {
    ConeKind kind = ConeKind::Nonnegative;
    int dim = 0;  // entry count (nonnegative), vector length (second order), matrix order (PSD)

    static Cone nonnegative(int n) { return {ConeKind::Nonnegative, n}; }
    static Cone second_order(int n) { return {ConeKind::SecondOrder, n}; }
    static Cone semidefinite(int order) { return {ConeKind::Semidefinite, order}; }

    /// Number of entries of x the cone occupies.
    int size() const { return kind == ConeKind::Semidefinite ? dim * (dim + 1) / 2 : dim; }
    /// Barrier degree.
    int degree() const {
        switch (kind) {
            case ConeKind::Nonnegative: return dim;
            case ConeKind::SecondOrder: return 1;
            case ConeKind::Semidefinite: return dim;
        }
        return 0;
    }
};

struct ConicProgram {
    RealVector c;
    RealMatrix A;
    RealVector b;
    std::vector<Cone> cones;

    int num_variables() const { return static_cast<int>(c.size()); }
    int num_constraints() const { return static_cast<int>(b.size()); }

    int count(ConeKind kind) const {
        return static_cast<int>(std::count_if(cones.begin(), cones.end(), [&](const Cone& k) { return k.kind == kind; }));
    }

    /// Offset of cone `i` inside x.
    int offset(std::size_t i) const {
        int off = 0;
        for (std::size_t j = 0; j < i; ++j) off += cones[j].size();
        return off;
    }

    void validate() const {
        int n = 0;
        for (const auto& k : cones) {
            if (k.dim < 1) throw std::invalid_argument("ConicProgram: cone of non-positive dimension");
            n += k.size();
        }
        if (n != c.size()) throw std::invalid_argument("ConicProgram: cone sizes do not match the variable count");
        if (A.cols() != c.size() || A.rows() != b.size()) {
            throw std::invalid_argument("ConicProgram: constraint matrix shape mismatch");
        }
        if (!c.allFinite() || !A.allFinite() || !b.allFinite()) {
            throw std::invalid_argument("ConicProgram: non-finite data");
        }
        for (Eigen::Index i = 0; i < A.rows(); ++i) {
            if (A.row(i).norm() == 0.0) throw std::invalid_argument("ConicProgram: empty constraint row");
        }
    }
};

enum class SolveStatus { Optimal, Infeasible, Unbounded, NumericalFailure };

inline const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::Optimal: return "optimal";
        case SolveStatus::Infeasible: return "infeasible";
        case SolveStatus::Unbounded: return "unbounded";
        case SolveStatus::NumericalFailure: return "numerical-failure";
    }
    return "?";
}

struct Solution {
    SolveStatus status = SolveStatus::NumericalFailure;
    RealVector x;  // primal
    RealVector y;  // dual multipliers of A x = b
    RealVector s;  // dual slack
    double objective = 0.0;       // c' x
    double dual_objective = 0.0;  // b' y
    double gap = 0.0;             // x' s / max(1, |c' x|)
    double primal_residual = 0.0; // max_i |A_i x - b_i| / (||A_i|| + |b_i|)
    double dual_residual = 0.0;   // ||A' y + s - c|| / max(1, ||c||)
    int iterations = 0;
    std::string message;
};

struct SolverSettings {
    double feastol = 1e-9;
    double reltol = 1e-9;
    double abstol = 1e-10;
    double infeasibility_tol = 1e-8;
    // A stalled run still counts as optimal if its best iterate is within this.
    double contract_tol = 1e-7;
    int max_iterations = 120;
    double step_fraction = 0.99;
    bool verbose = false;  // per-iteration log on stderr
};

// ---------------------------------------------------------------------------
// svec / smat

inline int svec_size(int d) { return d * (d + 1) / 2; }

template <typename Derived>
RealVector svec(const Eigen::MatrixBase<Derived>& m) {
    const int d = static_cast<int>(m.rows());
    RealVector v(svec_size(d));
    int k = 0;
    for (int j = 0; j < d; ++j) {
        v(k++) = m(j, j);
        for (int i = j + 1; i < d; ++i) v(k++) = std::sqrt(2.0) * 0.5 * (m(i, j) + m(j, i));
    }
    return v;
}

template <typename Derived>
RealMatrix smat(const Eigen::MatrixBase<Derived>& v, int d) {
    RealMatrix m(d, d);
    int k = 0;
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    for (int j = 0; j < d; ++j) {
        m(j, j) = v(k++);
        for (int i = j + 1; i < d; ++i) {
            m(i, j) = m(j, i) = v(k++) * inv_sqrt2;
        }
    }
    return m;
}

// ---------------------------------------------------------------------------
// Complex Hermitian <-> real symmetric embedding

/// M -> [[Re M, -Im M], [Im M, Re M]]. M is PSD iff the embedding is, and
/// every eigenvalue of M appears twice in the embedding.
inline RealMatrix embed_hermitian_psd(const ComplexMatrix& m) {
    if (!is_hermitian(m, 1e-10)) throw std::invalid_argument("embed_hermitian_psd: matrix is not Hermitian");
    const Eigen::Index n = m.rows();
    RealMatrix e(2 * n, 2 * n);
    e.topLeftCorner(n, n) = m.real();
    e.topRightCorner(n, n) = -m.imag();
    e.bottomLeftCorner(n, n) = m.imag();
    e.bottomRightCorner(n, n) = m.real();
    return e;
}

/// Inverse of embed_hermitian_psd; averages the two copies so that any
/// symmetric 2n x 2n block maps to its nearest structured counterpart.
inline ComplexMatrix extract_hermitian(const RealMatrix& e) {
    if (e.rows() != e.cols() || e.rows() % 2 != 0) {
        throw std::invalid_argument("extract_hermitian: block must be square of even order");
    }
    const Eigen::Index n = e.rows() / 2;
    RealMatrix re = 0.5 * (e.topLeftCorner(n, n) + e.bottomRightCorner(n, n));
    RealMatrix im = 0.5 * (e.bottomLeftCorner(n, n) - e.topRightCorner(n, n));
    ComplexMatrix m(n, n);
    m.real() = re;
    m.imag() = im;
    return 0.5 * (m + m.adjoint());
}

/// Coefficient vector c with c' svec(embed(X)) = Tr(A X) for Hermitian A, X.
/// Tr(embed(A) embed(X)) = 2 Tr(A X), hence the factor one half.
inline RealVector trace_form_coefficients(const ComplexMatrix& a) {
    return svec(RealMatrix(0.5 * embed_hermitian_psd(a)));
}

// ---------------------------------------------------------------------------

namespace detail {

struct Block {
    Cone cone;
    int offset = 0;
};

/// Nesterov-Todd scaling W of one cone: W x = W^{-T} s = lambda.
struct BlockScaling {
    // nonnegative: W = diag(d)
    RealVector d;
    // second order: W = beta (2 v v' - J)
    double beta = 1.0;
    RealVector v;
    // PSD: W(X) = R^{-1} X R^{-T}
    RealMatrix R, Rinv;
    RealVector eig;  // diagonal of the scaled point Lambda
};

inline RealVector soc_j(const RealVector& u) {
    RealVector r = -u;
    r(0) = u(0);
    return r;
}

inline double soc_jnorm2(const RealVector& u) {
    const double t = u.tail(u.size() - 1).norm();
    return (u(0) - t) * (u(0) + t);
}

// 2 v (v'u) - J u
inline RealVector hyperbolic(const RealVector& v, const RealVector& u) {
    RealVector r = 2.0 * v.dot(u) * v;
    r(0) -= u(0);
    r.tail(u.size() - 1) += u.tail(u.size() - 1);
    return r;
}

inline bool spd_factor(const RealMatrix& m, RealMatrix& l) {
    Eigen::LLT<RealMatrix> llt(m);
    if (llt.info() != Eigen::Success) return false;
    l = llt.matrixL();
    return l.diagonal().minCoeff() > 0.0 && l.allFinite();
}

inline bool sym_sqrt(const RealMatrix& m, RealMatrix& l) {
    Eigen::SelfAdjointEigenSolver<RealMatrix> es(m);
    if (es.info() != Eigen::Success) return false;
    RealVector ev = es.eigenvalues();
    if (ev.minCoeff() <= 0.0) return false;
    l = es.eigenvectors() * ev.cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
    return true;
}

/// Constraint data of one row restricted to a PSD block, factored once so that
/// R' A R costs O(d^2 r) for low-rank A (rank-one channel Gram terms, say).
struct BlockData {
    bool zero = true;
    bool low_rank = false;
    RealMatrix dense;     // smat of the row segment
    RealMatrix factor;    // A = factor * diag(sign) * factor'
    RealVector sign;
};

inline BlockData factor_block_data(const RealVector& seg, int d) {
    BlockData bd;
    if (seg.cwiseAbs().maxCoeff() == 0.0) return bd;
    bd.zero = false;
    bd.dense = smat(seg, d);
    Eigen::SelfAdjointEigenSolver<RealMatrix> es(bd.dense);
    const RealVector& ev = es.eigenvalues();
    const double top = ev.cwiseAbs().maxCoeff();
    std::vector<int> keep;
    for (int i = 0; i < d; ++i)
        if (std::abs(ev(i)) > 1e-13 * top) keep.push_back(i);
    if (3 * static_cast<int>(keep.size()) > d) return bd;
    bd.low_rank = true;
    bd.factor.resize(d, static_cast<Eigen::Index>(keep.size()));
    bd.sign.resize(static_cast<Eigen::Index>(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k) {
        bd.factor.col(static_cast<Eigen::Index>(k)) = es.eigenvectors().col(keep[k]) * std::sqrt(std::abs(ev(keep[k])));
        bd.sign(static_cast<Eigen::Index>(k)) = ev(keep[k]) > 0.0 ? 1.0 : -1.0;
    }
    return bd;
}

inline bool compute_scaling(const Block& blk, const RealVector& x, const RealVector& s, BlockScaling& w) {
    const int n = blk.cone.size();
    auto xs = x.segment(blk.offset, n);
    auto ss = s.segment(blk.offset, n);
    switch (blk.cone.kind) {
        case ConeKind::Nonnegative: {
            if (xs.minCoeff() <= 0.0 || ss.minCoeff() <= 0.0) return false;
            w.d = (ss.array() / xs.array()).sqrt();
            return true;
        }
        case ConeKind::SecondOrder: {
            RealVector xv = xs, sv = ss;
            if (n == 1) {
                if (xv(0) <= 0.0 || sv(0) <= 0.0) return false;
                w.beta = std::sqrt(sv(0) / xv(0));
                w.v = RealVector::Ones(1);
                return true;
            }
            const double xj = soc_jnorm2(xv), sj = soc_jnorm2(sv);
            if (!(xj > 0.0) || !(sj > 0.0) || xv(0) <= 0.0 || sv(0) <= 0.0) return false;
            RealVector xb = xv / std::sqrt(xj);
            RealVector sb = sv / std::sqrt(sj);
            const double gamma = std::sqrt(0.5 * (1.0 + xb.dot(sb)));
            RealVector wb = (sb + soc_j(xb)) / (2.0 * gamma);
            RealVector v = wb;
            v(0) += 1.0;
            v /= std::sqrt(2.0 * (wb(0) + 1.0));
            // keep v'Jv = 1 so that W^{-1} = J H(v) J / beta is the exact inverse
            const double vj = soc_jnorm2(v);
            if (!(vj > 0.0)) return false;
            w.v = v / std::sqrt(vj);
            w.beta = std::pow(sj / xj, 0.25);
            return true;
        }
        case ConeKind::Semidefinite: {
            // X = L L', L' S L = V diag(lambda)^2 V'. Then R = L V diag(lambda)^{-1/2}
            // satisfies R' S R = R^{-1} X R^{-T} = diag(lambda). L' S L is similar to
            // X S, whose eigenvalues stay within a bounded ratio of mu along the
            // central path, so the symmetric eigensolver is well conditioned here.
            const int d = blk.cone.dim;
            const RealMatrix X = smat(xs, d), S = smat(ss, d);
            RealMatrix l;
            const bool triangular = spd_factor(X, l);
            if (!triangular && !sym_sqrt(X, l)) return false;
            const RealMatrix m = l.transpose() * S * l;
            Eigen::SelfAdjointEigenSolver<RealMatrix> es(m);
            if (es.info() != Eigen::Success) return false;
            const RealVector ev = es.eigenvalues();
            if (!(ev.minCoeff() > 0.0)) return false;
            const RealVector lam = ev.cwiseSqrt();
            const RealMatrix& v = es.eigenvectors();
            w.R = l * v * lam.cwiseSqrt().cwiseInverse().asDiagonal();
            RealMatrix z;  // L^{-T} V
            if (triangular) z = l.transpose().triangularView<Eigen::Upper>().solve(v);
            else z = l.transpose().partialPivLu().solve(v);
            w.Rinv = lam.cwiseSqrt().asDiagonal() * z.transpose();
            w.eig = lam;
            return w.R.allFinite() && w.Rinv.allFinite();
        }
    }
    return false;
}

enum class Op { W, WinvT, Winv, WT };

inline void apply(const Block& blk, const BlockScaling& w, Op op, const RealVector& in, RealVector& out) {
    const int n = blk.cone.size();
    auto u = in.segment(blk.offset, n);
    auto r = out.segment(blk.offset, n);
    switch (blk.cone.kind) {
        case ConeKind::Nonnegative:
            if (op == Op::W || op == Op::WT) r = w.d.cwiseProduct(u);
            else r = u.cwiseQuotient(w.d);
            return;
        case ConeKind::SecondOrder: {
            RealVector uv = u;
            if (op == Op::W || op == Op::WT) {
                r = w.beta * hyperbolic(w.v, uv);
            } else {
                r = soc_j(hyperbolic(w.v, soc_j(uv))) / w.beta;
            }
            return;
        }
        case ConeKind::Semidefinite: {
            const int d = blk.cone.dim;
            RealMatrix U = smat(u, d);
            RealMatrix V;
            switch (op) {
                case Op::W: V = w.Rinv * U * w.Rinv.transpose(); break;
                case Op::WinvT: V = w.R.transpose() * U * w.R; break;
                case Op::Winv: V = w.R * U * w.R.transpose(); break;
                case Op::WT: V = w.Rinv.transpose() * U * w.Rinv; break;
            }
            r = svec(V);
            return;
        }
    }
}

/// lambda o u (Jordan product)
inline void jordan(const Block& blk, const RealVector& a, const RealVector& b, RealVector& out) {
    const int n = blk.cone.size();
    auto u = a.segment(blk.offset, n);
    auto v = b.segment(blk.offset, n);
    auto r = out.segment(blk.offset, n);
    switch (blk.cone.kind) {
        case ConeKind::Nonnegative: r = u.cwiseProduct(v); return;
        case ConeKind::SecondOrder: {
            RealVector t(n);
            t(0) = u.dot(v);
            if (n > 1) t.tail(n - 1) = u(0) * v.tail(n - 1) + v(0) * u.tail(n - 1);
            r = t;
            return;
        }
        case ConeKind::Semidefinite: {
            const int d = blk.cone.dim;
            RealMatrix U = smat(u, d), V = smat(v, d);
            r = svec(RealMatrix(0.5 * (U * V + V * U)));
            return;
        }
    }
}

/// Solves lambda o out = rhs for the scaled point lambda of the block.
inline void jordan_solve(const Block& blk, const BlockScaling& w, const RealVector& lambda, const RealVector& rhs,
                         RealVector& out) {
    const int n = blk.cone.size();
    auto l = lambda.segment(blk.offset, n);
    auto q = rhs.segment(blk.offset, n);
    auto r = out.segment(blk.offset, n);
    switch (blk.cone.kind) {
        case ConeKind::Nonnegative: r = q.cwiseQuotient(l); return;
        case ConeKind::SecondOrder: {
            if (n == 1) {
                r(0) = q(0) / l(0);
                return;
            }
            const double l0 = l(0);
            const double det = l0 * l0 - l.tail(n - 1).squaredNorm();
            const double v0 = (l0 * q(0) - l.tail(n - 1).dot(q.tail(n - 1))) / det;
            RealVector t(n);
            t(0) = v0;
            t.tail(n - 1) = (q.tail(n - 1) - v0 * l.tail(n - 1)) / l0;
            r = t;
            return;
        }
        case ConeKind::Semidefinite: {
            const int d = blk.cone.dim;
            RealMatrix Q = smat(q, d);
            for (int j = 0; j < d; ++j)
                for (int i = 0; i < d; ++i) Q(i, j) = 2.0 * Q(i, j) / (w.eig(i) + w.eig(j));
            r = svec(Q);
            return;
        }
    }
}

inline void identity(const Block& blk, RealVector& out) {
    const int n = blk.cone.size();
    auto r = out.segment(blk.offset, n);
    switch (blk.cone.kind) {
        case ConeKind::Nonnegative: r.setOnes(); return;
        case ConeKind::SecondOrder: r.setZero(); r(0) = 1.0; return;
        case ConeKind::Semidefinite: r = svec(RealMatrix::Identity(blk.cone.dim, blk.cone.dim)); return;
    }
}

/// Largest step alpha with lambda + alpha * dir inside the cone (infinity if unbounded).
inline double max_step(const Block& blk, const BlockScaling& w, const RealVector& lambda, const RealVector& dir) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    const int n = blk.cone.size();
    auto l = lambda.segment(blk.offset, n);
    auto d = dir.segment(blk.offset, n);
    switch (blk.cone.kind) {
        case ConeKind::Nonnegative: {
            double a = inf;
            for (int i = 0; i < n; ++i)
                if (d(i) < 0.0) a = std::min(a, -l(i) / d(i));
            return a;
        }
        case ConeKind::SecondOrder: {
            if (n == 1) return d(0) < 0.0 ? -l(0) / d(0) : inf;
            // (l0 + a d0)^2 - ||l1 + a d1||^2 = qa a^2 + 2 qb a + qc, with l0 + a d0 >= 0
            const double qa = d(0) * d(0) - d.tail(n - 1).squaredNorm();
            const double qb = l(0) * d(0) - l.tail(n - 1).dot(d.tail(n - 1));
            const double qc = l(0) * l(0) - l.tail(n - 1).squaredNorm();
            double best = inf;
            auto consider = [&](double a) {
                if (a > 0.0 && l(0) + a * d(0) >= 0.0) best = std::min(best, a);
            };
            if (std::abs(qa) < 1e-300) {
                if (qb < 0.0) consider(-qc / (2.0 * qb));
            } else {
                const double disc = qb * qb - qa * qc;
                if (disc >= 0.0) {
                    const double sq = std::sqrt(disc);
                    // numerically stable pair of roots
                    const double t = -(qb + std::copysign(sq, qb));
                    if (t != 0.0) {
                        consider(t / qa);
                        consider(qc / t);
                    }
                }
            }
            if (d(0) < 0.0) best = std::min(best, -l(0) / d(0));
            return best;
        }
        case ConeKind::Semidefinite: {
            const int dd = blk.cone.dim;
            RealMatrix D = smat(d, dd);
            RealVector isq = w.eig.cwiseSqrt().cwiseInverse();
            RealMatrix T = isq.asDiagonal() * D * isq.asDiagonal();
            Eigen::SelfAdjointEigenSolver<RealMatrix> es(T, Eigen::EigenvaluesOnly);
            const double mn = es.eigenvalues().minCoeff();
            return mn < 0.0 ? -1.0 / mn : inf;
        }
    }
    return inf;
}

}  // namespace detail

/// Homogeneous self-dual interior-point method with Nesterov-Todd scaling and
/// a Mehrotra predictor-corrector. Single-threaded and deterministic.
inline Solution solve_conic(const ConicProgram& prog, const SolverSettings& opt = {}) {
    prog.validate();
    using namespace detail;

    const int n = prog.num_variables();
    const int m = prog.num_constraints();

    std::vector<Block> blocks;
    int nu = 0;
    {
        int off = 0;
        for (const auto& k : prog.cones) {
            blocks.push_back({k, off});
            off += k.size();
            nu += k.degree();
        }
    }

    // Worst row violation relative to that row's own scale, so a huge
    // right-hand side on one row cannot mask a violation on another.
    auto row_residual = [](const RealVector& r, const RealVector& scale) {
        return r.size() == 0 ? 0.0 : (r.cwiseAbs().array() / scale.array()).maxCoeff();
    };

    // Row equilibration; y is mapped back at the end.
    RealVector rscale(m);
    for (int i = 0; i < m; ++i) rscale(i) = 1.0 / prog.A.row(i).norm();
    const RealMatrix A = rscale.asDiagonal() * prog.A;
    const RealVector b = rscale.cwiseProduct(prog.b);
    const RealVector& c = prog.c;
    const double bnorm = std::max(1.0, b.norm());
    const double cnorm = std::max(1.0, c.norm());

    RealVector x(n), s(n), e(n);
    for (const auto& blk : blocks) identity(blk, e);
    x = e;
    s = e;
    RealVector y = RealVector::Zero(m);
    double tau = 1.0, kappa = 1.0;

    std::vector<BlockScaling> W(blocks.size());
    std::vector<std::vector<BlockData>> psd_data(blocks.size());
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        if (blocks[i].cone.kind != ConeKind::Semidefinite) continue;
        for (int j = 0; j < m; ++j) {
            psd_data[i].push_back(factor_block_data(A.row(j).segment(blocks[i].offset, blocks[i].cone.size()).transpose(),
                                                    blocks[i].cone.dim));
        }
    }
    RealVector lambda(n);

    Solution sol;
    auto finish = [&](SolveStatus st, const std::string& msg, double scale) {
        sol.status = st;
        sol.message = msg;
        sol.x = x / scale;
        sol.s = s / scale;
        sol.y = rscale.cwiseProduct(y) / scale;
        sol.objective = prog.c.dot(sol.x);
        sol.dual_objective = prog.b.dot(sol.y);
        sol.gap = std::max(0.0, sol.x.dot(sol.s)) / std::max(1.0, std::abs(sol.objective));
        sol.primal_residual = row_residual(prog.A * sol.x - prog.b, prog.A.rowwise().norm() + prog.b.cwiseAbs());
        sol.dual_residual = (prog.A.transpose() * sol.y + sol.s - prog.c).norm() / cnorm;
        return sol;
    };

    auto apply_all = [&](Op op, const RealVector& in) {
        RealVector out(n);
        for (std::size_t i = 0; i < blocks.size(); ++i) apply(blocks[i], W[i], op, in, out);
        return out;
    };
    auto jordan_all = [&](const RealVector& a, const RealVector& bb) {
        RealVector out(n);
        for (const auto& blk : blocks) jordan(blk, a, bb, out);
        return out;
    };
    auto jordan_solve_all = [&](const RealVector& rhs) {
        RealVector out(n);
        for (std::size_t i = 0; i < blocks.size(); ++i) jordan_solve(blocks[i], W[i], lambda, rhs, out);
        return out;
    };
    auto step_all = [&](const RealVector& dxs, const RealVector& dss, double dtau, double dkappa) {
        double a = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < blocks.size(); ++i) {
            a = std::min(a, max_step(blocks[i], W[i], lambda, dxs));
            a = std::min(a, max_step(blocks[i], W[i], lambda, dss));
        }
        if (dtau < 0.0) a = std::min(a, -tau / dtau);
        if (dkappa < 0.0) a = std::min(a, -kappa / dkappa);
        return a;
    };

    struct Snapshot {
        RealVector x, y, s;
        double tau = 1.0;
        double score = std::numeric_limits<double>::infinity();
    } best;
    std::string failure = "iteration limit or stalled progress";
    for (int it = 0; it <= opt.max_iterations; ++it) {
        sol.iterations = it;
        bool interior = true;
        for (std::size_t i = 0; i < blocks.size() && interior; ++i) interior = compute_scaling(blocks[i], x, s, W[i]);
        if (!interior) {
            failure = "iterate left the cone interior";
            break;
        }
        lambda = apply_all(Op::W, x);
        const double mu = (x.dot(s) + tau * kappa) / (nu + 1);

        const RealVector rp = A * x - b * tau;
        const RealVector rd = A.transpose() * y + s - c * tau;
        const double rg = c.dot(x) - b.dot(y) + kappa;

        // Convergence and certificates.
        {
            const double pres = row_residual(rp / tau, RealVector::Ones(m) + b.cwiseAbs());
            const double dres = rd.norm() / tau / cnorm;
            const double pobj = c.dot(x) / tau;
            const double dobj = b.dot(y) / tau;
            const double gap = x.dot(s) / (tau * tau);
            double relgap = std::numeric_limits<double>::infinity();
            if (pobj < 0.0) relgap = gap / -pobj;
            else if (dobj > 0.0) relgap = gap / dobj;
            const double score = std::max({pres, dres, gap / std::max(1.0, std::abs(pobj))});
            if (score < best.score) best = {x, y, s, tau, score};
            if (opt.verbose) {
                std::cerr << std::scientific << std::setprecision(3) << "it " << it << " pobj " << pobj << " dobj "
                          << dobj << " pres " << pres << " dres " << dres << " gap " << gap << " tau " << tau
                          << " kappa " << kappa << '\n';
            }
            if (pres <= opt.feastol && dres <= opt.feastol && (gap <= opt.abstol || relgap <= opt.reltol)) {
                return finish(SolveStatus::Optimal, "converged", tau);
            }
            const double by = b.dot(y);
            if (by > 0.0) {
                const double pinf = (A.transpose() * y + s).norm() / by * bnorm / cnorm;
                if (pinf <= opt.infeasibility_tol) {
                    return finish(SolveStatus::Infeasible, "primal infeasibility certificate", by);
                }
            }
            const double cx = c.dot(x);
            if (cx < 0.0) {
                const double dinf = (A * x).norm() / -cx * cnorm / bnorm;
                if (dinf <= opt.infeasibility_tol) {
                    return finish(SolveStatus::Unbounded, "dual infeasibility certificate", -cx);
                }
            }
        }
        if (it == opt.max_iterations) break;

        // Scaled constraint matrix: column j of abt is W^{-T} a_j.
        RealMatrix abt(n, m);
        for (int j = 0; j < m; ++j) {
            const RealVector aj = A.row(j).transpose();
            RealVector col(n);
            for (std::size_t i = 0; i < blocks.size(); ++i) {
                const Block& blk = blocks[i];
                if (blk.cone.kind != ConeKind::Semidefinite) {
                    apply(blk, W[i], Op::WinvT, aj, col);
                    continue;
                }
                const BlockData& bd = psd_data[i][j];
                auto out = col.segment(blk.offset, blk.cone.size());
                if (bd.zero) {
                    out.setZero();
                } else if (bd.low_rank) {
                    const RealMatrix pf = W[i].R.transpose() * bd.factor;
                    out = svec(RealMatrix(pf * bd.sign.asDiagonal() * pf.transpose()));
                } else {
                    out = svec(RealMatrix(W[i].R.transpose() * bd.dense * W[i].R));
                }
            }
            abt.col(j) = col;
        }
        RealMatrix M = abt.transpose() * abt;
        // Relative per-row shift: rows with inactive constraints can have
        // diagonals many orders above the rest, and a uniform shift sized for
        // them would swamp the others.
        M.diagonal() *= 1.0 + 1e-14;
        M.diagonal().array() += 1e-300;
        Eigen::LLT<RealMatrix> chol(M);
        if (chol.info() != Eigen::Success) {
            Eigen::LDLT<RealMatrix> ldlt(M);
            if (ldlt.info() != Eigen::Success) break;
        }
        auto msolve = [&](const RealVector& r) {
            RealVector z = chol.solve(r);
            // one step of iterative refinement against the unregularised matrix
            RealVector res = r - abt.transpose() * (abt * z);
            z += chol.solve(res);
            return z;
        };

        const RealVector cbar = apply_all(Op::WinvT, c);
        const RealVector q = msolve(abt.transpose() * cbar + b);
        const RealVector vdir = abt * q - cbar;
        const double vnorm2 = vdir.squaredNorm();

        struct Dir {
            RealVector dx, dy, ds;  // unscaled
            RealVector dxs, dss;    // W dx and W^{-T} ds
            double dtau = 0.0, dkappa = 0.0;
        };
        auto reduced_solve = [&](const RealVector& r1, const RealVector& r2, double r3, const RealVector& t,
                                 double r5) {
            Dir d;
            const RealVector r2s = apply_all(Op::WinvT, r2);
            const RealVector p = msolve(r1 - abt.transpose() * (r2s + t));
            const RealVector u = r2s + t + abt * p;
            d.dtau = (r3 - b.dot(p) + cbar.dot(u) + r5 / tau) / (vnorm2 + kappa / tau);
            d.dy = p + q * d.dtau;
            d.dxs = u + vdir * d.dtau;
            d.dss = t - d.dxs;
            d.dkappa = (r5 - kappa * d.dtau) / tau;
            d.dx = apply_all(Op::Winv, d.dxs);
            d.ds = apply_all(Op::WT, d.dss);
            return d;
        };
        // Newton step with iterative refinement of the three linear blocks
        // against the unscaled data; the complementarity rows hold by construction.
        auto solve_newton = [&](const RealVector& r1, const RealVector& r2, double r3, const RealVector& r4,
                                double r5) {
            const RealVector t = jordan_solve_all(r4);
            Dir d = reduced_solve(r1, r2, r3, t, r5);
            const RealVector zero = RealVector::Zero(n);
            const double scale = std::max({1.0, r1.norm(), r2.norm(), std::abs(r3)});
            for (int k = 0; k < 3; ++k) {
                const RealVector e1 = r1 - (A * d.dx - b * d.dtau);
                const RealVector e2 = r2 - (-A.transpose() * d.dy - d.ds + c * d.dtau);
                const double e3 = r3 - (b.dot(d.dy) - c.dot(d.dx) - d.dkappa);
                if (std::max({e1.norm(), e2.norm(), std::abs(e3)}) <= 1e-13 * scale) break;
                const Dir corr = reduced_solve(e1, e2, e3, zero, 0.0);
                d.dx += corr.dx;
                d.dy += corr.dy;
                d.ds += corr.ds;
                d.dxs += corr.dxs;
                d.dss += corr.dss;
                d.dtau += corr.dtau;
                d.dkappa += corr.dkappa;
            }
            return d;
        };

        const RealVector ll = jordan_all(lambda, lambda);
        // predictor
        Dir aff = solve_newton(-rp, rd, rg, -ll, -tau * kappa);
        double alpha = std::min(1.0, step_all(aff.dxs, aff.dss, aff.dtau, aff.dkappa));
        const double sigma = std::pow(1.0 - alpha, 3);
        const double eta = 1.0 - sigma;
        // corrector
        RealVector r4 = -ll - jordan_all(aff.dxs, aff.dss) + sigma * mu * e;
        Dir dir = solve_newton(-eta * rp, eta * rd, eta * rg, r4, -tau * kappa - aff.dtau * aff.dkappa + sigma * mu);
        alpha = std::min(1.0, opt.step_fraction * step_all(dir.dxs, dir.dss, dir.dtau, dir.dkappa));
        if (!(alpha > 1e-12) || !dir.dx.allFinite() || !dir.ds.allFinite()) {
            failure = "no progress along the search direction";
            break;
        }

        x += alpha * dir.dx;
        s += alpha * dir.ds;
        y += alpha * dir.dy;
        tau += alpha * dir.dtau;
        kappa += alpha * dir.dkappa;
    }

    if (best.score <= opt.contract_tol) {
        x = best.x;
        y = best.y;
        s = best.s;
        tau = best.tau;
        return finish(SolveStatus::Optimal, "stalled within contract tolerance", tau);
    }
    return finish(SolveStatus::NumericalFailure, failure, tau);
}

/// Human-readable interchange dump for cross-solver debugging. Layout:
///   conic-program 1
///   n <vars> m <rows>
///   cones <count>, then one "<l|q|s> <dim>" line per cone
///   c <n values>
///   b <m values>
///   A <m rows of n values>
/// The layout is informational and may change.
inline void dump_program(const ConicProgram& p, std::ostream& os) {
    os << "conic-program 1\n";
    os << "n " << p.num_variables() << " m " << p.num_constraints() << '\n';
    os << "cones " << p.cones.size() << '\n';
    for (const auto& k : p.cones) {
        const char tag = k.kind == ConeKind::Nonnegative ? 'l' : k.kind == ConeKind::SecondOrder ? 'q' : 's';
        os << tag << ' ' << k.dim << '\n';
    }
    os << std::setprecision(17);
    os << "c";
    for (Eigen::Index i = 0; i < p.c.size(); ++i) os << ' ' << p.c(i);
    os << "\nb";
    for (Eigen::Index i = 0; i < p.b.size(); ++i) os << ' ' << p.b(i);
    os << "\nA\n";
    for (Eigen::Index r = 0; r < p.A.rows(); ++r) {
        for (Eigen::Index col = 0; col < p.A.cols(); ++col) os << (col ? " " : "") << p.A(r, col);
        os << '\n';
    }
}

}  // namespace anonphy::conic
