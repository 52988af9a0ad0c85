#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"
#include "model.hpp"
#include "parallel.hpp"
#include "sparse.hpp"

namespace rwc {

// Sigma_hat = (1/n) sum (Y_i X_i - Xbar)(Y_i X_i - Xbar)^T with Xbar = (1/n) sum Y_i X_i.
inline Eigen::MatrixXd empirical_covariance(const Dataset& d) {
    if (!d.labeled()) throw UsageError("empirical_covariance requires a labeled dataset");
    if (d.n() < 2) throw DomainError("empirical_covariance requires n >= 2");
    Eigen::MatrixXd c = d.x;
    for (std::size_t i = 0; i < d.n(); ++i)
        if (d.labels[i] < 0) c.col(static_cast<Eigen::Index>(i)) *= -1.0;
    Eigen::VectorXd mean = c.rowwise().mean();
    c.colwise() -= mean;
    const auto p = c.rows();
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(p, p);
    s.selfadjointView<Eigen::Lower>().rankUpdate(c, 1.0 / static_cast<double>(d.n()));
    s.triangularView<Eigen::StrictlyUpper>() = s.transpose();
    return s;
}

// Keeps off-diagonal entries with |s_ij| >= eta; the diagonal is always kept.
inline SparseSymMatrix blt_threshold(const Eigen::MatrixXd& sigma_hat, double eta) {
    if (eta < 0.0) throw DomainError("eta must be non-negative");
    const auto p = static_cast<std::size_t>(sigma_hat.rows());
    SparseSymMatrix m(p);
    for (std::size_t i = 0; i < p; ++i) {
        m.set_diag(i, sigma_hat(i, i));
        for (std::size_t j = i + 1; j < p; ++j) {
            double v = sigma_hat(j, i);
            if (std::abs(v) >= eta) m.set(i, j, v);
        }
    }
    return m;
}

namespace detail {

inline std::size_t envelope_estimate(const SparseSymMatrix& a) {
    std::size_t total = 0;
    for (std::size_t i = 0; i < a.dim(); ++i) {
        std::size_t f = i;
        for (const auto& e : a.row(i)) f = std::min(f, e.col);
        total += i - f + 1;
    }
    return total;
}

}  // namespace detail

// Dense inverse of a symmetric positive-definite matrix. Narrow envelopes use
// the envelope factor column by column; wide ones go through dense LLT. On
// failure the smallest LDL^T pivot is reported when want_pivot is set.
inline Eigen::MatrixXd invert_spd(const SparseSymMatrix& a, bool want_pivot = true, std::size_t threads = 1) {
    const std::size_t p = a.dim();
    const auto pi = static_cast<Eigen::Index>(p);
    if (detail::envelope_estimate(a) * 8 <= p * p || p <= 64) {
        std::optional<EnvelopeCholesky> chol;
        try {
            chol.emplace(a);
        } catch (const NotPositiveDefinite& e) {
            throw NotPositiveDefinite(std::string("invert_spd: matrix is not positive definite; ") + e.what(), e.index(),
                                      e.pivot());
        }
        Eigen::MatrixXd inv(pi, pi);
        parallel_for(
            p,
            [&](std::size_t k) {
                Eigen::VectorXd col = Eigen::VectorXd::Zero(pi);
                col[static_cast<Eigen::Index>(k)] = 1.0;
                chol->solve_lower_inplace(col);
                chol->solve_upper_inplace(col);
                inv.col(static_cast<Eigen::Index>(k)) = col;
            },
            threads);
        // Symmetric by construction up to rounding; make it exact.
        inv = (0.5 * (inv + inv.transpose())).eval();
        return inv;
    }
    Eigen::MatrixXd dense = a.to_dense();
    Eigen::LLT<Eigen::MatrixXd> llt(dense);
    if (llt.info() != Eigen::Success) {
        double pivot = std::numeric_limits<double>::quiet_NaN();
        std::size_t where = 0;
        if (want_pivot) {
            Eigen::LDLT<Eigen::MatrixXd> ldlt(dense);
            Eigen::VectorXd d = ldlt.vectorD();
            Eigen::Index k;
            pivot = d.minCoeff(&k);
            where = static_cast<std::size_t>(k);
        }
        throw NotPositiveDefinite("invert_spd: matrix is not positive definite (smallest pivot " +
                                      std::to_string(pivot) + ")",
                                  where, pivot);
    }
    Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(pi, pi));
    inv = (0.5 * (inv + inv.transpose())).eval();
    return inv;
}

inline Eigen::MatrixXd invert_spd(const Eigen::MatrixXd& a, bool want_pivot = true) {
    return invert_spd(SparseSymMatrix::from_dense(a), want_pivot);
}

struct ZetaFixed {
    double zeta;
};
// Per-row threshold at the k-th largest |Omega**(i,.)|.
struct ZetaTargetRow {
    std::size_t k;
};
using ZetaRule = std::variant<ZetaFixed, ZetaTargetRow>;

struct RefitResult {
    SparseSymMatrix omega_hat;
    double asymmetry = 0.0;  // max |raw(i,j) - raw(j,i)| before symmetrization
    std::vector<std::size_t> support_sizes;
};

// Row-wise refit: on S_i the column is A_i^{-1} e_i with A_i = Sigma_hat[S_i,S_i],
// zero elsewhere; the result is symmetrized as (W + W^T)/2.
inline RefitResult refit(const Eigen::MatrixXd& omega_ss, const Eigen::MatrixXd& sigma_hat, const ZetaRule& rule,
                         std::size_t threads = 1) {
    const auto p = static_cast<std::size_t>(omega_ss.rows());
    if (omega_ss.cols() != omega_ss.rows() || sigma_hat.rows() != omega_ss.rows() ||
        sigma_hat.cols() != omega_ss.cols())
        throw UsageError("refit: dimension mismatch");
    if (auto* z = std::get_if<ZetaFixed>(&rule); z && z->zeta < 0.0) throw DomainError("zeta must be non-negative");
    if (auto* k = std::get_if<ZetaTargetRow>(&rule); k && k->k < 1) throw DomainError("target row count must be >= 1");

    std::vector<std::vector<Entry>> cols(p);
    parallel_for(
        p,
        [&](std::size_t i) {
            const auto ii = static_cast<Eigen::Index>(i);
            // A row target keeps the diagonal plus the k-1 largest off-diagonal entries.
            double zeta;
            bool keep_diag = false;
            if (auto* z = std::get_if<ZetaFixed>(&rule)) {
                zeta = z->zeta;
            } else {
                keep_diag = true;
                std::size_t off = std::min(std::get<ZetaTargetRow>(rule).k, p) - 1;
                zeta = INFINITY;
                if (off > 0) {
                    std::vector<double> mags;
                    mags.reserve(p - 1);
                    for (std::size_t j = 0; j < p; ++j)
                        if (j != i) mags.push_back(std::abs(omega_ss(ii, static_cast<Eigen::Index>(j))));
                    std::nth_element(mags.begin(), mags.begin() + static_cast<std::ptrdiff_t>(off - 1), mags.end(),
                                     std::greater<>());
                    zeta = mags[off - 1];
                }
            }
            std::vector<std::size_t> s;
            std::size_t pos = p;
            for (std::size_t j = 0; j < p; ++j) {
                const double v = std::abs(omega_ss(ii, static_cast<Eigen::Index>(j)));
                if ((keep_diag && j == i) || (v != 0.0 && v >= zeta)) {
                    if (j == i) pos = s.size();
                    s.push_back(j);
                }
            }
            if (pos == p)
                throw ConfigError("refit: zeta=" + std::to_string(zeta) + " drops the diagonal of row " +
                                  std::to_string(i));
            const auto m = static_cast<Eigen::Index>(s.size());
            Eigen::MatrixXd a(m, m);
            for (Eigen::Index u = 0; u < m; ++u)
                for (Eigen::Index v = 0; v < m; ++v)
                    a(u, v) = sigma_hat(static_cast<Eigen::Index>(s[u]), static_cast<Eigen::Index>(s[v]));
            Eigen::VectorXd e = Eigen::VectorXd::Zero(m);
            e[static_cast<Eigen::Index>(pos)] = 1.0;
            Eigen::VectorXd eta;
            Eigen::LLT<Eigen::MatrixXd> llt(a);
            if (llt.info() == Eigen::Success) {
                eta = llt.solve(e);
            } else {
                Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
                if (!lu.isInvertible())
                    throw SingularSystem("refit: restricted covariance of row " + std::to_string(i) + " is singular",
                                         i);
                eta = lu.solve(e);
            }
            for (Eigen::Index u = 0; u < m; ++u) cols[i].push_back({s[u], eta[u]});
        },
        threads);

    // raw(j,i) = value in cols[i] at row j.
    auto raw = [&](std::size_t j, std::size_t i) {
        const auto& c = cols[i];
        auto it = std::lower_bound(c.begin(), c.end(), j, [](const Entry& e, std::size_t x) { return e.col < x; });
        return (it != c.end() && it->col == j) ? it->value : 0.0;
    };
    RefitResult out{SparseSymMatrix(p), 0.0, std::vector<std::size_t>(p)};
    for (std::size_t i = 0; i < p; ++i) {
        out.support_sizes[i] = cols[i].size();
        for (const auto& e : cols[i]) {
            const std::size_t j = e.col;
            if (j == i) {
                out.omega_hat.set_diag(i, e.value);
                continue;
            }
            double other = raw(i, j);
            out.asymmetry = std::max(out.asymmetry, std::abs(e.value - other));
            if (j > i || other == 0.0) out.omega_hat.set(i, j, 0.5 * (e.value + other));
        }
    }
    return out;
}

struct AcceptabilityReport {
    double max_abs_error = 0.0;
    std::size_t row_sparsity = 0;
    bool symmetric = true;
    double bound_rhs = 0.0;          // C K^2 sqrt(ln p) / sqrt(n)
    double observed_constant = 0.0;  // max_abs_error / (K^2 sqrt(ln p) / sqrt(n))
};

inline AcceptabilityReport acceptability_report(const SparseSymMatrix& omega_hat, const SparseSymMatrix& omega_true,
                                                std::size_t n, std::size_t k, double c = 1.0,
                                                double asymmetry = 0.0) {
    if (omega_hat.dim() != omega_true.dim()) throw UsageError("acceptability_report: dimension mismatch");
    AcceptabilityReport r;
    const std::size_t p = omega_hat.dim();
    for (std::size_t i = 0; i < p; ++i) {
        r.max_abs_error = std::max(r.max_abs_error, std::abs(omega_hat.diag(i) - omega_true.diag(i)));
        for (const auto& e : omega_hat.row(i))
            r.max_abs_error = std::max(r.max_abs_error, std::abs(e.value - omega_true(i, e.col)));
        for (const auto& e : omega_true.row(i))
            if (omega_hat(i, e.col) == 0.0) r.max_abs_error = std::max(r.max_abs_error, std::abs(e.value));
    }
    r.row_sparsity = omega_hat.sparsity_degree();
    r.symmetric = asymmetry == 0.0;
    const double scale = static_cast<double>(k * k) * std::sqrt(std::log(static_cast<double>(p))) /
                         std::sqrt(static_cast<double>(n));
    r.bound_rhs = c * scale;
    r.observed_constant = r.max_abs_error / scale;
    return r;
}

struct EtaFixed {
    double eta;
};
// Picks the grid value whose (Sigma*)^{-1} is closest to the true Omega in max norm.
struct EtaOracle {
    std::vector<double> grid;
};
// Picks the grid value minimizing max|Sigma_b Omega**_a - I| across two halves.
struct EtaHeldOut {
    std::vector<double> grid;
};
using EtaMode = std::variant<EtaFixed, EtaOracle, EtaHeldOut>;

struct EstimationConfig {
    EtaMode eta = EtaFixed{0.1};
    ZetaRule zeta = ZetaFixed{0.1};
    std::vector<double> escalation_grid{0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.5, 0.6, 0.8, 1.0};
    double ridge_start = 1e-6;
    int max_ridge_doublings = 64;
    std::size_t threads = 1;
};

struct EtaTrial {
    double eta;
    double score;  // NaN when Sigma* was not positive definite
};

struct PrecisionEstimate {
    SparseSymMatrix omega_hat;
    double eta = 0.0;
    double ridge = 0.0;
    double asymmetry = 0.0;
    std::vector<EtaTrial> trials;
};

namespace detail {

inline double max_abs_diff(const Eigen::MatrixXd& a, const SparseSymMatrix& b) {
    const auto p = a.rows();
    double m = 0.0;
    for (Eigen::Index j = 0; j < p; ++j)
        for (Eigen::Index i = 0; i < p; ++i)
            m = std::max(m, std::abs(a(i, j) - b(static_cast<std::size_t>(i), static_cast<std::size_t>(j))));
    return m;
}

inline std::optional<Eigen::MatrixXd> try_invert(const SparseSymMatrix& s, std::size_t threads) {
    try {
        return invert_spd(s, false, threads);
    } catch (const NotPositiveDefinite&) {
        return std::nullopt;
    }
}

inline std::vector<double> sorted_grid(std::vector<double> g) {
    if (g.empty()) throw ConfigError("eta grid is empty");
    std::sort(g.begin(), g.end());
    return g;
}

}  // namespace detail

inline double precision_memory_bytes(std::size_t p) { return 4.0 * 8.0 * static_cast<double>(p) * static_cast<double>(p); }

// Covariance, thresholding, inversion and refit. omega_true is needed only
// for oracle tuning.
inline PrecisionEstimate estimate_precision(const Dataset& d, const EstimationConfig& cfg,
                                            const SparseSymMatrix* omega_true = nullptr) {
    PrecisionEstimate out;
    const Eigen::MatrixXd sigma_hat = empirical_covariance(d);
    const auto p = static_cast<Eigen::Index>(d.p());

    double chosen;
    if (auto* f = std::get_if<EtaFixed>(&cfg.eta)) {
        chosen = f->eta;
    } else if (auto* o = std::get_if<EtaOracle>(&cfg.eta)) {
        if (!omega_true) throw UsageError("oracle eta tuning needs the true Omega");
        chosen = std::numeric_limits<double>::quiet_NaN();
        double best = INFINITY;
        for (double eta : detail::sorted_grid(o->grid)) {
            auto inv = detail::try_invert(blt_threshold(sigma_hat, eta), cfg.threads);
            double score = inv ? detail::max_abs_diff(*inv, *omega_true) : std::numeric_limits<double>::quiet_NaN();
            out.trials.push_back({eta, score});
            if (inv && score < best) {
                best = score;
                chosen = eta;
            }
        }
        if (std::isnan(chosen)) chosen = detail::sorted_grid(o->grid).back();
    } else {
        const auto& grid = detail::sorted_grid(std::get<EtaHeldOut>(cfg.eta).grid);
        std::vector<std::size_t> a, b;
        std::size_t seen_pos = 0, seen_neg = 0;
        for (std::size_t i = 0; i < d.n(); ++i) {
            std::size_t& c = d.labels[i] > 0 ? seen_pos : seen_neg;
            (c++ % 2 == 0 ? a : b).push_back(i);
        }
        const Eigen::MatrixXd sa = empirical_covariance(d.subset(a));
        const Eigen::MatrixXd sb = empirical_covariance(d.subset(b));
        const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(p, p);
        chosen = grid.back();
        double best = INFINITY;
        for (double eta : grid) {
            auto inv = detail::try_invert(blt_threshold(sa, eta), cfg.threads);
            double score =
                inv ? (sb * *inv - eye).cwiseAbs().maxCoeff() : std::numeric_limits<double>::quiet_NaN();
            out.trials.push_back({eta, score});
            if (inv && score < best) {
                best = score;
                chosen = eta;
            }
        }
    }

    // Escalate eta along the grid, then add a doubling ridge.
    std::optional<Eigen::MatrixXd> omega_ss;
    double eta = chosen;
    omega_ss = detail::try_invert(blt_threshold(sigma_hat, eta), cfg.threads);
    for (double g : detail::sorted_grid(cfg.escalation_grid)) {
        if (omega_ss) break;
        if (g <= eta) continue;
        eta = g;
        omega_ss = detail::try_invert(blt_threshold(sigma_hat, eta), cfg.threads);
    }
    double ridge = 0.0;
    if (!omega_ss) {
        SparseSymMatrix s = blt_threshold(sigma_hat, eta);
        ridge = cfg.ridge_start;
        for (int k = 0; k < cfg.max_ridge_doublings && !omega_ss; ++k, ridge *= 2.0) {
            SparseSymMatrix sr = s;
            for (std::size_t i = 0; i < sr.dim(); ++i) sr.set_diag(i, s.diag(i) + ridge);
            omega_ss = detail::try_invert(sr, cfg.threads);
            if (omega_ss) break;
        }
        if (!omega_ss) throw NotPositiveDefinite("estimate_precision: ridge escalation exhausted", 0, 0.0);
    }
    out.eta = eta;
    out.ridge = ridge;
    RefitResult rf = refit(*omega_ss, sigma_hat, cfg.zeta, cfg.threads);
    out.omega_hat = std::move(rf.omega_hat);
    out.asymmetry = rf.asymmetry;
    return out;
}

}  // namespace rwc
