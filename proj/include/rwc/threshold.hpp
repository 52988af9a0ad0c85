#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"
#include "graph.hpp"
#include "model.hpp"
#include "normal.hpp"
#include "sparse.hpp"

namespace rwc {

enum class TransformMode { innovated, brute_force, whitened };

inline std::string to_string(TransformMode m) {
    switch (m) {
        case TransformMode::innovated: return "IT";
        case TransformMode::brute_force: return "BT";
        case TransformMode::whitened: return "WT";
    }
    return "?";
}

inline TransformMode parse_transform_mode(const std::string& s) {
    if (s == "IT") return TransformMode::innovated;
    if (s == "BT") return TransformMode::brute_force;
    if (s == "WT") return TransformMode::whitened;
    throw ConfigError("unknown transform mode '" + s + "'");
}

inline constexpr std::size_t kMaxDenseComponent = 6000;

// Symmetric square root applied blockwise over connected components, so
// block-diagonal matrices never need a full p x p eigendecomposition.
inline Eigen::VectorXd apply_sqrt(const SparseSymMatrix& a, const Eigen::VectorXd& z) {
    Eigen::VectorXd out(z.size());
    for (const auto& comp : induced_graph(a).components()) {
        const auto m = static_cast<Eigen::Index>(comp.size());
        if (comp.size() == 1) {
            double d = a.diag(comp[0]);
            if (!(d > 0.0)) throw DomainError("whitening requires a positive-definite matrix");
            out[static_cast<Eigen::Index>(comp[0])] = std::sqrt(d) * z[static_cast<Eigen::Index>(comp[0])];
            continue;
        }
        if (comp.size() > kMaxDenseComponent)
            throw ResourceError("whitening: connected component of size " + std::to_string(comp.size()) +
                                " exceeds the dense limit " + std::to_string(kMaxDenseComponent));
        Eigen::MatrixXd block(m, m);
        Eigen::VectorXd zc(m);
        for (Eigen::Index u = 0; u < m; ++u) {
            zc[u] = z[static_cast<Eigen::Index>(comp[u])];
            for (Eigen::Index v = 0; v < m; ++v) block(u, v) = a(comp[u], comp[v]);
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(block);
        if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() <= 0.0)
            throw DomainError("whitening requires a positive-definite matrix");
        Eigen::VectorXd r = es.eigenvectors() *
                            (es.eigenvalues().cwiseSqrt().asDiagonal() * (es.eigenvectors().transpose() * zc));
        for (Eigen::Index u = 0; u < m; ++u) out[static_cast<Eigen::Index>(comp[u])] = r[u];
    }
    return out;
}

inline Eigen::VectorXd transform(const Eigen::VectorXd& z, const SparseSymMatrix& omega_hat, TransformMode mode) {
    if (static_cast<std::size_t>(z.size()) != omega_hat.dim()) throw UsageError("transform: dimension mismatch");
    switch (mode) {
        case TransformMode::innovated: return omega_hat.multiply(z);
        case TransformMode::brute_force: return z;
        case TransformMode::whitened: return apply_sqrt(omega_hat, z);
    }
    return z;
}

// Linear map M with z_hat = M z, for SNR bookkeeping on small problems.
inline Eigen::MatrixXd transform_matrix(const SparseSymMatrix& omega_hat, TransformMode mode) {
    const auto p = static_cast<Eigen::Index>(omega_hat.dim());
    Eigen::MatrixXd m(p, p);
    for (Eigen::Index k = 0; k < p; ++k) m.col(k) = transform(Eigen::VectorXd::Unit(p, k), omega_hat, mode);
    return m;
}

// Per-coordinate |E z_hat(j)| / sd(z_hat(j)) for z ~ N(mean_z, Omega^{-1}).
inline Eigen::VectorXd coordinate_snr(const SparseSymMatrix& omega, const SparseSymMatrix& omega_hat,
                                      TransformMode mode, const Eigen::VectorXd& mean_z) {
    Eigen::MatrixXd m = transform_matrix(omega_hat, mode);
    EnvelopeCholesky chol(omega);
    Eigen::VectorXd mean = m * mean_z;
    Eigen::VectorXd snr(mean.size());
    for (Eigen::Index j = 0; j < mean.size(); ++j) {
        Eigen::VectorXd row = m.row(j).transpose();
        double var = row.dot(chol.solve(row));
        snr[j] = std::abs(mean[j]) / std::sqrt(var);
    }
    return snr;
}

inline Eigen::VectorXd pvalues(const Eigen::VectorXd& z_hat) {
    Eigen::VectorXd pi(z_hat.size());
    for (Eigen::Index j = 0; j < z_hat.size(); ++j) pi[j] = two_sided_pvalue(z_hat[j]);
    return pi;
}

// HC_{p,j} for j = 1..p-1 over the ascending sort of pi; entry j-1 holds HC_{p,j}.
inline std::vector<double> hc_curve(const Eigen::VectorXd& pi) {
    const auto p = static_cast<std::size_t>(pi.size());
    if (p < 2) throw UsageError("hc_curve needs p >= 2");
    std::vector<double> s(pi.data(), pi.data() + p);
    std::sort(s.begin(), s.end());
    std::vector<double> hc(p - 1);
    const double pd = static_cast<double>(p), rp = std::sqrt(pd);
    for (std::size_t j = 1; j < p; ++j) {
        const double f = static_cast<double>(j) / pd;
        hc[j - 1] = rp * (f - s[j - 1]) / std::sqrt((1.0 - f) * f);
    }
    return hc;
}

enum class Clamp { none, lower, upper };

inline std::string to_string(Clamp c) {
    switch (c) {
        case Clamp::none: return "none";
        case Clamp::lower: return "lower";
        case Clamp::upper: return "upper";
    }
    return "?";
}

struct ThresholdReport {
    std::vector<double> sorted_abs;  // |z_hat| descending
    std::vector<double> sorted_pi;   // matching p-values, ascending
    std::vector<double> hc_values;   // HC_{p,j}, j = 1..p-1
    std::size_t first_admissible = 0;  // 1-based j range searched, empty when first > last
    std::size_t last_admissible = 0;
    std::size_t jhat = 0;  // 0 when nothing was admissible
    double raw_threshold = 0.0;
    double clamped_threshold = 0.0;
    Clamp clamp_applied = Clamp::none;
    std::vector<std::size_t> selected;
};

// Empirical HC threshold: maximize HC_{p,j} over j whose |z_hat|_(j) lies in
// (psi_bar^{-1}(1/2), s*), then clamp into [s_tilde, s*].
inline ThresholdReport hc_threshold(const Eigen::VectorXd& z_hat, double s_tilde, double s_star) {
    const auto p = static_cast<std::size_t>(z_hat.size());
    if (p == 0) throw UsageError("hc_threshold: empty input");
    if (!(s_tilde <= s_star)) throw DomainError("hc_threshold: s_tilde exceeds s_star");
    ThresholdReport rep;
    rep.sorted_abs.resize(p);
    for (std::size_t j = 0; j < p; ++j) rep.sorted_abs[j] = std::abs(z_hat[static_cast<Eigen::Index>(j)]);
    std::sort(rep.sorted_abs.begin(), rep.sorted_abs.end(), std::greater<>());
    rep.sorted_pi.resize(p);
    for (std::size_t j = 0; j < p; ++j) rep.sorted_pi[j] = two_sided_pvalue(rep.sorted_abs[j]);
    if (p >= 2) {
        rep.hc_values.resize(p - 1);
        const double pd = static_cast<double>(p), rp = std::sqrt(pd);
        for (std::size_t j = 1; j < p; ++j) {
            const double f = static_cast<double>(j) / pd;
            rep.hc_values[j - 1] = rp * (f - rep.sorted_pi[j - 1]) / std::sqrt((1.0 - f) * f);
        }
    }
    const double lo = half_mass_point();
    // Admissible j form a contiguous range because sorted_abs is monotone.
    std::size_t first = 1;
    while (first < p && !(rep.sorted_abs[first - 1] < s_star)) ++first;
    std::size_t last = first;
    while (last < p && rep.sorted_abs[last - 1] > lo) ++last;
    --last;  // last admissible j (<= p-1)
    if (first < p && last >= first && rep.sorted_abs[first - 1] < s_star && rep.sorted_abs[first - 1] > lo) {
        rep.first_admissible = first;
        rep.last_admissible = last;
        std::size_t best = first;
        for (std::size_t j = first + 1; j <= last; ++j)
            if (rep.hc_values[j - 1] > rep.hc_values[best - 1]) best = j;
        rep.jhat = best;
        rep.raw_threshold = rep.sorted_abs[best - 1];
        if (rep.raw_threshold < s_tilde) {
            rep.clamped_threshold = s_tilde;
            rep.clamp_applied = Clamp::lower;
        } else {
            rep.clamped_threshold = rep.raw_threshold;
        }
    } else {
        rep.first_admissible = 1;
        rep.last_admissible = 0;
        rep.raw_threshold = s_star;
        rep.clamped_threshold = s_star;
        rep.clamp_applied = Clamp::upper;
    }
    for (std::size_t j = 0; j < p; ++j)
        if (std::abs(z_hat[static_cast<Eigen::Index>(j)]) >= rep.clamped_threshold) rep.selected.push_back(j);
    return rep;
}

inline ThresholdReport hc_threshold(const Eigen::VectorXd& z_hat, const RareWeakParams& params) {
    if (static_cast<std::size_t>(z_hat.size()) != params.p) throw UsageError("hc_threshold: length differs from p");
    return hc_threshold(z_hat, params.s_tilde, params.s_star);
}

inline Eigen::VectorXd clip_estimate(const Eigen::VectorXd& z_hat, double t) {
    if (t < 0.0) throw DomainError("clip_estimate: threshold must be non-negative");
    Eigen::VectorXd m(z_hat.size());
    for (Eigen::Index j = 0; j < z_hat.size(); ++j) {
        double v = z_hat[j];
        m[j] = std::abs(v) >= t ? (v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0)) : 0.0;
    }
    return m;
}

inline void write_threshold_csv(std::ostream& os, const ThresholdReport& r) {
    os << "j,abs_z,pvalue,hc,admissible\n";
    char buf[128];
    for (std::size_t j = 1; j <= r.hc_values.size(); ++j) {
        bool adm = j >= r.first_admissible && j <= r.last_admissible;
        std::snprintf(buf, sizeof buf, "%zu,%.10g,%.10g,%.10g,%d\n", j, r.sorted_abs[j - 1], r.sorted_pi[j - 1],
                      r.hc_values[j - 1], adm ? 1 : 0);
        os << buf;
    }
}

}  // namespace rwc
