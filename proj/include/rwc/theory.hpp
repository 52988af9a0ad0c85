#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"
#include "model.hpp"
#include "normal.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "sparse.hpp"
#include "threshold.hpp"

namespace rwc {

inline double rho(double beta) {
    if (!(beta > 0.0 && beta < 1.0)) throw DomainError("rho: beta must lie in (0,1)");
    if (beta <= 0.5) return 0.0;
    if (beta < 0.75) return beta - 0.5;
    const double s = 1.0 - std::sqrt(1.0 - beta);
    return s * s;
}

// (1-theta) rho(beta/(1-theta)) on [(1-theta)/2, 1-theta).
inline double rho_star(double beta, double theta) {
    if (!(theta >= 0.0 && theta < 1.0)) throw DomainError("rho_star: theta must lie in [0,1)");
    const double lo = (1.0 - theta) / 2.0, hi = 1.0 - theta;
    if (!(beta >= lo && beta < hi))
        throw DomainError("rho_star: beta must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + ")");
    return (1.0 - theta) * rho(beta / (1.0 - theta));
}

inline double delta(double beta, double r) {
    if (!(beta > 0.0 && beta < 1.0) || !(r > 0.0 && r < 1.0)) throw DomainError("delta: beta and r must lie in (0,1)");
    if (r <= beta / 3.0) return beta - r;
    if (r < beta) return (beta + r) * (beta + r) / (8.0 * r);
    return beta / 2.0;
}

inline double t_star(double beta, double r, double tau) {
    if (!(beta > 0.0 && beta < 1.0) || !(r > 0.0 && r < 1.0)) throw DomainError("t_star: beta and r must lie in (0,1)");
    if (!(tau > 0.0)) throw DomainError("t_star: tau must be positive");
    return std::min(2.0, (r + beta) / (2.0 * r)) * tau;
}

inline double w0_tilde(double t, double eps, double tau) {
    if (t < 0.0) throw DomainError("w0_tilde: t must be non-negative");
    const double s = eps * psi_bar(t, tau);
    return s / std::sqrt(psi_bar(t) + s);
}

// BT boundary on the paired-block model: rho*_theta(beta) / (1 - h^2).
inline double bt_boundary(double beta, double theta, double h) { return rho_star(beta, theta) / (1.0 - h * h); }

struct ArgmaxResult {
    double t = 0.0;
    double value = 0.0;
    bool multimodal = false;
};

// Grid pre-scan, then golden-section refinement inside the bracket around the
// best grid point. multimodal reports more than one interior grid peak.
inline ArgmaxResult maximize(const std::function<double(double)>& f, double lo, double hi, double tol = 1e-4,
                             std::size_t scan = 256) {
    if (!(hi > lo)) throw DomainError("maximize: empty interval");
    std::vector<double> xs(scan + 1), fs(scan + 1);
    for (std::size_t k = 0; k <= scan; ++k) {
        // Open interval: nudge the endpoints inward.
        double u = (static_cast<double>(k) + (k == 0 ? 1e-6 : 0.0) - (k == scan ? 1e-6 : 0.0)) / static_cast<double>(scan);
        xs[k] = lo + u * (hi - lo);
        fs[k] = f(xs[k]);
    }
    std::size_t best = 0, peaks = 0;
    for (std::size_t k = 0; k <= scan; ++k) {
        if (fs[k] > fs[best]) best = k;
        bool left = k == 0 || fs[k] > fs[k - 1];
        bool right = k == scan || fs[k] >= fs[k + 1];
        if (left && right) ++peaks;
    }
    ArgmaxResult res;
    res.multimodal = peaks > 1;
    double a = xs[best == 0 ? 0 : best - 1], b = xs[best == scan ? scan : best + 1];
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - g * (b - a), d = a + g * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > tol) {
        if (fc >= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    double t = 0.5 * (a + b), ft = f(t);
    if (ft >= fs[best]) {
        res.t = t;
        res.value = ft;
    } else {
        res.t = xs[best];
        res.value = fs[best];
    }
    return res;
}

// Argmax of w0_tilde over (psi_bar^{-1}(1/2), s*).
inline ArgmaxResult ideal_threshold(double eps, double tau, double s_star) {
    return maximize([&](double t) { return w0_tilde(t, eps, tau); }, half_mass_point(), s_star);
}

inline ArgmaxResult ideal_threshold(const RareWeakParams& q) { return ideal_threshold(q.eps, q.tau, q.s_star); }

// ---- separation functionals ----

struct SepInputs {
    double t = 0.0;
    Eigen::VectorXd z_used;
    Eigen::VectorXd mu;
    SparseSymMatrix a_matrix;
    SparseSymMatrix omega_true;
};

struct SepResult {
    double m = 0.0;
    double v = 0.0;
    double sep = 0.0;
    bool empty_selection = false;
};

// M = mu_hat^T A mu, V = mu_hat^T A Omega^{-1} A mu_hat, Sep = 2 M / sqrt(V).
inline SepResult m_v_sep(const SepInputs& in) {
    const Eigen::VectorXd mu_hat = clip_estimate(in.z_used, in.t);
    const Eigen::VectorXd amh = in.a_matrix.multiply(mu_hat);
    SepResult r;
    r.m = amh.dot(in.mu);
    if (amh.isZero(0.0)) {
        r.empty_selection = true;
        return r;
    }
    EnvelopeCholesky chol(in.omega_true);
    r.v = amh.dot(chol.solve(amh));
    r.sep = 2.0 * r.m / std::sqrt(r.v);
    return r;
}

// Population proxies at Omega = I.
inline SepResult sep_identity_closed_form(double t, const RareWeakParams& q) {
    const double pd = static_cast<double>(q.p);
    SepResult r;
    r.m = pd * q.eps * q.tau / std::sqrt(static_cast<double>(q.n)) * (normal_sf(t - q.tau) - normal_sf(t + q.tau));
    r.v = pd * ((1.0 - q.eps) * psi_bar(t) + q.eps * psi_bar(t, q.tau));
    r.sep = r.v > 0.0 ? 2.0 * r.m / std::sqrt(r.v) : 0.0;
    r.empty_selection = r.v <= 0.0;
    return r;
}

struct SepTildeEstimate {
    double m = 0.0, v = 0.0, sep = 0.0;
    double m_se = 0.0, v_se = 0.0, sep_se = 0.0;
    bool degenerate = false;
};

// Monte Carlo m_p = E M_p and v_p = E V_p with A = Omega and z_used = Omega Z.
inline SepTildeEstimate sep_tilde(double t, const RareWeakParams& q, const SparseSymMatrix& omega, std::size_t reps,
                                  Rng& rng, const SignalDistribution& dist, std::size_t threads = 0) {
    if (reps < 1) throw DomainError("sep_tilde: reps must be >= 1");
    const std::uint64_t base = rng.next();
    const EnvelopeCholesky chol(omega);
    std::vector<double> ms(reps), vs(reps);
    parallel_for(
        reps,
        [&](std::size_t k) {
            Rng sub = Rng::stream(base, {k});
            SignalDraw s = sample_mu(q, dist, sub);
            ZVector z = draw_z(s.mu, chol, q.n, sub);
            Eigen::VectorXd mh = clip_estimate(omega.multiply(z.z), t);
            Eigen::VectorXd om = omega.multiply(mh);
            ms[k] = om.dot(s.mu);
            vs[k] = om.dot(mh);
        },
        threads);
    const double rd = static_cast<double>(reps);
    SepTildeEstimate e;
    e.m = pairwise_sum(ms) / rd;
    e.v = pairwise_sum(vs) / rd;
    if (reps > 1) {
        double smm = 0.0, svv = 0.0, smv = 0.0;
        for (std::size_t k = 0; k < reps; ++k) {
            smm += (ms[k] - e.m) * (ms[k] - e.m);
            svv += (vs[k] - e.v) * (vs[k] - e.v);
            smv += (ms[k] - e.m) * (vs[k] - e.v);
        }
        const double cmm = smm / (rd - 1.0) / rd, cvv = svv / (rd - 1.0) / rd, cmv = smv / (rd - 1.0) / rd;
        e.m_se = std::sqrt(cmm);
        e.v_se = std::sqrt(cvv);
        if (e.v > 0.0) {
            const double gm = 2.0 / std::sqrt(e.v), gv = -e.m / std::pow(e.v, 1.5);
            e.sep_se = std::sqrt(std::max(0.0, gm * gm * cmm + gv * gv * cvv + 2.0 * gm * gv * cmv));
        }
    }
    if (e.v <= 0.0) {
        e.degenerate = true;
        return e;
    }
    e.sep = 2.0 * e.m / std::sqrt(e.v);
    return e;
}

// ---- survival functions and the HC functional ----

// Survival function G(t) in one of three representations.
class SurvivalFn {
public:
    // (1 - eps) psi_bar(t) + eps psi_bar_tau(t).
    static SurvivalFn mixture(double eps, double tau) {
        SurvivalFn s;
        s.kind_ = Kind::closed;
        s.eps_ = eps;
        s.tau_ = tau;
        return s;
    }

    // #{j : |x_j| >= t} / p.
    static SurvivalFn empirical(const Eigen::VectorXd& x) {
        SurvivalFn s;
        s.kind_ = Kind::empirical;
        s.values_.resize(static_cast<std::size_t>(x.size()));
        for (Eigen::Index j = 0; j < x.size(); ++j) s.values_[static_cast<std::size_t>(j)] = std::abs(x[j]);
        std::sort(s.values_.begin(), s.values_.end());
        return s;
    }

    // sum_k w_k psi_bar_{m_k}(t); weights should sum to at most 1.
    static SurvivalFn folded_mixture(std::vector<double> means, std::vector<double> weights) {
        SurvivalFn s;
        s.kind_ = Kind::folded;
        s.values_ = std::move(means);
        s.weights_ = std::move(weights);
        return s;
    }

    double operator()(double t) const {
        switch (kind_) {
            case Kind::closed: return (1.0 - eps_) * psi_bar(t) + eps_ * psi_bar(t, tau_);
            case Kind::empirical: {
                auto it = std::lower_bound(values_.begin(), values_.end(), t);
                return static_cast<double>(values_.end() - it) / static_cast<double>(values_.size());
            }
            case Kind::folded: {
                double s = 0.0;
                for (std::size_t k = 0; k < values_.size(); ++k) s += weights_[k] * psi_bar(t, values_[k]);
                return s;
            }
        }
        return 0.0;
    }

private:
    enum class Kind { closed, empirical, folded };
    Kind kind_ = Kind::closed;
    double eps_ = 0.0, tau_ = 0.0;
    std::vector<double> values_, weights_;
};

// sqrt(p) (G - psi_bar) / sqrt(G (1 - G)), with G kept inside [1/p, 1 - 1/p].
inline double hc_functional(double t, const SurvivalFn& g, std::size_t p) {
    const double pd = static_cast<double>(p);
    double gv = std::clamp(g(t), 1.0 / pd, 1.0 - 1.0 / pd);
    return std::sqrt(pd) * (gv - psi_bar(t)) / std::sqrt(gv * (1.0 - gv));
}

// Monte Carlo population survival for general Omega. Conditional on mu,
// Omega Z has coordinates N(m_j, 1) with m_j = sqrt(n) (Omega mu)_j, so the
// probabilities are averaged exactly and only mu is simulated.
class PopulationSurvival {
public:
    PopulationSurvival(const RareWeakParams& q, const SparseSymMatrix& omega, const SignalDistribution& dist,
                       std::size_t reps, Rng& rng, std::size_t threads = 0)
        : p_(q.p), reps_(reps) {
        if (!omega.has_unit_diagonal()) throw UsageError("PopulationSurvival requires a unit-diagonal Omega");
        if (reps < 1) throw DomainError("PopulationSurvival: reps must be >= 1");
        const std::uint64_t base = rng.next();
        std::vector<std::map<double, std::size_t>> all(reps), nbr(reps);
        const double rn = std::sqrt(static_cast<double>(q.n));
        parallel_for(
            reps,
            [&](std::size_t k) {
                Rng sub = Rng::stream(base, {k});
                SignalDraw s = sample_mu(q, dist, sub);
                Eigen::VectorXd m = rn * omega.multiply(s.mu);
                for (std::size_t j = 0; j < q.p; ++j) {
                    double mj = m[static_cast<Eigen::Index>(j)];
                    ++all[k][mj];
                    bool has = false;
                    for (const auto& e : omega.row(j))
                        if (s.mu[static_cast<Eigen::Index>(e.col)] != 0.0) {
                            has = true;
                            break;
                        }
                    if (has) ++nbr[k][mj];
                }
            },
            threads);
        f_bar_ = compress(all);
        g1_ = compress(nbr);
    }

    // Fbar(t) = E (1/p) sum_j P(|Omega Z (j)| >= t).
    double f_bar(double t) const { return f_bar_(t); }
    // g1(t) = (1/p) sum_j P(|Omega Z (j)| >= t, a neighbor of j is a signal).
    double g1(double t) const { return g1_(t); }
    const SurvivalFn& f_bar_fn() const { return f_bar_; }

private:
    SurvivalFn compress(const std::vector<std::map<double, std::size_t>>& parts) const {
        std::map<double, std::size_t> merged;
        for (const auto& m : parts)
            for (const auto& [k, c] : m) merged[k] += c;
        // Continuous signal laws give few repeats; bin means to 1e-4 then.
        if (merged.size() > 20000) {
            std::map<double, std::size_t> binned;
            for (const auto& [k, c] : merged) binned[std::round(k * 1e4) / 1e4] += c;
            merged = std::move(binned);
        }
        std::vector<double> means, weights;
        const double total = static_cast<double>(p_) * static_cast<double>(reps_);
        for (const auto& [k, c] : merged) {
            means.push_back(k);
            weights.push_back(static_cast<double>(c) / total);
        }
        return SurvivalFn::folded_mixture(std::move(means), std::move(weights));
    }

    std::size_t p_, reps_;
    SurvivalFn f_bar_, g1_;
};

struct IdealHct {
    double t = 0.0;
    double value = 0.0;
    bool null_case = false;
    bool multimodal = false;
};

// Argmax of hc_functional(t, Fbar) over (psi_bar^{-1}(1/2), s*). Closed form
// at Omega = I, Monte Carlo otherwise.
inline IdealHct ideal_hct(const RareWeakParams& q, const SparseSymMatrix& omega, std::size_t reps, Rng& rng,
                          const SignalDistribution& dist, std::size_t threads = 0) {
    IdealHct out;
    if (q.eps == 0.0) {
        out.t = q.s_star;
        out.null_case = true;
        return out;
    }
    SurvivalFn g = SurvivalFn::mixture(q.eps, q.tau);
    const bool identity = omega.is_diagonal() && omega.has_unit_diagonal() &&
                          dist.kind == SignalDistribution::Kind::point_mass && !dist.symmetric_sign &&
                          dist.lo == q.tau;
    if (!identity) g = PopulationSurvival(q, omega, dist, reps, rng, threads).f_bar_fn();
    ArgmaxResult a = maximize([&](double t) { return hc_functional(t, g, q.p); }, half_mass_point(), q.s_star);
    out.t = a.t;
    out.value = a.value;
    out.multimodal = a.multimodal;
    return out;
}

// W0(t) = (eps psi_tau + g1) / sqrt(psi + eps psi_tau + g1).
inline double w0_full(double t, const RareWeakParams& q, const PopulationSurvival& pop) {
    const double s = q.eps * psi_bar(t, q.tau) + pop.g1(t);
    const double den = psi_bar(t) + s;
    return den > 0.0 ? s / std::sqrt(den) : 0.0;
}

inline double w0_full(double t, const RareWeakParams& q, const SparseSymMatrix& omega, std::size_t reps, Rng& rng,
                      const SignalDistribution& dist) {
    return w0_full(t, q, PopulationSurvival(q, omega, dist, reps, rng));
}

enum class Regime { relatively_dense, rare_strong, possible, impossible, boundary };

inline std::string to_string(Regime r) {
    switch (r) {
        case Regime::relatively_dense: return "RD";
        case Regime::rare_strong: return "RS";
        case Regime::possible: return "possible";
        case Regime::impossible: return "impossible";
        case Regime::boundary: return "boundary";
    }
    return "?";
}

inline Regime regime_classify(double beta, double r, double theta, double boundary_tol = 1e-9) {
    for (double v : {beta, r, theta})
        if (!(v > 0.0 && v < 1.0)) throw DomainError("regime_classify: parameters must lie in (0,1)");
    if (beta < (1.0 - theta) / 2.0) return Regime::relatively_dense;
    if (beta > 1.0 - theta) return Regime::rare_strong;
    if (beta == 1.0 - theta) return Regime::boundary;
    const double rs = rho_star(beta, theta);
    if (std::abs(r - rs) <= boundary_tol) return Regime::boundary;
    return r > rs ? Regime::possible : Regime::impossible;
}

// Point mass at +tau overloads.
inline SepTildeEstimate sep_tilde(double t, const RareWeakParams& q, const SparseSymMatrix& omega, std::size_t reps,
                                  Rng& rng) {
    return sep_tilde(t, q, omega, reps, rng, SignalDistribution::point_mass(q.tau));
}

inline IdealHct ideal_hct(const RareWeakParams& q, const SparseSymMatrix& omega, std::size_t reps, Rng& rng) {
    return ideal_hct(q, omega, reps, rng, SignalDistribution::point_mass(q.tau));
}

inline double w0_full(double t, const RareWeakParams& q, const SparseSymMatrix& omega, std::size_t reps, Rng& rng) {
    return w0_full(t, q, omega, reps, rng, SignalDistribution::point_mass(q.tau));
}

}  // namespace rwc
