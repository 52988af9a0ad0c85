#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"
#include "model.hpp"
#include "normal.hpp"
#include "rng.hpp"
#include "sparse.hpp"
#include "threshold.hpp"

namespace rwc {

enum class OmegaSource { true_matrix, estimated, identity };

inline std::string to_string(OmegaSource s) {
    switch (s) {
        case OmegaSource::true_matrix: return "true";
        case OmegaSource::estimated: return "estimated";
        case OmegaSource::identity: return "identity";
    }
    return "?";
}

inline OmegaSource parse_omega_source(const std::string& s) {
    if (s == "true") return OmegaSource::true_matrix;
    if (s == "estimated") return OmegaSource::estimated;
    if (s == "identity") return OmegaSource::identity;
    throw ConfigError("unknown omega source '" + s + "'");
}

struct CvConfig {
    std::size_t folds = 5;
    std::vector<double> grid;  // empty: quantiles of |z_hat|
    std::size_t max_grid = 200;
};

struct CvTrace {
    std::vector<double> grid;  // descending
    std::vector<double> mean_error;
    std::size_t chosen = 0;
};

struct ClassifierModel {
    Eigen::VectorXd w;
    Eigen::VectorXd mu_hat;
    double threshold = 0.0;
    TransformMode mode = TransformMode::innovated;
    OmegaSource source = OmegaSource::estimated;
    std::optional<ThresholdReport> report;
    std::optional<CvTrace> cv;

    bool degenerate() const { return w.size() == 0 || w.isZero(0.0); }
    std::size_t selected_count() const { return static_cast<std::size_t>((mu_hat.array() != 0.0).count()); }
};

// w = Omega_hat mu_hat with mu_hat clipped from z_hat at t.
inline ClassifierModel fit_at_threshold(const Eigen::VectorXd& z_hat, const SparseSymMatrix& omega_used, double t,
                                        TransformMode mode, OmegaSource source) {
    ClassifierModel m;
    m.mu_hat = clip_estimate(z_hat, t);
    m.w = omega_used.multiply(m.mu_hat);
    m.threshold = t;
    m.mode = mode;
    m.source = source;
    return m;
}

inline ClassifierModel fit_from_z(const ZVector& z, const SparseSymMatrix& omega_used, const RareWeakParams& params,
                                  TransformMode mode, OmegaSource source) {
    Eigen::VectorXd z_hat = transform(z.z, omega_used, mode);
    ThresholdReport rep = hc_threshold(z_hat, params);
    ClassifierModel m = fit_at_threshold(z_hat, omega_used, rep.clamped_threshold, mode, source);
    m.report = std::move(rep);
    return m;
}

inline ClassifierModel fit_hct(const Dataset& d, const SparseSymMatrix& omega_used, const RareWeakParams& params,
                               TransformMode mode = TransformMode::innovated,
                               OmegaSource source = OmegaSource::estimated) {
    return fit_from_z(z_vector(d), omega_used, params, mode, source);
}

inline ClassifierModel fit_phct(const Dataset& d, const SparseSymMatrix& omega_true, const RareWeakParams& params,
                                TransformMode mode = TransformMode::innovated) {
    return fit_hct(d, omega_true, params, mode, OmegaSource::true_matrix);
}

// Pretends the covariance is the identity.
inline ClassifierModel fit_ohct(const Dataset& d, const RareWeakParams& params) {
    return fit_hct(d, SparseSymMatrix::identity(d.p()), params, TransformMode::innovated, OmegaSource::identity);
}

inline std::vector<double> default_cv_grid(const Eigen::VectorXd& z_hat, double s_star, std::size_t max_grid) {
    const double lo = half_mass_point();
    std::vector<double> v;
    for (Eigen::Index j = 0; j < z_hat.size(); ++j) {
        double a = std::abs(z_hat[j]);
        if (a > lo && a < s_star) v.push_back(a);
    }
    if (v.empty()) return {s_star};
    std::sort(v.begin(), v.end(), std::greater<>());
    if (v.size() <= max_grid || max_grid < 2) return v;
    std::vector<double> g(max_grid);
    const double step = static_cast<double>(v.size() - 1) / static_cast<double>(max_grid - 1);
    for (std::size_t k = 0; k < max_grid; ++k)
        g[k] = v[static_cast<std::size_t>(std::llround(static_cast<double>(k) * step))];
    return g;
}

namespace detail {

// Stratified fold index per sample.
inline std::vector<std::size_t> assign_folds(const std::vector<int>& labels, std::size_t folds, Rng& rng) {
    std::vector<std::size_t> pos, neg, fold(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] > 0 ? pos : neg).push_back(i);
    auto shuffle = [&](std::vector<std::size_t>& v) {
        for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.next() % i]);
    };
    shuffle(pos);
    shuffle(neg);
    std::size_t k = 0;
    for (auto i : pos) fold[i] = k++ % folds;
    for (auto i : neg) fold[i] = k++ % folds;
    return fold;
}

}  // namespace detail

// K-fold cross-validated threshold; ties go to the larger threshold. The
// chosen threshold is refit on all data.
inline ClassifierModel fit_cvt(const Dataset& d, const SparseSymMatrix& omega_used, const RareWeakParams& params,
                               const CvConfig& cfg, Rng& rng, TransformMode mode = TransformMode::innovated,
                               OmegaSource source = OmegaSource::true_matrix) {
    if (!d.labeled()) throw UsageError("fit_cvt requires a labeled dataset");
    if (cfg.folds < 2) throw ConfigError("cross validation needs at least 2 folds");
    if (d.n() < cfg.folds) throw UsageError("fit_cvt: fewer samples than folds");
    const Eigen::VectorXd z_full = transform(z_vector(d).z, omega_used, mode);
    std::vector<double> grid = cfg.grid.empty() ? default_cv_grid(z_full, params.s_star, cfg.max_grid) : cfg.grid;
    std::sort(grid.begin(), grid.end(), std::greater<>());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

    const auto fold = detail::assign_folds(d.labels, cfg.folds, rng);
    std::vector<double> err_sum(grid.size(), 0.0);
    const auto p = static_cast<Eigen::Index>(d.p());
    std::size_t used_folds = 0;
    for (std::size_t f = 0; f < cfg.folds; ++f) {
        std::vector<std::size_t> train, test;
        for (std::size_t i = 0; i < d.n(); ++i) (fold[i] == f ? test : train).push_back(i);
        if (test.empty()) continue;
        ++used_folds;
        Dataset tr = d.subset(train);
        Eigen::VectorXd zh = transform(z_vector(tr).z, omega_used, mode);
        std::vector<Eigen::Index> order(static_cast<std::size_t>(p));
        for (Eigen::Index j = 0; j < p; ++j) order[static_cast<std::size_t>(j)] = j;
        std::stable_sort(order.begin(), order.end(),
                         [&](Eigen::Index a, Eigen::Index b) { return std::abs(zh[a]) > std::abs(zh[b]); });
        const auto m = static_cast<Eigen::Index>(test.size());
        Eigen::MatrixXd u(p, m);  // Omega_hat x for each held-out sample
        for (Eigen::Index k = 0; k < m; ++k) u.col(k) = omega_used.multiply(d.x.col(static_cast<Eigen::Index>(test[k])));
        Eigen::RowVectorXd score = Eigen::RowVectorXd::Zero(m);
        std::size_t next = 0;
        for (std::size_t g = 0; g < grid.size(); ++g) {
            while (next < order.size() && std::abs(zh[order[next]]) >= grid[g]) {
                const Eigen::Index j = order[next++];
                if (zh[j] > 0.0) score += u.row(j);
                else if (zh[j] < 0.0) score -= u.row(j);
            }
            std::size_t wrong = 0;
            for (Eigen::Index k = 0; k < m; ++k) {
                const int y = d.labels[test[static_cast<std::size_t>(k)]];
                const int pred = score[k] >= 0.0 ? 1 : -1;
                if (pred != y) ++wrong;
            }
            err_sum[g] += static_cast<double>(wrong) / static_cast<double>(m);
        }
    }
    CvTrace trace;
    trace.grid = grid;
    trace.mean_error.resize(grid.size());
    for (std::size_t g = 0; g < grid.size(); ++g) {
        trace.mean_error[g] = err_sum[g] / static_cast<double>(used_folds);
        if (trace.mean_error[g] < trace.mean_error[trace.chosen]) trace.chosen = g;
    }
    ClassifierModel model = fit_at_threshold(z_full, omega_used, grid[trace.chosen], mode, source);
    model.cv = std::move(trace);
    return model;
}

inline double score(const ClassifierModel& m, const Eigen::VectorXd& x) {
    if (x.size() != m.w.size()) throw UsageError("score: dimension mismatch");
    return m.w.dot(x);
}

// sign(w^T x); a zero score is classified +1.
inline int predict(const ClassifierModel& m, const Eigen::VectorXd& x) { return score(m, x) >= 0.0 ? 1 : -1; }

struct Evaluation {
    double error = 0.0;
    std::size_t count = 0;
    std::size_t zero_scores = 0;
};

inline Evaluation evaluate_detailed(const ClassifierModel& m, const Dataset& test) {
    if (test.n() == 0) throw UsageError("evaluate: empty test set");
    if (!test.labeled()) throw UsageError("evaluate: test set has no labels");
    if (test.p() != static_cast<std::size_t>(m.w.size())) throw UsageError("evaluate: dimension mismatch");
    Eigen::VectorXd s = test.x.transpose() * m.w;
    Evaluation e;
    e.count = test.n();
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < test.n(); ++i) {
        if (s[static_cast<Eigen::Index>(i)] == 0.0) ++e.zero_scores;
        int pred = s[static_cast<Eigen::Index>(i)] >= 0.0 ? 1 : -1;
        if (pred != test.labels[i]) ++wrong;
    }
    e.error = static_cast<double>(wrong) / static_cast<double>(test.n());
    return e;
}

inline double evaluate(const ClassifierModel& m, const Dataset& test) { return evaluate_detailed(m, test).error; }

// Error of sign(w^T X) for X ~ N(+-mu, Omega^{-1}) with equal priors:
// Phi_bar(w^T mu / sqrt(w^T Omega^{-1} w)). A zero weight scores 1/2.
inline double conditional_error(const Eigen::VectorXd& w, const Eigen::VectorXd& mu, const EnvelopeCholesky& chol) {
    if (w.isZero(0.0)) return 0.5;
    const double m = w.dot(mu);
    const double v = w.dot(chol.solve(w));
    return normal_sf(m / std::sqrt(v));
}

inline double conditional_error(const ClassifierModel& model, const Eigen::VectorXd& mu, const EnvelopeCholesky& chol) {
    return conditional_error(model.w, mu, chol);
}

// Text format: key=value header, then "w" and one weight per line.
inline void write_model(std::ostream& os, const ClassifierModel& m) {
    os << "# rwc classifier\n";
    os << "mode=" << to_string(m.mode) << '\n';
    os << "omega_source=" << to_string(m.source) << '\n';
    os << "threshold=" << detail::fmt_exact(m.threshold) << '\n';
    os << "p=" << m.w.size() << '\n';
    os << "w\n";
    for (Eigen::Index j = 0; j < m.w.size(); ++j) os << detail::fmt_exact(m.w[j]) << '\n';
}

inline ClassifierModel read_model(std::istream& is) {
    ClassifierModel m;
    std::string line;
    std::size_t p = 0;
    bool in_w = false;
    std::vector<double> w;
    while (std::getline(is, line)) {
        line = detail::trim(line);
        if (line.empty() || line[0] == '#') continue;
        if (in_w) {
            w.push_back(detail::parse_double(line, "weight"));
            continue;
        }
        if (line == "w") {
            in_w = true;
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos) throw IoError("model file: unexpected line '" + line + "'");
        auto key = line.substr(0, eq), val = line.substr(eq + 1);
        if (key == "mode") m.mode = parse_transform_mode(val);
        else if (key == "omega_source") m.source = parse_omega_source(val);
        else if (key == "threshold") m.threshold = detail::parse_double(val, "threshold");
        else if (key == "p") p = static_cast<std::size_t>(detail::parse_u64(val, "p"));
        else throw IoError("model file: unknown key '" + key + "'");
    }
    if (w.size() != p) throw IoError("model file: expected " + std::to_string(p) + " weights, found " + std::to_string(w.size()));
    m.w = Eigen::Map<Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
    return m;
}

}  // namespace rwc
