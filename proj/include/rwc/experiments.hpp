#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "classifier.hpp"
#include "error.hpp"
#include "model.hpp"
#include "parallel.hpp"
#include "precision.hpp"
#include "rng.hpp"
#include "theory.hpp"
#include "threshold.hpp"

namespace rwc {

inline constexpr const char* kVersion = "rwc 1.0.0";

enum class Method { hct, phct, ohct, cvt, bt_hct, wt_hct };

inline std::string to_string(Method m) {
    switch (m) {
        case Method::hct: return "HCT";
        case Method::phct: return "pHCT";
        case Method::ohct: return "oHCT";
        case Method::cvt: return "CVT";
        case Method::bt_hct: return "BT-HCT";
        case Method::wt_hct: return "WT-HCT";
    }
    return "?";
}

inline Method parse_method(const std::string& s) {
    for (Method m : {Method::hct, Method::phct, Method::ohct, Method::cvt, Method::bt_hct, Method::wt_hct})
        if (s == to_string(m)) return m;
    throw ConfigError("unknown method '" + s + "'");
}

// test_sample scores m fresh test points; conditional uses the exact
// conditional error given (mu, w).
enum class ErrorMode { test_sample, conditional };
// samples simulates the n training vectors; direct draws z from its law.
enum class ZSource { samples, direct };

struct ExperimentPoint {
    std::string label;
    double x = 0.0;
    std::string series;
    std::size_t p = 0, n = 0;
    double eps = 0.0, tau = 0.0;
    std::optional<double> beta, r, theta;
    SignalDistribution dist;
    OmegaSpec omega = omega::Identity{};
    std::size_t m = 500;
    EstimationConfig estimation;

    RareWeakParams params() const {
        RareWeakParams q = RareWeakParams::from_literals(p, n, eps, tau);
        q.beta = beta;
        q.r = r;
        q.theta = theta;
        return q;
    }
};

struct ExperimentConfig {
    std::string preset = "custom";
    std::string x_name = "x";
    std::vector<ExperimentPoint> points;
    std::vector<Method> methods;
    std::size_t reps = 25;
    std::uint64_t seed = 20240601;
    ErrorMode error_mode = ErrorMode::test_sample;
    ZSource z_source = ZSource::samples;
    CvConfig cv;
    OmegaSource cvt_omega = OmegaSource::true_matrix;
    double memory_cap_bytes = 4.0e9;
    std::size_t threads = 0;
    std::vector<std::string> notes;
};

struct ResultRow {
    std::string point;
    double x = 0.0;
    std::string series;
    std::string method;
    double mean_error = 0.0;
    double sd_error = 0.0;
    double mean_threshold = 0.0;
    std::size_t reps = 0;
    double runtime_seconds = 0.0;
    std::map<std::string, double> extra;
    std::string flag;
};

struct ResultTable {
    std::string preset;
    std::string x_name = "x";
    std::uint64_t seed = 0;
    std::string version = kVersion;
    std::vector<std::string> methods;
    std::vector<ResultRow> rows;
    std::vector<std::string> notes;
    nlohmann::json config;
};

namespace detail {

inline std::string fmt6(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

inline std::vector<double> linspace_step(double lo, double hi, double step) {
    std::vector<double> v;
    const auto k = static_cast<long>(std::llround((hi - lo) / step));
    for (long i = 0; i <= k; ++i) v.push_back(std::round((lo + static_cast<double>(i) * step) * 1e10) / 1e10);
    return v;
}

inline nlohmann::json describe_config(const ExperimentConfig& c) {
    nlohmann::json j;
    j["preset"] = c.preset;
    j["reps"] = c.reps;
    j["seed"] = c.seed;
    j["error_mode"] = c.error_mode == ErrorMode::test_sample ? "test_sample" : "conditional";
    j["z_source"] = c.z_source == ZSource::samples ? "samples" : "direct";
    j["cv_folds"] = c.cv.folds;
    j["cv_max_grid"] = c.cv.max_grid;
    j["cvt_omega"] = to_string(c.cvt_omega);
    std::vector<std::string> ms;
    for (auto m : c.methods) ms.push_back(to_string(m));
    j["methods"] = ms;
    for (const auto& pt : c.points) {
        nlohmann::json q{{"label", pt.label}, {"x", pt.x},          {"series", pt.series},
                         {"p", pt.p},         {"n", pt.n},          {"eps", pt.eps},
                         {"tau", pt.tau},     {"m", pt.m},          {"omega", describe(pt.omega)},
                         {"signal", pt.dist.to_string()}};
        if (pt.beta) q["beta"] = *pt.beta;
        if (pt.r) q["r"] = *pt.r;
        if (pt.theta) q["theta"] = *pt.theta;
        std::visit(
            [&](const auto& e) {
                using T = std::decay_t<decltype(e)>;
                if constexpr (std::is_same_v<T, EtaFixed>) q["eta"] = e.eta;
                else q["eta_grid"] = e.grid;
                if constexpr (std::is_same_v<T, EtaOracle>) q["eta_mode"] = "oracle";
                if constexpr (std::is_same_v<T, EtaHeldOut>) q["eta_mode"] = "held_out";
            },
            pt.estimation.eta);
        if (auto* z = std::get_if<ZetaFixed>(&pt.estimation.zeta)) q["zeta"] = z->zeta;
        else q["zeta_target_k"] = std::get<ZetaTargetRow>(pt.estimation.zeta).k;
        j["points"].push_back(q);
    }
    return j;
}

struct RepOutcome {
    std::vector<double> error, threshold, seconds;
};

inline bool needs_estimate(const ExperimentConfig& c) {
    for (auto m : c.methods)
        if (m == Method::hct || (m == Method::cvt && c.cvt_omega == OmegaSource::estimated)) return true;
    return false;
}

inline RepOutcome run_rep(const ExperimentConfig& c, const ExperimentPoint& pt, const RareWeakParams& q,
                          const SparseSymMatrix& omega, const EnvelopeCholesky& chol, std::size_t pi, std::size_t rep) {
    using clock = std::chrono::steady_clock;
    Rng rng = Rng::stream(c.seed, {pi, rep});
    const SignalDraw sig = sample_mu(q, pt.dist, rng);
    std::optional<Dataset> train, test;
    ZVector z;
    if (c.z_source == ZSource::samples) {
        train = sample_dataset(sig.mu, chol, q.n, Labeling::balanced, rng);
        z = z_vector(*train);
    } else {
        z = draw_z(sig.mu, chol, q.n, rng);
    }
    if (c.error_mode == ErrorMode::test_sample) test = sample_dataset(sig.mu, chol, pt.m, Labeling::random, rng);

    // Estimated lazily; its cost lands on the first method that asks.
    std::optional<SparseSymMatrix> omega_hat;
    auto estimated = [&]() -> const SparseSymMatrix& {
        if (!omega_hat) omega_hat = estimate_precision(*train, pt.estimation, &omega).omega_hat;
        return *omega_hat;
    };
    const SparseSymMatrix eye = SparseSymMatrix::identity(q.p);

    RepOutcome out;
    for (std::size_t k = 0; k < c.methods.size(); ++k) {
        const Method m = c.methods[k];
        auto t0 = clock::now();
        ClassifierModel model;
        switch (m) {
            case Method::phct: model = fit_from_z(z, omega, q, TransformMode::innovated, OmegaSource::true_matrix); break;
            case Method::ohct: model = fit_from_z(z, eye, q, TransformMode::innovated, OmegaSource::identity); break;
            case Method::bt_hct: model = fit_from_z(z, omega, q, TransformMode::brute_force, OmegaSource::true_matrix); break;
            case Method::wt_hct: model = fit_from_z(z, omega, q, TransformMode::whitened, OmegaSource::true_matrix); break;
            case Method::hct: model = fit_from_z(z, estimated(), q, TransformMode::innovated, OmegaSource::estimated); break;
            case Method::cvt: {
                Rng cv_rng = Rng::stream(c.seed, {pi, rep, 1000 + k});
                const SparseSymMatrix& om = c.cvt_omega == OmegaSource::estimated ? estimated()
                                            : c.cvt_omega == OmegaSource::identity ? eye
                                                                                   : omega;
                model = fit_cvt(*train, om, q, c.cv, cv_rng, TransformMode::innovated, c.cvt_omega);
                break;
            }
        }
        double err = c.error_mode == ErrorMode::test_sample ? evaluate(model, *test)
                                                           : conditional_error(model.w, sig.mu, chol);
        out.error.push_back(err);
        out.threshold.push_back(model.threshold);
        out.seconds.push_back(std::chrono::duration<double>(clock::now() - t0).count());
    }
    return out;
}

}  // namespace detail

inline void validate(const ExperimentConfig& c) {
    if (c.reps < 1) throw ConfigError("reps must be >= 1");
    if (c.cv.folds < 2) throw ConfigError("cv folds must be >= 2");
    for (const auto& pt : c.points) {
        if (pt.p < 2) throw ConfigError("point '" + pt.label + "': p must be >= 2");
        if (c.error_mode == ErrorMode::test_sample && pt.m < 1)
            throw ConfigError("point '" + pt.label + "': m must be >= 1");
        if (detail::needs_estimate(c) && precision_memory_bytes(pt.p) > c.memory_cap_bytes)
            throw ResourceError("point '" + pt.label + "' needs about " + detail::fmt6(precision_memory_bytes(pt.p)) +
                                " bytes for covariance estimation, above the memory cap of " +
                                detail::fmt6(c.memory_cap_bytes) + " bytes");
    }
    if (c.z_source == ZSource::direct)
        for (auto m : c.methods)
            if (m == Method::hct || m == Method::cvt)
                throw ConfigError(to_string(m) + " needs training samples; use z_source=samples");
}

// Runs every (point, repetition) pair; results are merged in repetition order.
inline ResultTable run_experiment(const ExperimentConfig& c) {
    validate(c);
    ResultTable t;
    t.preset = c.preset;
    t.x_name = c.x_name;
    t.seed = c.seed;
    t.notes = c.notes;
    t.config = detail::describe_config(c);
    for (auto m : c.methods) t.methods.push_back(to_string(m));
    if (c.methods.empty()) return t;

    std::vector<SparseSymMatrix> omegas;
    std::vector<EnvelopeCholesky> chols;
    std::vector<RareWeakParams> params;
    for (const auto& pt : c.points) {
        omegas.push_back(build_omega(pt.omega, pt.p));
        chols.emplace_back(omegas.back());
        params.push_back(pt.params());
    }
    const std::size_t units = c.points.size() * c.reps;
    std::vector<detail::RepOutcome> outcomes(units);
    parallel_for(
        units,
        [&](std::size_t u) {
            const std::size_t pi = u / c.reps, rep = u % c.reps;
            outcomes[u] = detail::run_rep(c, c.points[pi], params[pi], omegas[pi], chols[pi], pi, rep);
        },
        c.threads);

    for (std::size_t pi = 0; pi < c.points.size(); ++pi) {
        for (std::size_t k = 0; k < c.methods.size(); ++k) {
            std::vector<double> e(c.reps), th(c.reps);
            double secs = 0.0;
            for (std::size_t rep = 0; rep < c.reps; ++rep) {
                const auto& o = outcomes[pi * c.reps + rep];
                e[rep] = o.error[k];
                th[rep] = o.threshold[k];
                secs += o.seconds[k];
            }
            ResultRow row;
            row.point = c.points[pi].label;
            row.x = c.points[pi].x;
            row.series = c.points[pi].series;
            row.method = to_string(c.methods[k]);
            row.reps = c.reps;
            const double rd = static_cast<double>(c.reps);
            row.mean_error = pairwise_sum(e) / rd;
            row.mean_threshold = pairwise_sum(th) / rd;
            if (c.reps > 1) {
                double ss = 0.0;
                for (double v : e) ss += (v - row.mean_error) * (v - row.mean_error);
                row.sd_error = std::sqrt(ss / (rd - 1.0));
            }
            row.runtime_seconds = secs;
            t.rows.push_back(std::move(row));
        }
    }
    return t;
}

// ---- presets ----

inline ExperimentPoint fixed_point(std::string label, std::size_t p, std::size_t n, double eps, double tau,
                                   OmegaSpec om, SignalDistribution dist, EstimationConfig est) {
    ExperimentPoint pt;
    pt.label = std::move(label);
    pt.p = p;
    pt.n = n;
    pt.eps = eps;
    pt.tau = tau;
    pt.omega = std::move(om);
    pt.dist = dist;
    pt.estimation = std::move(est);
    return pt;
}

inline EstimationConfig oracle_estimation(std::size_t k, std::vector<double> grid) {
    EstimationConfig e;
    e.eta = EtaOracle{std::move(grid)};
    e.zeta = ZetaTargetRow{k};
    return e;
}

inline std::vector<std::string> preset_names() {
    return {"exp1a", "exp1b", "exp1c", "exp2a", "exp2b", "exp3", "phase_sweep"};
}

struct SweepConfig {
    std::size_t p = 10000;
    double theta = 0.4;
    std::vector<double> beta_grid{0.35, 0.4, 0.45, 0.5, 0.55};
    std::vector<double> r_grid{0.02, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45,
                               0.5,  0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9};
    OmegaSpec omega = omega::Tridiagonal{0.3};
    std::vector<Method> methods{Method::phct};
    std::size_t reps = 50;
    std::uint64_t seed = 20240601;
    ErrorMode error_mode = ErrorMode::conditional;
    ZSource z_source = ZSource::direct;
    std::size_t m = 500;
    std::size_t threads = 0;
    double boundary_tol = 1e-9;
};

inline ExperimentConfig preset_config(const std::string& name) {
    ExperimentConfig c;
    c.preset = name;
    const auto point = SignalDistribution::point_mass;
    const std::vector<double> grid{0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4};
    if (name == "exp1a") {
        c.x_name = "a";
        c.methods = {Method::hct, Method::ohct, Method::phct};
        const double as[] = {0.05, 0.15, 0.2, 0.35, 0.4, 0.45};
        const double etas[] = {0.1, 0.1, 0.15, 0.15, 0.2, 0.25};
        const double zetas[] = {0.05, 0.1, 0.1, 0.2, 0.25, 0.3};
        for (int i = 0; i < 6; ++i) {
            EstimationConfig e;
            e.eta = EtaFixed{etas[i]};
            e.zeta = ZetaFixed{zetas[i]};
            auto pt = fixed_point("a=" + detail::fmt6(as[i]), 3000, 2000, 0.1, 4.0, omega::Tridiagonal{as[i]},
                                  point(4.0), e);
            pt.x = as[i];
            c.points.push_back(std::move(pt));
        }
        c.notes.push_back("repetition count for exp1a is unstated; 25 used");
    } else if (name == "exp1b" || name == "exp1c") {
        c.x_name = "column";
        c.methods = {Method::ohct, Method::phct, Method::hct};
        if (name == "exp1b") {
            c.points = {
                fixed_point("n=1000,p=2000,a=0.05,eps=0.1,tau=4", 2000, 1000, 0.1, 4, omega::Tridiagonal{0.05}, point(4),
                            oracle_estimation(3, grid)),
                fixed_point("n=2000,p=3000,a=0.45,eps=0.2,tau=3", 3000, 2000, 0.2, 3, omega::Tridiagonal{0.45}, point(3),
                            oracle_estimation(3, grid)),
                fixed_point("n=2000,p=3000,a1=0.45,a2=0.2,eps=0.1,tau=4", 3000, 2000, 0.1, 4,
                            omega::FiveDiagonal{0.45, 0.2}, point(4), oracle_estimation(5, grid)),
                fixed_point("n=500,p=1000,a=0.05,eps=0.1,tau=4", 1000, 500, 0.1, 4, omega::Tridiagonal{0.05}, point(4),
                            oracle_estimation(3, grid)),
                fixed_point("n=2000,p=3000,a=0.45,eps=0.05,tau=5", 3000, 2000, 0.05, 5, omega::Tridiagonal{0.45},
                            point(5), oracle_estimation(3, grid)),
                fixed_point("n=2000,p=3000,a1=0.35,a2=0.2,eps=0.05,tau=4", 3000, 2000, 0.05, 4,
                            omega::FiveDiagonal{0.35, 0.2}, point(4), oracle_estimation(5, grid)),
            };
        } else {
            auto u = SignalDistribution::uniform;
            c.points = {
                fixed_point("n=1000,p=2000,H=U(3.5,4.5),a=0.05,eps=0.1", 2000, 1000, 0.1, 4, omega::Tridiagonal{0.05},
                            u(3.5, 4.5), oracle_estimation(3, grid)),
                fixed_point("n=2000,p=3000,H=U(2.5,3.5),a=0.45,eps=0.2", 3000, 2000, 0.2, 3, omega::Tridiagonal{0.45},
                            u(2.5, 3.5), oracle_estimation(3, grid)),
                fixed_point("n=2000,p=3000,H=U(3.5,4.5),a1=0.45,a2=0.2,eps=0.1", 3000, 2000, 0.1, 4,
                            omega::FiveDiagonal{0.45, 0.2}, u(3.5, 4.5), oracle_estimation(5, grid)),
            };
        }
        for (std::size_t i = 0; i < c.points.size(); ++i) c.points[i].x = static_cast<double>(i + 1);
    } else if (name == "exp2a") {
        c.x_name = "n";
        c.methods = {Method::phct, Method::cvt};
        for (double eps : {0.1, 0.05})
            for (std::size_t n : {100, 50, 20}) {
                auto pt = fixed_point("eps=" + detail::fmt6(eps) + ",n=" + std::to_string(n), 3000, n, eps, 1.8,
                                      omega::Tridiagonal{0.2}, point(1.8), {});
                pt.x = static_cast<double>(n);
                pt.series = "eps=" + detail::fmt6(eps);
                c.points.push_back(std::move(pt));
            }
    } else if (name == "exp2b") {
        c.x_name = "tau";
        c.methods = {Method::phct, Method::cvt};
        for (std::size_t n : {20, 40})
            for (double tau : detail::linspace_step(1.0, 2.5, 0.1)) {
                auto pt = fixed_point("n=" + std::to_string(n) + ",tau=" + detail::fmt6(tau), 3000, n, 0.05, tau,
                                      omega::Tridiagonal{0.2}, point(tau), {});
                pt.x = tau;
                pt.series = "n=" + std::to_string(n);
                c.points.push_back(std::move(pt));
            }
    } else if (name == "exp3") {
        c.x_name = "tau";
        c.methods = {Method::hct, Method::cvt};
        c.reps = 6;
        c.cvt_omega = OmegaSource::estimated;
        c.cv.max_grid = 50;
        for (double tau : detail::linspace_step(1.0, 3.0, 0.2)) {
            auto pt = fixed_point("tau=" + detail::fmt6(tau), 5000, 500, 0.1, tau,
                                  omega::BlockFiveDiagonal{10, 500, 0.45, 0.1}, point(tau),
                                  oracle_estimation(5, {0.2, 0.25, 0.3, 0.35, 0.4, 0.45}));
            pt.x = tau;
            c.points.push_back(std::move(pt));
        }
    } else if (name == "phase_sweep") {
        throw UsageError("phase_sweep is run through phase_sweep(SweepConfig)");
    } else {
        throw ConfigError("unknown preset '" + name + "'");
    }
    return c;
}

// Grid over (beta, r) inside the strip (1-theta)/2 < beta < 1-theta at
// n = p^theta, eps = p^-beta, tau = sqrt(2 r ln p).
inline ExperimentConfig sweep_to_config(const SweepConfig& s) {
    ExperimentConfig c;
    c.preset = "phase_sweep";
    c.x_name = "r";
    c.methods = s.methods;
    c.reps = s.reps;
    c.seed = s.seed;
    c.error_mode = s.error_mode;
    c.z_source = s.z_source;
    c.threads = s.threads;
    for (double beta : s.beta_grid) {
        if (!(beta > (1.0 - s.theta) / 2.0 && beta < 1.0 - s.theta)) {
            c.notes.push_back("skipped beta=" + detail::fmt6(beta) + ": outside the strip");
            continue;
        }
        for (double r : s.r_grid) {
            if (!(r > 0.0 && r < 1.0)) {
                c.notes.push_back("skipped r=" + detail::fmt6(r) + ": outside (0,1)");
                continue;
            }
            RareWeakParams q = RareWeakParams::from_exponents(s.p, beta, r, s.theta);
            ExperimentPoint pt;
            pt.label = "beta=" + detail::fmt6(beta) + ",r=" + detail::fmt6(r);
            pt.x = r;
            pt.series = "beta=" + detail::fmt6(beta);
            pt.p = q.p;
            pt.n = q.n;
            pt.eps = q.eps;
            pt.tau = q.tau;
            pt.beta = beta;
            pt.r = r;
            pt.theta = s.theta;
            pt.dist = SignalDistribution::point_mass(q.tau);
            pt.omega = s.omega;
            pt.m = s.m;
            c.points.push_back(std::move(pt));
        }
    }
    return c;
}

inline ResultTable phase_sweep(const SweepConfig& s) {
    ExperimentConfig c = sweep_to_config(s);
    ResultTable t = run_experiment(c);
    std::map<std::string, const ExperimentPoint*> by_label;
    for (const auto& pt : c.points) by_label[pt.label] = &pt;
    for (auto& row : t.rows) {
        const ExperimentPoint& pt = *by_label.at(row.point);
        const double rs = rho_star(*pt.beta, s.theta);
        row.extra["beta"] = *pt.beta;
        row.extra["r"] = *pt.r;
        row.extra["rho_star"] = rs;
        row.flag = to_string(regime_classify(*pt.beta, *pt.r, s.theta, s.boundary_tol));
    }
    return t;
}

// ---- output ----

enum class OutputFormat { csv, json, plot };

inline OutputFormat parse_output_format(const std::string& s) {
    if (s == "csv") return OutputFormat::csv;
    if (s == "json") return OutputFormat::json;
    if (s == "plot") return OutputFormat::plot;
    throw ConfigError("unknown output format '" + s + "'");
}

// Runtime is left out so that the CSV depends only on (config, seed).
inline void write_csv(std::ostream& os, const ResultTable& t) {
    std::set<std::string> extra_keys;
    bool any_flag = false;
    for (const auto& r : t.rows) {
        for (const auto& [k, v] : r.extra)
            if (k != t.x_name) extra_keys.insert(k);
        any_flag = any_flag || !r.flag.empty();
    }
    os << "point," << t.x_name << ",series,method,mean_error,sd_error,mean_threshold,reps";
    for (const auto& k : extra_keys) os << ',' << k;
    if (any_flag) os << ",region";
    os << '\n';
    for (const auto& r : t.rows) {
        os << '"' << r.point << "\"," << detail::fmt6(r.x) << ',' << r.series << ',' << r.method << ','
           << detail::fmt6(r.mean_error) << ',' << detail::fmt6(r.sd_error) << ',' << detail::fmt6(r.mean_threshold)
           << ',' << r.reps;
        for (const auto& k : extra_keys) {
            auto it = r.extra.find(k);
            os << ',' << (it == r.extra.end() ? std::string() : detail::fmt6(it->second));
        }
        if (any_flag) os << ',' << r.flag;
        os << '\n';
    }
}

inline nlohmann::json to_json(const ResultTable& t) {
    nlohmann::json j;
    j["version"] = t.version;
    j["preset"] = t.preset;
    j["seed"] = t.seed;
    j["x_name"] = t.x_name;
    j["methods"] = t.methods;
    j["notes"] = t.notes;
    j["config"] = t.config;
    j["rows"] = nlohmann::json::array();
    for (const auto& r : t.rows) {
        nlohmann::json row{{"point", r.point},
                           {"x", r.x},
                           {"series", r.series},
                           {"method", r.method},
                           {"mean_error", r.mean_error},
                           {"sd_error", r.sd_error},
                           {"mean_threshold", r.mean_threshold},
                           {"reps", r.reps},
                           {"runtime_seconds", r.runtime_seconds}};
        for (const auto& [k, v] : r.extra) row[k] = v;
        if (!r.flag.empty()) row["region"] = r.flag;
        j["rows"].push_back(row);
    }
    return j;
}

// (x, y, series) triples; the series is the method plus the point's series tag.
inline void write_plot(std::ostream& os, const ResultTable& t) {
    os << "x,y,series\n";
    for (const auto& r : t.rows)
        os << detail::fmt6(r.x) << ',' << detail::fmt6(r.mean_error) << ','
           << (r.series.empty() ? r.method : r.method + " " + r.series) << '\n';
}

inline void emit(const ResultTable& t, OutputFormat f, std::ostream& os) {
    switch (f) {
        case OutputFormat::csv: write_csv(os, t); break;
        case OutputFormat::json: os << to_json(t).dump(2) << '\n'; break;
        case OutputFormat::plot: write_plot(os, t); break;
    }
}

inline void emit(const ResultTable& t, OutputFormat f, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    emit(t, f, os);
    if (!os) throw IoError("failed writing '" + path + "'");
}

// Applies key=value overrides to every point of a config.
inline void apply_overrides(ExperimentConfig& c, const KeyValues& kv) {
    auto num = [](const std::string& v, const char* k) { return detail::parse_double(v, k); };
    auto uint = [](const std::string& v, const char* k) { return static_cast<std::size_t>(detail::parse_u64(v, k)); };
    for (const auto& [k, v] : kv) {
        if (k == "reps") c.reps = uint(v, "reps");
        else if (k == "seed") c.seed = detail::parse_u64(v, "seed");
        else if (k == "methods") {
            c.methods.clear();
            for (auto& s : detail::split(v, ','))
                if (!detail::trim(s).empty()) c.methods.push_back(parse_method(detail::trim(s)));
        } else if (k == "error_mode") {
            if (v != "test_sample" && v != "conditional") throw ConfigError("error_mode must be test_sample or conditional");
            c.error_mode = v == "test_sample" ? ErrorMode::test_sample : ErrorMode::conditional;
        } else if (k == "z_source") {
            if (v != "samples" && v != "direct") throw ConfigError("z_source must be samples or direct");
            c.z_source = v == "samples" ? ZSource::samples : ZSource::direct;
        } else if (k == "cv_folds") c.cv.folds = uint(v, "cv_folds");
        else if (k == "cv_max_grid") c.cv.max_grid = uint(v, "cv_max_grid");
        else if (k == "cvt_omega") c.cvt_omega = parse_omega_source(v);
        else if (k == "memory_cap_bytes") c.memory_cap_bytes = num(v, "memory_cap_bytes");
        else if (k == "x_name") c.x_name = v;
        else if (k == "preset") continue;
        else {
            static const std::set<std::string> point_keys{"p",    "n",    "eps",             "tau",  "m",     "omega",
                                                          "signal", "eta", "eta_oracle_grid", "zeta", "zeta_k"};
            if (!point_keys.count(k)) throw ConfigError("unknown config key '" + k + "'");
            for (auto& pt : c.points) {
                if (k == "p") pt.p = uint(v, "p");
                else if (k == "n") pt.n = uint(v, "n");
                else if (k == "eps") pt.eps = num(v, "eps");
                else if (k == "tau") {
                    // A point-mass signal tracks tau.
                    if (pt.dist.kind == SignalDistribution::Kind::point_mass && pt.dist.lo == pt.tau)
                        pt.dist.lo = pt.dist.hi = num(v, "tau");
                    pt.tau = num(v, "tau");
                }
                else if (k == "m") pt.m = uint(v, "m");
                else if (k == "omega") pt.omega = parse_omega_spec(v);
                else if (k == "signal") pt.dist = SignalDistribution::parse(v);
                else if (k == "eta") pt.estimation.eta = EtaFixed{num(v, "eta")};
                else if (k == "eta_oracle_grid") {
                    std::vector<double> g;
                    for (auto& s : detail::split(v, ',')) g.push_back(num(s, "eta grid"));
                    pt.estimation.eta = EtaOracle{g};
                } else if (k == "zeta") pt.estimation.zeta = ZetaFixed{num(v, "zeta")};
                else if (k == "zeta_k") pt.estimation.zeta = ZetaTargetRow{uint(v, "zeta_k")};
            }
        }
    }
}

// A one-point custom experiment from key=value settings.
inline ExperimentConfig custom_config(const KeyValues& kv) {
    ExperimentConfig c;
    c.preset = "custom";
    c.methods = {Method::phct, Method::ohct};
    ExperimentPoint pt;
    pt.label = "custom";
    pt.p = 1000;
    pt.n = 100;
    pt.eps = 0.05;
    pt.tau = 2.0;
    pt.dist = SignalDistribution::point_mass(2.0);
    c.points.push_back(pt);
    apply_overrides(c, kv);
    return c;
}

}  // namespace rwc
