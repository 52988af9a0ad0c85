#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"
#include "rng.hpp"
#include "sparse.hpp"

namespace rwc {

namespace detail {

// Shortest text that parses back to the same double.
inline std::string fmt_exact(double v) {
    char buf[40];
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

inline double parse_double(std::string_view s, std::string_view what) {
    std::string str(s);
    char* end = nullptr;
    double v = std::strtod(str.c_str(), &end);
    if (str.empty() || end != str.c_str() + str.size())
        throw ConfigError("cannot parse " + std::string(what) + " from '" + str + "'");
    return v;
}

inline std::uint64_t parse_u64(std::string_view s, std::string_view what) {
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw ConfigError("cannot parse " + std::string(what) + " from '" + std::string(s) + "'");
    return v;
}

inline std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t b = 0;
    for (;;) {
        auto e = s.find(sep, b);
        out.emplace_back(s.substr(b, e == std::string_view::npos ? std::string_view::npos : e - b));
        if (e == std::string_view::npos) break;
        b = e + 1;
    }
    return out;
}

inline std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

}  // namespace detail

// Calibrated rare/weak parameters. The exponents are absent when the problem
// was specified by literal (p, n, eps, tau), as the simulation presets do.
struct RareWeakParams {
    std::size_t p = 0;
    std::optional<double> beta, r, theta;
    double eps = 0.0;
    std::size_t n = 0;
    double tau = 0.0;
    double s_star = 0.0;
    double s_tilde = 0.0;

    static RareWeakParams from_exponents(std::size_t p, double beta, double r, double theta) {
        auto in01 = [](double v) { return v > 0.0 && v < 1.0; };
        if (p < 2) throw DomainError("p must be at least 2");
        if (!in01(beta)) throw DomainError("beta must lie in (0,1)");
        if (!in01(r)) throw DomainError("r must lie in (0,1)");
        if (!in01(theta)) throw DomainError("theta must lie in (0,1)");
        const double lp = std::log(static_cast<double>(p));
        auto n = static_cast<std::size_t>(std::llround(std::pow(static_cast<double>(p), theta)));
        RareWeakParams q = from_literals(p, std::max<std::size_t>(2, n), std::pow(static_cast<double>(p), -beta),
                                         std::sqrt(2.0 * r * lp));
        q.beta = beta;
        q.r = r;
        q.theta = theta;
        return q;
    }

    static RareWeakParams from_literals(std::size_t p, std::size_t n, double eps, double tau) {
        if (p < 2) throw DomainError("p must be at least 2");
        if (n < 1) throw DomainError("n must be at least 1");
        if (!(eps >= 0.0 && eps <= 1.0)) throw DomainError("eps must lie in [0,1]");
        if (!(tau >= 0.0) || !std::isfinite(tau)) throw DomainError("tau must be finite and non-negative");
        RareWeakParams q;
        q.p = p;
        q.n = n;
        q.eps = eps;
        q.tau = tau;
        const double pd = static_cast<double>(p), nd = static_cast<double>(n);
        q.s_star = std::sqrt(2.0 * std::log(pd));
        q.s_tilde = std::sqrt(2.0 * std::max(0.0, std::log(pd / (nd * nd))));
        return q;
    }

    // sqrt(2 max(1-2 theta, 0) ln p); needs the exponent form.
    double s_theta() const {
        if (!theta) throw UsageError("s_theta requires theta");
        return std::sqrt(2.0 * std::max(1.0 - 2.0 * *theta, 0.0) * std::log(static_cast<double>(p)));
    }
};

struct SignalDistribution {
    enum class Kind { point_mass, uniform };
    Kind kind = Kind::point_mass;
    double lo = 0.0, hi = 0.0;
    bool symmetric_sign = false;  // random sign per signal when set

    static SignalDistribution point_mass(double tau) { return {Kind::point_mass, tau, tau, false}; }
    static SignalDistribution uniform(double lo, double hi) {
        if (!(lo > 0.0 && hi > lo)) throw DomainError("uniform signal requires 0 < lo < hi");
        return {Kind::uniform, lo, hi, false};
    }

    double draw(Rng& rng) const {
        double v = kind == Kind::point_mass ? lo : rng.uniform(lo, hi);
        if (symmetric_sign && rng.bernoulli(0.5)) v = -v;
        return v;
    }

    std::string to_string() const {
        std::string s = kind == Kind::point_mass ? "point:" + detail::fmt_exact(lo)
                                                 : "uniform:" + detail::fmt_exact(lo) + "," + detail::fmt_exact(hi);
        return symmetric_sign ? s + ":symmetric" : s;
    }

    static SignalDistribution parse(std::string_view s) {
        auto parts = detail::split(s, ':');
        SignalDistribution d;
        if (parts.size() < 2) throw ConfigError("signal distribution '" + std::string(s) + "' is malformed");
        if (parts[0] == "point") {
            d = point_mass(detail::parse_double(parts[1], "point mass"));
        } else if (parts[0] == "uniform") {
            auto ab = detail::split(parts[1], ',');
            if (ab.size() != 2) throw ConfigError("uniform needs lo,hi");
            d = uniform(detail::parse_double(ab[0], "lo"), detail::parse_double(ab[1], "hi"));
        } else {
            throw ConfigError("unknown signal distribution '" + parts[0] + "'");
        }
        if (parts.size() > 2) {
            if (parts[2] != "symmetric") throw ConfigError("unknown signal sign '" + parts[2] + "'");
            d.symmetric_sign = true;
        }
        return d;
    }
};

namespace omega {
struct Identity {};
struct Tridiagonal {
    double a;
};
struct FiveDiagonal {
    double a1, a2;
};
// 2x2 blocks [[1,h],[h,1]]; an odd trailing coordinate stays alone.
struct PairedBlock {
    double h;
};
struct BlockFiveDiagonal {
    std::size_t num_blocks, block_size;
    double a1, a2;
};
struct Explicit {
    SparseSymMatrix matrix;
};
}  // namespace omega

using OmegaSpec = std::variant<omega::Identity, omega::Tridiagonal, omega::FiveDiagonal, omega::PairedBlock,
                               omega::BlockFiveDiagonal, omega::Explicit>;

inline std::string describe(const OmegaSpec& spec) {
    using namespace omega;
    using detail::fmt_exact;
    struct V {
        std::string operator()(const Identity&) const { return "identity"; }
        std::string operator()(const Tridiagonal& s) const { return "tridiagonal:" + fmt_exact(s.a); }
        std::string operator()(const FiveDiagonal& s) const { return "five_diagonal:" + fmt_exact(s.a1) + "," + fmt_exact(s.a2); }
        std::string operator()(const PairedBlock& s) const { return "paired_block:" + fmt_exact(s.h); }
        std::string operator()(const BlockFiveDiagonal& s) const {
            return "block_five_diagonal:" + std::to_string(s.num_blocks) + "," + std::to_string(s.block_size) + "," +
                   fmt_exact(s.a1) + "," + fmt_exact(s.a2);
        }
        std::string operator()(const Explicit& s) const { return "explicit(p=" + std::to_string(s.matrix.dim()) + ")"; }
    };
    return std::visit(V{}, spec);
}

// Inverse of describe() for the structured kinds.
inline OmegaSpec parse_omega_spec(std::string_view s) {
    auto colon = s.find(':');
    std::string kind(s.substr(0, colon));
    std::vector<double> args;
    if (colon != std::string_view::npos)
        for (auto& a : detail::split(s.substr(colon + 1), ',')) args.push_back(detail::parse_double(a, kind));
    auto need = [&](std::size_t k) {
        if (args.size() != k) throw ConfigError("omega spec '" + kind + "' needs " + std::to_string(k) + " arguments");
    };
    if (kind == "identity") {
        need(0);
        return omega::Identity{};
    }
    if (kind == "tridiagonal") {
        need(1);
        return omega::Tridiagonal{args[0]};
    }
    if (kind == "five_diagonal") {
        need(2);
        return omega::FiveDiagonal{args[0], args[1]};
    }
    if (kind == "paired_block") {
        need(1);
        return omega::PairedBlock{args[0]};
    }
    if (kind == "block_five_diagonal") {
        need(4);
        return omega::BlockFiveDiagonal{static_cast<std::size_t>(args[0]), static_cast<std::size_t>(args[1]), args[2],
                                         args[3]};
    }
    throw ConfigError("unknown omega spec '" + kind + "'");
}

inline SparseSymMatrix build_omega_unchecked(const OmegaSpec& spec, std::size_t p) {
    using namespace omega;
    SparseSymMatrix m = SparseSymMatrix::identity(p);
    auto band = [&](std::size_t lo, std::size_t hi, double a1, double a2) {
        for (std::size_t i = lo; i < hi; ++i) {
            if (i + 1 < hi) m.set(i, i + 1, a1);
            if (i + 2 < hi) m.set(i, i + 2, a2);
        }
    };
    if (std::holds_alternative<Tridiagonal>(spec)) {
        band(0, p, std::get<Tridiagonal>(spec).a, 0.0);
    } else if (auto* f = std::get_if<FiveDiagonal>(&spec)) {
        band(0, p, f->a1, f->a2);
    } else if (auto* b = std::get_if<PairedBlock>(&spec)) {
        for (std::size_t i = 0; i + 1 < p; i += 2) m.set(i, i + 1, b->h);
    } else if (auto* bf = std::get_if<BlockFiveDiagonal>(&spec)) {
        if (bf->num_blocks * bf->block_size != p)
            throw ConfigError(describe(spec) + " does not cover p=" + std::to_string(p));
        for (std::size_t k = 0; k < bf->num_blocks; ++k)
            band(k * bf->block_size, (k + 1) * bf->block_size, bf->a1, bf->a2);
    } else if (auto* e = std::get_if<Explicit>(&spec)) {
        if (e->matrix.dim() != p) throw ConfigError("explicit omega has dimension " + std::to_string(e->matrix.dim()));
        m = e->matrix;
    }
    return m;
}

// Builds Omega and certifies positive definiteness by factorization.
inline SparseSymMatrix build_omega(const OmegaSpec& spec, std::size_t p) {
    SparseSymMatrix m = build_omega_unchecked(spec, p);
    try {
        EnvelopeCholesky chol(m);
    } catch (const NotPositiveDefinite& e) {
        throw NotPositiveDefinite(describe(spec) + " at p=" + std::to_string(p) + " is not positive definite (" +
                                      e.what() + ")",
                                  e.index(), e.pivot());
    }
    return m;
}

// Largest eigenvalue of Omega^{-1} by power iteration on Cholesky solves.
inline double inverse_spectral_norm(const SparseSymMatrix& omega, int iterations = 200) {
    EnvelopeCholesky chol(omega);
    // A start vector with no special symmetry, so it is not an eigenvector of a structured Omega.
    Eigen::VectorXd v(static_cast<Eigen::Index>(omega.dim()));
    for (Eigen::Index j = 0; j < v.size(); ++j) v[j] = 1.0 + 0.5 * std::sin(1.0 + 0.7 * static_cast<double>(j));
    v.normalize();
    double lambda = 0.0;
    for (int it = 0; it < iterations; ++it) {
        Eigen::VectorXd w = chol.solve(v);
        lambda = v.dot(w);
        v = w.normalized();
    }
    return lambda;
}

struct SignalDraw {
    Eigen::VectorXd mu;
    std::vector<std::size_t> support;
};

// Each coordinate is a signal with probability eps; sqrt(n) mu(j) ~ H.
inline SignalDraw sample_mu(const RareWeakParams& params, const SignalDistribution& dist, Rng& rng) {
    SignalDraw d{Eigen::VectorXd::Zero(static_cast<Eigen::Index>(params.p)), {}};
    const double scale = 1.0 / std::sqrt(static_cast<double>(params.n));
    for (std::size_t j = 0; j < params.p; ++j) {
        if (!rng.bernoulli(params.eps)) continue;
        d.mu[j] = dist.draw(rng) * scale;
        d.support.push_back(j);
    }
    return d;
}

enum class Labeling { balanced, random, none };

// Samples are stored as columns: x is p x n.
struct Dataset {
    Eigen::MatrixXd x;
    std::vector<int> labels;
    std::string provenance;

    std::size_t p() const { return static_cast<std::size_t>(x.rows()); }
    std::size_t n() const { return static_cast<std::size_t>(x.cols()); }
    bool labeled() const { return !labels.empty(); }

    // Samples picked by index, keeping labels.
    Dataset subset(const std::vector<std::size_t>& idx) const {
        Dataset d;
        d.x.resize(x.rows(), static_cast<Eigen::Index>(idx.size()));
        for (std::size_t k = 0; k < idx.size(); ++k) {
            d.x.col(k) = x.col(idx[k]);
            if (labeled()) d.labels.push_back(labels[idx[k]]);
        }
        d.provenance = provenance;
        return d;
    }
};

// X_i = Y_i mu + L^{-T} xi with Omega = L L^T, so Cov(X_i) = Omega^{-1}.
inline Dataset sample_dataset(const Eigen::VectorXd& mu, const EnvelopeCholesky& chol, std::size_t n,
                              Labeling labeling, Rng& rng) {
    const auto p = static_cast<Eigen::Index>(chol.dim());
    if (mu.size() != p) throw UsageError("sample_dataset: mu has wrong length");
    Dataset d;
    d.x.resize(p, static_cast<Eigen::Index>(n));
    d.labels.reserve(labeling == Labeling::none ? 0 : n);
    Eigen::VectorXd xi(p);
    for (std::size_t i = 0; i < n; ++i) {
        int y = labeling == Labeling::balanced ? (i < n / 2 ? 1 : -1) : (rng.bernoulli(0.5) ? 1 : -1);
        for (Eigen::Index j = 0; j < p; ++j) xi[j] = rng.normal();
        chol.solve_upper_inplace(xi);
        d.x.col(static_cast<Eigen::Index>(i)) = xi + static_cast<double>(y) * mu;
        if (labeling != Labeling::none) d.labels.push_back(y);
    }
    d.provenance = "seed=" + std::to_string(rng.seed()) + " n=" + std::to_string(n) + " p=" + std::to_string(p);
    return d;
}

inline Dataset sample_dataset(const Eigen::VectorXd& mu, const SparseSymMatrix& omega, std::size_t n,
                              Labeling labeling, Rng& rng) {
    return sample_dataset(mu, EnvelopeCholesky(omega), n, labeling, rng);
}

struct ZVector {
    Eigen::VectorXd z;
    std::size_t n = 0;
};

inline ZVector z_vector(const Dataset& d) {
    if (!d.labeled()) throw UsageError("z_vector requires a labeled dataset");
    if (d.n() == 0) throw UsageError("z_vector requires at least one sample");
    Eigen::VectorXd y(static_cast<Eigen::Index>(d.n()));
    for (std::size_t i = 0; i < d.n(); ++i) y[i] = d.labels[i];
    return {d.x * y / std::sqrt(static_cast<double>(d.n())), d.n()};
}

// Draws z ~ N(sqrt(n) mu, Omega^{-1}) without forming samples.
inline ZVector draw_z(const Eigen::VectorXd& mu, const EnvelopeCholesky& chol, std::size_t n, Rng& rng) {
    Eigen::VectorXd xi(mu.size());
    for (Eigen::Index j = 0; j < mu.size(); ++j) xi[j] = rng.normal();
    chol.solve_upper_inplace(xi);
    return {xi + std::sqrt(static_cast<double>(n)) * mu, n};
}

// ---- text formats ----

using KeyValues = std::map<std::string, std::string>;

inline KeyValues read_key_values(std::istream& is) {
    KeyValues kv;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto t = detail::trim(line);
        if (t.empty()) continue;
        auto eq = t.find('=');
        if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key=value");
        kv[detail::trim(t.substr(0, eq))] = detail::trim(t.substr(eq + 1));
    }
    return kv;
}

inline void write_key_values(std::ostream& os, const KeyValues& kv) {
    for (const auto& [k, v] : kv) os << k << '=' << v << '\n';
}

inline KeyValues to_key_values(const RareWeakParams& q) {
    KeyValues kv{{"p", std::to_string(q.p)},
                 {"n", std::to_string(q.n)},
                 {"eps", detail::fmt_exact(q.eps)},
                 {"tau", detail::fmt_exact(q.tau)}};
    if (q.beta) kv["beta"] = detail::fmt_exact(*q.beta);
    if (q.r) kv["r"] = detail::fmt_exact(*q.r);
    if (q.theta) kv["theta"] = detail::fmt_exact(*q.theta);
    return kv;
}

// Exponent form if beta, r and theta are all present, else literal form.
inline RareWeakParams params_from_key_values(const KeyValues& kv) {
    auto get = [&](const std::string& k) -> std::optional<std::string> {
        auto it = kv.find(k);
        if (it == kv.end()) return std::nullopt;
        return it->second;
    };
    auto p = get("p");
    if (!p) throw ConfigError("missing key 'p'");
    auto pv = static_cast<std::size_t>(detail::parse_u64(*p, "p"));
    if (get("beta") && get("r") && get("theta") && !get("eps"))
        return RareWeakParams::from_exponents(pv, detail::parse_double(*get("beta"), "beta"),
                                              detail::parse_double(*get("r"), "r"),
                                              detail::parse_double(*get("theta"), "theta"));
    for (const char* k : {"n", "eps", "tau"})
        if (!get(k)) throw ConfigError(std::string("missing key '") + k + "'");
    return RareWeakParams::from_literals(pv, static_cast<std::size_t>(detail::parse_u64(*get("n"), "n")),
                                         detail::parse_double(*get("eps"), "eps"),
                                         detail::parse_double(*get("tau"), "tau"));
}

// CSV: header "label,x1,...,xp", one sample per row. Unlabeled rows carry "NA".
inline void write_dataset_csv(std::ostream& os, const Dataset& d) {
    os << "label";
    for (std::size_t j = 0; j < d.p(); ++j) os << ",x" << j + 1;
    os << '\n';
    char buf[40];
    for (std::size_t i = 0; i < d.n(); ++i) {
        os << (d.labeled() ? std::to_string(d.labels[i]) : std::string("NA"));
        for (std::size_t j = 0; j < d.p(); ++j) {
            std::snprintf(buf, sizeof buf, ",%.17g", d.x(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)));
            os << buf;
        }
        os << '\n';
    }
}

inline Dataset read_dataset_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw IoError("dataset CSV is empty");
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    bool any_na = false;
    std::size_t p = 0;
    int lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto cells = detail::split(line, ',');
        if (rows.empty()) p = cells.size() - 1;
        if (cells.size() != p + 1) throw IoError("dataset CSV line " + std::to_string(lineno) + ": wrong column count");
        if (cells[0] == "NA") {
            any_na = true;
        } else {
            int y = static_cast<int>(detail::parse_double(cells[0], "label"));
            if (y != 1 && y != -1) throw IoError("dataset CSV line " + std::to_string(lineno) + ": label must be +1/-1");
            labels.push_back(y);
        }
        std::vector<double> r(p);
        for (std::size_t j = 0; j < p; ++j) r[j] = detail::parse_double(cells[j + 1], "feature");
        rows.push_back(std::move(r));
    }
    if (any_na && !labels.empty()) throw IoError("dataset CSV mixes labeled and unlabeled rows");
    Dataset d;
    d.x.resize(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < p; ++j) d.x(j, i) = rows[i][j];
    d.labels = std::move(labels);
    d.provenance = "csv";
    return d;
}

}  // namespace rwc
