// Command-line front end: simulate, estimate, fit, classify, experiment, sweep, theory.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <rwc/rwc.hpp>

using namespace rwc;

namespace {

std::ifstream open_in(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open '" + path + "'");
    return is;
}

// Writes to path, or to stdout when path is empty or "-".
template <class F>
void with_output(const std::string& path, F&& body) {
    if (path.empty() || path == "-") {
        body(std::cout);
        return;
    }
    std::ofstream os(path);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    body(os);
    if (!os) throw IoError("failed writing '" + path + "'");
}

std::vector<double> parse_list(const std::string& s) {
    std::vector<double> v;
    for (const auto& part : detail::split(s, ','))
        if (!detail::trim(part).empty()) v.push_back(detail::parse_double(detail::trim(part), "list entry"));
    return v;
}

// Expands "lo:step:hi" or a comma list.
std::vector<double> parse_grid(const std::string& s) {
    auto parts = detail::split(s, ':');
    if (parts.size() == 3)
        return detail::linspace_step(detail::parse_double(parts[0], "grid start"), detail::parse_double(parts[2], "grid end"),
                                     detail::parse_double(parts[1], "grid step"));
    return parse_list(s);
}

struct ParamFlags {
    std::size_t p = 1000;
    std::optional<std::size_t> n;
    std::optional<double> eps, tau, beta, r, theta;

    void add(CLI::App* cmd) {
        cmd->add_option("--p", p, "dimension");
        cmd->add_option("--n", n, "training sample size");
        cmd->add_option("--eps", eps, "signal fraction");
        cmd->add_option("--tau", tau, "signal strength");
        cmd->add_option("--beta", beta, "sparsity exponent");
        cmd->add_option("--r", r, "strength exponent");
        cmd->add_option("--theta", theta, "sample size exponent");
    }

    RareWeakParams params() const {
        if (beta && r && theta) return RareWeakParams::from_exponents(p, *beta, *r, *theta);
        if (n && eps && tau) return RareWeakParams::from_literals(p, *n, *eps, *tau);
        throw UsageError("give either --n --eps --tau or --beta --r --theta");
    }
};

int run_simulate(const ParamFlags& pf, const std::string& omega_spec, const std::string& signal,
                 const std::string& labels, std::size_t count, std::uint64_t seed, const std::string& out,
                 const std::string& mu_out) {
    RareWeakParams q = pf.params();
    SparseSymMatrix om = build_omega(parse_omega_spec(omega_spec), q.p);
    SignalDistribution dist = signal.empty() ? SignalDistribution::point_mass(q.tau) : SignalDistribution::parse(signal);
    Rng rng(seed);
    SignalDraw s = sample_mu(q, dist, rng);
    Labeling lab = labels == "balanced" ? Labeling::balanced : labels == "random" ? Labeling::random : Labeling::none;
    Dataset d = sample_dataset(s.mu, om, count == 0 ? q.n : count, lab, rng);
    with_output(out, [&](std::ostream& os) { write_dataset_csv(os, d); });
    if (!mu_out.empty())
        with_output(mu_out, [&](std::ostream& os) {
            os << "j,mu\n";
            for (Eigen::Index j = 0; j < s.mu.size(); ++j) os << j << ',' << detail::fmt_exact(s.mu[j]) << '\n';
        });
    return 0;
}

int run_estimate(const std::string& in, std::optional<double> eta, std::optional<double> zeta,
                 std::optional<std::size_t> k, const std::string& out) {
    auto is = open_in(in);
    Dataset d = read_dataset_csv(is);
    EstimationConfig cfg;
    cfg.eta = EtaFixed{eta.value_or(0.1)};
    if (zeta && k) throw UsageError("--zeta and --k are exclusive");
    if (k) cfg.zeta = ZetaTargetRow{*k};
    else cfg.zeta = ZetaFixed{zeta.value_or(0.1)};
    cfg.threads = default_threads();
    PrecisionEstimate est = estimate_precision(d, cfg);
    with_output(out, [&](std::ostream& os) { write_triplets(os, est.omega_hat); });
    std::fprintf(stderr, "eta=%g ridge=%g row_sparsity=%zu asymmetry=%.3g\n", est.eta, est.ridge,
                 est.omega_hat.sparsity_degree(), est.asymmetry);
    return 0;
}

int run_fit(const std::string& in, const std::string& method, const std::string& omega_spec,
            const std::string& omega_file, const std::string& mode_name, std::uint64_t seed, const std::string& out) {
    auto is = open_in(in);
    Dataset d = read_dataset_csv(is);
    // The threshold needs only s* and s~, which depend on (p, n).
    RareWeakParams q = RareWeakParams::from_literals(d.p(), d.n(), 0.0, 0.0);
    SparseSymMatrix om = SparseSymMatrix::identity(d.p());
    OmegaSource src = OmegaSource::true_matrix;
    if (!omega_file.empty()) {
        auto os = open_in(omega_file);
        om = read_triplets(os);
        src = OmegaSource::estimated;
    } else if (!omega_spec.empty()) {
        om = build_omega(parse_omega_spec(omega_spec), d.p());
    }
    TransformMode mode = parse_transform_mode(mode_name);
    ClassifierModel m;
    if (method == "oHCT") {
        m = fit_ohct(d, q);
    } else if (method == "HCT") {
        if (omega_file.empty() && omega_spec.empty()) {
            EstimationConfig cfg;
            cfg.threads = default_threads();
            om = estimate_precision(d, cfg).omega_hat;
        }
        m = fit_hct(d, om, q, mode, OmegaSource::estimated);
    } else if (method == "pHCT") {
        m = fit_hct(d, om, q, mode, src);
    } else if (method == "CVT") {
        Rng rng(seed);
        m = fit_cvt(d, om, q, CvConfig{}, rng, mode, src);
    } else {
        throw UsageError("unknown method '" + method + "'");
    }
    with_output(out, [&](std::ostream& os) { write_model(os, m); });
    std::fprintf(stderr, "threshold=%g selected=%zu\n", m.threshold, m.selected_count());
    return 0;
}

int run_classify(const std::string& model_path, const std::string& in, const std::string& out) {
    auto ms = open_in(model_path);
    ClassifierModel m = read_model(ms);
    auto is = open_in(in);
    Dataset d = read_dataset_csv(is);
    if (d.p() != static_cast<std::size_t>(m.w.size())) throw UsageError("model and data dimensions differ");
    with_output(out, [&](std::ostream& os) {
        os << "prediction,score\n";
        for (std::size_t i = 0; i < d.n(); ++i) {
            double s = score(m, d.x.col(static_cast<Eigen::Index>(i)));
            os << (s >= 0.0 ? 1 : -1) << ',' << detail::fmt_exact(s) << '\n';
        }
    });
    if (d.labeled()) {
        Evaluation e = evaluate_detailed(m, d);
        std::fprintf(stderr, "error=%.6g count=%zu zero_scores=%zu\n", e.error, e.count, e.zero_scores);
    }
    return 0;
}

int run_theory(const std::string& curve, const ParamFlags& pf, const std::string& omega_spec, std::size_t reps,
               std::size_t points, std::uint64_t seed, const std::string& out) {
    with_output(out, [&](std::ostream& os) {
        char buf[256];
        if (curve == "rho") {
            const double theta = pf.theta.value_or(0.0);
            os << "beta,rho,rho_star\n";
            for (std::size_t k = 1; k < points; ++k) {
                double b = static_cast<double>(k) / static_cast<double>(points);
                bool in = b >= (1 - theta) / 2 && b < 1 - theta;
                std::snprintf(buf, sizeof buf, "%.6g,%.10g,", b, rho(b));
                os << buf;
                if (in) os << detail::fmt6(rho_star(b, theta));
                os << '\n';
            }
            return;
        }
        if (curve == "delta") {
            const double beta = pf.beta.value_or(0.6);
            os << "r,delta,t_star_over_tau\n";
            for (std::size_t k = 1; k < points; ++k) {
                double r = static_cast<double>(k) / static_cast<double>(points);
                std::snprintf(buf, sizeof buf, "%.6g,%.10g,%.10g\n", r, delta(beta, r), t_star(beta, r, 1.0));
                os << buf;
            }
            return;
        }
        RareWeakParams q = pf.params();
        SparseSymMatrix om = build_omega(parse_omega_spec(omega_spec), q.p);
        Rng rng(seed);
        if (curve == "w0") {
            std::optional<PopulationSurvival> pop;
            if (!om.is_diagonal()) pop.emplace(q, om, SignalDistribution::point_mass(q.tau), reps, rng);
            auto ideal = ideal_threshold(q);
            os << "t,w0_tilde,w0,hc\n";
            SurvivalFn g = pop ? pop->f_bar_fn() : SurvivalFn::mixture(q.eps, q.tau);
            for (std::size_t k = 1; k < points; ++k) {
                double t = q.s_star * static_cast<double>(k) / static_cast<double>(points);
                double w = pop ? w0_full(t, q, *pop) : w0_tilde(t, q.eps, q.tau);
                std::snprintf(buf, sizeof buf, "%.6g,%.10g,%.10g,%.10g\n", t, w0_tilde(t, q.eps, q.tau), w,
                              hc_functional(t, g, q.p));
                os << buf;
            }
            std::fprintf(stderr, "ideal_threshold=%.6g s_star=%.6g\n", ideal.t, q.s_star);
            return;
        }
        if (curve == "sep") {
            os << "t,m,v,sep,sep_se\n";
            for (std::size_t k = 1; k < points; ++k) {
                double t = q.s_star * static_cast<double>(k) / static_cast<double>(points);
                double m, v, sep, se = 0.0;
                if (om.is_diagonal() && om.has_unit_diagonal()) {
                    auto r = sep_identity_closed_form(t, q);
                    m = r.m, v = r.v, sep = r.sep;
                } else {
                    auto r = sep_tilde(t, q, om, reps, rng);
                    m = r.m, v = r.v, sep = r.sep, se = r.sep_se;
                }
                std::snprintf(buf, sizeof buf, "%.6g,%.10g,%.10g,%.10g,%.4g\n", t, m, v, sep, se);
                os << buf;
            }
            return;
        }
        throw UsageError("unknown curve '" + curve + "' (rho, delta, w0, sep)");
    });
    return 0;
}

int run_experiment_cmd(const std::string& preset, std::optional<std::uint64_t> seed, std::optional<std::size_t> reps,
                       const std::string& config_path, const std::string& format, const std::string& out) {
    KeyValues kv;
    if (!config_path.empty()) {
        auto is = open_in(config_path);
        kv = read_key_values(is);
    }
    std::string name = preset;
    if (auto it = kv.find("preset"); it != kv.end()) name = it->second;
    if (name == "phase_sweep") throw UsageError("use the sweep subcommand for phase_sweep");
    // Presets, then flags, then the config file.
    ExperimentConfig c = name == "custom" ? custom_config({}) : preset_config(name);
    if (seed) c.seed = *seed;
    if (reps) c.reps = *reps;
    apply_overrides(c, kv);
    c.threads = default_threads();
    ResultTable t = run_experiment(c);
    OutputFormat f = parse_output_format(format);
    with_output(out, [&](std::ostream& os) { emit(t, f, os); });
    return 0;
}

int run_sweep(SweepConfig s, const std::string& beta_grid, const std::string& r_grid, const std::string& omega_spec,
              const std::string& methods, const std::string& format, const std::string& out) {
    if (!beta_grid.empty()) s.beta_grid = parse_grid(beta_grid);
    if (!r_grid.empty()) s.r_grid = parse_grid(r_grid);
    s.omega = parse_omega_spec(omega_spec);
    if (!methods.empty()) {
        s.methods.clear();
        for (auto& m : detail::split(methods, ',')) s.methods.push_back(parse_method(detail::trim(m)));
    }
    s.threads = default_threads();
    ResultTable t = phase_sweep(s);
    for (const auto& note : t.notes) std::fprintf(stderr, "note: %s\n", note.c_str());
    OutputFormat f = parse_output_format(format);
    with_output(out, [&](std::ostream& os) { emit(t, f, os); });
    return 0;
}

int exit_code(const std::exception& e) {
    if (dynamic_cast<const UsageError*>(&e)) return 2;
    if (dynamic_cast<const ConfigError*>(&e)) return 3;
    if (dynamic_cast<const IoError*>(&e)) return 4;
    if (dynamic_cast<const DomainError*>(&e)) return 5;
    if (dynamic_cast<const ResourceError*>(&e)) return 6;
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Higher Criticism thresholding for rare/weak classification"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    auto* sim = app.add_subcommand("simulate", "draw a labeled dataset from the model");
    ParamFlags sim_p;
    sim_p.add(sim);
    std::string sim_omega = "identity", sim_signal, sim_labels = "balanced", sim_out, sim_mu_out;
    std::size_t sim_count = 0;
    std::uint64_t sim_seed = 1;
    sim->add_option("--omega", sim_omega, "precision matrix, e.g. tridiagonal:0.45");
    sim->add_option("--signal", sim_signal, "signal law, e.g. point:4 or uniform:3.5,4.5");
    sim->add_option("--labels", sim_labels, "balanced, random or none")
        ->check(CLI::IsMember({"balanced", "random", "none"}));
    sim->add_option("--count", sim_count, "number of samples (default n)");
    sim->add_option("--seed", sim_seed, "random seed");
    sim->add_option("--out", sim_out, "output CSV (default stdout)");
    sim->add_option("--mu-out", sim_mu_out, "also write the contrast mean");

    auto* est = app.add_subcommand("estimate", "estimate the precision matrix from training data");
    std::string est_in, est_out;
    std::optional<double> est_eta, est_zeta;
    std::optional<std::size_t> est_k;
    est->add_option("--in", est_in, "training CSV")->required();
    est->add_option("--eta", est_eta, "covariance threshold");
    est->add_option("--zeta", est_zeta, "precision threshold");
    est->add_option("--k", est_k, "keep k entries per row instead of --zeta");
    est->add_option("--out", est_out, "triplet file (default stdout)");

    auto* fit = app.add_subcommand("fit", "fit a classifier");
    std::string fit_in, fit_method = "pHCT", fit_omega, fit_omega_file, fit_mode = "IT", fit_out;
    std::uint64_t fit_seed = 1;
    fit->add_option("--in", fit_in, "training CSV")->required();
    fit->add_option("--method", fit_method, "HCT, pHCT, oHCT or CVT");
    fit->add_option("--omega", fit_omega, "known precision matrix spec");
    fit->add_option("--omega-file", fit_omega_file, "precision matrix as triplets");
    fit->add_option("--mode", fit_mode, "IT, BT or WT");
    fit->add_option("--seed", fit_seed, "seed for CVT folds");
    fit->add_option("--out", fit_out, "model file (default stdout)");

    auto* cls = app.add_subcommand("classify", "score a dataset with a fitted model");
    std::string cls_model, cls_in, cls_out;
    cls->add_option("--model", cls_model, "model file")->required();
    cls->add_option("--in", cls_in, "data CSV")->required();
    cls->add_option("--out", cls_out, "predictions CSV (default stdout)");

    auto* exp = app.add_subcommand("experiment", "run a simulation preset");
    std::string exp_preset = "exp2a", exp_config, exp_format = "csv", exp_out;
    std::optional<std::uint64_t> exp_seed;
    std::optional<std::size_t> exp_reps;
    exp->add_option("--preset", exp_preset, "exp1a, exp1b, exp1c, exp2a, exp2b, exp3 or custom");
    exp->add_option("--seed", exp_seed, "random seed");
    exp->add_option("--reps", exp_reps, "repetitions per point");
    exp->add_option("--config", exp_config, "key=value file; overrides flags");
    exp->add_option("--format", exp_format, "csv, json or plot")->check(CLI::IsMember({"csv", "json", "plot"}));
    exp->add_option("--out", exp_out, "output path (default stdout)");

    auto* sw = app.add_subcommand("sweep", "map error over a (beta, r) grid");
    SweepConfig sw_cfg;
    std::string sw_beta, sw_r, sw_omega = "tridiagonal:0.3", sw_methods, sw_format = "csv", sw_out;
    sw->add_option("--theta", sw_cfg.theta, "sample size exponent");
    sw->add_option("--p", sw_cfg.p, "dimension");
    sw->add_option("--beta-grid", sw_beta, "comma list or lo:step:hi");
    sw->add_option("--r-grid", sw_r, "comma list or lo:step:hi");
    sw->add_option("--reps", sw_cfg.reps, "repetitions per point");
    sw->add_option("--seed", sw_cfg.seed, "random seed");
    sw->add_option("--omega", sw_omega, "precision matrix spec");
    sw->add_option("--methods", sw_methods, "comma list, default pHCT");
    sw->add_option("--format", sw_format, "csv, json or plot")->check(CLI::IsMember({"csv", "json", "plot"}));
    sw->add_option("--out", sw_out, "output path (default stdout)");

    auto* th = app.add_subcommand("theory", "tabulate a theoretical curve");
    ParamFlags th_p;
    th_p.add(th);
    std::string th_curve = "rho", th_omega = "identity", th_out;
    std::size_t th_reps = 200, th_points = 100;
    std::uint64_t th_seed = 1;
    th->add_option("--curve", th_curve, "rho, delta, w0 or sep")->check(CLI::IsMember({"rho", "delta", "w0", "sep"}));
    th->add_option("--omega", th_omega, "precision matrix spec for w0 and sep");
    th->add_option("--reps", th_reps, "Monte Carlo repetitions");
    th->add_option("--points", th_points, "grid size");
    th->add_option("--seed", th_seed, "random seed");
    th->add_option("--out", th_out, "output CSV (default stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*sim) return run_simulate(sim_p, sim_omega, sim_signal, sim_labels, sim_count, sim_seed, sim_out, sim_mu_out);
        if (*est) return run_estimate(est_in, est_eta, est_zeta, est_k, est_out);
        if (*fit) return run_fit(fit_in, fit_method, fit_omega, fit_omega_file, fit_mode, fit_seed, fit_out);
        if (*cls) return run_classify(cls_model, cls_in, cls_out);
        if (*exp) return run_experiment_cmd(exp_preset, exp_seed, exp_reps, exp_config, exp_format, exp_out);
        if (*sw) return run_sweep(sw_cfg, sw_beta, sw_r, sw_omega, sw_methods, sw_format, sw_out);
        if (*th) return run_theory(th_curve, th_p, th_omega, th_reps, th_points, th_seed, th_out);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "rwc: error: %s\n", e.what());
        return exit_code(e);
    }
    return 0;
}
