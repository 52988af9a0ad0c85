// Simulate one rare/weak dataset, fit HCT with an estimated precision matrix, report test error.
#include <cstdio>

#include <rwc/rwc.hpp>

int main() {
    using namespace rwc;
    RareWeakParams q = RareWeakParams::from_exponents(4000, 0.5, 0.5, 0.6);
    SparseSymMatrix omega = build_omega(parse_omega_spec("tridiagonal:0.3"), q.p);
    Rng rng(7);
    SignalDraw s = sample_mu(q, SignalDistribution::point_mass(q.tau), rng);
    Dataset train = sample_dataset(s.mu, omega, q.n, Labeling::balanced, rng);
    Dataset test = sample_dataset(s.mu, omega, 400, Labeling::balanced, rng);

    EstimationConfig cfg;
    PrecisionEstimate est = estimate_precision(train, cfg);
    ClassifierModel hct = fit_hct(train, est.omega_hat, q, TransformMode::innovated, OmegaSource::estimated);
    ClassifierModel ideal = fit_ohct(train, q);

    std::printf("p=%zu n=%zu eps=%.4f tau=%.3f signals=%zu\n", q.p, q.n, q.eps, q.tau, s.support.size());
    std::printf("HCT  threshold=%.3f selected=%zu error=%.4f\n", hct.threshold, hct.selected_count(),
                evaluate(hct, test));
    std::printf("oHCT threshold=%.3f selected=%zu error=%.4f\n", ideal.threshold, ideal.selected_count(),
                evaluate(ideal, test));
}
