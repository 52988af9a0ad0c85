#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include <rwc/threshold.hpp>

using namespace rwc;

namespace {

// Direct evaluation of the HC formula, one j at a time.
double hc_oracle(std::vector<double> pi, std::size_t j) {
    std::sort(pi.begin(), pi.end());
    const double p = static_cast<double>(pi.size());
    const double f = static_cast<double>(j) / p;
    return std::sqrt(p) * (f - pi[j - 1]) / std::sqrt(f * (1.0 - f));
}

Eigen::VectorXd vec(std::initializer_list<double> v) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out[i++] = x;
    return out;
}

}  // namespace

TEST(Transform, IdentityLeavesZAlone) {
    auto z = vec({0.5, -1.0, 2.0, 0.0});
    for (auto mode : {TransformMode::innovated, TransformMode::brute_force, TransformMode::whitened})
        EXPECT_LT((transform(z, SparseSymMatrix::identity(4), mode) - z).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Transform, InnovatedTridiagonal) {
    auto om = build_omega(omega::Tridiagonal{0.4}, 3);
    EXPECT_EQ(transform(vec({0, 1, 0}), om, TransformMode::innovated), vec({0.4, 1, 0.4}));
}

TEST(Transform, PairedBlockSnr) {
    const double h = 0.6, tau = 3.0;
    auto om = build_omega(omega::PairedBlock{h}, 2);
    auto mean = vec({tau, 0.0});
    auto it = coordinate_snr(om, om, TransformMode::innovated, mean);
    auto bt = coordinate_snr(om, om, TransformMode::brute_force, mean);
    auto wt = coordinate_snr(om, om, TransformMode::whitened, mean);
    EXPECT_NEAR(it.maxCoeff(), tau, 1e-12);
    EXPECT_NEAR(bt.maxCoeff(), std::sqrt(1 - h * h) * tau, 1e-12);
    EXPECT_NEAR(wt.maxCoeff(), (std::sqrt(1 + h) + std::sqrt(1 - h)) / 2 * tau, 1e-12);
    EXPECT_NEAR(wt.maxCoeff() / tau, 0.94868, 1e-5);
    EXPECT_GT(it.maxCoeff(), wt.maxCoeff());
    EXPECT_GT(wt.maxCoeff(), bt.maxCoeff());
}

TEST(Transform, WhitenedMatchesDenseSquareRoot) {
    auto om = build_omega(omega::FiveDiagonal{0.35, 0.2}, 30);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(om.to_dense());
    Eigen::MatrixXd root = es.operatorSqrt();
    Rng rng(5);
    Eigen::VectorXd z(30);
    for (auto& v : z) v = rng.normal();
    EXPECT_LT((transform(z, om, TransformMode::whitened) - root * z).cwiseAbs().maxCoeff(), 1e-12);
    // Block-diagonal input takes the per-component path.
    auto pb = build_omega(omega::PairedBlock{0.6}, 7);
    Eigen::MatrixXd pb_root = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(pb.to_dense()).operatorSqrt();
    EXPECT_LT((transform(z.head(7), pb, TransformMode::whitened) - pb_root * z.head(7)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Transform, WhitenedRejectsIndefinite) {
    SparseSymMatrix m(2, 1.0);
    m.set(0, 1, 2.0);
    EXPECT_THROW(transform(vec({1, 1}), m, TransformMode::whitened), DomainError);
    EXPECT_THROW(transform(vec({1, 1, 1}), m, TransformMode::innovated), UsageError);
}

TEST(Pvalues, Examples) {
    auto pi = pvalues(vec({0.0, 1.959964, -1.959964, 3.0, 8.0}));
    EXPECT_EQ(pi[0], 1.0);
    EXPECT_NEAR(pi[1], 0.05, 1e-7);
    EXPECT_EQ(pi[1], pi[2]);
    EXPECT_GT(pi[1], pi[3]);
    EXPECT_GT(pi[3], pi[4]);
    EXPECT_GT(pi[4], 0.0);
}

TEST(HcCurve, FourPoints) {
    auto hc = hc_curve(vec({0.3, 0.1, 0.4, 0.2}));
    ASSERT_EQ(hc.size(), 3u);
    const std::vector<double> pi{0.1, 0.2, 0.3, 0.4};
    for (std::size_t j = 1; j <= 3; ++j) EXPECT_NEAR(hc[j - 1], hc_oracle(pi, j), 1e-12);
    EXPECT_NEAR(hc[0], 0.6928, 1e-4);
    EXPECT_NEAR(hc[1], 1.2000, 1e-4);
    EXPECT_NEAR(hc[2], 2.0785, 1e-4);
}

TEST(HcCurve, UniformGridGivesZero) {
    Eigen::VectorXd pi(8);
    for (int j = 0; j < 8; ++j) pi[j] = (j + 1) / 8.0;
    for (double v : hc_curve(pi)) EXPECT_EQ(v, 0.0);
    EXPECT_THROW(hc_curve(vec({0.5})), UsageError);
}

TEST(HcCurve, MatchesOracleAtSmallP) {
    Rng rng(17);
    for (std::size_t p : {4u, 16u, 64u}) {
        Eigen::VectorXd pi(static_cast<Eigen::Index>(p));
        for (auto& v : pi) v = rng.uniform();
        std::vector<double> raw(pi.data(), pi.data() + p);
        auto hc = hc_curve(pi);
        for (std::size_t j = 1; j < p; ++j) EXPECT_NEAR(hc[j - 1], hc_oracle(raw, j), 1e-12);
    }
}

TEST(HcCurve, NullCalibration) {
    const std::size_t p = 10000;
    int below = 0;
    Rng rng(23);
    Eigen::VectorXd pi(static_cast<Eigen::Index>(p));
    for (int rep = 0; rep < 1000; ++rep) {
        for (auto& v : pi) v = rng.uniform();
        auto hc = hc_curve(pi);
        if (*std::max_element(hc.begin(), hc.end()) <= 4.0) ++below;
    }
    // An independent 4000-run simulation puts P(max HC <= 4) at 0.937; 3 sd of 1000 draws is 0.023.
    EXPECT_GE(below, 914);
    EXPECT_LE(below, 960);
}

TEST(HcThreshold, NothingAdmissibleGoesToSStar) {
    auto r = hc_threshold(vec({0.1, -0.5, 0.3, 0.6}), 0.0, 1.6);
    EXPECT_EQ(r.clamped_threshold, 1.6);
    EXPECT_EQ(r.clamp_applied, Clamp::upper);
    EXPECT_EQ(r.jhat, 0u);
    EXPECT_TRUE(r.selected.empty());
}

TEST(HcThreshold, LowerClamp) {
    // Every admissible value sits below s_tilde = 1.5.
    auto r = hc_threshold(vec({1.2, 1.1, 0.9, 0.2, 0.1, 0.05}), 1.5, 1.8);
    EXPECT_GT(r.jhat, 0u);
    EXPECT_LT(r.raw_threshold, 1.5);
    EXPECT_EQ(r.clamped_threshold, 1.5);
    EXPECT_EQ(r.clamp_applied, Clamp::lower);
    EXPECT_THROW(hc_threshold(Eigen::VectorXd(), 0.0, 1.0), UsageError);
}

TEST(HcThreshold, ArgmaxOverAdmissibleRange) {
    Rng rng(29);
    Eigen::VectorXd z(200);
    for (auto& v : z) v = rng.normal() + (rng.bernoulli(0.1) ? 3.0 : 0.0);
    const double s_star = std::sqrt(2 * std::log(200.0));
    auto r = hc_threshold(z, 0.0, s_star);
    ASSERT_GT(r.jhat, 0u);
    // Independent scan of admissible j; ties go to the smaller j.
    std::vector<double> a(z.data(), z.data() + z.size());
    for (auto& v : a) v = std::abs(v);
    std::sort(a.begin(), a.end(), std::greater<>());
    std::vector<double> pi(a.size());
    for (std::size_t j = 0; j < a.size(); ++j) pi[j] = 2.0 * normal_sf(a[j]);
    std::size_t best = 0;
    double best_v = -INFINITY;
    for (std::size_t j = 1; j < a.size(); ++j) {
        if (!(a[j - 1] < s_star && a[j - 1] > 0.6744897501960817)) continue;
        double v = hc_oracle(pi, j);
        if (v > best_v) {
            best_v = v;
            best = j;
        }
    }
    EXPECT_EQ(r.jhat, best);
    EXPECT_EQ(r.raw_threshold, a[best - 1]);
}

TEST(HcThreshold, InvariantsOnRandomInputs) {
    Rng rng(31);
    for (int rep = 0; rep < 200; ++rep) {
        const std::size_t p = 2 + static_cast<std::size_t>(rng.uniform() * 300);
        Eigen::VectorXd z(static_cast<Eigen::Index>(p));
        for (auto& v : z) v = rng.normal() * (0.5 + 2 * rng.uniform());
        const double s_star = std::sqrt(2 * std::log(static_cast<double>(p)));
        const double s_tilde = rng.uniform() * s_star;
        auto r = hc_threshold(z, s_tilde, s_star);
        EXPECT_GE(r.clamped_threshold, s_tilde);
        EXPECT_LE(r.clamped_threshold, s_star);
        for (Eigen::Index j = 0; j < z.size(); ++j) {
            bool in = std::find(r.selected.begin(), r.selected.end(), static_cast<std::size_t>(j)) != r.selected.end();
            EXPECT_EQ(in, std::abs(z[j]) >= r.clamped_threshold);
        }
    }
}

TEST(HcThreshold, ExperimentScaleMean) {
    auto q = RareWeakParams::from_literals(3000, 2000, 0.1, 4.0);
    EnvelopeCholesky chol(SparseSymMatrix::identity(3000));
    double sum = 0.0;
    for (std::uint64_t s = 0; s < 25; ++s) {
        Rng rng = Rng::stream(77, {s});
        auto mu = sample_mu(q, SignalDistribution::point_mass(4.0), rng).mu;
        sum += hc_threshold(draw_z(mu, chol, q.n, rng).z, q).clamped_threshold;
    }
    EXPECT_GE(sum / 25, 1.5);
    EXPECT_LE(sum / 25, 3.5);
}

TEST(HcThreshold, NullSelectionAtSStar) {
    const std::size_t p = 1000;
    const double s_star = std::sqrt(2 * std::log(static_cast<double>(p)));
    Rng rng(37);
    double total = 0.0;
    Eigen::VectorXd z(static_cast<Eigen::Index>(p));
    for (int rep = 0; rep < 1000; ++rep) {
        for (auto& v : z) v = rng.normal();
        total += static_cast<double>((clip_estimate(z, s_star).array() != 0.0).count()) / p;
    }
    EXPECT_LE(total / 1000, 2.0 / p);
}

TEST(Clip, Examples) {
    EXPECT_EQ(clip_estimate(vec({2, -3, 0.5}), 1.0), vec({1, -1, 0}));
    EXPECT_EQ(clip_estimate(vec({2, -3, 0}), 0.0), vec({1, -1, 0}));
    EXPECT_EQ(clip_estimate(vec({2, -3, 0.5}), 4.0), vec({0, 0, 0}));
    EXPECT_THROW(clip_estimate(vec({1}), -1.0), DomainError);
}

TEST(Clip, SelectionShrinksWithT) {
    Rng rng(41);
    Eigen::VectorXd z(500);
    for (auto& v : z) v = rng.normal();
    long prev = 501;
    for (double t = 0.0; t < 4.0; t += 0.1) {
        long k = (clip_estimate(z, t).array() != 0.0).count();
        EXPECT_LE(k, prev);
        prev = k;
    }
}

TEST(HcThreshold, CsvExport) {
    auto r = hc_threshold(vec({3.0, 1.0, 0.2}), 0.0, 1.5);
    std::stringstream ss;
    write_threshold_csv(ss, r);
    std::string header;
    std::getline(ss, header);
    EXPECT_EQ(header, "j,abs_z,pvalue,hc,admissible");
    int lines = 0;
    for (std::string l; std::getline(ss, l);) ++lines;
    EXPECT_EQ(lines, 2);
}
