#include <gtest/gtest.h>

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <cmath>
#include <numbers>
#include <sstream>

#include <rwc/model.hpp>

using namespace rwc;
using mp = boost::multiprecision::cpp_bin_float_50;

TEST(Params, LiteralFormMatchesExperimentSetting) {
    auto q = RareWeakParams::from_literals(3000, 2000, 0.1, 4.0);
    EXPECT_EQ(q.p, 3000u);
    EXPECT_EQ(q.n, 2000u);
    EXPECT_EQ(q.eps, 0.1);
    EXPECT_EQ(q.tau, 4.0);
    double ref = static_cast<double>(boost::multiprecision::sqrt(2 * boost::multiprecision::log(mp(3000))));
    EXPECT_NEAR(q.s_star, ref, 1e-14);
    EXPECT_NEAR(q.s_star, 4.0016, 1e-4);
    EXPECT_EQ(q.s_tilde, 0.0);
    EXPECT_LE(q.s_tilde, q.s_star);
}

TEST(Params, ExponentForm) {
    auto q = RareWeakParams::from_exponents(10000, 0.5, 0.3, 0.4);
    EXPECT_EQ(q.n, 40u);  // 10^1.6 = 39.8
    EXPECT_NEAR(q.eps, 0.01, 1e-15);
    EXPECT_NEAR(q.tau, std::sqrt(0.6 * std::log(10000.0)), 1e-14);
    EXPECT_GT(q.eps, 0.0);
    EXPECT_LT(q.eps, 1.0);
    EXPECT_LE(q.s_tilde, q.s_star);
    // n floors at 2.
    EXPECT_EQ(RareWeakParams::from_exponents(4, 0.5, 0.5, 0.01).n, 2u);
}

TEST(Params, STildeEqualsSThetaWhenNIsExact) {
    auto q = RareWeakParams::from_exponents(10000, 0.5, 0.3, 0.25);
    EXPECT_EQ(q.n, 10u);
    EXPECT_NEAR(q.s_tilde, q.s_theta(), 1e-12);
    auto big = RareWeakParams::from_exponents(10000, 0.5, 0.3, 0.5);
    EXPECT_EQ(big.s_tilde, 0.0);
    EXPECT_EQ(big.s_theta(), 0.0);
}

TEST(Params, RejectsOutOfDomain) {
    EXPECT_THROW(RareWeakParams::from_exponents(100, 0.0, 0.3, 0.3), DomainError);
    EXPECT_THROW(RareWeakParams::from_exponents(100, 0.5, 1.0, 0.3), DomainError);
    EXPECT_THROW(RareWeakParams::from_exponents(100, 0.5, 0.3, -0.1), DomainError);
    EXPECT_THROW(RareWeakParams::from_exponents(1, 0.5, 0.3, 0.3), DomainError);
    EXPECT_THROW(RareWeakParams::from_literals(100, 10, 1.5, 1.0), DomainError);
}

TEST(SampleMu, NoSignals) {
    auto q = RareWeakParams::from_literals(500, 10, 0.0, 3.0);
    Rng rng(1);
    auto d = sample_mu(q, SignalDistribution::point_mass(3.0), rng);
    EXPECT_TRUE(d.mu.isZero(0.0));
    EXPECT_TRUE(d.support.empty());
}

TEST(SampleMu, AllSignals) {
    auto q = RareWeakParams::from_literals(500, 16, 1.0, 3.0);
    Rng rng(1);
    auto d = sample_mu(q, SignalDistribution::point_mass(3.0), rng);
    EXPECT_EQ(d.support.size(), 500u);
    for (Eigen::Index j = 0; j < 500; ++j) EXPECT_EQ(d.mu[j], 3.0 / 4.0);
}

TEST(SampleMu, SupportFractionConcentrates) {
    auto q = RareWeakParams::from_literals(100000, 10, 0.1, 3.0);
    Rng rng(5);
    auto d = sample_mu(q, SignalDistribution::point_mass(3.0), rng);
    EXPECT_NEAR(static_cast<double>(d.support.size()) / 1e5, 0.1, 0.005);
}

TEST(SampleMu, UniformDrawsStayInRange) {
    auto q = RareWeakParams::from_literals(2000, 25, 0.5, 3.0);
    Rng rng(2);
    auto d = sample_mu(q, SignalDistribution::uniform(2.5, 3.5), rng);
    for (auto j : d.support) {
        EXPECT_GE(d.mu[static_cast<Eigen::Index>(j)] * 5.0, 2.5);
        EXPECT_LE(d.mu[static_cast<Eigen::Index>(j)] * 5.0, 3.5);
    }
    EXPECT_THROW(SignalDistribution::uniform(0.0, 1.0), DomainError);
}

TEST(BuildOmega, TridiagonalRow) {
    auto m = build_omega(omega::Tridiagonal{0.45}, 4);
    EXPECT_EQ(m(0, 0), 1.0);
    EXPECT_EQ(m(0, 1), 0.45);
    EXPECT_EQ(m(0, 2), 0.0);
    EXPECT_EQ(m.row_nonzeros(0), 2u);
    EXPECT_EQ(m.sparsity_degree(), 3u);
    EXPECT_TRUE(m.has_unit_diagonal());
}

TEST(BuildOmega, PairedBlock) {
    auto m = build_omega(omega::PairedBlock{0.6}, 4);
    Eigen::Matrix4d ref;
    ref << 1, 0.6, 0, 0, 0.6, 1, 0, 0, 0, 0, 1, 0.6, 0, 0, 0.6, 1;
    EXPECT_EQ(m.to_dense(), Eigen::MatrixXd(ref));
    EXPECT_EQ(m.sparsity_degree(), 2u);
}

TEST(BuildOmega, IdentityAndFiveDiagonal) {
    auto id = build_omega(omega::Identity{}, 7);
    EXPECT_EQ(id.sparsity_degree(), 1u);
    EnvelopeCholesky ch(id);
    EXPECT_EQ(ch.l(3, 3), 1.0);
    EXPECT_EQ(build_omega(omega::FiveDiagonal{0.3, 0.1}, 10).sparsity_degree(), 5u);
    auto blocks = build_omega(omega::BlockFiveDiagonal{3, 5, 0.45, 0.1}, 15);
    EXPECT_EQ(blocks(4, 5), 0.0);
    EXPECT_EQ(blocks(3, 4), 0.45);
    EXPECT_EQ(blocks(5, 7), 0.1);
    EXPECT_THROW(build_omega(omega::BlockFiveDiagonal{3, 5, 0.45, 0.1}, 16), ConfigError);
}

TEST(BuildOmega, PositiveDefinitenessBoundaryAtTen) {
    // Smallest eigenvalue 1 - 2|a| cos(pi/11): zero at a = 0.5211.
    EXPECT_NO_THROW(build_omega(omega::Tridiagonal{0.49}, 10));
    EXPECT_NO_THROW(build_omega(omega::Tridiagonal{0.51}, 10));
    try {
        build_omega(omega::Tridiagonal{0.53}, 10);
        FAIL();
    } catch (const NotPositiveDefinite& e) {
        EXPECT_NE(std::string(e.what()).find("tridiagonal:0.53"), std::string::npos);
    }
    const double edge = 1.0 / (2.0 * std::cos(std::numbers::pi / 11.0));
    EXPECT_NO_THROW(build_omega(omega::Tridiagonal{edge - 1e-6}, 10));
    EXPECT_THROW(build_omega(omega::Tridiagonal{edge + 1e-6}, 10), NotPositiveDefinite);
}

TEST(BuildOmega, InverseSpectralNorm) {
    // Eigenvalues of the paired block are 1 +- h.
    EXPECT_NEAR(inverse_spectral_norm(build_omega(omega::PairedBlock{0.6}, 10)), 1.0 / 0.4, 1e-8);
}

TEST(SampleDataset, IdentityCovariance) {
    Rng rng(11);
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(5);
    auto d = sample_dataset(mu, SparseSymMatrix::identity(5), 100000, Labeling::balanced, rng);
    Eigen::MatrixXd c = d.x * d.x.transpose() / 1e5;
    EXPECT_LT((c - Eigen::MatrixXd::Identity(5, 5)).cwiseAbs().maxCoeff(), 0.05);
}

TEST(SampleDataset, TridiagonalTwoByTwoCovariance) {
    Rng rng(12);
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(2);
    auto d = sample_dataset(mu, build_omega(omega::Tridiagonal{0.4}, 2), 100000, Labeling::random, rng);
    Eigen::Matrix2d ref;
    ref << 1, -0.4, -0.4, 1;
    ref /= 0.84;
    Eigen::MatrixXd c = d.x * d.x.transpose() / 1e5;
    EXPECT_LT((c - ref).cwiseAbs().maxCoeff(), 0.02);
    EXPECT_NEAR(ref(0, 0), 1.1905, 1e-4);
}

TEST(SampleDataset, CovarianceConvergesForBandedOmega) {
    auto om = build_omega(omega::FiveDiagonal{0.4, 0.2}, 12);
    Rng rng(13);
    auto d = sample_dataset(Eigen::VectorXd::Zero(12), om, 100000, Labeling::balanced, rng);
    Eigen::MatrixXd c = d.x * d.x.transpose() / 1e5;
    EXPECT_LT((c - om.to_dense().inverse()).cwiseAbs().maxCoeff(), 0.05);
}

TEST(SampleDataset, BalancedLabelsAndDeterminism) {
    auto om = build_omega(omega::Tridiagonal{0.3}, 20);
    Eigen::VectorXd mu = Eigen::VectorXd::Constant(20, 0.1);
    Rng a(99), b(99);
    auto d1 = sample_dataset(mu, om, 7, Labeling::balanced, a);
    auto d2 = sample_dataset(mu, om, 7, Labeling::balanced, b);
    EXPECT_EQ(d1.x, d2.x);
    EXPECT_EQ(d1.labels, (std::vector<int>{1, 1, 1, -1, -1, -1, -1}));
    Rng c(3);
    EXPECT_FALSE(sample_dataset(mu, om, 7, Labeling::none, c).labeled());
}

TEST(ZVector, SingleSample) {
    Dataset d;
    d.x = Eigen::MatrixXd(3, 1);
    d.x << 1.5, -2, 0.25;
    d.labels = {1};
    EXPECT_EQ(z_vector(d).z, d.x.col(0));
}

TEST(ZVector, ExactArithmetic) {
    Eigen::VectorXd v(3);
    v << 1, -2, 0.5;
    Dataset d;
    d.x.resize(3, 4);
    d.labels = {1, 1, -1, -1};
    for (int i = 0; i < 4; ++i) d.x.col(i) = d.labels[i] * v;
    EXPECT_EQ(z_vector(d).z, 2.0 * v);
}

TEST(ZVector, NullDistribution) {
    Rng rng(21);
    auto d = sample_dataset(Eigen::VectorXd::Zero(1000), SparseSymMatrix::identity(1000), 100, Labeling::balanced, rng);
    Eigen::VectorXd z = z_vector(d).z;
    double mean = z.mean();
    double var = (z.array() - mean).square().sum() / 999.0;
    EXPECT_NEAR(mean, 0.0, 0.1);
    EXPECT_NEAR(var, 1.0, 0.1);
}

TEST(ZVector, UnlabeledIsUsageError) {
    Dataset d;
    d.x = Eigen::MatrixXd::Zero(2, 2);
    EXPECT_THROW(z_vector(d), UsageError);
}

TEST(ZVector, MeansTrackSqrtNMu) {
    const int reps = 400;
    auto om = build_omega(omega::Tridiagonal{0.45}, 10);
    EnvelopeCholesky ch(om);
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(10);
    mu[2] = 0.5;
    mu[7] = -0.3;
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(10);
    for (int r = 0; r < reps; ++r) {
        Rng rng = Rng::stream(4, {static_cast<std::uint64_t>(r)});
        acc += z_vector(sample_dataset(mu, ch, 16, Labeling::balanced, rng)).z;
    }
    acc /= reps;
    // Coordinate variances are the diagonal of Omega^{-1}, below 2.3 here.
    Eigen::VectorXd sd = om.to_dense().inverse().diagonal().cwiseSqrt();
    for (int j = 0; j < 10; ++j) EXPECT_LT(std::abs(acc[j] - 4.0 * mu[j]), 4.0 * sd[j] / std::sqrt(reps));
}

TEST(ZVector, DirectDrawMatchesLaw) {
    auto om = build_omega(omega::Tridiagonal{0.4}, 2);
    EnvelopeCholesky ch(om);
    Eigen::VectorXd mu(2);
    mu << 0.1, 0.0;
    Eigen::Vector2d s = Eigen::Vector2d::Zero();
    Eigen::Matrix2d ss = Eigen::Matrix2d::Zero();
    Rng rng(8);
    const int k = 100000;
    for (int i = 0; i < k; ++i) {
        Eigen::Vector2d z = draw_z(mu, ch, 25, rng).z;
        s += z;
        ss += z * z.transpose();
    }
    s /= k;
    Eigen::Matrix2d cov = ss / k - s * s.transpose();
    EXPECT_NEAR(s[0], 0.5, 0.02);
    EXPECT_LT((cov - om.to_dense().inverse()).cwiseAbs().maxCoeff(), 0.03);
}

TEST(Formats, ParamsRoundTrip) {
    auto q = RareWeakParams::from_exponents(5000, 0.55, 0.31, 0.37);
    std::stringstream ss;
    write_key_values(ss, to_key_values(q));
    auto back = params_from_key_values(read_key_values(ss));
    EXPECT_EQ(back.n, q.n);
    EXPECT_EQ(back.eps, q.eps);
    EXPECT_EQ(back.tau, q.tau);
    auto lit = params_from_key_values({{"p", "3000"}, {"n", "2000"}, {"eps", "0.1"}, {"tau", "4"}});
    EXPECT_EQ(lit.tau, 4.0);
    EXPECT_THROW(params_from_key_values({{"p", "3000"}}), ConfigError);
    std::stringstream bad("p 3000\n");
    EXPECT_THROW(read_key_values(bad), ConfigError);
}

TEST(Formats, OmegaSpecRoundTrip) {
    for (OmegaSpec s : {OmegaSpec{omega::Identity{}}, OmegaSpec{omega::Tridiagonal{0.45}},
                        OmegaSpec{omega::FiveDiagonal{0.35, 0.2}}, OmegaSpec{omega::PairedBlock{0.6}},
                        OmegaSpec{omega::BlockFiveDiagonal{10, 500, 0.45, 0.1}}})
        EXPECT_EQ(describe(parse_omega_spec(describe(s))), describe(s));
    EXPECT_THROW(parse_omega_spec("banded:0.1"), ConfigError);
    EXPECT_THROW(parse_omega_spec("tridiagonal:0.1,0.2"), ConfigError);
    EXPECT_EQ(SignalDistribution::parse("uniform:2.5,3.5").hi, 3.5);
    EXPECT_TRUE(SignalDistribution::parse("point:3:symmetric").symmetric_sign);
}

TEST(Formats, DatasetCsvRoundTripIsBitExact) {
    Rng rng(31);
    auto d = sample_dataset(Eigen::VectorXd::Constant(6, 0.3), build_omega(omega::Tridiagonal{0.2}, 6), 9,
                            Labeling::random, rng);
    std::stringstream ss;
    write_dataset_csv(ss, d);
    auto back = read_dataset_csv(ss);
    EXPECT_EQ(back.x, d.x);
    EXPECT_EQ(back.labels, d.labels);

    d.labels.clear();
    std::stringstream s2;
    write_dataset_csv(s2, d);
    EXPECT_FALSE(read_dataset_csv(s2).labeled());
}
