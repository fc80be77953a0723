// Copyright 2026 The mway Authors.
// SPDX-License-Identifier: Apache-2.0

#include "mway/gcpa.hpp"

#include <gtest/gtest.h>

using namespace mway;

namespace {

Matrix unit_rows(Index n, Index d, Rng& rng) { return normalized_rows(gaussian_matrix(n, d, rng)); }

// Views that disagree a little around a shared direction per row.
std::vector<Matrix> jittered_views(std::size_t m_count, Index n, Index d, double jitter, std::uint64_t seed) {
    Rng rng = make_rng(seed, "gcpa-views");
    const Matrix base = gaussian_matrix(n, d, rng);
    std::vector<Matrix> views;
    for (std::size_t m = 0; m < m_count; ++m) views.push_back(base + gaussian_matrix(n, d, rng, jitter));
    return views;
}

double& parameter(Corrector& c, std::size_t layer, bool bias, Index idx) {
    return bias ? c.delta.biases[layer](idx) : c.delta.weights[layer].data()[idx];
}

} // namespace

TEST(Consensus, ClosedForms) {
    const Vector v = Vector::Unit(3, 1);
    Matrix same(1, 3);
    same.row(0) = v.transpose();
    auto cs = consensus_directions({same, same, same});
    EXPECT_LT((cs.directions.row(0) - v.transpose()).norm(), 1e-12);

    Matrix anti = -same;
    cs = consensus_directions({same, anti});
    EXPECT_TRUE(cs.degenerate[0]);
    EXPECT_EQ(cs.degenerate_count(), 1u);

    Matrix e1 = Matrix::Zero(1, 3), e2 = Matrix::Zero(1, 3), e3 = Matrix::Zero(1, 3);
    e1(0, 0) = 1;
    e2(0, 1) = 1;
    e3(0, 2) = 1;
    cs = consensus_directions({e1, e2, e3});
    EXPECT_LT((cs.directions.row(0) - Eigen::RowVector3d::Constant(1.0 / std::sqrt(3.0))).norm(), 1e-12);
    EXPECT_THROW((void)consensus_directions({e1, Matrix::Zero(2, 3)}), Error);
}

TEST(Corrector, FreshIsNormalizedIdentity) {
    Rng rng = make_rng(1, "fresh");
    const auto corr = make_corrector(6, {}, kDefaultTau, kDefaultLambda, 3);
    ASSERT_EQ(corr.hidden, (std::vector<Index>{12, 12}));
    const Matrix u = gaussian_matrix(20, 6, rng);
    const Matrix y = corrector_forward(corr, u);
    EXPECT_LT((y - normalized_rows(u)).norm(), 1e-10);
    EXPECT_THROW((void)corrector_forward(corr, Matrix::Zero(2, 5)), Error);
}

TEST(Corrector, ScaleInvariantAndUnitRows) {
    Rng rng = make_rng(2, "scale");
    auto corr = make_corrector(5, {8}, 0.1, 1.0, 4);
    corr.delta.weights.back() = gaussian_matrix(8, 5, rng, 0.3);
    const Matrix u = gaussian_matrix(10, 5, rng);
    const Matrix y = corrector_forward(corr, u);
    EXPECT_LT((corrector_forward(corr, 3.7 * u) - y).norm(), 1e-12);
    for (Index i = 0; i < 10; ++i) EXPECT_NEAR(y.row(i).norm(), 1.0, 1e-10);
}

TEST(GcpaLoss, ArithmeticAndHinge) {
    Rng rng = make_rng(3, "loss");
    const auto corr = make_corrector(4, {4}, 0.05, 2.0, 5);
    const Matrix u = unit_rows(6, 4, rng);
    EXPECT_NEAR(gcpa_loss(corr, u, u).total, 0.0, 1e-12);

    // Oracle per row: y = û (fresh corrector). Pick c with ⟨û,c⟩ = 0.7.
    Matrix c(1, 4);
    Eigen::RowVector4d uhat(1, 0, 0, 0);
    c << 0.7, std::sqrt(1 - 0.49), 0, 0;
    const auto lb = gcpa_loss(corr, uhat, c);
    EXPECT_NEAR(lb.align, 0.3, 1e-12);
    EXPECT_EQ(lb.trust, 0.0);

    // Explicit row contributions from known (drift, align) pairs.
    EXPECT_NEAR(detail::loss_terms(Matrix(uhat), Matrix(uhat), c, 0.05, 2.0).total, 0.3, 1e-12);
    Eigen::RowVector4d y;
    y << 0.88, std::sqrt(1 - 0.88 * 0.88), 0, 0; // drift 0.12
    Eigen::RowVector4d cc;
    const double target = 0.7; // ⟨y, c⟩
    cc = target * y;
    Eigen::RowVector4d perp(0, 0, 1, 0);
    cc += std::sqrt(1 - target * target) * perp;
    const auto row = detail::loss_terms(Matrix(y), Matrix(uhat), Matrix(cc), 0.05, 2.0);
    EXPECT_NEAR(row.total, 0.44, 1e-12);
    Eigen::RowVector4d ysmall;
    ysmall << 0.97, std::sqrt(1 - 0.97 * 0.97), 0, 0; // drift 0.03
    EXPECT_EQ(detail::loss_terms(Matrix(ysmall), Matrix(uhat), Matrix(cc), 0.05, 2.0).trust, 0.0);
}

TEST(GcpaGradient, MatchesCentralDifferences) {
    for (std::uint64_t probe = 0; probe < 20; ++probe) {
        Rng rng = make_rng(probe, "gradcheck");
        auto corr = make_corrector(5, {7, 6}, 0.02, 1.5, probe);
        for (auto& w : corr.delta.weights) w = gaussian_matrix(w.rows(), w.cols(), rng, 0.4);
        for (auto& b : corr.delta.biases) b = gaussian_matrix(b.size(), 1, rng, 0.1);
        const Matrix u = gaussian_matrix(9, 5, rng);
        const Matrix c = unit_rows(9, 5, rng);
        const auto [lb, grad] = gcpa_loss_and_gradient(corr, u, c);

        std::vector<double> analytic, numeric;
        const double h = 1e-6;
        for (std::size_t l = 0; l < corr.delta.layers(); ++l) {
            for (bool bias : {false, true}) {
                const Index count = bias ? corr.delta.biases[l].size() : corr.delta.weights[l].size();
                for (Index k = 0; k < count; ++k) {
                    double& p = parameter(corr, l, bias, k);
                    const double saved = p;
                    p = saved + h;
                    const double plus = gcpa_loss(corr, u, c).total;
                    p = saved - h;
                    const double minus = gcpa_loss(corr, u, c).total;
                    p = saved;
                    numeric.push_back((plus - minus) / (2 * h));
                    analytic.push_back(bias ? grad.biases[l](k) : grad.weights[l].data()[k]);
                }
            }
        }
        const Vector a = Eigen::Map<Vector>(analytic.data(), static_cast<Index>(analytic.size()));
        const Vector n = Eigen::Map<Vector>(numeric.data(), static_cast<Index>(numeric.size()));
        EXPECT_LT((a - n).norm() / std::max(n.norm(), 1e-12), 1e-4) << "probe " << probe;
    }
}

TEST(FitCorrector, AgreeingViewsDriveLossToZero) {
    // Exact rotations: after GPA every view already equals the consensus.
    const auto views = jittered_views(3, 60, 4, 0.0, 7);
    TrainConfig cfg;
    cfg.epochs = 5;
    const auto corr = fit_corrector_on_views(views, cfg, kDefaultTau, kDefaultLambda);
    EXPECT_LE(corr.loss_log.back(), corr.loss_log.front() + 1e-12);
    EXPECT_LT(corr.loss_log.back(), 1e-3);
}

TEST(FitCorrector, DecreasesAlignmentLoss) {
    const auto views = jittered_views(3, 200, 6, 0.6, 8);
    TrainConfig cfg;
    cfg.epochs = 10;
    cfg.learning_rate = 0.1;
    const auto corr = fit_corrector_on_views(views, cfg, kDefaultTau, kDefaultLambda);
    ASSERT_EQ(corr.loss_log.size(), 11u);
    for (std::size_t e = 1; e < corr.loss_log.size(); ++e) EXPECT_LT(corr.loss_log[e], corr.loss_log[e - 1]);
}

TEST(FitCorrector, HugeLambdaPinsDrift) {
    const auto views = jittered_views(3, 100, 5, 0.6, 9);
    TrainConfig cfg;
    cfg.epochs = 10;
    cfg.learning_rate = 1e-7; // keeps λ·step stable with λ = 1e6
    const auto corr = fit_corrector_on_views(views, cfg, 0.0, 1e6);
    double drift = 0.0;
    for (const auto& v : views) {
        const Matrix y = corrector_forward(corr, v);
        drift += (1.0 - (y.array() * normalized_rows(v).array()).rowwise().sum()).mean();
    }
    EXPECT_LT(drift / 3.0, 1e-3);
}

TEST(FitCorrector, SameSeedSameLog) {
    const auto views = jittered_views(3, 80, 4, 0.5, 10);
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.seed = 42;
    const auto a = fit_corrector_on_views(views, cfg, 0.1, 1.0);
    const auto b = fit_corrector_on_views(views, cfg, 0.1, 1.0);
    EXPECT_EQ(a.loss_log, b.loss_log);
}

TEST(GcpaToUniverse, FreshCorrectorMatchesGpa) {
    Rng rng = make_rng(11, "uni");
    std::vector<EmbeddingMatrix> spaces;
    const Matrix base = gaussian_matrix(50, 4, rng);
    for (int m = 0; m < 3; ++m) {
        spaces.push_back({"s" + std::to_string(m), Split::Train, base * random_orthogonal(4, rng), {}});
    }
    const auto uni = fit_gpa(spaces);
    const auto corr = make_corrector(4, {}, 0.1, 1.0, 0);
    const Matrix x = spaces[1].data;
    const Matrix gpa = to_universe(uni, x, "s1");
    EXPECT_LT((gcpa_to_universe(uni, corr, x, "s1") - normalized_rows(gpa)).norm(), 1e-10);
    EXPECT_LT((gcpa_to_universe(uni, corr, x, "s1", true) - gpa).norm(), 1e-10);
    EXPECT_THROW((void)gcpa_to_universe(uni, corr, x, "zz"), Error);
}

TEST(ConsensusIdentityCheck, ClosedFormsAndRandom) {
    const Vector e1 = Vector::Unit(3, 0);
    const Vector e2 = Vector::Unit(3, 1);
    auto id = prop32_identities({e1, e1});
    EXPECT_NEAR(id.lhs7, 1.0, 1e-15);
    EXPECT_NEAR(id.rhs7, 1.0, 1e-15);
    id = prop32_identities({e1, e2});
    EXPECT_NEAR(id.lhs7, 0.0, 1e-15);
    EXPECT_NEAR(id.rhs7, 0.0, 1e-15);
    EXPECT_THROW((void)prop32_identities({e1, Vector(2.0 * e2)}), Error);

    Rng rng = make_rng(12, "prop");
    for (int t = 0; t < 50; ++t) {
        const auto m = 2 + static_cast<int>(rng() % 7);
        const auto d = 2 + static_cast<Index>(rng() % 31);
        std::vector<Vector> vs;
        for (int k = 0; k < m; ++k) vs.push_back(gaussian_matrix(d, 1, rng).normalized());
        id = prop32_identities(vs);
        EXPECT_LT(std::abs(id.lhs6 - id.rhs6), 1e-10);
        EXPECT_LT(std::abs(id.lhs7 - id.rhs7), 1e-10);
    }
}

TEST(CorrectorPersistence, RoundTrip) {
    const auto dir = std::filesystem::temp_directory_path() / "mway_test_corrector";
    std::filesystem::remove_all(dir);
    const auto views = jittered_views(3, 40, 4, 0.5, 13);
    TrainConfig cfg;
    cfg.epochs = 2;
    const auto corr = fit_corrector_on_views(views, cfg, 0.2, 0.5);
    save_corrector(corr, dir);
    const auto back = load_corrector(dir);
    EXPECT_EQ(back.tau, 0.2);
    EXPECT_EQ(back.lambda, 0.5);
    EXPECT_EQ(back.loss_log, corr.loss_log);
    EXPECT_TRUE(corrector_forward(back, views[0]) == corrector_forward(corr, views[0]));
}
