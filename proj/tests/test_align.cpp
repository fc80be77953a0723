// Copyright 2026 The mway Authors.
// SPDX-License-Identifier: Apache-2.0

#include "mway/align.hpp"

#include <gtest/gtest.h>

#include <filesystem>

using namespace mway;

namespace {

std::vector<EmbeddingMatrix> rotated_copies(std::size_t m_count, Index n, Index d, double sigma, std::uint64_t seed) {
    Rng rng = make_rng(seed, "align-test");
    const Matrix base = gaussian_matrix(n, d, rng);
    std::vector<EmbeddingMatrix> out;
    for (std::size_t m = 0; m < m_count; ++m) {
        Matrix x = base * random_orthogonal(d, rng);
        if (sigma > 0) x += gaussian_matrix(n, d, rng, sigma);
        out.push_back({"s" + std::to_string(m), Split::Train, x, {}});
    }
    return out;
}

Errc code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "expected an Error";
    return Errc::InvalidInput;
}

} // namespace

TEST(FitPairwise, IdenticalSpacesGiveIdentity) {
    auto spaces = rotated_copies(1, 40, 5, 0.0, 1);
    spaces.push_back({"copy", Split::Train, spaces[0].data, {}});
    const auto maps = fit_pairwise(spaces);
    for (const auto& [key, map] : maps) EXPECT_LT((map.omega - Matrix::Identity(5, 5)).norm(), 1e-10);
}

TEST(FitPairwise, RecoversRotation) {
    Rng rng = make_rng(2, "pw");
    const Matrix x1 = gaussian_matrix(60, 7, rng);
    const Matrix r = random_orthogonal(7, rng);
    const std::vector<EmbeddingMatrix> spaces{{"a", Split::Train, x1, {}}, {"b", Split::Train, x1 * r, {}}};
    const auto maps = fit_pairwise(spaces);
    EXPECT_LT((maps.at({"a", "b"}).omega - r.transpose()).norm(), 1e-8);
    EXPECT_LT((maps.at({"b", "a"}).omega - r).norm(), 1e-8);
}

TEST(FitPairwise, CountsAndErrors) {
    const auto spaces = rotated_copies(3, 30, 4, 0.1, 3);
    EXPECT_EQ(fit_pairwise(spaces).size(), 6u);
    auto bad = spaces;
    bad[0].sample_ids = {"x"};
    bad[1].sample_ids = {"y"};
    bad[0].data = bad[0].data.topRows(1);
    bad[1].data = bad[1].data.topRows(1);
    bad.resize(2);
    EXPECT_EQ(code_of([&] { (void)fit_pairwise(bad); }), Errc::CorrespondenceError);
}

TEST(FitGpa, IdenticalCopiesConvergeImmediately) {
    auto spaces = rotated_copies(1, 50, 6, 0.0, 4);
    for (int m = 1; m < 4; ++m) spaces.push_back({"c" + std::to_string(m), Split::Train, spaces[0].data, {}});
    const auto uni = fit_gpa(spaces);
    EXPECT_LT(uni.final_dispersion(), 1e-20 + 1e-12 * spaces[0].data.squaredNorm());
    for (const auto& map : uni.maps) EXPECT_LT((map.omega - uni.maps[0].omega).norm(), 1e-10);
}

TEST(FitGpa, TwoSpacesMatchDirectProcrustes) {
    const auto spaces = rotated_copies(2, 80, 6, 0.3, 5);
    const auto uni = fit_gpa(spaces);
    const auto direct = fit_pairwise(spaces);
    EXPECT_LT((uni.induced_map("s0", "s1") - direct.at({"s0", "s1"}).omega).norm(), 1e-6);
}

TEST(FitGpa, ExactRotationsReachZeroDispersion) {
    const auto spaces = rotated_copies(5, 200, 8, 0.0, 6);
    const auto uni = fit_gpa(spaces);
    double total = 0.0;
    for (const auto& s : spaces) total += s.data.squaredNorm();
    EXPECT_LT(uni.final_dispersion(), 1e-8 * total);
}

TEST(FitGpa, InvariantsOnNoisyData) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto spaces = rotated_copies(4, 100, 6, 0.5, 10 + seed);
        const auto uni = fit_gpa(spaces);
        for (std::size_t t = 1; t < uni.fit_log.size(); ++t) EXPECT_LE(uni.fit_log[t], uni.fit_log[t - 1]);
        for (const auto& map : uni.maps) EXPECT_LT(orthonormality_error(map.omega), 1e-10);

        // Consensus is the mean of the mapped fit data.
        Matrix mean = Matrix::Zero(100, 6);
        for (const auto& s : spaces) mean += to_universe(uni, s.data, s.space_id);
        EXPECT_LT((mean / 4.0 - uni.consensus).norm(), 1e-8);

        // Isometry of pairwise distances.
        const Matrix u = to_universe(uni, spaces[1].data, "s1");
        for (Index i = 0; i < 10; ++i) {
            EXPECT_NEAR((u.row(i) - u.row(i + 1)).norm(), (spaces[1].data.row(i) - spaces[1].data.row(i + 1)).norm(),
                        1e-10);
        }

        // Cycle consistency through the shared maps.
        for (const auto& a : uni.space_ids) {
            for (const auto& b : uni.space_ids) {
                for (const auto& c : uni.space_ids) {
                    const Matrix composed = uni.induced_map(b, a) * uni.induced_map(c, b);
                    EXPECT_LT((composed - uni.induced_map(c, a)).norm(), 1e-10);
                }
            }
        }
    }
}

TEST(FitGpa, PairwiseMapsAreNotCycleConsistent) {
    const auto spaces = rotated_copies(3, 100, 6, 0.3, 20);
    const auto pw = fit_pairwise(spaces);
    const Matrix composed = pw.at({"s1", "s0"}).omega * pw.at({"s2", "s1"}).omega;
    EXPECT_GT((composed - pw.at({"s2", "s0"}).omega).norm(), 1e-3);
}

TEST(FitGpa, GaugeFreedom) {
    const auto spaces = rotated_copies(3, 60, 5, 0.2, 21);
    const auto uni = fit_gpa(spaces);
    Rng rng = make_rng(22, "gauge");
    const Matrix q = random_orthogonal(5, rng);
    Universe rotated = uni;
    for (auto& map : rotated.maps) map.omega = map.omega * q;
    rotated.consensus = uni.consensus * q;
    for (const auto& a : uni.space_ids) {
        for (const auto& b : uni.space_ids) {
            EXPECT_LT((rotated.induced_map(b, a) - uni.induced_map(b, a)).norm(), 1e-10);
        }
    }
}

TEST(FitGpa, InvalidConfig) {
    const auto spaces = rotated_copies(2, 10, 3, 0.0, 1);
    GpaConfig cfg;
    cfg.max_iters = 0;
    EXPECT_EQ(code_of([&] { (void)fit_gpa(spaces, cfg); }), Errc::InvalidInput);
}

TEST(FitGpa, NonFiniteInputRejected) {
    auto spaces = rotated_copies(2, 10, 3, 0.0, 1);
    spaces[1].data(0, 0) = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW((void)fit_gpa(spaces), Error);
}

TEST(GpaAdd, DuplicateDataReproducesMap) {
    const auto spaces = rotated_copies(3, 80, 6, 0.2, 30);
    GpaConfig tight;
    tight.dispersion_rel_tol = 1e-15;
    tight.max_iters = 2000;
    const auto uni = fit_gpa(spaces, tight);
    const auto added = gpa_add(uni, {"dup", Split::Train, spaces[1].data, {}});
    EXPECT_LT((added.map("dup").omega - uni.map("s1").omega).norm(), 1e-8);
}

TEST(GpaAdd, BaseIsUntouchedAndTranslationComposes) {
    const auto spaces = rotated_copies(4, 80, 6, 0.2, 31);
    const std::vector<EmbeddingMatrix> base(spaces.begin(), spaces.begin() + 3);
    const auto uni = fit_gpa(base);
    const auto added = gpa_add(uni, spaces[3]);
    for (std::size_t m = 0; m < 3; ++m) EXPECT_TRUE(added.maps[m].omega == uni.maps[m].omega);
    EXPECT_TRUE(added.consensus == uni.consensus);
    const Matrix x = spaces[3].data.topRows(5);
    const Matrix direct = x * added.map("s3").omega * added.map("s0").omega.transpose();
    EXPECT_LT((translate(added, x, "s3", "s0") - direct).norm(), 1e-12);
}

TEST(GpaAdd, Errors) {
    const auto spaces = rotated_copies(3, 40, 5, 0.2, 32);
    const auto uni = fit_gpa(spaces);
    EXPECT_EQ(code_of([&] { (void)gpa_add(uni, spaces[0]); }), Errc::InvalidInput);
    EmbeddingMatrix wrong{"w", Split::Train, Matrix::Ones(40, 4), {}};
    EXPECT_EQ(code_of([&] { (void)gpa_add(uni, wrong); }), Errc::ShapeError);
}

TEST(Translate, RoundTripsAndLookup) {
    const auto spaces = rotated_copies(3, 50, 5, 0.2, 40);
    const auto uni = fit_gpa(spaces);
    const Matrix& x = spaces[0].data;
    EXPECT_TRUE(translate(uni, x, "s0", "s0") == x);
    EXPECT_LT((translate(uni, translate(uni, x, "s0", "s1"), "s1", "s0") - x).norm(), 1e-10);
    EXPECT_LT((translate(uni, translate(uni, x, "s0", "s1"), "s1", "s2") - translate(uni, x, "s0", "s2")).norm(), 1e-10);
    EXPECT_LT((from_universe(uni, to_universe(uni, x, "s2"), "s2") - x).norm(), 1e-10);
    EXPECT_LT((to_universe(uni, x, "s1").rowwise().norm() - x.rowwise().norm()).norm(), 1e-10);
    EXPECT_EQ(code_of([&] { (void)translate(uni, x, "s0", "nope"); }), Errc::LookupError);
    EXPECT_EQ(code_of([&] { (void)to_universe(uni, x, "nope"); }), Errc::LookupError);
}

TEST(UniversePersistence, RoundTripAndAppendKeepsBytes) {
    const auto dir = std::filesystem::temp_directory_path() / "mway_test_universe";
    std::filesystem::remove_all(dir);
    const auto spaces = rotated_copies(4, 30, 4, 0.1, 50);
    const std::vector<EmbeddingMatrix> base(spaces.begin(), spaces.begin() + 3);
    const auto uni = fit_gpa(base);
    save_universe(uni, dir);
    const auto before = detail::read_file(dir / map_file_name("s0"));
    const auto back = load_universe(dir);
    ASSERT_EQ(back.space_ids, uni.space_ids);
    for (std::size_t m = 0; m < 3; ++m) EXPECT_TRUE(back.maps[m].omega == uni.maps[m].omega);
    EXPECT_TRUE(back.consensus == uni.consensus);
    EXPECT_EQ(back.fit_log, uni.fit_log);

    save_universe(gpa_add(back, spaces[3]), dir);
    EXPECT_EQ(detail::read_file(dir / map_file_name("s0")), before);
    EXPECT_EQ(load_universe(dir).size(), 4u);
}
