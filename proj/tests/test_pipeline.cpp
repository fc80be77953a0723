// Copyright 2026 The mway Authors.
// SPDX-License-Identifier: Apache-2.0

#include "mway/mway.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <map>

using namespace mway;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "mway_cli_tests";

int run(const std::string& args) {
    const std::string cmd = std::string(MWAY_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path fresh(const std::string& name) {
    const auto p = kRoot / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

void write_text(const fs::path& p, const std::string& text) { detail::write_file(p, text); }

json read_json(const fs::path& p) { return json::parse(detail::read_file(p)); }

std::map<std::string, std::string> snapshot(const fs::path& dir) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = detail::read_file(e.path());
    }
    return files;
}

// Noise-free rotated spaces, 4 of them, written to `dir`.
fs::path exact_dataset(const fs::path& dir, double noise = 0.0, std::size_t spaces = 4) {
    write_text(dir / "spec.json", json{{"num_spaces", spaces},
                                       {"samples", 120},
                                       {"test_samples", 60},
                                       {"dim", 8},
                                       {"latent_dim", 8},
                                       {"num_classes", 3},
                                       {"noise_sigma", noise},
                                       {"distortion", "orthogonal-only"},
                                       {"seed", 5}}
                                      .dump());
    EXPECT_EQ(run("synth --spec " + (dir / "spec.json").string() + " --out " + (dir / "data").string()), 0);
    return dir / "data" / "manifest.json";
}

} // namespace

TEST(CliSynth, ReproducibleAndShaped) {
    const auto dir = fresh("synth");
    write_text(dir / "spec.json", json{{"num_spaces", 10}, {"samples", 30}, {"test_samples", 10}, {"dim", 4},
                                       {"latent_dim", 3}, {"noise_sigma", 0.1}, {"seed", 3},
                                       {"weak_pair", {{"first", 1}, {"second", 4}, {"corruption_strength", 0.5}}}}
                                      .dump());
    ASSERT_EQ(run("synth --spec " + (dir / "spec.json").string() + " --out " + (dir / "a").string()), 0);
    ASSERT_EQ(run("synth --spec " + (dir / "spec.json").string() + " --out " + (dir / "b").string()), 0);
    EXPECT_EQ(snapshot(dir / "a"), snapshot(dir / "b"));
    const auto manifest = read_json(dir / "a" / "manifest.json");
    EXPECT_EQ(manifest["spaces"].size(), 10u);
    EXPECT_EQ(manifest["weak_pair"], json({"space01", "space04"}));

    write_text(dir / "bad.json", json{{"dim", 2}, {"latent_dim", 5}}.dump());
    EXPECT_EQ(run("synth --spec " + (dir / "bad.json").string() + " --out " + (dir / "c").string()), 2);
    write_text(dir / "typo.json", json{{"dimm", 2}}.dump());
    EXPECT_EQ(run("synth --spec " + (dir / "typo.json").string() + " --out " + (dir / "c").string()), 2);
}

TEST(CliFit, GpaOnExactRotations) {
    const auto dir = fresh("fit_exact");
    const auto manifest = exact_dataset(dir);
    write_text(dir / "cfg.json", json{{"method", "gpa"}, {"preprocess", {{"standardize", "none"}}}}.dump());
    ASSERT_EQ(run("fit --manifest " + manifest.string() + " --config " + (dir / "cfg.json").string() + " --out " +
                  (dir / "m").string()),
              0);
    const auto rep = read_json(dir / "m" / "fit_report.json");
    EXPECT_LT(rep["dispersion"].get<double>(), 1e-8 * rep["total_squared_norm"].get<double>());
    EXPECT_LT(rep["cycle_deviation"].get<double>(), 1e-10);
    const auto run_meta = read_json(dir / "m" / "run.json");
    EXPECT_EQ(run_meta["config_hash"].get<std::string>().size(), 16u);
    EXPECT_EQ(run_meta["versions"]["mway"], kVersion);
}

TEST(CliFit, RerunIsByteIdentical) {
    const auto dir = fresh("fit_rerun");
    const auto manifest = exact_dataset(dir, 0.3);
    write_text(dir / "cfg.json", json{{"gcpa", {{"epochs", 3}}}}.dump());
    for (const char* out : {"a", "b"}) {
        ASSERT_EQ(run("fit --manifest " + manifest.string() + " --config " + (dir / "cfg.json").string() +
                      " --method gcpa --seed 11 --out " + (dir / out).string()),
                  0);
    }
    auto a = snapshot(dir / "a");
    auto b = snapshot(dir / "b");
    EXPECT_EQ(a, b);
    EXPECT_TRUE(a.count("corrector/corrector.json"));
    EXPECT_TRUE(a.count("universe/universe.json"));
}

TEST(CliFit, PairwiseReportsCycleInconsistency) {
    const auto dir = fresh("fit_pw");
    const auto manifest = exact_dataset(dir, 0.3);
    ASSERT_EQ(run("fit --manifest " + manifest.string() + " --method pw --out " + (dir / "pw").string()), 0);
    ASSERT_EQ(run("fit --manifest " + manifest.string() + " --method gpa --out " + (dir / "gpa").string()), 0);
    EXPECT_GT(read_json(dir / "pw" / "fit_report.json")["cycle_deviation"].get<double>(), 1e-3);
    EXPECT_LT(read_json(dir / "gpa" / "fit_report.json")["cycle_deviation"].get<double>(), 1e-10);
    EXPECT_EQ(read_json(dir / "pw" / "fit_report.json")["maps"], 12);
}

TEST(CliFit, GccaRankTooLargeLeavesNoOutput) {
    const auto dir = fresh("fit_rank");
    const auto manifest = exact_dataset(dir, 0.2);
    const auto out = dir / "m";
    EXPECT_EQ(run("fit --manifest " + manifest.string() + " --method gcca --rank 33 --out " + out.string()), 2);
    EXPECT_FALSE(fs::exists(out));
    EXPECT_EQ(run("fit --manifest " + manifest.string() + " --method gcca --rank 4 --out " + out.string()), 0);
    EXPECT_EQ(read_json(out / "fit_report.json")["eigenvalues"].size(), 4u);
}

TEST(CliFit, DimensionConflictNamesSpace) {
    const auto dir = fresh("fit_dims");
    Rng rng = make_rng(1, "dims");
    Manifest m;
    m.base_dir = dir;
    m.splits = {{"train", "train.mwal"}};
    for (int s = 0; s < 3; ++s) {
        const Index d = s == 2 ? 6 : 4;
        const std::string id = "e" + std::to_string(s);
        std::vector<std::string> ids;
        for (int i = 0; i < 20; ++i) ids.push_back("r" + std::to_string(i));
        write_embeddings({id, Split::Train, gaussian_matrix(20, d, rng), ids}, dir / id / "train.mwal");
        m.spaces.push_back({id, id, static_cast<std::size_t>(d)});
    }
    write_manifest(m, dir / "manifest.json");
    const std::string cmd = std::string(MWAY_CLI_PATH) + " fit --manifest " + (dir / "manifest.json").string() +
                            " --out " + (dir / "m").string() + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    std::string output;
    char buf[256];
    while (fgets(buf, sizeof(buf), pipe)) output += buf;
    const int status = pclose(pipe);
    EXPECT_EQ(WEXITSTATUS(status), 2);
    EXPECT_NE(output.find("ConfigError"), std::string::npos);
    EXPECT_NE(output.find("e2"), std::string::npos);

    m.common_dim = 3;
    write_manifest(m, dir / "manifest.json");
    EXPECT_EQ(run("fit --manifest " + (dir / "manifest.json").string() + " --out " + (dir / "m").string()), 0);
    EXPECT_TRUE(read_json(dir / "m" / "fit_report.json")["pca"].get<bool>());
}

TEST(CliAdd, AppendsWithoutTouchingBaseMaps) {
    const auto dir = fresh("add");
    const auto manifest_path = exact_dataset(dir, 0.2, 5);
    // Fit on four spaces, then add the fifth.
    auto manifest = read_json(manifest_path);
    auto base = manifest;
    base["spaces"].erase(4);
    write_text(dir / "data" / "base.json", base.dump());
    ASSERT_EQ(run("fit --manifest " + (dir / "data" / "base.json").string() + " --out " + (dir / "m").string()), 0);
    const auto before = snapshot(dir / "m" / "universe");
    const auto new_train = dir / "data" / "space04" / "train.mwal";
    ASSERT_EQ(run("add --model " + (dir / "m").string() + " --input " + new_train.string() + " --space-id space04"), 0);
    const auto after = snapshot(dir / "m" / "universe");
    for (const auto& id : {"space00", "space01", "space02", "space03"}) {
        const auto name = map_file_name(id);
        EXPECT_EQ(before.at(name), after.at(name));
    }
    EXPECT_TRUE(after.count(map_file_name("space04")));
    EXPECT_EQ(run("add --model " + (dir / "m").string() + " --input " + new_train.string() + " --space-id space04"), 2);

    // Wiring check against the library.
    const auto m = load_model(dir / "m");
    const auto data = load_split(read_manifest(manifest_path), Split::Train);
    std::vector<EmbeddingMatrix> pre;
    for (std::size_t s = 0; s < 4; ++s) {
        pre.push_back({data.spaces[s].space_id, Split::Train, m.prep_for(data.spaces[s].space_id).apply(data.spaces[s].data),
                       data.spaces[s].sample_ids});
    }
    const auto uni = fit_gpa(pre);
    const auto lib = gpa_add(uni, {"space04", Split::Train, m.prep_for("space04").apply(data.spaces[4].data), {}});
    EXPECT_LT((lib.map("space04").omega - m.universe->map("space04").omega).norm(), 1e-12);

    const auto test_file = dir / "data" / "space04" / "test.mwal";
    ASSERT_EQ(run("translate --model " + (dir / "m").string() + " --from space04 --to space01 --input " +
                  test_file.string() + " --out " + (dir / "t.mwal").string()),
              0);
    const auto translated = read_embeddings(dir / "t.mwal");
    const Matrix expected =
        translate(lib, m.prep_for("space04").apply(read_embeddings(test_file).data), "space04", "space01");
    EXPECT_LT((translated.data - expected).cwiseAbs().maxCoeff(), 1e-5); // float32 container
}

TEST(CliAdd, RejectsNonGpaModels) {
    const auto dir = fresh("add_pw");
    const auto manifest = exact_dataset(dir, 0.2);
    ASSERT_EQ(run("fit --manifest " + manifest.string() + " --method pw --out " + (dir / "m").string()), 0);
    EXPECT_EQ(run("add --model " + (dir / "m").string() + " --input " +
                  (dir / "data" / "space00" / "train.mwal").string() + " --space-id extra"),
              2);
}

TEST(CliEval, ReportsAndErrors) {
    const auto dir = fresh("eval");
    const auto manifest = exact_dataset(dir, 0.3);
    for (const char* method : {"na", "pw", "gpa", "gcca", "gcpa"}) {
        const auto model = dir / (std::string("m_") + method);
        ASSERT_EQ(run("fit --manifest " + manifest.string() + " --method " + method + " --out " + model.string()), 0)
            << method;
        const auto out = dir / (std::string("e_") + method);
        ASSERT_EQ(run("eval --model " + model.string() + " --manifest " + manifest.string() + " --out " + out.string()), 0)
            << method;
        const auto rep = read_json(out / "eval_report.json");
        EXPECT_EQ(rep["retrieval"]["pairs"].size(), 12u);
        EXPECT_TRUE(rep.contains("probe"));
        EXPECT_TRUE(rep.contains("agreement"));
        EXPECT_EQ(rep.contains("drift"), std::string(method) == "gcpa");
        EXPECT_TRUE(fs::exists(out / "retrieval.tsv"));
        // Deterministic rerun.
        ASSERT_EQ(run("eval --model " + model.string() + " --manifest " + manifest.string() + " --out " +
                      (out.string() + "_again")),
                  0);
        EXPECT_EQ(snapshot(out), snapshot(out.string() + "_again"));
    }

    // No-alignment retrieval happens in raw standardized coordinates.
    const auto na = read_json(dir / "e_na" / "eval_report.json");
    const auto gpa = read_json(dir / "e_gpa" / "eval_report.json");
    EXPECT_LT(na["retrieval"]["mean_rank1"].get<double>(), gpa["retrieval"]["mean_rank1"].get<double>());

    auto no_test = read_json(manifest);
    no_test["splits"].erase("test");
    write_text(dir / "data" / "no_test.json", no_test.dump());
    EXPECT_EQ(run("eval --model " + (dir / "m_gpa").string() + " --manifest " + (dir / "data" / "no_test.json").string() +
                  " --out " + (dir / "x").string()),
              2);
}

TEST(CliSweep, OneRowPerCell) {
    const auto dir = fresh("sweep");
    const auto manifest = exact_dataset(dir, 0.4);
    write_text(dir / "cfg.json", json{{"gcpa", {{"epochs", 2}}}, {"sweep", {{"taus", {0.05, 0.2}}, {"lambdas", {0.5, 2.0}}}}}.dump());
    ASSERT_EQ(run("sweep --manifest " + manifest.string() + " --config " + (dir / "cfg.json").string() + " --out " +
                  (dir / "s").string()),
              0);
    EXPECT_EQ(read_json(dir / "s" / "sweep.json")["cells"].size(), 4u);
    const auto tsv = detail::read_file(dir / "s" / "sweep.tsv");
    EXPECT_EQ(std::count(tsv.begin(), tsv.end(), '\n'), 5);
}

TEST(CliArgs, UnknownMethodAndMissingManifest) {
    const auto dir = fresh("args");
    const auto manifest = exact_dataset(dir);
    EXPECT_EQ(run("fit --manifest " + manifest.string() + " --method bogus --out " + (dir / "m").string()), 2);
    EXPECT_EQ(run("fit --manifest " + (dir / "nope.json").string() + " --out " + (dir / "m").string()), 2);
    EXPECT_NE(run("fit --out " + (dir / "m").string()), 0);
}

TEST(RunConfig, JsonRoundTripAndHash) {
    RunConfig c;
    c.method = Method::GCCA;
    c.gcca_rank = 5;
    c.tau = 0.3;
    const auto back = run_config_from_json(to_json(c));
    EXPECT_EQ(to_json(back), to_json(c));
    EXPECT_EQ(config_hash(back), config_hash(c));
    c.tau = 0.31;
    EXPECT_NE(config_hash(back), config_hash(c));
    EXPECT_THROW((void)run_config_from_json(json{{"gcpa", {{"tauu", 1}}}}), Error);
}
