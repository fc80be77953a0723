// Copyright 2026 The mway Authors.
// SPDX-License-Identifier: Apache-2.0

// mway: fit, extend, apply and evaluate multi-space alignments.

#include "mway/mway.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace mway;

namespace {

struct Overrides {
    std::optional<std::string> method;
    std::optional<std::uint64_t> seed;
    std::optional<double> tau;
    std::optional<double> lambda;
    std::optional<Index> rank;
    bool rescale = false;
};

json read_json_file(const fs::path& path, const char* what) {
    try {
        return json::parse(detail::read_file(path));
    } catch (const json::exception& e) {
        throw Error(Errc::ConfigError, std::string(what) + " " + path.string() + ": " + e.what());
    } catch (const Error& e) {
        throw Error(Errc::ConfigError, std::string("cannot read ") + what + ": " + e.what());
    }
}

RunConfig resolve_config(const std::string& config_path, const Overrides& o) {
    RunConfig cfg = config_path.empty() ? RunConfig{} : run_config_from_json(read_json_file(config_path, "config"));
    if (o.method) cfg.method = parse_method(*o.method);
    if (o.seed) cfg.seed = *o.seed;
    if (o.tau) cfg.tau = *o.tau;
    if (o.lambda) cfg.lambda = *o.lambda;
    if (o.rank) cfg.gcca_rank = *o.rank;
    if (o.rescale) cfg.rescale_gpa_norm = true;
    return run_config_from_json(to_json(cfg)); // re-validate after overrides
}

void write_run_metadata(const fs::path& out, const std::string& command, const RunConfig& cfg, json extra = {}) {
    json run;
    run["tool"] = "mway";
    run["command"] = command;
    run["versions"] = {{"mway", kVersion},
                       {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                     "." + std::to_string(EIGEN_MINOR_VERSION)},
                       {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                             std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                             std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
    run["seed"] = cfg.seed;
    run["seeds"] = {{"gcpa.train", derive_seed(cfg.seed, "gcpa.train")}};
    run["config"] = to_json(cfg);
    run["config_hash"] = config_hash(cfg);
    for (const auto& [k, v] : extra.items()) run[k] = v;
    detail::write_file(out / "run.json", run.dump(2) + "\n");
}

void write_json(const fs::path& path, const json& j) { detail::write_file(path, j.dump(2) + "\n"); }

// ---------------------------------------------------------------------------

int cmd_synth(const std::string& spec_path, const std::string& out, std::optional<std::uint64_t> seed) {
    auto spec = synth_spec_from_json(read_json_file(spec_path, "synthetic spec"));
    if (seed) spec.seed = *seed;
    fs::create_directories(out);
    const auto manifest = write_synthetic(spec, out);
    std::cout << "wrote " << manifest.spaces.size() << " spaces to " << out << "\n";
    return 0;
}

int cmd_fit(const std::string& manifest_path, const std::string& config_path, const Overrides& o,
            const std::string& out) {
    const auto cfg = resolve_config(config_path, o);
    const auto manifest = read_manifest(manifest_path);
    RunConfig effective = cfg;
    if (!effective.common_dim && manifest.common_dim) effective.common_dim = manifest.common_dim;
    const auto train = load_split(manifest, Split::Train);
    auto fitted = fit_model(train.spaces, effective); // nothing is written unless this succeeds
    fs::create_directories(out);
    save_model(fitted.model, out);
    write_json(fs::path(out) / "fit_report.json", fitted.report);
    write_run_metadata(out, "fit", effective, {{"manifest", fs::absolute(manifest_path).lexically_normal().string()}});
    std::cout << to_string(effective.method) << " fitted on " << train.spaces.size() << " spaces; model in " << out
              << "\n";
    return 0;
}

int cmd_add(const std::string& model_dir, const std::string& input, const std::string& space_id,
            const std::string& out) {
    fs::path target = out.empty() ? fs::path(model_dir) : fs::path(out);
    auto model = load_model(model_dir);
    const auto raw = read_embeddings(input, space_id, Split::Train);
    add_space(model, raw);
    if (target != fs::path(model_dir)) {
        fs::create_directories(target);
        fs::copy(model_dir, target, fs::copy_options::recursive | fs::copy_options::skip_existing);
    }
    save_model(model, target);
    write_run_metadata(target, "add", model.config, {{"added_space", space_id}});
    std::cout << "added '" << space_id << "'; universe now has " << model.universe->size() << " spaces\n";
    return 0;
}

int cmd_translate(const std::string& model_dir, const std::string& from, const std::string& to,
                  const std::string& input, const std::string& out, bool rescale) {
    const auto model = load_model(model_dir);
    const auto raw = read_embeddings(input, from, Split::Test);
    const Matrix x = model.prep_for(from).apply(raw.data);
    Matrix y;
    if (to == "universe") {
        y = model.to_shared(from, x, rescale || model.config.rescale_gpa_norm);
    } else {
        (void)model.prep_for(to); // rejects unknown target ids
        switch (model.config.method) {
        case Method::NA: y = x; break;
        case Method::PW: y = from == to ? x : Matrix(x * model.pairwise.at({to, from}).omega); break;
        case Method::GPA: y = translate(*model.universe, x, from, to); break;
        case Method::GCPA:
            y = from_universe(*model.universe, gcpa_to_universe(*model.universe, *model.corrector, x, from, true), to);
            break;
        case Method::GCCA:
            throw Error(Errc::ConfigError, "gcca maps have no inverse; use --to universe for shared coordinates");
        }
    }
    const fs::path out_path(out);
    if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
    write_embeddings({to, raw.split, y, raw.sample_ids}, out_path);
    std::cout << "translated " << y.rows() << " rows " << from << " -> " << to << "\n";
    return 0;
}

int cmd_eval(const std::string& model_dir, const std::string& manifest_path, const std::string& config_path,
             bool rescale, const std::string& out) {
    auto model = load_model(model_dir);
    if (!config_path.empty()) {
        const auto c = run_config_from_json(read_json_file(config_path, "config"));
        model.config.eval_retrieval = c.eval_retrieval;
        model.config.eval_map = c.eval_map;
        model.config.eval_probe = c.eval_probe;
        model.config.eval_cluster = c.eval_cluster;
        model.config.eval_agreement = c.eval_agreement;
        model.config.eval_drift = c.eval_drift;
        model.config.cluster_seeds = c.cluster_seeds;
        model.config.probe = c.probe;
    }
    if (rescale) model.config.rescale_gpa_norm = true;
    const auto manifest = read_manifest(manifest_path);
    if (!manifest.has_split(Split::Test)) throw Error(Errc::ConfigError, "manifest has no 'test' split");
    const auto test = load_split(manifest, Split::Test, model.space_ids);
    const auto train = load_split(manifest, Split::Train, model.space_ids);
    std::string retrieval_tsv, probe_tsv;
    const auto report = evaluate_model(model, train, test, &retrieval_tsv, &probe_tsv);
    fs::create_directories(out);
    write_json(fs::path(out) / "eval_report.json", report);
    if (!retrieval_tsv.empty()) detail::write_file(fs::path(out) / "retrieval.tsv", retrieval_tsv);
    if (!probe_tsv.empty()) detail::write_file(fs::path(out) / "probe.tsv", probe_tsv);
    write_run_metadata(out, "eval", model.config, {{"model", fs::absolute(model_dir).lexically_normal().string()}});
    if (report.contains("retrieval")) {
        std::cout << to_string(model.config.method) << " mean rank-1 " << report["retrieval"]["mean_rank1"].get<double>()
                  << "\n";
    }
    return 0;
}

int cmd_sweep(const std::string& manifest_path, const std::string& config_path, const Overrides& o,
              const std::string& out) {
    auto cfg = resolve_config(config_path, o);
    cfg.method = Method::GCPA;
    const auto manifest = read_manifest(manifest_path);
    if (!cfg.common_dim && manifest.common_dim) cfg.common_dim = manifest.common_dim;
    const auto train_raw = load_split(manifest, Split::Train);
    const auto test_raw = load_split(manifest, Split::Test);
    RunConfig gpa_cfg = cfg;
    gpa_cfg.method = Method::GPA;
    const auto fitted = fit_model(train_raw.spaces, gpa_cfg);
    std::vector<EmbeddingMatrix> train, test;
    for (const auto& s : train_raw.spaces) {
        train.push_back({s.space_id, Split::Train, fitted.model.prep_for(s.space_id).apply(s.data), s.sample_ids});
    }
    for (const auto& s : test_raw.spaces) {
        test.push_back({s.space_id, Split::Test, fitted.model.prep_for(s.space_id).apply(s.data), s.sample_ids});
    }
    const auto cells = trust_sweep(*fitted.model.universe, train, test, cfg);
    json j = json::array();
    std::string tsv = "tau\tlambda\tmedian_drift\tmean_drift\tmean_rank1\n";
    for (const auto& c : cells) {
        j.push_back({{"tau", c.tau},
                     {"lambda", c.lambda},
                     {"median_drift", c.median_drift},
                     {"mean_drift", c.mean_drift},
                     {"mean_rank1", c.mean_rank1}});
        tsv += std::to_string(c.tau) + '\t' + std::to_string(c.lambda) + '\t' + std::to_string(c.median_drift) + '\t' +
               std::to_string(c.mean_drift) + '\t' + std::to_string(c.mean_rank1) + '\n';
    }
    fs::create_directories(out);
    write_json(fs::path(out) / "sweep.json", {{"cells", j}});
    detail::write_file(fs::path(out) / "sweep.tsv", tsv);
    write_run_metadata(out, "sweep", cfg);
    std::cout << "swept " << cells.size() << " (tau, lambda) cells\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"mway: align several embedding spaces into one shared universe"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);

    std::string manifest, config, out, model, input, space_id, from, to, spec;
    Overrides o;
    std::optional<std::uint64_t> seed;

    auto add_overrides = [&](CLI::App* sub) {
        sub->add_option("--method", o.method, "na, pw, gpa, gcca or gcpa");
        sub->add_option("--seed", o.seed, "global seed");
        sub->add_option("--tau", o.tau, "GCPA trust tolerance");
        sub->add_option("--lambda", o.lambda, "GCPA trust weight");
        sub->add_option("--rank", o.rank, "GCCA shared rank R");
        sub->add_flag("--rescale-gpa-norm", o.rescale, "rescale corrected rows to their GPA norm");
    };

    auto* synth = app.add_subcommand("synth", "write a synthetic matched dataset and its manifest");
    synth->add_option("--spec", spec, "synthetic spec JSON")->required();
    synth->add_option("--out", out, "output directory")->required();
    synth->add_option("--seed", seed, "overrides the spec seed");

    auto* fit = app.add_subcommand("fit", "preprocess the train split and fit an alignment");
    fit->add_option("--manifest", manifest)->required();
    fit->add_option("--config", config, "RunConfig JSON");
    fit->add_option("--out", out)->required();
    add_overrides(fit);

    auto* add = app.add_subcommand("add", "register one more space in a fitted GPA/GCPA model");
    add->add_option("--model", model)->required();
    add->add_option("--input", input, "train-split embeddings of the new space")->required();
    add->add_option("--space-id", space_id)->required();
    add->add_option("--out", out, "write the updated model here instead of in place");

    auto* trans = app.add_subcommand("translate", "map embeddings from one space to another");
    trans->add_option("--model", model)->required();
    trans->add_option("--from", from)->required();
    trans->add_option("--to", to, "target space id, or 'universe'")->required();
    trans->add_option("--input", input)->required();
    trans->add_option("--out", out)->required();
    trans->add_flag("--rescale-gpa-norm", o.rescale);

    auto* eval = app.add_subcommand("eval", "score a fitted model on the test split");
    eval->add_option("--model", model)->required();
    eval->add_option("--manifest", manifest)->required();
    eval->add_option("--config", config, "RunConfig JSON; only its eval section is used");
    eval->add_option("--out", out)->required();
    eval->add_flag("--rescale-gpa-norm", o.rescale);

    auto* sweep = app.add_subcommand("sweep", "(tau, lambda) drift sweep over one GPA fit");
    sweep->add_option("--manifest", manifest)->required();
    sweep->add_option("--config", config);
    sweep->add_option("--out", out)->required();
    add_overrides(sweep);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*synth) return cmd_synth(spec, out, seed);
        if (*fit) return cmd_fit(manifest, config, o, out);
        if (*add) return cmd_add(model, input, space_id, out);
        if (*trans) return cmd_translate(model, from, to, input, out, o.rescale);
        if (*eval) return cmd_eval(model, manifest, config, o.rescale, out);
        if (*sweep) return cmd_sweep(manifest, config, o, out);
    } catch (const Error& e) {
        std::cerr << "mway: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "mway: unexpected error: " << e.what() << "\n";
        return 3;
    }
    return 1;
}
