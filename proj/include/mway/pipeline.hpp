// Copyright 2026 The mway Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "mway/align.hpp"
#include "mway/dataio.hpp"
#include "mway/error.hpp"
#include "mway/eval.hpp"
#include "mway/gcca.hpp"
#include "mway/gcpa.hpp"
#include "mway/numkernel.hpp"
#include "mway/random.hpp"

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace mway {

inline constexpr const char* kVersion = "0.1.0";

enum class Method : std::uint8_t { NA, PW, GPA, GCCA, GCPA };

inline std::string to_string(Method m) {
    switch (m) {
    case Method::NA: return "na";
    case Method::PW: return "pw";
    case Method::GPA: return "gpa";
    case Method::GCCA: return "gcca";
    case Method::GCPA: return "gcpa";
    }
    return "?";
}

inline Method parse_method(const std::string& s) {
    for (auto m : {Method::NA, Method::PW, Method::GPA, Method::GCCA, Method::GCPA}) {
        if (to_string(m) == s) return m;
    }
    throw Error(Errc::ConfigError, "unknown method '" + s + "' (expected na, pw, gpa, gcca or gcpa)");
}

enum class Standardize : std::uint8_t { ZScore, Center, None };

inline std::string to_string(Standardize s) {
    switch (s) {
    case Standardize::ZScore: return "zscore";
    case Standardize::Center: return "center";
    case Standardize::None: return "none";
    }
    return "?";
}

struct RunConfig {
    Method method = Method::GPA;
    std::uint64_t seed = 0;

    Standardize standardize = Standardize::ZScore;
    std::optional<std::size_t> common_dim;

    GpaConfig gpa;

    std::optional<Index> gcca_rank; // default: the common dimension
    bool gcca_scaled = false;

    double tau = kDefaultTau;
    double lambda = kDefaultLambda;
    TrainConfig train;
    bool rescale_gpa_norm = false;

    bool eval_retrieval = true;
    bool eval_map = true;
    bool eval_probe = true;
    bool eval_cluster = true;
    bool eval_agreement = true;
    bool eval_drift = true;
    std::vector<std::uint64_t> cluster_seeds{0, 1, 2, 3, 4};
    ProbeConfig probe;

    std::vector<double> sweep_taus{0.02, 0.05, 0.10, 0.20};
    std::vector<double> sweep_lambdas{0.1, 0.3, 1.0, 3.0};
};

namespace detail {

inline void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known, const std::string& where) {
    if (!j.is_object()) throw Error(Errc::ConfigError, where + " must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (!known.count(key)) throw Error(Errc::ConfigError, "unknown key '" + key + "' in " + where);
    }
}

template <typename T>
void read_opt(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key) && !j[key].is_null()) out = j[key].get<T>();
}

} // namespace detail

inline nlohmann::json to_json(const RunConfig& c) {
    nlohmann::json j;
    j["method"] = to_string(c.method);
    j["seed"] = c.seed;
    j["preprocess"] = {{"standardize", to_string(c.standardize)}, {"common_dim", nullptr}};
    if (c.common_dim) j["preprocess"]["common_dim"] = *c.common_dim;
    j["gpa"] = {{"max_iters", c.gpa.max_iters},
                {"tol", c.gpa.dispersion_rel_tol},
                {"init", c.gpa.init_mode == GpaInit::FirstSpace ? "first-space" : "mean-of-raw"}};
    j["gcca"] = {{"rank", nullptr}, {"scaled", c.gcca_scaled}};
    if (c.gcca_rank) j["gcca"]["rank"] = *c.gcca_rank;
    j["gcpa"] = {{"tau", c.tau},
                 {"lambda", c.lambda},
                 {"epochs", c.train.epochs},
                 {"batch_size", c.train.batch_size},
                 {"learning_rate", c.train.learning_rate},
                 {"hidden", c.train.hidden},
                 {"rescale_gpa_norm", c.rescale_gpa_norm}};
    j["eval"] = {{"retrieval", c.eval_retrieval},     {"map", c.eval_map},
                 {"probe", c.eval_probe},             {"cluster", c.eval_cluster},
                 {"agreement", c.eval_agreement},     {"drift", c.eval_drift},
                 {"cluster_seeds", c.cluster_seeds},  {"probe_iterations", c.probe.iterations},
                 {"probe_learning_rate", c.probe.learning_rate}, {"probe_l2", c.probe.l2}};
    j["sweep"] = {{"taus", c.sweep_taus}, {"lambdas", c.sweep_lambdas}};
    return j;
}

inline RunConfig run_config_from_json(const nlohmann::json& j) {
    RunConfig c;
    try {
        detail::reject_unknown(j, {"method", "seed", "preprocess", "gpa", "gcca", "gcpa", "eval", "sweep"}, "config");
        if (j.contains("method")) c.method = parse_method(j["method"].get<std::string>());
        detail::read_opt(j, "seed", c.seed);
        if (j.contains("preprocess")) {
            const auto& p = j["preprocess"];
            detail::reject_unknown(p, {"standardize", "common_dim"}, "preprocess");
            if (p.contains("standardize")) {
                const auto s = p["standardize"].get<std::string>();
                if (s == "zscore") c.standardize = Standardize::ZScore;
                else if (s == "center") c.standardize = Standardize::Center;
                else if (s == "none") c.standardize = Standardize::None;
                else throw Error(Errc::ConfigError, "unknown standardize mode '" + s + "'");
            }
            if (p.contains("common_dim") && !p["common_dim"].is_null()) c.common_dim = p["common_dim"].get<std::size_t>();
        }
        if (j.contains("gpa")) {
            const auto& g = j["gpa"];
            detail::reject_unknown(g, {"max_iters", "tol", "init"}, "gpa");
            detail::read_opt(g, "max_iters", c.gpa.max_iters);
            detail::read_opt(g, "tol", c.gpa.dispersion_rel_tol);
            if (g.contains("init")) {
                const auto s = g["init"].get<std::string>();
                if (s == "first-space") c.gpa.init_mode = GpaInit::FirstSpace;
                else if (s == "mean-of-raw") c.gpa.init_mode = GpaInit::MeanOfRaw;
                else throw Error(Errc::ConfigError, "unknown gpa init '" + s + "'");
            }
        }
        if (j.contains("gcca")) {
            const auto& g = j["gcca"];
            detail::reject_unknown(g, {"rank", "scaled"}, "gcca");
            if (g.contains("rank") && !g["rank"].is_null()) c.gcca_rank = g["rank"].get<Index>();
            detail::read_opt(g, "scaled", c.gcca_scaled);
        }
        if (j.contains("gcpa")) {
            const auto& g = j["gcpa"];
            detail::reject_unknown(
                g, {"tau", "lambda", "epochs", "batch_size", "learning_rate", "hidden", "rescale_gpa_norm"}, "gcpa");
            detail::read_opt(g, "tau", c.tau);
            detail::read_opt(g, "lambda", c.lambda);
            detail::read_opt(g, "epochs", c.train.epochs);
            detail::read_opt(g, "batch_size", c.train.batch_size);
            detail::read_opt(g, "learning_rate", c.train.learning_rate);
            detail::read_opt(g, "hidden", c.train.hidden);
            detail::read_opt(g, "rescale_gpa_norm", c.rescale_gpa_norm);
        }
        if (j.contains("eval")) {
            const auto& e = j["eval"];
            detail::reject_unknown(e, {"retrieval", "map", "probe", "cluster", "agreement", "drift", "cluster_seeds",
                                       "probe_iterations", "probe_learning_rate", "probe_l2"},
                                   "eval");
            detail::read_opt(e, "retrieval", c.eval_retrieval);
            detail::read_opt(e, "map", c.eval_map);
            detail::read_opt(e, "probe", c.eval_probe);
            detail::read_opt(e, "cluster", c.eval_cluster);
            detail::read_opt(e, "agreement", c.eval_agreement);
            detail::read_opt(e, "drift", c.eval_drift);
            detail::read_opt(e, "cluster_seeds", c.cluster_seeds);
            detail::read_opt(e, "probe_iterations", c.probe.iterations);
            detail::read_opt(e, "probe_learning_rate", c.probe.learning_rate);
            detail::read_opt(e, "probe_l2", c.probe.l2);
        }
        if (j.contains("sweep")) {
            const auto& s = j["sweep"];
            detail::reject_unknown(s, {"taus", "lambdas"}, "sweep");
            detail::read_opt(s, "taus", c.sweep_taus);
            detail::read_opt(s, "lambdas", c.sweep_lambdas);
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::ConfigError, std::string("config: ") + e.what());
    }
    if (c.gcca_rank && *c.gcca_rank < 1) throw Error(Errc::ConfigError, "gcca rank must be >= 1");
    if (!(c.tau >= 0.0) || !(c.lambda >= 0.0)) throw Error(Errc::ConfigError, "tau and lambda must be >= 0");
    if (c.train.epochs < 1 || c.train.batch_size < 1 || !(c.train.learning_rate > 0.0)) {
        throw Error(Errc::ConfigError, "gcpa epochs, batch_size and learning_rate must be positive");
    }
    if (c.gpa.max_iters < 1 || !(c.gpa.dispersion_rel_tol > 0.0)) {
        throw Error(Errc::ConfigError, "gpa max_iters must be >= 1 and tol > 0");
    }
    if (c.sweep_taus.empty() || c.sweep_lambdas.empty()) throw Error(Errc::ConfigError, "sweep grid is empty");
    return c;
}

/// Hex FNV-1a of the canonical config dump.
inline std::string config_hash(const RunConfig& c) {
    const auto text = to_json(c).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ---------------------------------------------------------------------------
// Preprocessing
// ---------------------------------------------------------------------------

struct SpacePrep {
    StandardizerState standardizer;
    std::optional<PcaState> pca;

    [[nodiscard]] Matrix apply(const Matrix& x) const {
        Matrix z = standardizer.apply(x);
        return pca ? pca->apply(z) : z;
    }
    [[nodiscard]] Index output_dim() const {
        return pca ? pca->components.cols() : standardizer.mean.size();
    }
};

inline StandardizerState fit_standardizer(const Matrix& x, Standardize mode) {
    if (mode == Standardize::ZScore) return standardize_fit(x);
    StandardizerState s{Vector::Zero(x.cols()), Vector::Ones(x.cols())};
    if (mode == Standardize::Center) s.mean = x.colwise().mean().transpose();
    return s;
}

/// PCA runs only when input dimensions differ or the config requests a
/// smaller common dimension.
inline std::map<std::string, SpacePrep> fit_preprocessing(const std::vector<EmbeddingMatrix>& train,
                                                          const RunConfig& cfg) {
    std::set<Index> dims;
    for (const auto& s : train) dims.insert(s.data.cols());
    const bool differ = dims.size() > 1;
    if (differ && !cfg.common_dim) {
        for (const auto& s : train) {
            if (s.data.cols() != train.front().data.cols()) {
                throw Error(Errc::ConfigError, "space '" + s.space_id + "' has dimension " +
                                                   std::to_string(s.data.cols()) + " but '" + train.front().space_id +
                                                   "' has " + std::to_string(train.front().data.cols()) +
                                                   "; set preprocess.common_dim");
            }
        }
    }
    const bool use_pca = differ || (cfg.common_dim && static_cast<Index>(*cfg.common_dim) != *dims.begin());
    std::map<std::string, SpacePrep> out;
    for (const auto& s : train) {
        SpacePrep p{fit_standardizer(s.data, cfg.standardize), std::nullopt};
        if (use_pca) {
            const auto k = static_cast<Index>(*cfg.common_dim);
            try {
                p.pca = pca_fit(p.standardizer.apply(s.data), k);
            } catch (const Error& e) {
                throw Error(Errc::ConfigError, "space '" + s.space_id + "': " + e.what());
            }
        }
        out.emplace(s.space_id, std::move(p));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Fitted model: preprocessing plus the method-specific alignment
// ---------------------------------------------------------------------------

struct Model {
    RunConfig config;
    std::vector<std::string> space_ids;
    std::map<std::string, SpacePrep> prep;
    std::optional<Universe> universe;
    PairwiseMaps pairwise;
    std::optional<SharedBasisModel> gcca;
    std::optional<Corrector> corrector;

    [[nodiscard]] const SpacePrep& prep_for(const std::string& id) const {
        auto it = prep.find(id);
        if (it == prep.end()) throw Error(Errc::ConfigError, "model has no space '" + id + "'");
        return it->second;
    }

    /// Preprocessed rows of `space` expressed in the method's shared coordinates.
    /// Pairwise alignment has no shared frame and is rejected here.
    [[nodiscard]] Matrix to_shared(const std::string& space, const Matrix& x_pre, bool rescale) const {
        switch (config.method) {
        case Method::NA: return x_pre;
        case Method::GPA: return to_universe(*universe, x_pre, space);
        case Method::GCPA: return gcpa_to_universe(*universe, *corrector, x_pre, space, rescale);
        case Method::GCCA: return gcca_embed(*gcca, x_pre, space, config.gcca_scaled);
        case Method::PW: break;
        }
        throw Error(Errc::ConfigError, "pairwise alignment has no shared coordinate system");
    }

    /// `from` rows expressed in `to`'s coordinates (pairwise) or both in the shared frame.
    [[nodiscard]] std::pair<Matrix, Matrix> pair(const std::string& from, const std::string& to, const Matrix& x_from,
                                                 const Matrix& x_to, bool rescale) const {
        if (config.method == Method::PW) {
            if (from == to) return {x_from, x_to};
            return {x_from * pairwise.at({to, from}).omega, x_to};
        }
        return {to_shared(from, x_from, rescale), to_shared(to, x_to, rescale)};
    }
};

/// Largest Frobenius deviation between composed and direct maps over all
/// triples; `map(from, to)` takes rows of `from` into `to`.
inline double cycle_deviation(const std::vector<std::string>& ids,
                              const std::function<Matrix(const std::string&, const std::string&)>& map) {
    double worst = 0.0;
    for (const auto& a : ids) {
        for (const auto& b : ids) {
            for (const auto& c : ids) {
                if (a == b || b == c || a == c) continue;
                worst = std::max(worst, (map(a, b) * map(b, c) - map(a, c)).norm());
            }
        }
    }
    return worst;
}

struct FitResult {
    Model model;
    nlohmann::json report;
};

inline FitResult fit_model(const std::vector<EmbeddingMatrix>& raw_train, const RunConfig& cfg) {
    if (raw_train.size() < 2) throw Error(Errc::ConfigError, "need at least two spaces");
    FitResult res;
    Model& model = res.model;
    model.config = cfg;
    model.prep = fit_preprocessing(raw_train, cfg);
    std::vector<EmbeddingMatrix> train;
    for (const auto& s : raw_train) {
        model.space_ids.push_back(s.space_id);
        train.push_back({s.space_id, Split::Train, model.prep.at(s.space_id).apply(s.data), s.sample_ids});
    }
    auto& rep = res.report;
    rep["method"] = to_string(cfg.method);
    rep["spaces"] = model.space_ids;
    rep["samples"] = train.front().data.rows();
    rep["dim"] = train.front().data.cols();
    rep["pca"] = model.prep.begin()->second.pca.has_value();
    double total_sq = 0.0;
    for (const auto& s : train) total_sq += s.data.squaredNorm();
    rep["total_squared_norm"] = total_sq;

    switch (cfg.method) {
    case Method::NA: break;
    case Method::PW: {
        model.pairwise = fit_pairwise(train);
        rep["maps"] = model.pairwise.size();
        rep["cycle_deviation"] = cycle_deviation(
            model.space_ids,
            [&](const std::string& from, const std::string& to) { return model.pairwise.at({to, from}).omega; });
        break;
    }
    case Method::GPA:
    case Method::GCPA: {
        model.universe = fit_gpa(train, cfg.gpa);
        const auto& u = *model.universe;
        rep["dispersion"] = u.final_dispersion();
        rep["dispersion_log"] = u.fit_log;
        rep["iterations"] = u.fit_log.size() - 1;
        rep["cycle_deviation"] = cycle_deviation(
            model.space_ids, [&](const std::string& from, const std::string& to) { return u.induced_map(to, from); });
        if (cfg.method == Method::GCPA) {
            TrainConfig tc = cfg.train;
            tc.seed = derive_seed(cfg.seed, "gcpa.train");
            model.corrector = fit_corrector(u, train, tc, cfg.tau, cfg.lambda);
            rep["loss_log"] = model.corrector->loss_log;
            rep["tau"] = cfg.tau;
            rep["lambda"] = cfg.lambda;
        }
        break;
    }
    case Method::GCCA: {
        const Index rank = cfg.gcca_rank.value_or(train.front().data.cols());
        try {
            model.gcca = fit_gcca(train, rank);
        } catch (const Error& e) {
            if (e.code() == Errc::InvalidRank) throw Error(Errc::ConfigError, e.what());
            throw;
        }
        const auto& ev = model.gcca->eigenvalues;
        rep["rank"] = rank;
        rep["eigenvalues"] = std::vector<double>(ev.data(), ev.data() + ev.size());
        rep["objective"] = model.gcca->objective();
        break;
    }
    }
    return res;
}

// ---------------------------------------------------------------------------
// Persistence of a model directory
// ---------------------------------------------------------------------------

inline std::string pairwise_file(const std::string& to, const std::string& from) {
    return "pw_" + to + "__" + from + ".mwal";
}

inline void save_model(const Model& model, const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir / "preprocess");
    nlohmann::json index;
    index["method"] = to_string(model.config.method);
    index["space_ids"] = model.space_ids;
    index["config"] = to_json(model.config);
    index["preprocess"] = nlohmann::json::array();
    for (const auto& id : model.space_ids) {
        const auto& p = model.prep.at(id);
        Matrix std_state(2, p.standardizer.mean.size());
        std_state.row(0) = p.standardizer.mean.transpose();
        std_state.row(1) = p.standardizer.scale.transpose();
        const auto std_file = "std_" + id + ".mwal";
        if (!fs::exists(dir / "preprocess" / std_file)) write_record(dir / "preprocess" / std_file, std_state);
        nlohmann::json entry{{"id", id}, {"standardizer", std_file}};
        if (p.pca) {
            const auto pca_file = "pca_" + id + ".mwal";
            const auto mean_file = "pca_mean_" + id + ".mwal";
            if (!fs::exists(dir / "preprocess" / pca_file)) {
                write_record(dir / "preprocess" / pca_file, p.pca->components);
                write_record(dir / "preprocess" / mean_file, Matrix(p.pca->mean.transpose()));
            }
            entry["pca"] = pca_file;
            entry["pca_mean"] = mean_file;
        }
        index["preprocess"].push_back(entry);
    }
    switch (model.config.method) {
    case Method::NA: break;
    case Method::PW: {
        fs::create_directories(dir / "pairwise");
        nlohmann::json maps = nlohmann::json::array();
        for (const auto& [key, map] : model.pairwise) {
            const auto name = pairwise_file(key.first, key.second);
            write_record(dir / "pairwise" / name, map.omega);
            maps.push_back({{"to", key.first}, {"from", key.second}, {"file", name}});
        }
        index["pairwise"] = maps;
        break;
    }
    case Method::GPA: save_universe(*model.universe, dir / "universe"); break;
    case Method::GCPA:
        save_universe(*model.universe, dir / "universe");
        save_corrector(*model.corrector, dir / "corrector");
        break;
    case Method::GCCA: save_gcca(*model.gcca, dir / "gcca"); break;
    }
    detail::write_file(dir / "model.json", index.dump(2) + "\n");
}

inline Model load_model(const std::filesystem::path& dir) {
    nlohmann::json index;
    try {
        index = nlohmann::json::parse(detail::read_file(dir / "model.json"));
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::ConfigError, (dir / "model.json").string() + ": " + e.what());
    } catch (const Error& e) {
        throw Error(Errc::ConfigError, std::string("cannot load model: ") + e.what());
    }
    Model model;
    model.config = run_config_from_json(index.at("config"));
    model.space_ids = index.at("space_ids").get<std::vector<std::string>>();
    for (const auto& entry : index.at("preprocess")) {
        SpacePrep p;
        const Matrix s = read_record(dir / "preprocess" / entry.at("standardizer").get<std::string>()).data;
        p.standardizer = {s.row(0).transpose(), s.row(1).transpose()};
        if (entry.contains("pca")) {
            PcaState pca;
            pca.components = read_record(dir / "preprocess" / entry.at("pca").get<std::string>()).data;
            pca.mean = read_record(dir / "preprocess" / entry.at("pca_mean").get<std::string>()).data.row(0).transpose();
            p.pca = std::move(pca);
        }
        model.prep.emplace(entry.at("id").get<std::string>(), std::move(p));
    }
    switch (model.config.method) {
    case Method::NA: break;
    case Method::PW:
        for (const auto& m : index.at("pairwise")) {
            model.pairwise.emplace(PairKey{m.at("to").get<std::string>(), m.at("from").get<std::string>()},
                                   OrthogonalMap{read_record(dir / "pairwise" / m.at("file").get<std::string>()).data});
        }
        break;
    case Method::GPA: model.universe = load_universe(dir / "universe"); break;
    case Method::GCPA:
        model.universe = load_universe(dir / "universe");
        model.corrector = load_corrector(dir / "corrector");
        break;
    case Method::GCCA: model.gcca = load_gcca(dir / "gcca"); break;
    }
    return model;
}

/// Registers a new space in a GPA or GCPA model: fits its preprocessing on the
/// given train rows, then one Procrustes solve against the stored consensus.
inline void add_space(Model& model, const EmbeddingMatrix& raw_train) {
    if (model.config.method != Method::GPA && model.config.method != Method::GCPA) {
        throw Error(Errc::ConfigError, "add requires a gpa or gcpa model, this one is " + to_string(model.config.method));
    }
    if (model.prep.count(raw_train.space_id)) {
        throw Error(Errc::ConfigError, "space '" + raw_train.space_id + "' is already registered");
    }
    const Index d = model.universe->dim();
    const bool use_pca = model.prep.begin()->second.pca.has_value();
    SpacePrep p{fit_standardizer(raw_train.data, model.config.standardize), std::nullopt};
    if (use_pca) {
        p.pca = pca_fit(p.standardizer.apply(raw_train.data), d);
    } else if (raw_train.data.cols() != d) {
        throw Error(Errc::ConfigError, "space '" + raw_train.space_id + "' has dimension " +
                                           std::to_string(raw_train.data.cols()) + ", universe has " +
                                           std::to_string(d));
    }
    EmbeddingMatrix x{raw_train.space_id, Split::Train, p.apply(raw_train.data), raw_train.sample_ids};
    if (!model.universe->sample_ids.empty() && !x.sample_ids.empty() && x.sample_ids != model.universe->sample_ids) {
        x = reorder_to(x, model.universe->sample_ids);
    }
    try {
        model.universe = gpa_add(*model.universe, x);
    } catch (const Error& e) {
        throw Error(Errc::ConfigError, e.what());
    }
    model.prep.emplace(x.space_id, std::move(p));
    model.space_ids.push_back(x.space_id);
}

// ---------------------------------------------------------------------------
// Manifest loading
// ---------------------------------------------------------------------------

struct SplitData {
    std::vector<EmbeddingMatrix> spaces; // rows aligned to the first space's ids
    std::vector<int> labels;             // empty when the manifest has none
};

inline SplitData load_split(const Manifest& manifest, Split split, const std::vector<std::string>& only = {}) {
    if (!manifest.has_split(split)) throw Error(Errc::ConfigError, "manifest has no '" + to_string(split) + "' split");
    SplitData out;
    for (const auto& s : manifest.spaces) {
        if (!only.empty() && std::find(only.begin(), only.end(), s.id) == only.end()) continue;
        auto e = read_embeddings(manifest.split_path(s, split), s.id, split);
        if (static_cast<std::size_t>(e.data.cols()) != s.dim) {
            throw Error(Errc::ConfigError, "space '" + s.id + "' declares dim " + std::to_string(s.dim) + " but its " +
                                               to_string(split) + " file has " + std::to_string(e.data.cols()));
        }
        if (!out.spaces.empty() && !e.sample_ids.empty() && e.sample_ids != out.spaces.front().sample_ids) {
            try {
                e = reorder_to(e, out.spaces.front().sample_ids);
            } catch (const Error& err) {
                throw Error(Errc::ConfigError, "space '" + s.id + "': " + err.what());
            }
        }
        out.spaces.push_back(std::move(e));
    }
    for (const auto& id : only) {
        const bool found = std::any_of(out.spaces.begin(), out.spaces.end(),
                                       [&](const EmbeddingMatrix& e) { return e.space_id == id; });
        if (!found) throw Error(Errc::ConfigError, "manifest has no space '" + id + "'");
    }
    if (out.spaces.empty()) throw Error(Errc::ConfigError, "no spaces selected");
    if (manifest.labels) {
        const auto table = read_labels(manifest.base_dir / *manifest.labels);
        for (const auto& id : out.spaces.front().sample_ids) {
            auto it = table.find(id);
            if (it == table.end()) throw Error(Errc::ConfigError, "no label for sample '" + id + "'");
            out.labels.push_back(it->second);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Evaluation of a fitted model on the test split
// ---------------------------------------------------------------------------

inline nlohmann::json evaluate_model(const Model& model, const SplitData& train_raw, const SplitData& test_raw,
                                     std::string* retrieval_tsv = nullptr, std::string* probe_tsv = nullptr) {
    const auto& cfg = model.config;
    std::map<std::string, Matrix> train, test;
    for (const auto& s : train_raw.spaces) train[s.space_id] = model.prep_for(s.space_id).apply(s.data);
    for (const auto& s : test_raw.spaces) test[s.space_id] = model.prep_for(s.space_id).apply(s.data);
    const auto& ids = model.space_ids;
    for (const auto& id : ids) {
        if (!test.count(id)) throw Error(Errc::ConfigError, "test split lacks space '" + id + "'");
    }
    if (cfg.method == Method::NA) {
        for (const auto& id : ids) {
            if (test.at(id).cols() != test.at(ids.front()).cols()) {
                throw Error(Errc::ConfigError, "no-alignment evaluation needs equal dimensions");
            }
        }
    }

    nlohmann::json rep;
    rep["method"] = to_string(cfg.method);
    rep["split"] = "test";
    rep["samples"] = test.at(ids.front()).rows();
    const bool labeled = !test_raw.labels.empty();

    if (cfg.eval_retrieval) {
        const auto r = retrieval_report(
            ids,
            [&](const std::string& from, const std::string& to) {
                return model.pair(from, to, test.at(from), test.at(to), cfg.rescale_gpa_norm);
            },
            (cfg.eval_map && labeled) ? &test_raw.labels : nullptr);
        rep["retrieval"] = to_json(r);
        if (retrieval_tsv) *retrieval_tsv = to_tsv(r);
    }

    if (cfg.eval_probe && labeled && !train_raw.labels.empty()) {
        std::vector<DirectedAccuracy> results;
        std::string tsv = "from\tto\taccuracy\n";
        double sum = 0.0;
        for (const auto& from : ids) {
            for (const auto& to : ids) {
                if (from == to) continue;
                Matrix xs, xt;
                if (cfg.method == Method::PW) {
                    xs = train.at(from);
                    xt = test.at(to) * model.pairwise.at({from, to}).omega;
                } else {
                    xs = model.to_shared(from, train.at(from), true);
                    xt = model.to_shared(to, test.at(to), true);
                }
                const double acc = linear_probe_stitch(xs, train_raw.labels, xt, test_raw.labels, cfg.probe);
                results.push_back({from, to, acc});
                sum += acc;
                tsv += from + '\t' + to + '\t' + std::to_string(acc) + '\n';
            }
        }
        nlohmann::json pj{{"mean_accuracy", sum / static_cast<double>(results.size())}};
        pj["pairs"] = nlohmann::json::array();
        for (const auto& r : results) pj["pairs"].push_back({{"from", r.from}, {"to", r.to}, {"accuracy", r.accuracy}});
        rep["probe"] = pj;
        if (probe_tsv) *probe_tsv = tsv;
    }

    if (cfg.eval_cluster && labeled && cfg.method != Method::PW) {
        const int k = static_cast<int>(std::set<int>(test_raw.labels.begin(), test_raw.labels.end()).size());
        if (k >= 2) {
            std::vector<std::pair<std::string, Matrix>> mapped;
            for (const auto& id : ids) mapped.emplace_back(id, model.to_shared(id, test.at(id), cfg.rescale_gpa_norm));
            std::vector<std::uint64_t> seeds;
            for (auto s : cfg.cluster_seeds) seeds.push_back(derive_seed(cfg.seed, "kmeans." + std::to_string(s)));
            rep["cluster"] = to_json(cluster_eval(mapped, test_raw.labels, k, seeds));
        }
    }

    if (cfg.eval_agreement && ids.size() >= 3) {
        std::vector<Matrix> views;
        for (std::size_t m = 0; m < 3; ++m) {
            if (cfg.method == Method::PW) {
                views.push_back(model.pair(ids[m], ids[0], test.at(ids[m]), test.at(ids[0]), false).first);
            } else {
                views.push_back(model.to_shared(ids[m], test.at(ids[m]), false));
            }
        }
        auto aj = to_json(agreement_metrics(views));
        aj["views"] = std::vector<std::string>(ids.begin(), ids.begin() + 3);
        rep["agreement"] = aj;
    }

    if (cfg.eval_drift && cfg.method == Method::GCPA) {
        Matrix before(0, model.universe->dim()), after(0, model.universe->dim());
        for (const auto& id : ids) {
            const Matrix u = to_universe(*model.universe, test.at(id), id);
            const Matrix y = corrector_forward(*model.corrector, u);
            before.conservativeResize(before.rows() + u.rows(), Eigen::NoChange);
            before.bottomRows(u.rows()) = u;
            after.conservativeResize(after.rows() + y.rows(), Eigen::NoChange);
            after.bottomRows(y.rows()) = y;
        }
        rep["drift"] = to_json(drift_metric(before, after));
    }
    return rep;
}

// ---------------------------------------------------------------------------
// (τ, λ) sensitivity sweep on top of one GPA fit
// ---------------------------------------------------------------------------

struct SweepCell {
    double tau = 0.0;
    double lambda = 0.0;
    double median_drift = 0.0;
    double mean_drift = 0.0;
    double mean_rank1 = 0.0;
};

inline std::vector<SweepCell> trust_sweep(const Universe& universe, const std::vector<EmbeddingMatrix>& train,
                                          const std::vector<EmbeddingMatrix>& test, const RunConfig& cfg) {
    std::vector<SweepCell> cells;
    TrainConfig tc = cfg.train;
    tc.seed = derive_seed(cfg.seed, "gcpa.train");
    std::vector<std::string> ids;
    for (const auto& s : test) ids.push_back(s.space_id);
    for (double tau : cfg.sweep_taus) {
        for (double lambda : cfg.sweep_lambdas) {
            const auto corr = fit_corrector(universe, train, tc, tau, lambda);
            Matrix before(0, universe.dim()), after(0, universe.dim());
            std::map<std::string, Matrix> mapped;
            for (const auto& s : test) {
                const Matrix u = to_universe(universe, s.data, s.space_id);
                const Matrix y = corrector_forward(corr, u);
                mapped[s.space_id] = y;
                before.conservativeResize(before.rows() + u.rows(), Eigen::NoChange);
                before.bottomRows(u.rows()) = u;
                after.conservativeResize(after.rows() + y.rows(), Eigen::NoChange);
                after.bottomRows(y.rows()) = y;
            }
            const auto drift = drift_metric(before, after);
            const auto r = retrieval_report(ids, [&](const std::string& a, const std::string& b) {
                return std::pair{mapped.at(a), mapped.at(b)};
            });
            cells.push_back({tau, lambda, drift.median, drift.mean, r.mean_rank1});
        }
    }
    return cells;
}

// ---------------------------------------------------------------------------
// Synthetic data on disk
// ---------------------------------------------------------------------------

inline SynthSpec synth_spec_from_json(const nlohmann::json& j) {
    SynthSpec s;
    try {
        detail::reject_unknown(j,
                               {"num_spaces", "samples", "val_samples", "test_samples", "dim", "latent_dim",
                                "num_classes", "class_separation", "noise_sigma", "noise_spread", "distortion",
                                "distortion_strength", "weak_pair", "weak_amplitude", "seed"},
                               "synthetic spec");
        detail::read_opt(j, "num_spaces", s.num_spaces);
        detail::read_opt(j, "samples", s.samples);
        detail::read_opt(j, "val_samples", s.val_samples);
        detail::read_opt(j, "test_samples", s.test_samples);
        detail::read_opt(j, "dim", s.dim);
        detail::read_opt(j, "latent_dim", s.latent_dim);
        detail::read_opt(j, "num_classes", s.num_classes);
        detail::read_opt(j, "class_separation", s.class_separation);
        detail::read_opt(j, "noise_sigma", s.noise_sigma);
        detail::read_opt(j, "noise_spread", s.noise_spread);
        if (j.contains("distortion")) s.distortion = parse_distortion(j["distortion"].get<std::string>());
        detail::read_opt(j, "distortion_strength", s.distortion_strength);
        detail::read_opt(j, "weak_amplitude", s.weak_amplitude);
        detail::read_opt(j, "seed", s.seed);
        if (j.contains("weak_pair") && !j["weak_pair"].is_null()) {
            const auto& w = j["weak_pair"];
            detail::reject_unknown(w, {"first", "second", "corruption_strength"}, "weak_pair");
            s.weak_pair = WeakPair{w.at("first").get<std::size_t>(), w.at("second").get<std::size_t>(),
                                   w.value("corruption_strength", 0.0)};
        }
        s.validate();
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::ConfigError, std::string("synthetic spec: ") + e.what());
    } catch (const Error& e) {
        if (e.code() == Errc::ConfigError) throw;
        throw Error(Errc::ConfigError, e.what());
    }
    return s;
}

inline Manifest write_synthetic(const SynthSpec& spec, const std::filesystem::path& dir) {
    const auto data = generate_synthetic(spec);
    Manifest m;
    m.base_dir = dir;
    m.splits = {{"train", "train.mwal"}, {"test", "test.mwal"}};
    if (spec.val_samples > 0) m.splits["val"] = "val.mwal";
    m.labels = "labels.tsv";
    m.common_dim = spec.dim;
    for (const auto& s : data.spaces) {
        const auto id = s.train.space_id;
        m.spaces.push_back({id, id, spec.dim});
        write_embeddings(s.train, dir / id / "train.mwal");
        write_embeddings(s.test, dir / id / "test.mwal");
        if (spec.val_samples > 0) write_embeddings(s.val, dir / id / "val.mwal");
    }
    if (spec.weak_pair) m.weak_pair = {space_name(spec.weak_pair->first), space_name(spec.weak_pair->second)};
    const auto& s0 = data.spaces.front();
    write_labels(dir / "labels.tsv", s0.train.sample_ids, data.train_labels);
    write_labels(dir / "labels.tsv", s0.val.sample_ids, data.val_labels, true);
    write_labels(dir / "labels.tsv", s0.test.sample_ids, data.test_labels, true);
    write_manifest(m, dir / "manifest.json");
    return m;
}

} // namespace mway
