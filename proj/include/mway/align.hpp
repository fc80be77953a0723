// Copyright 2026 The mway Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "mway/dataio.hpp"
#include "mway/error.hpp"
#include "mway/numkernel.hpp"

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace mway {

// Row-vector convention throughout: a sample x of space n is mapped into the
// universe as x·Ω_n and back into space m as u·Ω_mᵀ, so the induced map that
// takes rows of n to rows of m is Ω_{m←n} = Ω_n·Ω_mᵀ.

enum class GpaInit : std::uint8_t { FirstSpace, MeanOfRaw };

struct GpaConfig {
    int max_iters = 200;
    double dispersion_rel_tol = 1e-9;
    GpaInit init_mode = GpaInit::FirstSpace;

    void validate() const {
        if (max_iters < 1) throw Error(Errc::InvalidInput, "GPA max_iters must be >= 1");
        if (!(dispersion_rel_tol > 0.0)) throw Error(Errc::InvalidInput, "GPA tolerance must be > 0");
    }
};

/// Shared reference frame: one orthogonal map per space plus the train-set consensus.
struct Universe {
    Matrix consensus;                    // N×d, mean of X_m·Ω_m over the fit data
    std::vector<std::string> space_ids;
    std::vector<OrthogonalMap> maps;     // parallel to space_ids
    std::vector<std::string> sample_ids; // rows of the fit data
    std::vector<double> fit_log;         // dispersion after initialization and after every iteration

    [[nodiscard]] Index dim() const { return consensus.cols(); }
    [[nodiscard]] std::size_t size() const { return space_ids.size(); }

    std::size_t index_of(const std::string& id) const {
        for (std::size_t m = 0; m < space_ids.size(); ++m) {
            if (space_ids[m] == id) return m;
        }
        throw Error(Errc::LookupError, "space '" + id + "' is not registered in the universe");
    }

    [[nodiscard]] bool contains(const std::string& id) const {
        return std::find(space_ids.begin(), space_ids.end(), id) != space_ids.end();
    }

    [[nodiscard]] const OrthogonalMap& map(const std::string& id) const { return maps[index_of(id)]; }

    /// Ω_{to←from}: rows of `from` times this matrix land in `to`'s coordinates.
    [[nodiscard]] Matrix induced_map(const std::string& to, const std::string& from) const {
        return map(from).omega * map(to).omega.transpose();
    }

    [[nodiscard]] double final_dispersion() const { return fit_log.empty() ? 0.0 : fit_log.back(); }
};

using PairKey = std::pair<std::string, std::string>; // (to, from)
using PairwiseMaps = std::map<PairKey, OrthogonalMap>;

namespace detail {

inline void require_matched(const std::vector<EmbeddingMatrix>& spaces, std::size_t min_spaces) {
    if (spaces.size() < min_spaces) {
        throw Error(Errc::InvalidInput, "need at least " + std::to_string(min_spaces) + " spaces");
    }
    const auto& ref = spaces.front();
    for (const auto& s : spaces) {
        if (s.data.rows() != ref.data.rows()) {
            throw Error(Errc::CorrespondenceError, "space '" + s.space_id + "' has " + std::to_string(s.data.rows()) +
                                                       " rows, expected " + std::to_string(ref.data.rows()));
        }
        if (!s.sample_ids.empty() && !ref.sample_ids.empty() && s.sample_ids != ref.sample_ids) {
            throw Error(Errc::CorrespondenceError,
                        "sample ids of space '" + s.space_id + "' do not match '" + ref.space_id + "'");
        }
        require_finite(s.data, "space '" + s.space_id + "'");
    }
}

inline void require_same_dim(const std::vector<EmbeddingMatrix>& spaces) {
    for (const auto& s : spaces) {
        if (s.data.cols() != spaces.front().data.cols()) {
            throw Error(Errc::ShapeError, "space '" + s.space_id + "' has dimension " + std::to_string(s.data.cols()) +
                                              ", expected " + std::to_string(spaces.front().data.cols()));
        }
    }
}

} // namespace detail

/// Direct Procrustes solve for every ordered pair; M(M−1) maps keyed (to, from).
inline PairwiseMaps fit_pairwise(const std::vector<EmbeddingMatrix>& spaces) {
    detail::require_matched(spaces, 2);
    detail::require_same_dim(spaces);
    PairwiseMaps maps;
    for (const auto& to : spaces) {
        for (const auto& from : spaces) {
            if (&to == &from) continue;
            maps.emplace(PairKey{to.space_id, from.space_id}, orthogonal_procrustes(from.data, to.data));
        }
    }
    return maps;
}

inline double gpa_dispersion(const std::vector<EmbeddingMatrix>& spaces, const std::vector<OrthogonalMap>& maps,
                             const Matrix& consensus) {
    double total = 0.0;
    for (std::size_t m = 0; m < spaces.size(); ++m) {
        total += (spaces[m].data * maps[m].omega - consensus).squaredNorm();
    }
    return total;
}

inline Matrix gpa_consensus(const std::vector<EmbeddingMatrix>& spaces, const std::vector<OrthogonalMap>& maps) {
    Matrix u = Matrix::Zero(spaces.front().data.rows(), spaces.front().data.cols());
    for (std::size_t m = 0; m < spaces.size(); ++m) {
        u.noalias() += spaces[m].data * maps[m].omega;
    }
    return u / static_cast<double>(spaces.size());
}

/// Alternating minimization of Σ_m ‖X_m·Ω_m − U‖²_F over Ω_m ∈ O(d) and U.
inline Universe fit_gpa(const std::vector<EmbeddingMatrix>& spaces, const GpaConfig& cfg = {}) {
    cfg.validate();
    detail::require_matched(spaces, 1);
    detail::require_same_dim(spaces);
    const Index d = spaces.front().data.cols();

    Universe uni;
    uni.sample_ids = spaces.front().sample_ids;
    for (const auto& s : spaces) {
        if (uni.contains(s.space_id)) throw Error(Errc::InvalidInput, "duplicate space id '" + s.space_id + "'");
        uni.space_ids.push_back(s.space_id);
    }
    uni.maps.assign(spaces.size(), OrthogonalMap::identity(d));
    if (cfg.init_mode == GpaInit::FirstSpace) {
        for (std::size_t m = 1; m < spaces.size(); ++m) {
            uni.maps[m] = orthogonal_procrustes(spaces[m].data, spaces.front().data);
        }
    }
    uni.consensus = gpa_consensus(spaces, uni.maps);
    double prev = gpa_dispersion(spaces, uni.maps, uni.consensus);
    uni.fit_log.push_back(prev);

    for (int it = 0; it < cfg.max_iters; ++it) {
        auto maps = uni.maps;
        for (std::size_t m = 0; m < spaces.size(); ++m) {
            maps[m] = orthogonal_procrustes(spaces[m].data, uni.consensus);
        }
        Matrix consensus = gpa_consensus(spaces, maps);
        const double cur = gpa_dispersion(spaces, maps, consensus);
        if (!std::isfinite(cur)) {
            throw Error(Errc::NumericalError, "GPA dispersion became non-finite at iteration " + std::to_string(it));
        }
        if (cur > prev) break; // round-off at the optimum; keep the better iterate
        uni.maps = std::move(maps);
        uni.consensus = std::move(consensus);
        uni.fit_log.push_back(cur);
        const bool converged = prev <= 0.0 || (prev - cur) / prev < cfg.dispersion_rel_tol;
        prev = cur;
        if (converged) break;
    }
    return uni;
}

/// Registers one more space by a single Procrustes solve against the frozen consensus.
inline Universe gpa_add(const Universe& universe, const EmbeddingMatrix& new_space) {
    if (universe.contains(new_space.space_id)) {
        throw Error(Errc::InvalidInput, "space '" + new_space.space_id + "' is already registered");
    }
    if (new_space.data.cols() != universe.dim() || new_space.data.rows() != universe.consensus.rows()) {
        throw Error(Errc::ShapeError, "new space is " + std::to_string(new_space.data.rows()) + "x" +
                                          std::to_string(new_space.data.cols()) + ", universe fit data is " +
                                          std::to_string(universe.consensus.rows()) + "x" +
                                          std::to_string(universe.dim()));
    }
    if (!universe.sample_ids.empty() && !new_space.sample_ids.empty() && new_space.sample_ids != universe.sample_ids) {
        throw Error(Errc::CorrespondenceError, "sample ids of '" + new_space.space_id + "' do not match the fit data");
    }
    Universe out = universe;
    out.space_ids.push_back(new_space.space_id);
    out.maps.push_back(orthogonal_procrustes(new_space.data, universe.consensus));
    return out;
}

inline Matrix to_universe(const Universe& universe, const Matrix& x, const std::string& space) {
    const auto& map = universe.map(space);
    if (x.cols() != map.dim()) throw Error(Errc::ShapeError, "input dimension does not match space '" + space + "'");
    return x * map.omega;
}

inline Matrix from_universe(const Universe& universe, const Matrix& u, const std::string& space) {
    const auto& map = universe.map(space);
    if (u.cols() != map.dim()) throw Error(Errc::ShapeError, "universe dimension mismatch for space '" + space + "'");
    return u * map.omega.transpose();
}

inline Matrix translate(const Universe& universe, const Matrix& x, const std::string& from, const std::string& to) {
    if (from == to) {
        universe.index_of(from);
        return x;
    }
    return from_universe(universe, to_universe(universe, x, from), to);
}

// ---------------------------------------------------------------------------
// Persistence: a directory with universe.json plus one float64 record per map.
// ---------------------------------------------------------------------------

inline std::string map_file_name(const std::string& space_id) { return "omega_" + space_id + ".mwal"; }

inline void save_universe(const Universe& u, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    nlohmann::json index;
    index["space_ids"] = u.space_ids;
    index["d"] = u.dim();
    index["dispersion_final"] = u.final_dispersion();
    index["fit_log"] = u.fit_log;
    index["consensus"] = "consensus.mwal";
    index["maps"] = nlohmann::json::array();
    for (std::size_t m = 0; m < u.size(); ++m) {
        const auto name = map_file_name(u.space_ids[m]);
        index["maps"].push_back(name);
        const auto path = dir / name;
        // Existing maps are never rewritten, so appending a space leaves their bytes untouched.
        if (!std::filesystem::exists(path)) {
            write_record(path, u.maps[m].omega);
        }
    }
    write_record(dir / "consensus.mwal", u.consensus, u.sample_ids);
    detail::write_file(dir / "universe.json", index.dump(2) + "\n");
}

inline Universe load_universe(const std::filesystem::path& dir) {
    nlohmann::json index;
    try {
        index = nlohmann::json::parse(detail::read_file(dir / "universe.json"));
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::FormatError, (dir / "universe.json").string() + ": " + e.what());
    }
    Universe u;
    u.space_ids = index.at("space_ids").get<std::vector<std::string>>();
    u.fit_log = index.value("fit_log", std::vector<double>{});
    auto consensus = read_record(dir / index.at("consensus").get<std::string>());
    u.consensus = std::move(consensus.data);
    u.sample_ids = std::move(consensus.ids);
    const auto files = index.at("maps").get<std::vector<std::string>>();
    for (const auto& f : files) {
        u.maps.push_back({read_record(dir / f).data});
    }
    if (u.maps.size() != u.space_ids.size()) {
        throw Error(Errc::FormatError, "universe index lists " + std::to_string(u.space_ids.size()) + " spaces but " +
                                           std::to_string(u.maps.size()) + " maps");
    }
    return u;
}

} // namespace mway
