// Copyright 2026 The mway Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "mway/align.hpp"
#include "mway/dataio.hpp"
#include "mway/numkernel.hpp"

#include <json.hpp>

#include <filesystem>
#include <numeric>
#include <string>
#include <vector>

namespace mway {

/// Per-space pieces of a shared-basis fit. X = U·diag(Σ)·Vᵀ on the retained rank.
struct SharedBasisSpace {
    std::string space_id;
    Index retained_rank = 0;
    Matrix basis_projection; // Φ*_m, r_m × R
    Matrix feature_map;      // Q̃_m = V_m Σ_m⁻¹ Φ*_m, d_m × R
    Matrix scaled_map;       // Q_m = V_m Φ*_m, d_m × R
    SvdResult svd;
};

struct SharedBasisModel {
    std::vector<SharedBasisSpace> spaces;
    Index rank = 0;     // R
    Vector eigenvalues; // the R smallest eigenvalues of S, ascending

    [[nodiscard]] const SharedBasisSpace& space(const std::string& id) const {
        for (const auto& s : spaces) {
            if (s.space_id == id) return s;
        }
        throw Error(Errc::LookupError, "space '" + id + "' is not part of the shared-basis model");
    }

    /// Φ* stacked over spaces, (Σ r_m) × R.
    [[nodiscard]] Matrix stacked_projection() const {
        Index total = 0;
        for (const auto& s : spaces) total += s.retained_rank;
        Matrix phi(total, rank);
        Index offset = 0;
        for (const auto& s : spaces) {
            phi.middleRows(offset, s.retained_rank) = s.basis_projection;
            offset += s.retained_rank;
        }
        return phi;
    }

    /// Y_m = U_m Φ*_m for every space.
    [[nodiscard]] std::vector<Matrix> aligned_embeddings() const {
        std::vector<Matrix> ys;
        ys.reserve(spaces.size());
        for (const auto& s : spaces) ys.push_back(s.svd.left * s.basis_projection);
        return ys;
    }

    /// Σ_{i<j} ‖Y_i − Y_j‖²_F evaluated at the fitted projections.
    [[nodiscard]] double objective() const {
        const auto ys = aligned_embeddings();
        double total = 0.0;
        for (std::size_t i = 0; i < ys.size(); ++i) {
            for (std::size_t j = i + 1; j < ys.size(); ++j) total += (ys[i] - ys[j]).squaredNorm();
        }
        return total;
    }
};

/// Block matrix with S_mm = (M−1)·I and S_mn = −U_mᵀU_n.
inline Matrix gcca_block_matrix(const std::vector<Matrix>& bases) {
    const auto m_count = static_cast<double>(bases.size());
    Index total = 0;
    for (const auto& u : bases) total += u.cols();
    Matrix s(total, total);
    Index row = 0;
    for (std::size_t i = 0; i < bases.size(); ++i) {
        Index col = 0;
        for (std::size_t j = 0; j < bases.size(); ++j) {
            auto block = s.block(row, col, bases[i].cols(), bases[j].cols());
            if (i == j) {
                block = (m_count - 1.0) * Matrix::Identity(bases[i].cols(), bases[i].cols());
            } else {
                block = -bases[i].transpose() * bases[j];
            }
            col += bases[j].cols();
        }
        row += bases[i].cols();
    }
    return s;
}

/// Spectral shared-basis solve: bottom-R eigenvectors of S give Φ*, which
/// split into per-space blocks and pull back to feature maps through the SVD.
inline SharedBasisModel fit_gcca(const std::vector<EmbeddingMatrix>& spaces, Index rank,
                                 double svd_tol = kDefaultSvdRelTol) {
    detail::require_matched(spaces, 2);
    if (rank < 1) throw Error(Errc::InvalidRank, "GCCA rank must be >= 1");

    SharedBasisModel model;
    model.rank = rank;
    std::vector<Matrix> bases;
    Index total = 0;
    for (const auto& s : spaces) {
        SharedBasisSpace part;
        part.space_id = s.space_id;
        part.svd = thin_svd(s.data, std::nullopt, svd_tol);
        part.retained_rank = part.svd.retained_rank;
        total += part.retained_rank;
        bases.push_back(part.svd.left);
        model.spaces.push_back(std::move(part));
    }
    if (rank > total) {
        throw Error(Errc::InvalidRank, "GCCA rank " + std::to_string(rank) + " exceeds total retained rank " +
                                           std::to_string(total));
    }

    const Matrix s = gcca_block_matrix(bases);
    auto eig = sym_eig_smallest(s, rank);
    model.eigenvalues = eig.values;

    Index offset = 0;
    for (auto& part : model.spaces) {
        part.basis_projection = eig.vectors.middleRows(offset, part.retained_rank);
        offset += part.retained_rank;
        part.scaled_map = part.svd.right * part.basis_projection;
        part.feature_map = part.svd.right * part.svd.singular.cwiseInverse().asDiagonal() * part.basis_projection;
    }
    return model;
}

/// x·Q̃_space (or x·Q_space when `scaled` is set).
inline Matrix gcca_embed(const SharedBasisModel& model, const Matrix& x, const std::string& space,
                         bool scaled = false) {
    const auto& part = model.space(space);
    const Matrix& q = scaled ? part.scaled_map : part.feature_map;
    if (x.cols() != q.rows()) {
        throw Error(Errc::ShapeError, "space '" + space + "' expects " + std::to_string(q.rows()) + " features, got " +
                                          std::to_string(x.cols()));
    }
    return x * q;
}

/// Top-R left singular vectors of G = [Y_1 | … | Y_M].
inline Matrix shared_subspace(const SharedBasisModel& model) {
    const auto ys = model.aligned_embeddings();
    const Index n = ys.front().rows();
    Matrix g(n, model.rank * static_cast<Index>(ys.size()));
    for (std::size_t m = 0; m < ys.size(); ++m) g.middleCols(static_cast<Index>(m) * model.rank, model.rank) = ys[m];
    return thin_svd(g, model.rank, 0.0).left;
}

inline void save_gcca(const SharedBasisModel& model, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    nlohmann::json index;
    index["R"] = model.rank;
    index["eigenvalues"] = std::vector<double>(model.eigenvalues.data(), model.eigenvalues.data() + model.eigenvalues.size());
    index["spaces"] = nlohmann::json::array();
    for (const auto& s : model.spaces) {
        index["spaces"].push_back({{"id", s.space_id}, {"retained_rank", s.retained_rank},
                                   {"feature_map", "q_" + s.space_id + ".mwal"},
                                   {"scaled_map", "qs_" + s.space_id + ".mwal"}});
        write_record(dir / ("q_" + s.space_id + ".mwal"), s.feature_map);
        write_record(dir / ("qs_" + s.space_id + ".mwal"), s.scaled_map);
    }
    detail::write_file(dir / "gcca.json", index.dump(2) + "\n");
}

/// Restores the maps needed for inference; SVD factors are not persisted.
inline SharedBasisModel load_gcca(const std::filesystem::path& dir) {
    const auto index = nlohmann::json::parse(detail::read_file(dir / "gcca.json"));
    SharedBasisModel model;
    model.rank = index.at("R").get<Index>();
    const auto ev = index.at("eigenvalues").get<std::vector<double>>();
    model.eigenvalues = Eigen::Map<const Vector>(ev.data(), static_cast<Index>(ev.size()));
    for (const auto& s : index.at("spaces")) {
        SharedBasisSpace part;
        part.space_id = s.at("id").get<std::string>();
        part.retained_rank = s.at("retained_rank").get<Index>();
        part.feature_map = read_record(dir / s.at("feature_map").get<std::string>()).data;
        part.scaled_map = read_record(dir / s.at("scaled_map").get<std::string>()).data;
        model.spaces.push_back(std::move(part));
    }
    return model;
}

} // namespace mway
