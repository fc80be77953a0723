// Copyright 2026 The mway Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "mway/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mway {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

inline constexpr double kDefaultSvdRelTol = 1e-12;

inline void require_finite(const Matrix& a, std::string_view what) {
    if (!a.allFinite()) {
        throw Error(Errc::InvalidInput, std::string(what) + " contains non-finite entries");
    }
}

inline void require_same_shape(const Matrix& a, const Matrix& b, std::string_view what) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw Error(Errc::ShapeError, std::string(what) + ": shape " + std::to_string(a.rows()) + "x" +
                                          std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                                          std::to_string(b.cols()));
    }
}

/// Deviation of Fᵀ F from the identity in Frobenius norm.
inline double orthonormality_error(const Matrix& f) {
    return (f.transpose() * f - Matrix::Identity(f.cols(), f.cols())).norm();
}

/// Sign convention for eigen/singular vectors: the largest-magnitude entry of
/// each column is made positive, ties going to the lowest row index. `partner`
/// columns (e.g. right singular vectors) are flipped together with `cols`.
inline void canonicalize_signs(Matrix& cols, Matrix* partner = nullptr) {
    for (Index j = 0; j < cols.cols(); ++j) {
        Index best = 0;
        double best_abs = -1.0;
        for (Index i = 0; i < cols.rows(); ++i) {
            const double a = std::abs(cols(i, j));
            if (a > best_abs) {
                best_abs = a;
                best = i;
            }
        }
        if (cols(best, j) < 0.0) {
            cols.col(j) *= -1.0;
            if (partner != nullptr) {
                partner->col(j) *= -1.0;
            }
        }
    }
}

/// Thin SVD a = left · diag(singular) · rightᵀ truncated to the retained rank.
struct SvdResult {
    Matrix left;
    Vector singular;
    Matrix right;
    Index retained_rank = 0;

    [[nodiscard]] Matrix reconstruct() const { return left * singular.asDiagonal() * right.transpose(); }
};

/// Keeps singular values strictly greater than rel_tol·σ_max, capped at max_rank.
inline SvdResult thin_svd(const Matrix& a, std::optional<Index> max_rank = std::nullopt,
                          double rel_tol = kDefaultSvdRelTol) {
    require_finite(a, "thin_svd input");
    if (a.rows() < 1 || a.cols() < 1) {
        throw Error(Errc::InvalidInput, "thin_svd on empty matrix");
    }
    if (!(rel_tol >= 0.0 && rel_tol < 1.0)) {
        throw Error(Errc::InvalidInput, "thin_svd rel_tol must lie in [0,1)");
    }
    if (max_rank && *max_rank < 1) {
        throw Error(Errc::InvalidRank, "thin_svd max_rank must be >= 1");
    }
    Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& s = svd.singularValues();
    const double cutoff = rel_tol * (s.size() > 0 ? s(0) : 0.0);
    Index rank = 0;
    while (rank < s.size() && s(rank) > cutoff) {
        ++rank;
    }
    if (max_rank) {
        rank = std::min(rank, *max_rank);
    }
    if (rank == 0) {
        throw Error(Errc::RankZero, "thin_svd: no singular value above tolerance");
    }
    SvdResult out;
    out.left = svd.matrixU().leftCols(rank);
    out.right = svd.matrixV().leftCols(rank);
    out.singular = s.head(rank);
    out.retained_rank = rank;
    canonicalize_signs(out.left, &out.right);
    return out;
}

struct EigenPairs {
    Vector values;
    Matrix vectors;
};

namespace detail {

inline Eigen::SelfAdjointEigenSolver<Matrix> symmetric_solver(const Matrix& s, Index r) {
    require_finite(s, "symmetric eigensolver input");
    if (s.rows() != s.cols()) {
        throw Error(Errc::InvalidInput, "symmetric eigensolver requires a square matrix");
    }
    if (r < 1 || r > s.rows()) {
        throw Error(Errc::InvalidRank, "requested " + std::to_string(r) + " eigenpairs of a " +
                                           std::to_string(s.rows()) + "x" + std::to_string(s.rows()) + " matrix");
    }
    const double scale = s.norm();
    if (scale > 0.0 && (s - s.transpose()).norm() / scale >= 1e-8) {
        throw Error(Errc::InvalidInput, "symmetric eigensolver input is not symmetric");
    }
    // Symmetrize so round-off asymmetry cannot leak into the solve.
    const Matrix sym = 0.5 * (s + s.transpose());
    return Eigen::SelfAdjointEigenSolver<Matrix>(sym);
}

} // namespace detail

/// The r smallest eigenpairs of a symmetric matrix, values ascending.
inline EigenPairs sym_eig_smallest(const Matrix& s, Index r) {
    auto solver = detail::symmetric_solver(s, r);
    EigenPairs out{solver.eigenvalues().head(r), solver.eigenvectors().leftCols(r)};
    canonicalize_signs(out.vectors);
    return out;
}

/// The r largest eigenpairs of a symmetric matrix, values descending.
inline EigenPairs sym_eig_largest(const Matrix& s, Index r) {
    auto solver = detail::symmetric_solver(s, r);
    const Index n = s.rows();
    EigenPairs out{Vector(r), Matrix(n, r)};
    for (Index j = 0; j < r; ++j) {
        out.values(j) = solver.eigenvalues()(n - 1 - j);
        out.vectors.col(j) = solver.eigenvectors().col(n - 1 - j);
    }
    canonicalize_signs(out.vectors);
    return out;
}

/// A d×d map in O(d). Row vectors are mapped as x ↦ x·omega.
struct OrthogonalMap {
    Matrix omega;

    [[nodiscard]] Index dim() const { return omega.rows(); }
    [[nodiscard]] OrthogonalMap transpose() const { return {omega.transpose()}; }
    [[nodiscard]] Matrix apply(const Matrix& x) const { return x * omega; }
    static OrthogonalMap identity(Index d) { return {Matrix::Identity(d, d)}; }
};

/// argmin over Ω ∈ O(d) of ‖source·Ω − target‖_F, from the SVD of sourceᵀ·target.
inline OrthogonalMap orthogonal_procrustes(const Matrix& source, const Matrix& target) {
    require_same_shape(source, target, "orthogonal_procrustes");
    require_finite(source, "orthogonal_procrustes source");
    require_finite(target, "orthogonal_procrustes target");
    const Matrix cross = source.transpose() * target;
    Eigen::JacobiSVD<Matrix> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
    return {svd.matrixU() * svd.matrixV().transpose()};
}

/// Per-dimension standardization fitted on one split and applied to others.
struct StandardizerState {
    Vector mean;
    Vector scale;

    [[nodiscard]] Matrix apply(const Matrix& x) const {
        if (x.cols() != mean.size()) {
            throw Error(Errc::ShapeError, "standardizer expects " + std::to_string(mean.size()) + " columns, got " +
                                              std::to_string(x.cols()));
        }
        return (x.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
    }
};

/// Population statistics; dimensions with (near) zero variance keep scale 1.
inline StandardizerState standardize_fit(const Matrix& x) {
    require_finite(x, "standardize_fit input");
    if (x.rows() < 1) {
        throw Error(Errc::InvalidInput, "standardize_fit on empty matrix");
    }
    StandardizerState st;
    st.mean = x.colwise().mean().transpose();
    const Matrix centered = x.rowwise() - st.mean.transpose();
    st.scale = (centered.colwise().squaredNorm() / static_cast<double>(x.rows())).cwiseSqrt().transpose();
    for (Index j = 0; j < st.scale.size(); ++j) {
        if (!(st.scale(j) > 1e-12 * (1.0 + std::abs(st.mean(j))))) {
            st.scale(j) = 1.0;
        }
    }
    return st;
}

inline Matrix standardize_apply(const StandardizerState& state, const Matrix& x) { return state.apply(x); }

struct PcaState {
    Vector mean;
    Matrix components; // d_in × d_out, orthonormal columns
    Vector explained_variance;

    [[nodiscard]] Matrix apply(const Matrix& x) const {
        if (x.cols() != mean.size()) {
            throw Error(Errc::ShapeError, "pca expects " + std::to_string(mean.size()) + " columns, got " +
                                              std::to_string(x.cols()));
        }
        return (x.rowwise() - mean.transpose()) * components;
    }
};

inline PcaState pca_fit(const Matrix& x, Index d_out) {
    require_finite(x, "pca_fit input");
    if (d_out < 1 || d_out > std::min<Index>(x.rows() - 1, x.cols())) {
        throw Error(Errc::InvalidRank, "pca_fit: d_out=" + std::to_string(d_out) + " exceeds min(N-1, d_in)");
    }
    PcaState st;
    st.mean = x.colwise().mean().transpose();
    const Matrix centered = x.rowwise() - st.mean.transpose();
    const Matrix cov = centered.transpose() * centered / static_cast<double>(x.rows() - 1);
    auto eig = sym_eig_largest(cov, d_out);
    st.components = std::move(eig.vectors);
    st.explained_variance = std::move(eig.values);
    return st;
}

inline Matrix pca_apply(const PcaState& state, const Matrix& x) { return state.apply(x); }

struct NormalizedRows {
    Matrix rows;
    std::vector<bool> flagged; // true where the input row norm was below eps
};

/// Unit ℓ₂ rows; rows with norm < eps are passed through and flagged.
inline NormalizedRows row_normalize(const Matrix& x, double eps = 1e-12) {
    NormalizedRows out{x, std::vector<bool>(static_cast<std::size_t>(x.rows()), false)};
    for (Index i = 0; i < x.rows(); ++i) {
        const double n = x.row(i).norm();
        if (n < eps) {
            out.flagged[static_cast<std::size_t>(i)] = true;
        } else {
            out.rows.row(i) /= n;
        }
    }
    return out;
}

inline Matrix normalized_rows(const Matrix& x, double eps = 1e-12) { return row_normalize(x, eps).rows; }

} // namespace mway
