// Copyright 2026 The mway Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "mway/align.hpp"
#include "mway/dataio.hpp"
#include "mway/numkernel.hpp"
#include "mway/random.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

namespace mway {

inline constexpr double kDefaultTau = 0.10;
inline constexpr double kDefaultLambda = 1.0;
inline constexpr double kConsensusEps = 1e-8;

/// Per-sample unit consensus directions c_i. Rows whose summed unit views
/// nearly cancel are flagged and left at zero.
struct ConsensusSet {
    Matrix directions;
    std::vector<bool> degenerate;

    [[nodiscard]] std::size_t degenerate_count() const {
        return static_cast<std::size_t>(std::count(degenerate.begin(), degenerate.end(), true));
    }
};

inline ConsensusSet consensus_directions(const std::vector<Matrix>& universe_points, double eps = kConsensusEps) {
    if (universe_points.size() < 2) throw Error(Errc::InvalidInput, "consensus needs at least two views");
    const Index n = universe_points.front().rows();
    const Index d = universe_points.front().cols();
    for (const auto& v : universe_points) {
        if (v.rows() != n || v.cols() != d) throw Error(Errc::ShapeError, "consensus views differ in shape");
    }
    Matrix sum = Matrix::Zero(n, d);
    for (const auto& v : universe_points) sum += normalized_rows(v);
    ConsensusSet out{Matrix::Zero(n, d), std::vector<bool>(static_cast<std::size_t>(n), false)};
    for (Index i = 0; i < n; ++i) {
        const double norm = sum.row(i).norm();
        if (norm < eps) {
            out.degenerate[static_cast<std::size_t>(i)] = true;
        } else {
            out.directions.row(i) = sum.row(i) / norm;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Residual MLP Δ_θ: tanh hidden layers, linear output.
// ---------------------------------------------------------------------------

struct Mlp {
    std::vector<Matrix> weights; // layer l maps rows of width weights[l].rows() to weights[l].cols()
    std::vector<Vector> biases;

    [[nodiscard]] std::size_t layers() const { return weights.size(); }

    /// Activations per layer; front() is the input, back() the linear output.
    [[nodiscard]] std::vector<Matrix> forward_all(const Matrix& x) const {
        std::vector<Matrix> acts;
        acts.reserve(layers() + 1);
        acts.push_back(x);
        for (std::size_t l = 0; l < layers(); ++l) {
            Matrix z = acts.back() * weights[l];
            z.rowwise() += biases[l].transpose();
            if (l + 1 < layers()) z = z.array().tanh().matrix();
            acts.push_back(std::move(z));
        }
        return acts;
    }

    [[nodiscard]] Matrix forward(const Matrix& x) const { return forward_all(x).back(); }

    [[nodiscard]] std::size_t parameter_count() const {
        std::size_t n = 0;
        for (std::size_t l = 0; l < layers(); ++l) {
            n += static_cast<std::size_t>(weights[l].size() + biases[l].size());
        }
        return n;
    }
};

/// Hidden layers get Glorot-uniform weights; the output layer starts at zero
/// so the untrained residual is exactly Δ_θ ≡ 0.
inline Mlp make_residual_mlp(Index dim, const std::vector<Index>& hidden, std::uint64_t seed) {
    Mlp net;
    Rng rng = make_rng(seed, "gcpa.init");
    Index in = dim;
    for (Index width : hidden) {
        if (width < 1) throw Error(Errc::InvalidInput, "hidden widths must be positive");
        const double a = std::sqrt(6.0 / static_cast<double>(in + width));
        std::uniform_real_distribution<double> dist(-a, a);
        Matrix w(in, width);
        for (Index i = 0; i < in; ++i) {
            for (Index j = 0; j < width; ++j) w(i, j) = dist(rng);
        }
        net.weights.push_back(std::move(w));
        net.biases.push_back(Vector::Zero(width));
        in = width;
    }
    net.weights.push_back(Matrix::Zero(in, dim));
    net.biases.push_back(Vector::Zero(dim));
    return net;
}

struct TrainConfig {
    int epochs = 40;
    int batch_size = 128;
    double learning_rate = 0.5;
    std::vector<Index> hidden; // empty -> two layers of width 2d
    std::uint64_t seed = 0;

    void validate() const {
        if (epochs < 1 || batch_size < 1 || !(learning_rate > 0.0)) {
            throw Error(Errc::InvalidInput, "train config values must be positive");
        }
    }
};

/// Shared residual corrector T_θ(u) = norm(û + Δ_θ(û)) with its trust hyperparameters.
struct Corrector {
    Mlp delta;
    Index dim = 0;
    std::vector<Index> hidden;
    double tau = kDefaultTau;
    double lambda = kDefaultLambda;
    std::uint64_t seed = 0;
    std::vector<double> loss_log; // full training loss before training and after each epoch
};

inline Corrector make_corrector(Index dim, std::vector<Index> hidden, double tau, double lambda, std::uint64_t seed) {
    if (!(tau >= 0.0) || !(lambda >= 0.0)) throw Error(Errc::InvalidInput, "tau and lambda must be >= 0");
    if (hidden.empty()) hidden = {2 * dim, 2 * dim};
    Corrector c;
    c.dim = dim;
    c.hidden = hidden;
    c.tau = tau;
    c.lambda = lambda;
    c.seed = seed;
    c.delta = make_residual_mlp(dim, hidden, seed);
    return c;
}

inline Matrix corrector_forward(const Corrector& corrector, const Matrix& u) {
    if (u.cols() != corrector.dim) {
        throw Error(Errc::ShapeError, "corrector expects dimension " + std::to_string(corrector.dim) + ", got " +
                                          std::to_string(u.cols()));
    }
    const Matrix uhat = normalized_rows(u);
    return normalized_rows(uhat + corrector.delta.forward(uhat));
}

struct LossBreakdown {
    double total = 0.0;
    double align = 0.0; // mean(1 − ⟨y, c⟩)
    double trust = 0.0; // mean(max{0, drift − τ})
    double drift = 0.0; // mean(1 − ⟨y, û⟩)
};

struct MlpGradient {
    std::vector<Matrix> weights;
    std::vector<Vector> biases;
};

namespace detail {

struct ForwardCache {
    Matrix uhat;
    std::vector<Matrix> acts;
    Matrix y;
    Vector znorm;
};

inline ForwardCache corrector_cache(const Corrector& corrector, const Matrix& u) {
    ForwardCache fc;
    fc.uhat = normalized_rows(u);
    fc.acts = corrector.delta.forward_all(fc.uhat);
    const Matrix z = fc.uhat + fc.acts.back();
    fc.znorm = z.rowwise().norm();
    fc.y = z.array().colwise() / fc.znorm.array();
    return fc;
}

inline LossBreakdown loss_terms(const Matrix& y, const Matrix& uhat, const Matrix& c, double tau, double lambda) {
    const auto n = static_cast<double>(y.rows());
    LossBreakdown lb;
    for (Index i = 0; i < y.rows(); ++i) {
        const double drift = 1.0 - y.row(i).dot(uhat.row(i));
        lb.align += 1.0 - y.row(i).dot(c.row(i));
        lb.drift += drift;
        lb.trust += std::max(0.0, drift - tau);
    }
    lb.align /= n;
    lb.trust /= n;
    lb.drift /= n;
    lb.total = lb.align + lambda * lb.trust;
    return lb;
}

inline void require_batch(const Corrector& corrector, const Matrix& u, const Matrix& c) {
    require_same_shape(u, c, "gcpa batch");
    if (u.cols() != corrector.dim) throw Error(Errc::ShapeError, "gcpa batch dimension mismatch");
    if (u.rows() == 0) throw Error(Errc::InvalidInput, "empty gcpa batch");
}

} // namespace detail

/// mean(1 − ⟨y, c⟩) + λ·mean(max{0, (1 − ⟨y, û⟩) − τ}) with y = T_θ(u).
inline LossBreakdown gcpa_loss(const Corrector& corrector, const Matrix& u, const Matrix& c) {
    detail::require_batch(corrector, u, c);
    const auto fc = detail::corrector_cache(corrector, u);
    return detail::loss_terms(fc.y, fc.uhat, c, corrector.tau, corrector.lambda);
}

/// Loss and its exact parameter gradient by reverse-mode differentiation.
/// The hinge uses the zero subgradient at drift == τ.
inline std::pair<LossBreakdown, MlpGradient> gcpa_loss_and_gradient(const Corrector& corrector, const Matrix& u,
                                                                    const Matrix& c) {
    detail::require_batch(corrector, u, c);
    const auto fc = detail::corrector_cache(corrector, u);
    const auto lb = detail::loss_terms(fc.y, fc.uhat, c, corrector.tau, corrector.lambda);
    const Index n = u.rows();
    const double inv_n = 1.0 / static_cast<double>(n);

    // dL/dy, then through y = z/‖z‖.
    Matrix grad(n, corrector.dim);
    for (Index i = 0; i < n; ++i) {
        const double drift = 1.0 - fc.y.row(i).dot(fc.uhat.row(i));
        Eigen::RowVectorXd gy = -c.row(i);
        if (drift > corrector.tau) gy -= corrector.lambda * fc.uhat.row(i);
        gy *= inv_n;
        grad.row(i) = (gy - gy.dot(fc.y.row(i)) * fc.y.row(i)) / fc.znorm(i);
    }

    const Mlp& net = corrector.delta;
    MlpGradient g;
    g.weights.resize(net.layers());
    g.biases.resize(net.layers());
    for (std::size_t l = net.layers(); l-- > 0;) {
        g.weights[l] = fc.acts[l].transpose() * grad;
        g.biases[l] = grad.colwise().sum().transpose();
        if (l > 0) {
            grad = (grad * net.weights[l].transpose()).array() * (1.0 - fc.acts[l].array().square());
        }
    }
    return {lb, g};
}

namespace detail {

struct PooledSamples {
    Matrix inputs;  // unit universe rows, pooled over spaces
    Matrix targets; // matching consensus directions
};

inline PooledSamples pool_samples(const std::vector<Matrix>& views, const ConsensusSet& cs) {
    std::vector<std::pair<std::size_t, Index>> keep;
    for (std::size_t m = 0; m < views.size(); ++m) {
        for (Index i = 0; i < views[m].rows(); ++i) {
            if (!cs.degenerate[static_cast<std::size_t>(i)] && views[m].row(i).norm() >= kConsensusEps) {
                keep.emplace_back(m, i);
            }
        }
    }
    const Index d = views.front().cols();
    PooledSamples p{Matrix(static_cast<Index>(keep.size()), d), Matrix(static_cast<Index>(keep.size()), d)};
    for (std::size_t r = 0; r < keep.size(); ++r) {
        const auto [m, i] = keep[r];
        p.inputs.row(static_cast<Index>(r)) = views[m].row(i).normalized();
        p.targets.row(static_cast<Index>(r)) = cs.directions.row(i);
    }
    return p;
}

} // namespace detail

/// Minibatch gradient descent on the GCPA objective with samples pooled
/// across all views. Consensus is computed once from the given views.
inline Corrector fit_corrector_on_views(const std::vector<Matrix>& views, const TrainConfig& cfg, double tau,
                                        double lambda) {
    cfg.validate();
    const auto cs = consensus_directions(views);
    const auto pool = detail::pool_samples(views, cs);
    if (pool.inputs.rows() == 0) throw Error(Errc::InvalidInput, "no non-degenerate samples to train on");

    Corrector corr = make_corrector(views.front().cols(), cfg.hidden, tau, lambda, cfg.seed);
    corr.loss_log.push_back(gcpa_loss(corr, pool.inputs, pool.targets).total);

    Rng rng = make_rng(cfg.seed, "gcpa.batches");
    const auto total = static_cast<std::size_t>(pool.inputs.rows());
    const auto batch = static_cast<std::size_t>(cfg.batch_size);
    Matrix bu, bc;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto order = random_permutation(total, rng);
        for (std::size_t start = 0; start < total; start += batch) {
            const std::size_t len = std::min(batch, total - start);
            bu.resize(static_cast<Index>(len), corr.dim);
            bc.resize(static_cast<Index>(len), corr.dim);
            for (std::size_t r = 0; r < len; ++r) {
                bu.row(static_cast<Index>(r)) = pool.inputs.row(static_cast<Index>(order[start + r]));
                bc.row(static_cast<Index>(r)) = pool.targets.row(static_cast<Index>(order[start + r]));
            }
            const auto [lb, grad] = gcpa_loss_and_gradient(corr, bu, bc);
            for (std::size_t l = 0; l < corr.delta.layers(); ++l) {
                corr.delta.weights[l] -= cfg.learning_rate * grad.weights[l];
                corr.delta.biases[l] -= cfg.learning_rate * grad.biases[l];
            }
        }
        const double loss = gcpa_loss(corr, pool.inputs, pool.targets).total;
        if (!std::isfinite(loss)) {
            throw Error(Errc::NumericalError, "GCPA loss became non-finite at epoch " + std::to_string(epoch));
        }
        corr.loss_log.push_back(loss);
    }
    return corr;
}

/// Trains the corrector on the GPA universe images X_m·Ω_m of the train split.
inline Corrector fit_corrector(const Universe& universe, const std::vector<EmbeddingMatrix>& spaces,
                               const TrainConfig& cfg, double tau = kDefaultTau, double lambda = kDefaultLambda) {
    detail::require_matched(spaces, 2);
    std::vector<Matrix> views;
    views.reserve(spaces.size());
    for (const auto& s : spaces) views.push_back(to_universe(universe, s.data, s.space_id));
    return fit_corrector_on_views(views, cfg, tau, lambda);
}

/// T_θ(x·Ω_space). With `rescale`, each row keeps the norm of its GPA image.
inline Matrix gcpa_to_universe(const Universe& universe, const Corrector& corrector, const Matrix& x,
                               const std::string& space, bool rescale = false) {
    const Matrix u = to_universe(universe, x, space);
    Matrix y = corrector_forward(corrector, u);
    if (rescale) y.array().colwise() *= u.rowwise().norm().array();
    return y;
}

/// Both sides of the consensus identities for one sample's unit views:
/// (1/M)Σ⟨û_m,c⟩ = (1/M)‖Σû_m‖ and Σ_{m<n}⟨û_m,û_n⟩ = (‖Σû_m‖² − M)/2.
struct ConsensusIdentities {
    double lhs6 = 0.0;
    double rhs6 = 0.0;
    double lhs7 = 0.0;
    double rhs7 = 0.0;
};

inline ConsensusIdentities prop32_identities(const std::vector<Vector>& unit_vectors) {
    if (unit_vectors.size() < 2) throw Error(Errc::InvalidInput, "need at least two vectors");
    const Index d = unit_vectors.front().size();
    for (const auto& v : unit_vectors) {
        if (v.size() != d) throw Error(Errc::ShapeError, "vectors differ in dimension");
        if (std::abs(v.norm() - 1.0) > 1e-10) throw Error(Errc::InvalidInput, "input vectors must be unit-norm");
    }
    const auto m = static_cast<double>(unit_vectors.size());
    Vector s = Vector::Zero(d);
    for (const auto& v : unit_vectors) s += v;
    ConsensusIdentities out;
    const double snorm = s.norm();
    if (snorm > 0.0) {
        const Vector c = s / snorm;
        for (const auto& v : unit_vectors) out.lhs6 += v.dot(c);
    }
    out.lhs6 /= m;
    out.rhs6 = snorm / m;
    for (std::size_t a = 0; a < unit_vectors.size(); ++a) {
        for (std::size_t b = a + 1; b < unit_vectors.size(); ++b) out.lhs7 += unit_vectors[a].dot(unit_vectors[b]);
    }
    out.rhs7 = 0.5 * (snorm * snorm - m);
    return out;
}

// ---------------------------------------------------------------------------
// Persistence: corrector.json + float64 records per layer.
// ---------------------------------------------------------------------------

inline void save_corrector(const Corrector& c, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    nlohmann::json meta;
    meta["arch"] = {{"input_dim", c.dim}, {"hidden", c.hidden}, {"activation", "tanh"}, {"output", "linear"}};
    meta["tau"] = c.tau;
    meta["lambda"] = c.lambda;
    meta["seed"] = c.seed;
    meta["loss_log"] = c.loss_log;
    meta["layers"] = nlohmann::json::array();
    for (std::size_t l = 0; l < c.delta.layers(); ++l) {
        const auto w = "w" + std::to_string(l) + ".mwal";
        const auto b = "b" + std::to_string(l) + ".mwal";
        write_record(dir / w, c.delta.weights[l]);
        write_record(dir / b, Matrix(c.delta.biases[l].transpose()));
        meta["layers"].push_back({{"weights", w}, {"bias", b}});
    }
    detail::write_file(dir / "corrector.json", meta.dump(2) + "\n");
}

inline Corrector load_corrector(const std::filesystem::path& dir) {
    const auto meta = nlohmann::json::parse(detail::read_file(dir / "corrector.json"));
    Corrector c;
    c.dim = meta.at("arch").at("input_dim").get<Index>();
    c.hidden = meta.at("arch").at("hidden").get<std::vector<Index>>();
    c.tau = meta.at("tau").get<double>();
    c.lambda = meta.at("lambda").get<double>();
    c.seed = meta.at("seed").get<std::uint64_t>();
    c.loss_log = meta.value("loss_log", std::vector<double>{});
    for (const auto& layer : meta.at("layers")) {
        c.delta.weights.push_back(read_record(dir / layer.at("weights").get<std::string>()).data);
        c.delta.biases.push_back(read_record(dir / layer.at("bias").get<std::string>()).data.row(0).transpose());
    }
    return c;
}

} // namespace mway
