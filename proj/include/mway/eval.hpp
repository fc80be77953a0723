// Copyright 2026 The mway Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "mway/dataio.hpp"
#include "mway/error.hpp"
#include "mway/numkernel.hpp"
#include "mway/random.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace mway {

/// Cosine similarity of every query row against every gallery row.
inline Matrix cosine_scores(const Matrix& query, const Matrix& gallery) {
    if (query.cols() != gallery.cols()) throw Error(Errc::ShapeError, "query and gallery dimensions differ");
    return normalized_rows(query) * normalized_rows(gallery).transpose();
}

// ---------------------------------------------------------------------------
// Retrieval
// ---------------------------------------------------------------------------

struct Rank1Detail {
    double accuracy = 0.0;
    std::size_t ties = 0; // queries whose top score was shared by several gallery rows
};

/// Ties in the top score go to the lowest gallery index.
inline Rank1Detail rank1_retrieval_detail(const Matrix& query, const Matrix& gallery, const Correspondence& truth) {
    if (query.rows() == 0 || gallery.rows() == 0) throw Error(Errc::InvalidInput, "empty query or gallery");
    if (truth.size() != static_cast<std::size_t>(query.rows())) {
        throw Error(Errc::ShapeError, "truth length does not match query count");
    }
    const Matrix scores = cosine_scores(query, gallery);
    Rank1Detail out;
    std::size_t hits = 0;
    for (Index i = 0; i < scores.rows(); ++i) {
        Index best = 0;
        std::size_t at_best = 1;
        for (Index j = 1; j < scores.cols(); ++j) {
            if (scores(i, j) > scores(i, best)) {
                best = j;
                at_best = 1;
            } else if (scores(i, j) == scores(i, best)) {
                ++at_best;
            }
        }
        if (at_best > 1) ++out.ties;
        if (static_cast<std::size_t>(best) == truth.permutation[static_cast<std::size_t>(i)]) ++hits;
    }
    out.accuracy = static_cast<double>(hits) / static_cast<double>(scores.rows());
    return out;
}

inline double rank1_retrieval(const Matrix& query, const Matrix& gallery, const Correspondence& truth) {
    return rank1_retrieval_detail(query, gallery, truth).accuracy;
}

/// AP of one ranked list: mean of precision@k over the ranks k of relevant items.
inline double average_precision(const Eigen::RowVectorXd& scores, const std::vector<bool>& relevant) {
    std::vector<Index> order(static_cast<std::size_t>(scores.size()));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return scores(a) > scores(b); });
    double sum = 0.0;
    std::size_t hits = 0;
    for (std::size_t k = 0; k < order.size(); ++k) {
        if (relevant[static_cast<std::size_t>(order[k])]) {
            ++hits;
            sum += static_cast<double>(hits) / static_cast<double>(k + 1);
        }
    }
    return hits == 0 ? 0.0 : sum / static_cast<double>(hits);
}

struct MapResult {
    double map = 0.0;
    std::size_t evaluated = 0;
    std::size_t excluded = 0; // queries whose label never occurs in the gallery
};

inline MapResult mean_average_precision(const Matrix& query, const std::vector<int>& query_labels,
                                        const Matrix& gallery, const std::vector<int>& gallery_labels) {
    if (query.rows() == 0 || gallery.rows() == 0) throw Error(Errc::InvalidInput, "empty query or gallery");
    if (query_labels.size() != static_cast<std::size_t>(query.rows()) ||
        gallery_labels.size() != static_cast<std::size_t>(gallery.rows())) {
        throw Error(Errc::ShapeError, "label count does not match row count");
    }
    const Matrix scores = cosine_scores(query, gallery);
    const std::set<int> present(gallery_labels.begin(), gallery_labels.end());
    MapResult out;
    double sum = 0.0;
    std::vector<bool> relevant(gallery_labels.size());
    for (Index i = 0; i < scores.rows(); ++i) {
        const int label = query_labels[static_cast<std::size_t>(i)];
        if (!present.count(label)) {
            ++out.excluded;
            continue;
        }
        for (std::size_t j = 0; j < gallery_labels.size(); ++j) relevant[j] = gallery_labels[j] == label;
        sum += average_precision(scores.row(i), relevant);
        ++out.evaluated;
    }
    out.map = out.evaluated == 0 ? 0.0 : sum / static_cast<double>(out.evaluated);
    return out;
}

struct PairScore {
    std::string from;
    std::string to;
    double rank1 = 0.0;
    double map = std::numeric_limits<double>::quiet_NaN();
    std::size_t ties = 0;
};

/// Ordered-pair retrieval scores with mean / worst / best aggregates.
struct RetrievalReport {
    std::vector<PairScore> pairs;
    double mean_rank1 = 0.0;
    double worst_rank1 = 0.0;
    double best_rank1 = 0.0;
    double mean_map = std::numeric_limits<double>::quiet_NaN();
    double worst_map = std::numeric_limits<double>::quiet_NaN();

    void aggregate() {
        if (pairs.empty()) return;
        mean_rank1 = 0.0;
        worst_rank1 = 1.0;
        best_rank1 = 0.0;
        double map_sum = 0.0;
        double map_worst = 1.0;
        bool have_map = true;
        for (const auto& p : pairs) {
            mean_rank1 += p.rank1;
            worst_rank1 = std::min(worst_rank1, p.rank1);
            best_rank1 = std::max(best_rank1, p.rank1);
            if (std::isnan(p.map)) {
                have_map = false;
            } else {
                map_sum += p.map;
                map_worst = std::min(map_worst, p.map);
            }
        }
        mean_rank1 /= static_cast<double>(pairs.size());
        if (have_map) {
            mean_map = map_sum / static_cast<double>(pairs.size());
            worst_map = map_worst;
        }
    }
};

/// `project(from, to)` returns (query, gallery) for one ordered pair, already
/// in a shared coordinate system. Rows of query and gallery are matched by index.
using PairProjector = std::function<std::pair<Matrix, Matrix>(const std::string& from, const std::string& to)>;

inline RetrievalReport retrieval_report(const std::vector<std::string>& space_ids, const PairProjector& project,
                                        const std::vector<int>* labels = nullptr) {
    RetrievalReport rep;
    for (const auto& from : space_ids) {
        for (const auto& to : space_ids) {
            if (from == to) continue;
            const auto [query, gallery] = project(from, to);
            PairScore ps{from, to};
            const auto r1 = rank1_retrieval_detail(query, gallery, Correspondence::identity(static_cast<std::size_t>(query.rows())));
            ps.rank1 = r1.accuracy;
            ps.ties = r1.ties;
            if (labels != nullptr) ps.map = mean_average_precision(query, *labels, gallery, *labels).map;
            rep.pairs.push_back(ps);
        }
    }
    rep.aggregate();
    return rep;
}

// ---------------------------------------------------------------------------
// Linear probe
// ---------------------------------------------------------------------------

struct ProbeConfig {
    int iterations = 300;
    double learning_rate = 0.5;
    double l2 = 1e-4;
};

/// Multinomial logistic regression trained by full-batch gradient descent.
struct LinearProbe {
    Matrix weights; // d × C
    Vector bias;    // C
    std::vector<int> classes;

    [[nodiscard]] std::vector<int> predict(const Matrix& x) const {
        Matrix logits = x * weights;
        logits.rowwise() += bias.transpose();
        std::vector<int> out(static_cast<std::size_t>(x.rows()));
        for (Index i = 0; i < x.rows(); ++i) {
            Index best = 0;
            logits.row(i).maxCoeff(&best);
            out[static_cast<std::size_t>(i)] = classes[static_cast<std::size_t>(best)];
        }
        return out;
    }
};

inline LinearProbe fit_linear_probe(const Matrix& x, const std::vector<int>& labels, const ProbeConfig& cfg = {}) {
    if (labels.size() != static_cast<std::size_t>(x.rows()) || x.rows() == 0) {
        throw Error(Errc::InvalidInput, "probe needs one label per non-empty row");
    }
    LinearProbe probe;
    const std::set<int> distinct(labels.begin(), labels.end());
    probe.classes.assign(distinct.begin(), distinct.end());
    const auto c = static_cast<Index>(probe.classes.size());
    const Index n = x.rows();
    Matrix onehot = Matrix::Zero(n, c);
    for (Index i = 0; i < n; ++i) {
        const auto it = std::lower_bound(probe.classes.begin(), probe.classes.end(), labels[static_cast<std::size_t>(i)]);
        onehot(i, it - probe.classes.begin()) = 1.0;
    }
    probe.weights = Matrix::Zero(x.cols(), c);
    probe.bias = Vector::Zero(c);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (int it = 0; it < cfg.iterations; ++it) {
        Matrix logits = x * probe.weights;
        logits.rowwise() += probe.bias.transpose();
        const Vector row_max = logits.rowwise().maxCoeff();
        Matrix p = (logits.colwise() - row_max).array().exp().matrix();
        p.array().colwise() /= p.rowwise().sum().array();
        const Matrix err = (p - onehot) * inv_n;
        probe.weights -= cfg.learning_rate * (x.transpose() * err + cfg.l2 * probe.weights);
        probe.bias -= cfg.learning_rate * err.colwise().sum().transpose();
    }
    return probe;
}

inline double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth) {
    if (predicted.size() != truth.size() || truth.empty()) throw Error(Errc::InvalidInput, "accuracy size mismatch");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i] ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(truth.size());
}

/// Probe fitted on source train rows, scored on target test rows already mapped
/// into the source coordinates.
inline double linear_probe_stitch(const Matrix& train_src, const std::vector<int>& train_labels,
                                  const Matrix& test_tgt_mapped, const std::vector<int>& test_labels,
                                  const ProbeConfig& cfg = {}) {
    if (train_src.cols() != test_tgt_mapped.cols()) throw Error(Errc::ShapeError, "probe input dimensions differ");
    const std::set<int> train_set(train_labels.begin(), train_labels.end());
    const bool overlap = std::any_of(test_labels.begin(), test_labels.end(), [&](int l) { return train_set.count(l) > 0; });
    if (!overlap) throw Error(Errc::InvalidInput, "train and test label sets are disjoint");
    const auto probe = fit_linear_probe(train_src, train_labels, cfg);
    return accuracy(probe.predict(test_tgt_mapped), test_labels);
}

struct DirectedAccuracy {
    std::string from;
    std::string to;
    double accuracy = 0.0;
};

/// Mean of the 2M directed accuracies between `added` and every base space.
inline double avg_new(const std::vector<DirectedAccuracy>& results, const std::string& added,
                      const std::vector<std::string>& base) {
    std::map<std::pair<std::string, std::string>, double> by_pair;
    for (const auto& r : results) by_pair[{r.from, r.to}] = r.accuracy;
    double sum = 0.0;
    for (const auto& m : base) {
        for (const auto& key : {std::pair{added, m}, std::pair{m, added}}) {
            auto it = by_pair.find(key);
            if (it == by_pair.end()) {
                throw Error(Errc::InvalidInput, "missing directed accuracy " + key.first + " -> " + key.second);
            }
            sum += it->second;
        }
    }
    if (base.empty()) throw Error(Errc::InvalidInput, "avg_new needs at least one base space");
    return sum / (2.0 * static_cast<double>(base.size()));
}

// ---------------------------------------------------------------------------
// Clustering
// ---------------------------------------------------------------------------

struct KMeansResult {
    std::vector<int> labels;
    Matrix centers;
    double inertia = 0.0;
    int iterations = 0;
};

/// Lloyd iterations from a seeded k-means++ start.
inline KMeansResult kmeans(const Matrix& x, int k, std::uint64_t seed, int max_iters = 300, double rel_tol = 1e-6) {
    const Index n = x.rows();
    if (k < 1 || k > n) throw Error(Errc::InvalidInput, "k must lie in [1, N]");
    Rng rng = make_rng(seed, "kmeans.init");
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    KMeansResult out;
    out.centers.resize(k, x.cols());
    out.centers.row(0) = x.row(static_cast<Index>(rng() % static_cast<std::uint64_t>(n)));
    Vector dist2 = (x.rowwise() - out.centers.row(0)).rowwise().squaredNorm();
    for (int c = 1; c < k; ++c) {
        const double total = dist2.sum();
        Index pick = 0;
        if (total > 0.0) {
            double r = unit(rng) * total;
            for (pick = 0; pick < n - 1; ++pick) {
                r -= dist2(pick);
                if (r <= 0.0) break;
            }
        } else {
            pick = static_cast<Index>(rng() % static_cast<std::uint64_t>(n));
        }
        out.centers.row(c) = x.row(pick);
        dist2 = dist2.cwiseMin((x.rowwise() - out.centers.row(c)).rowwise().squaredNorm());
    }

    out.labels.assign(static_cast<std::size_t>(n), 0);
    double prev = std::numeric_limits<double>::infinity();
    for (int it = 0; it < max_iters; ++it) {
        out.iterations = it + 1;
        double inertia = 0.0;
        for (Index i = 0; i < n; ++i) {
            Index best = 0;
            (out.centers.rowwise() - x.row(i)).rowwise().squaredNorm().minCoeff(&best);
            out.labels[static_cast<std::size_t>(i)] = static_cast<int>(best);
            inertia += (x.row(i) - out.centers.row(best)).squaredNorm();
        }
        Matrix sums = Matrix::Zero(k, x.cols());
        std::vector<Index> counts(static_cast<std::size_t>(k), 0);
        for (Index i = 0; i < n; ++i) {
            sums.row(out.labels[static_cast<std::size_t>(i)]) += x.row(i);
            ++counts[static_cast<std::size_t>(out.labels[static_cast<std::size_t>(i)])];
        }
        for (int c = 0; c < k; ++c) {
            // Empty clusters keep their previous center.
            if (counts[static_cast<std::size_t>(c)] > 0) {
                out.centers.row(c) = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
            }
        }
        out.inertia = inertia;
        if (prev < std::numeric_limits<double>::infinity() && prev - inertia <= rel_tol * std::max(prev, 1e-300)) break;
        prev = inertia;
    }
    return out;
}

namespace detail {

struct Contingency {
    std::vector<std::vector<double>> table;
    std::vector<double> row_sums;
    std::vector<double> col_sums;
    double n = 0.0;
};

inline Contingency contingency(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() != b.size() || a.empty()) throw Error(Errc::InvalidInput, "label vectors must be equal and non-empty");
    std::map<int, std::size_t> ai, bi;
    for (int v : a) ai.emplace(v, ai.size());
    for (int v : b) bi.emplace(v, bi.size());
    Contingency c;
    c.table.assign(ai.size(), std::vector<double>(bi.size(), 0.0));
    c.row_sums.assign(ai.size(), 0.0);
    c.col_sums.assign(bi.size(), 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) {
        const auto r = ai[a[i]];
        const auto s = bi[b[i]];
        c.table[r][s] += 1.0;
        c.row_sums[r] += 1.0;
        c.col_sums[s] += 1.0;
    }
    c.n = static_cast<double>(a.size());
    return c;
}

inline double comb2(double x) { return 0.5 * x * (x - 1.0); }

inline double entropy(const std::vector<double>& counts, double n) {
    double h = 0.0;
    for (double c : counts) {
        if (c > 0.0) h -= (c / n) * std::log(c / n);
    }
    return h;
}

} // namespace detail

inline double adjusted_rand_index(const std::vector<int>& truth, const std::vector<int>& pred) {
    const auto c = detail::contingency(truth, pred);
    double index = 0.0, sum_a = 0.0, sum_b = 0.0;
    for (const auto& row : c.table) {
        for (double v : row) index += detail::comb2(v);
    }
    for (double v : c.row_sums) sum_a += detail::comb2(v);
    for (double v : c.col_sums) sum_b += detail::comb2(v);
    const double expected = sum_a * sum_b / detail::comb2(c.n);
    const double max_index = 0.5 * (sum_a + sum_b);
    if (max_index == expected) return 1.0; // both partitions trivial and identical in structure
    return (index - expected) / (max_index - expected);
}

/// Mutual information normalized by the arithmetic mean of the two entropies.
inline double normalized_mutual_info(const std::vector<int>& truth, const std::vector<int>& pred) {
    const auto c = detail::contingency(truth, pred);
    const double ha = detail::entropy(c.row_sums, c.n);
    const double hb = detail::entropy(c.col_sums, c.n);
    if (ha == 0.0 && hb == 0.0) return 1.0;
    double mi = 0.0;
    for (std::size_t r = 0; r < c.table.size(); ++r) {
        for (std::size_t s = 0; s < c.table[r].size(); ++s) {
            const double v = c.table[r][s];
            if (v > 0.0) mi += (v / c.n) * std::log(v * c.n / (c.row_sums[r] * c.col_sums[s]));
        }
    }
    const double denom = 0.5 * (ha + hb);
    return denom <= 0.0 ? 0.0 : std::clamp(mi / denom, 0.0, 1.0);
}

struct ClusterRun {
    std::string space_id;
    std::uint64_t seed = 0;
    double ari = 0.0;
    double nmi = 0.0;
};

struct ClusterReport {
    std::vector<ClusterRun> runs;
    double ari_mean = 0.0;
    double ari_std = 0.0;
    double nmi_mean = 0.0;
    double nmi_std = 0.0;
};

/// k-means per space per seed; aggregates are mean ± std across spaces of the
/// per-space seed averages.
inline ClusterReport cluster_eval(const std::vector<std::pair<std::string, Matrix>>& mapped_spaces,
                                  const std::vector<int>& labels, int k, const std::vector<std::uint64_t>& seeds) {
    if (k < 2) throw Error(Errc::InvalidInput, "k must be >= 2");
    if (seeds.empty() || mapped_spaces.empty()) throw Error(Errc::InvalidInput, "need spaces and seeds");
    ClusterReport rep;
    std::vector<double> ari_space, nmi_space;
    for (const auto& [id, x] : mapped_spaces) {
        if (static_cast<std::size_t>(x.rows()) != labels.size()) throw Error(Errc::ShapeError, "labels length mismatch");
        if (k > x.rows()) throw Error(Errc::InvalidInput, "k exceeds the number of samples");
        double ari = 0.0, nmi = 0.0;
        for (auto seed : seeds) {
            const auto km = kmeans(x, k, seed);
            ClusterRun run{id, seed, adjusted_rand_index(labels, km.labels), normalized_mutual_info(labels, km.labels)};
            ari += run.ari;
            nmi += run.nmi;
            rep.runs.push_back(run);
        }
        ari_space.push_back(ari / static_cast<double>(seeds.size()));
        nmi_space.push_back(nmi / static_cast<double>(seeds.size()));
    }
    auto mean_std = [](const std::vector<double>& v) {
        const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
        double var = 0.0;
        for (double x : v) var += (x - mean) * (x - mean);
        return std::pair{mean, std::sqrt(var / static_cast<double>(v.size()))};
    };
    std::tie(rep.ari_mean, rep.ari_std) = mean_std(ari_space);
    std::tie(rep.nmi_mean, rep.nmi_std) = mean_std(nmi_space);
    return rep;
}

// ---------------------------------------------------------------------------
// Agreement and drift
// ---------------------------------------------------------------------------

/// Linear interpolation between the closest order statistics.
inline double percentile(std::vector<double> values, double q) {
    if (values.empty()) throw Error(Errc::InvalidInput, "percentile of empty set");
    std::sort(values.begin(), values.end());
    const double pos = q / 100.0 * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

struct AgreementReport {
    std::vector<double> matched_distance; // d_i⁺
    std::vector<double> mean_norm;        // γ_i
    double delta_plus = 0.0;              // Δ⁺ = mean d_i⁺
    double gamma90 = 0.0;                 // Γ₉₀ = 90th percentile of γ_i
};

/// Three matched views: d_i⁺ is the mean pairwise cosine distance of row i,
/// γ_i the norm of the mean of the three unit rows.
inline AgreementReport agreement_metrics(const std::vector<Matrix>& views, bool normalize = true) {
    if (views.size() != 3) throw Error(Errc::InvalidInput, "agreement metrics need exactly three views");
    for (const auto& v : views) require_same_shape(v, views.front(), "agreement views");
    std::vector<Matrix> unit;
    for (const auto& v : views) unit.push_back(normalize ? normalized_rows(v) : v);
    const Index n = views.front().rows();
    AgreementReport rep;
    rep.matched_distance.resize(static_cast<std::size_t>(n));
    rep.mean_norm.resize(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        const double d01 = 1.0 - unit[0].row(i).dot(unit[1].row(i));
        const double d02 = 1.0 - unit[0].row(i).dot(unit[2].row(i));
        const double d12 = 1.0 - unit[1].row(i).dot(unit[2].row(i));
        rep.matched_distance[static_cast<std::size_t>(i)] = (d01 + d02 + d12) / 3.0;
        rep.mean_norm[static_cast<std::size_t>(i)] = ((unit[0].row(i) + unit[1].row(i) + unit[2].row(i)) / 3.0).norm();
    }
    rep.delta_plus = std::accumulate(rep.matched_distance.begin(), rep.matched_distance.end(), 0.0) / static_cast<double>(n);
    rep.gamma90 = percentile(rep.mean_norm, 90.0);
    return rep;
}

struct DriftReport {
    std::vector<double> drift;
    double mean = 0.0;
    double median = 0.0;
};

/// Per-row 1 − ⟨norm(after), norm(before)⟩.
inline DriftReport drift_metric(const Matrix& before, const Matrix& after) {
    require_same_shape(before, after, "drift_metric");
    if (before.rows() == 0) throw Error(Errc::InvalidInput, "drift of empty set");
    const Matrix b = normalized_rows(before);
    const Matrix a = normalized_rows(after);
    DriftReport rep;
    rep.drift.resize(static_cast<std::size_t>(before.rows()));
    for (Index i = 0; i < before.rows(); ++i) rep.drift[static_cast<std::size_t>(i)] = 1.0 - a.row(i).dot(b.row(i));
    rep.mean = std::accumulate(rep.drift.begin(), rep.drift.end(), 0.0) / static_cast<double>(rep.drift.size());
    rep.median = percentile(rep.drift, 50.0);
    return rep;
}

// ---------------------------------------------------------------------------
// Report serialization
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const RetrievalReport& r) {
    nlohmann::json j;
    j["mean_rank1"] = r.mean_rank1;
    j["worst_rank1"] = r.worst_rank1;
    j["best_rank1"] = r.best_rank1;
    if (!std::isnan(r.mean_map)) {
        j["mean_map"] = r.mean_map;
        j["worst_map"] = r.worst_map;
    }
    j["pairs"] = nlohmann::json::array();
    for (const auto& p : r.pairs) {
        nlohmann::json pj{{"from", p.from}, {"to", p.to}, {"rank1", p.rank1}, {"ties", p.ties}};
        if (!std::isnan(p.map)) pj["map"] = p.map;
        j["pairs"].push_back(pj);
    }
    return j;
}

inline std::string to_tsv(const RetrievalReport& r) {
    std::string out = "from\tto\trank1\tmap\tties\n";
    for (const auto& p : r.pairs) {
        out += p.from + '\t' + p.to + '\t' + std::to_string(p.rank1) + '\t' +
               (std::isnan(p.map) ? std::string("nan") : std::to_string(p.map)) + '\t' + std::to_string(p.ties) + '\n';
    }
    return out;
}

inline nlohmann::json to_json(const ClusterReport& r) {
    nlohmann::json j{{"ari_mean", r.ari_mean}, {"ari_std", r.ari_std}, {"nmi_mean", r.nmi_mean}, {"nmi_std", r.nmi_std}};
    j["runs"] = nlohmann::json::array();
    for (const auto& run : r.runs) {
        j["runs"].push_back({{"space", run.space_id}, {"seed", run.seed}, {"ari", run.ari}, {"nmi", run.nmi}});
    }
    return j;
}

inline nlohmann::json to_json(const AgreementReport& r) {
    return {{"delta_plus", r.delta_plus}, {"gamma90", r.gamma90}, {"samples", r.matched_distance.size()}};
}

inline nlohmann::json to_json(const DriftReport& r) {
    return {{"mean", r.mean}, {"median", r.median}, {"samples", r.drift.size()}};
}

} // namespace mway
