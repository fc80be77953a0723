// Copyright 2026 The mway Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "mway/error.hpp"
#include "mway/numkernel.hpp"
#include "mway/random.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace mway {

enum class Split : std::uint8_t { Train, Val, Test };

inline std::string to_string(Split s) {
    switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
    }
    return "train";
}

inline Split parse_split(std::string_view s) {
    if (s == "train") return Split::Train;
    if (s == "val") return Split::Val;
    if (s == "test") return Split::Test;
    throw Error(Errc::InvalidInput, "unknown split '" + std::string(s) + "'");
}

/// N matched samples of one space. Row i of `data` belongs to `sample_ids[i]`.
struct EmbeddingMatrix {
    std::string space_id;
    Split split = Split::Train;
    Matrix data;
    std::vector<std::string> sample_ids;

    [[nodiscard]] Index rows() const { return data.rows(); }
    [[nodiscard]] Index dim() const { return data.cols(); }

    void validate() const {
        if (static_cast<std::size_t>(data.rows()) != sample_ids.size()) {
            throw Error(Errc::ShapeError, "space '" + space_id + "': " + std::to_string(data.rows()) + " rows but " +
                                              std::to_string(sample_ids.size()) + " sample ids");
        }
        std::unordered_set<std::string> seen;
        for (const auto& id : sample_ids) {
            if (id.empty()) {
                throw Error(Errc::InvalidInput, "space '" + space_id + "': empty sample id");
            }
            if (!seen.insert(id).second) {
                throw Error(Errc::InvalidInput, "space '" + space_id + "': duplicate sample id '" + id + "'");
            }
        }
        require_finite(data, "space '" + space_id + "'");
    }
};

// ---------------------------------------------------------------------------
// Binary container
//
//   "MWAL" | u32 version | u64 rows | u64 cols | u8 dtype | rows·cols values |
//   u64 byte length | newline-separated UTF-8 sample ids
//
// All integers and floats little-endian. dtype 0x01 = float32 (embeddings),
// 0x02 = float64 (fitted model parameters).
// ---------------------------------------------------------------------------

inline constexpr std::array<char, 4> kMagic{'M', 'W', 'A', 'L'};
inline constexpr std::uint32_t kFormatVersion = 1;

enum class DType : std::uint8_t { Float32 = 0x01, Float64 = 0x02 };

namespace detail {

static_assert(std::endian::native == std::endian::little, "container I/O assumes a little-endian host");

template <typename T>
void put(std::string& buf, T value) {
    char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    buf.append(bytes, sizeof(T));
}

class Reader {
public:
    Reader(const std::string& bytes, std::string path) : bytes_(bytes), path_(std::move(path)) {}

    template <typename T>
    T get(std::string_view field) {
        need(sizeof(T), field);
        T value;
        std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return value;
    }

    void need(std::uint64_t n, std::string_view field) const {
        if (bytes_.size() - pos_ < n) {
            fail("truncated while reading " + std::string(field) + " (need " + std::to_string(n) + " bytes, " +
                 std::to_string(bytes_.size() - pos_) + " left)");
        }
    }

    [[noreturn]] void fail(const std::string& what) const {
        throw Error(Errc::FormatError, path_ + ": " + what + " at byte offset " + std::to_string(pos_), pos_);
    }

    [[nodiscard]] std::uint64_t pos() const { return pos_; }
    [[nodiscard]] std::uint64_t remaining() const { return bytes_.size() - pos_; }
    [[nodiscard]] const char* cursor() const { return bytes_.data() + pos_; }
    void skip(std::uint64_t n) { pos_ += n; }

private:
    const std::string& bytes_;
    std::string path_;
    std::uint64_t pos_ = 0;
};

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(Errc::InvalidInput, "cannot open '" + path.string() + "' for reading");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return std::move(ss).str();
}

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(Errc::InvalidInput, "cannot open '" + path.string() + "' for writing");
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw Error(Errc::InvalidInput, "short write to '" + path.string() + "'");
    }
}

} // namespace detail

struct MatrixRecord {
    Matrix data;
    std::vector<std::string> ids;
    DType dtype = DType::Float32;
};

inline std::string encode_record(const Matrix& data, const std::vector<std::string>& ids, DType dtype) {
    if (!ids.empty() && ids.size() != static_cast<std::size_t>(data.rows())) {
        throw Error(Errc::ShapeError, "record has " + std::to_string(data.rows()) + " rows but " +
                                          std::to_string(ids.size()) + " ids");
    }
    std::string buf;
    const std::size_t width = dtype == DType::Float32 ? 4 : 8;
    buf.reserve(29 + static_cast<std::size_t>(data.size()) * width);
    buf.append(kMagic.data(), kMagic.size());
    detail::put<std::uint32_t>(buf, kFormatVersion);
    detail::put<std::uint64_t>(buf, static_cast<std::uint64_t>(data.rows()));
    detail::put<std::uint64_t>(buf, static_cast<std::uint64_t>(data.cols()));
    detail::put<std::uint8_t>(buf, static_cast<std::uint8_t>(dtype));
    for (Index i = 0; i < data.rows(); ++i) {
        for (Index j = 0; j < data.cols(); ++j) {
            if (dtype == DType::Float32) {
                detail::put<float>(buf, static_cast<float>(data(i, j)));
            } else {
                detail::put<double>(buf, data(i, j));
            }
        }
    }
    std::string id_block;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i].find('\n') != std::string::npos) {
            throw Error(Errc::InvalidInput, "sample id contains a newline");
        }
        if (i > 0) id_block.push_back('\n');
        id_block += ids[i];
    }
    detail::put<std::uint64_t>(buf, id_block.size());
    buf += id_block;
    return buf;
}

/// Decodes a full record or throws FormatError; never returns partial data.
inline MatrixRecord decode_record(const std::string& bytes, const std::string& origin = "<memory>") {
    detail::Reader rd(bytes, origin);
    rd.need(kMagic.size(), "magic");
    if (std::memcmp(rd.cursor(), kMagic.data(), kMagic.size()) != 0) {
        rd.fail("bad magic");
    }
    rd.skip(kMagic.size());
    const auto version = rd.get<std::uint32_t>("version");
    if (version != kFormatVersion) {
        rd.fail("unsupported format version " + std::to_string(version));
    }
    const auto rows = rd.get<std::uint64_t>("rows");
    const auto cols = rd.get<std::uint64_t>("cols");
    const auto code = rd.get<std::uint8_t>("dtype");
    if (code != static_cast<std::uint8_t>(DType::Float32) && code != static_cast<std::uint8_t>(DType::Float64)) {
        rd.fail("unknown dtype code " + std::to_string(code));
    }
    const DType dtype = static_cast<DType>(code);
    const std::uint64_t width = dtype == DType::Float32 ? 4 : 8;
    if (cols != 0 && rows > rd.remaining() / cols / width) {
        rd.fail("header declares " + std::to_string(rows) + "x" + std::to_string(cols) +
                " values but payload is shorter");
    }
    rd.need(rows * cols * width, "payload");
    MatrixRecord rec;
    rec.dtype = dtype;
    rec.data.resize(static_cast<Index>(rows), static_cast<Index>(cols));
    for (std::uint64_t i = 0; i < rows; ++i) {
        for (std::uint64_t j = 0; j < cols; ++j) {
            rec.data(static_cast<Index>(i), static_cast<Index>(j)) =
                dtype == DType::Float32 ? static_cast<double>(rd.get<float>("value")) : rd.get<double>("value");
        }
    }
    const auto id_len = rd.get<std::uint64_t>("id block length");
    rd.need(id_len, "id block");
    std::string block(rd.cursor(), id_len);
    rd.skip(id_len);
    if (rd.remaining() != 0) {
        rd.fail("trailing bytes after id block");
    }
    if (id_len > 0) {
        std::string::size_type start = 0;
        while (true) {
            const auto nl = block.find('\n', start);
            rec.ids.push_back(block.substr(start, nl == std::string::npos ? std::string::npos : nl - start));
            if (nl == std::string::npos) break;
            start = nl + 1;
        }
        if (rec.ids.size() != rows) {
            throw Error(Errc::FormatError,
                        origin + ": id block holds " + std::to_string(rec.ids.size()) + " ids for " +
                            std::to_string(rows) + " rows at byte offset " + std::to_string(rd.pos() - id_len),
                        rd.pos() - id_len);
        }
    }
    return rec;
}

inline void write_record(const std::filesystem::path& path, const Matrix& data,
                         const std::vector<std::string>& ids = {}, DType dtype = DType::Float64) {
    detail::write_file(path, encode_record(data, ids, dtype));
}

inline MatrixRecord read_record(const std::filesystem::path& path) {
    return decode_record(detail::read_file(path), path.string());
}

/// Embeddings are stored as float32. Space id and split are not part of the
/// container; they travel with the manifest and are passed back in on read.
inline void write_embeddings(const EmbeddingMatrix& e, const std::filesystem::path& path) {
    e.validate();
    detail::write_file(path, encode_record(e.data, e.sample_ids, DType::Float32));
}

inline EmbeddingMatrix read_embeddings(const std::filesystem::path& path, std::string space_id = {},
                                       Split split = Split::Train) {
    auto rec = read_record(path);
    if (rec.ids.empty() && rec.data.rows() > 0) {
        throw Error(Errc::FormatError, path.string() + ": embedding file carries no sample ids");
    }
    EmbeddingMatrix e{std::move(space_id), split, std::move(rec.data), std::move(rec.ids)};
    if (e.space_id.empty()) {
        e.space_id = path.stem().string();
    }
    e.validate();
    return e;
}

// ---------------------------------------------------------------------------
// Correspondences
// ---------------------------------------------------------------------------

/// permutation[i] is the row of the other space matched to row i.
struct Correspondence {
    std::vector<std::size_t> permutation;

    static Correspondence identity(std::size_t n) {
        Correspondence c;
        c.permutation.resize(n);
        std::iota(c.permutation.begin(), c.permutation.end(), std::size_t{0});
        return c;
    }

    [[nodiscard]] std::size_t size() const { return permutation.size(); }

    [[nodiscard]] bool is_bijection() const {
        std::vector<bool> hit(permutation.size(), false);
        for (auto p : permutation) {
            if (p >= permutation.size() || hit[p]) return false;
            hit[p] = true;
        }
        return true;
    }
};

/// Matches rows of `other` to rows of `reference` by sample id.
inline Correspondence correspondence_by_ids(const std::vector<std::string>& reference,
                                            const std::vector<std::string>& other) {
    if (reference.size() != other.size()) {
        throw Error(Errc::CorrespondenceError, "sample counts differ: " + std::to_string(reference.size()) + " vs " +
                                                   std::to_string(other.size()));
    }
    std::unordered_map<std::string, std::size_t> where;
    for (std::size_t i = 0; i < other.size(); ++i) where.emplace(other[i], i);
    Correspondence c;
    c.permutation.reserve(reference.size());
    for (const auto& id : reference) {
        auto it = where.find(id);
        if (it == where.end()) {
            throw Error(Errc::CorrespondenceError, "sample id '" + id + "' missing from matched space");
        }
        c.permutation.push_back(it->second);
    }
    return c;
}

/// Rows of `e` reordered so they follow `reference_ids`.
inline EmbeddingMatrix reorder_to(const EmbeddingMatrix& e, const std::vector<std::string>& reference_ids) {
    const auto c = correspondence_by_ids(reference_ids, e.sample_ids);
    EmbeddingMatrix out{e.space_id, e.split, Matrix(e.data.rows(), e.data.cols()), reference_ids};
    for (std::size_t i = 0; i < c.size(); ++i) {
        out.data.row(static_cast<Index>(i)) = e.data.row(static_cast<Index>(c.permutation[i]));
    }
    return out;
}

/// Cycles exactly ⌊fraction·N⌋ seeded-chosen entries among themselves, so each one moves.
inline Correspondence corrupt_correspondence(const Correspondence& c, double fraction, std::uint64_t seed) {
    if (!(fraction >= 0.0 && fraction <= 1.0)) {
        throw Error(Errc::InvalidInput, "corruption fraction must lie in [0,1]");
    }
    if (!c.is_bijection()) {
        throw Error(Errc::InvalidInput, "input correspondence is not a bijection");
    }
    const std::size_t n = c.size();
    auto count = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n)));
    if (count == 1 && n >= 2) count = 2; // a single index cannot move on its own
    Rng rng = make_rng(seed, "corrupt_correspondence");
    const auto order = random_permutation(n, rng);
    // A random cycle through the chosen indices moves every one of them.
    Correspondence out = c;
    for (std::size_t j = 0; j < count; ++j) {
        out.permutation[order[j]] = c.permutation[order[(j + 1) % count]];
    }
    return out;
}

/// Applies a correspondence to rows: row i of the result is row permutation[i] of x.
inline Matrix permute_rows(const Matrix& x, const Correspondence& c) {
    if (c.size() != static_cast<std::size_t>(x.rows())) {
        throw Error(Errc::ShapeError, "correspondence length does not match row count");
    }
    Matrix out(x.rows(), x.cols());
    for (std::size_t i = 0; i < c.size(); ++i) {
        out.row(static_cast<Index>(i)) = x.row(static_cast<Index>(c.permutation[i]));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Synthetic matched spaces
// ---------------------------------------------------------------------------

enum class Distortion : std::uint8_t { None, OrthogonalOnly, Linear, PerSpaceDropout };

inline std::string to_string(Distortion d) {
    switch (d) {
    case Distortion::None: return "none";
    case Distortion::OrthogonalOnly: return "orthogonal-only";
    case Distortion::Linear: return "linear";
    case Distortion::PerSpaceDropout: return "per-space-dropout";
    }
    return "none";
}

inline Distortion parse_distortion(std::string_view s) {
    if (s == "none") return Distortion::None;
    if (s == "orthogonal-only") return Distortion::OrthogonalOnly;
    if (s == "linear") return Distortion::Linear;
    if (s == "per-space-dropout") return Distortion::PerSpaceDropout;
    throw Error(Errc::InvalidSpec, "unknown distortion '" + std::string(s) + "'");
}

struct WeakPair {
    std::size_t first = 0;
    std::size_t second = 1;
    double corruption_strength = 0.0; // fraction of train rows corrupted in each weak space
};

struct SynthSpec {
    std::size_t num_spaces = 3;
    std::size_t samples = 500; // train rows
    std::size_t val_samples = 0;
    std::size_t test_samples = 200;
    std::size_t dim = 16;
    std::size_t latent_dim = 8;
    std::size_t num_classes = 5;
    double class_separation = 2.0; // stddev of class means relative to unit within-class spread
    double noise_sigma = 0.0;
    double noise_spread = 0.0; // in [0,1): space m gets σ·(1 + spread·(2m/(M−1) − 1))
    Distortion distortion = Distortion::OrthogonalOnly;
    double distortion_strength = 0.5; // linear: perturbation scale; dropout: fraction of latent dims dropped
    std::optional<WeakPair> weak_pair;
    double weak_amplitude = 1.0; // corruption amplitude relative to the row RMS
    std::uint64_t seed = 0;

    void validate() const {
        if (num_spaces < 2) throw Error(Errc::InvalidSpec, "num_spaces must be >= 2");
        if (samples < 2) throw Error(Errc::InvalidSpec, "samples must be >= 2");
        if (dim < 1 || latent_dim < 1) throw Error(Errc::InvalidSpec, "dimensions must be positive");
        if (latent_dim > dim) {
            throw Error(Errc::InvalidSpec, "latent_dim " + std::to_string(latent_dim) + " exceeds dim " +
                                               std::to_string(dim));
        }
        if (num_classes < 1) throw Error(Errc::InvalidSpec, "num_classes must be >= 1");
        for (double v : {class_separation, noise_sigma, distortion_strength, weak_amplitude}) {
            if (!std::isfinite(v) || v < 0.0) throw Error(Errc::InvalidSpec, "parameters must be finite and >= 0");
        }
        if (noise_spread >= 1.0) throw Error(Errc::InvalidSpec, "noise_spread must lie in [0,1)");
        if (weak_pair) {
            const auto& w = *weak_pair;
            if (w.first >= num_spaces || w.second >= num_spaces || w.first == w.second) {
                throw Error(Errc::InvalidSpec, "weak_pair indices must name two distinct spaces");
            }
            if (!(w.corruption_strength >= 0.0 && w.corruption_strength <= 1.0)) {
                throw Error(Errc::InvalidSpec, "weak_pair corruption_strength must lie in [0,1]");
            }
        }
    }
};

struct SynthSpace {
    EmbeddingMatrix train;
    EmbeddingMatrix val;
    EmbeddingMatrix test;
    Matrix rotation; // R_m, for oracles
};

struct SynthData {
    std::vector<SynthSpace> spaces;
    std::vector<int> train_labels;
    std::vector<int> val_labels;
    std::vector<int> test_labels;
};

inline std::string space_name(std::size_t m) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "space%02zu", m);
    return buf;
}

/// Latent Gaussian-mixture rows, zero-padded to `dim`, rotated per space by a
/// seeded Haar orthogonal map, then distorted and noised. Every random draw
/// uses its own derived stream so toggling one option leaves the rest fixed.
inline SynthData generate_synthetic(const SynthSpec& spec) {
    spec.validate();
    const auto d = static_cast<Index>(spec.dim);
    const auto k = static_cast<Index>(spec.latent_dim);
    const auto classes = static_cast<int>(spec.num_classes);

    Rng mean_rng = make_rng(spec.seed, "synth.class_means");
    const Matrix class_means = gaussian_matrix(classes, k, mean_rng, spec.class_separation);

    auto draw_latent = [&](std::size_t n, std::string_view split, std::vector<int>& labels) {
        Rng rng = make_rng(spec.seed, std::string("synth.latent.") + std::string(split));
        labels.resize(n);
        Matrix z(static_cast<Index>(n), d);
        z.setZero();
        for (std::size_t i = 0; i < n; ++i) {
            labels[i] = static_cast<int>(rng() % static_cast<std::uint64_t>(classes));
        }
        const Matrix spread = gaussian_matrix(static_cast<Index>(n), k, rng);
        for (std::size_t i = 0; i < n; ++i) {
            z.row(static_cast<Index>(i)).head(k) = class_means.row(labels[i]) + spread.row(static_cast<Index>(i));
        }
        return z;
    };

    SynthData out;
    const Matrix z_train = draw_latent(spec.samples, "train", out.train_labels);
    const Matrix z_val = draw_latent(spec.val_samples, "val", out.val_labels);
    const Matrix z_test = draw_latent(spec.test_samples, "test", out.test_labels);

    auto make_ids = [](std::string_view prefix, std::size_t n) {
        std::vector<std::string> ids(n);
        char buf[32];
        for (std::size_t i = 0; i < n; ++i) {
            std::snprintf(buf, sizeof(buf), "%.*s-%06zu", static_cast<int>(prefix.size()), prefix.data(), i);
            ids[i] = buf;
        }
        return ids;
    };
    const auto train_ids = make_ids("train", spec.samples);
    const auto val_ids = make_ids("val", spec.val_samples);
    const auto test_ids = make_ids("test", spec.test_samples);

    for (std::size_t m = 0; m < spec.num_spaces; ++m) {
        const std::string tag = "synth.space" + std::to_string(m);
        Rng rot_rng = make_rng(spec.seed, tag + ".rotation");
        const Matrix rotation = random_orthogonal(d, rot_rng);

        // Map applied to padded latent rows, before noise.
        Matrix transform = rotation;
        Rng dist_rng = make_rng(spec.seed, tag + ".distortion");
        switch (spec.distortion) {
        case Distortion::None:
        case Distortion::OrthogonalOnly:
            break;
        case Distortion::Linear: {
            const Matrix g = gaussian_matrix(d, d, dist_rng, spec.distortion_strength / std::sqrt(double(d)));
            transform = rotation * (Matrix::Identity(d, d) + g);
            break;
        }
        case Distortion::PerSpaceDropout: {
            Matrix mask = Matrix::Identity(d, d);
            const auto drop = static_cast<std::size_t>(std::floor(spec.distortion_strength * double(k)));
            auto order = random_permutation(static_cast<std::size_t>(k), dist_rng);
            for (std::size_t j = 0; j < std::min(drop, static_cast<std::size_t>(k) - 1); ++j) {
                mask(static_cast<Index>(order[j]), static_cast<Index>(order[j])) = 0.0;
            }
            transform = mask * rotation;
            break;
        }
        }

        const double position = 2.0 * static_cast<double>(m) / static_cast<double>(spec.num_spaces - 1) - 1.0;
        const double sigma = spec.noise_sigma * (1.0 + spec.noise_spread * position);
        auto realize = [&](const Matrix& z, std::string_view split) {
            Matrix x = z * transform;
            if (sigma > 0.0 && x.rows() > 0) {
                Rng noise_rng = make_rng(spec.seed, tag + ".noise." + std::string(split));
                x += gaussian_matrix(x.rows(), d, noise_rng, sigma);
            }
            return x;
        };

        SynthSpace space;
        space.rotation = rotation;
        const std::string id = space_name(m);
        space.train = {id, Split::Train, realize(z_train, "train"), train_ids};
        space.val = {id, Split::Val, realize(z_val, "val"), val_ids};
        space.test = {id, Split::Test, realize(z_test, "test"), test_ids};

        if (spec.weak_pair && spec.weak_pair->corruption_strength > 0.0 &&
            (spec.weak_pair->first == m || spec.weak_pair->second == m)) {
            // Additive seeded sign-flip mask on a fraction of train rows; test rows stay clean.
            Rng weak_rng = make_rng(spec.seed, tag + ".weak");
            Matrix& x = space.train.data;
            const auto count = static_cast<std::size_t>(
                std::floor(spec.weak_pair->corruption_strength * static_cast<double>(x.rows())));
            auto order = random_permutation(static_cast<std::size_t>(x.rows()), weak_rng);
            for (std::size_t t = 0; t < count; ++t) {
                const auto i = static_cast<Index>(order[t]);
                const double rms = x.row(i).norm() / std::sqrt(static_cast<double>(d));
                for (Index j = 0; j < d; ++j) {
                    x(i, j) += ((weak_rng() & 1U) ? 1.0 : -1.0) * spec.weak_amplitude * rms;
                }
            }
        }
        out.spaces.push_back(std::move(space));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

struct ManifestSpace {
    std::string id;
    std::filesystem::path path; // directory holding one file per split
    std::size_t dim = 0;
};

/// Spaces live in one directory each; `splits` names the per-split file
/// inside every space directory. Labels are a TSV of `sample_id<TAB>label`.
struct Manifest {
    std::vector<ManifestSpace> spaces;
    std::map<std::string, std::string> splits; // split name -> file name
    std::optional<std::filesystem::path> labels;
    std::optional<std::size_t> common_dim;
    std::optional<std::pair<std::string, std::string>> weak_pair;
    std::filesystem::path base_dir; // paths above are relative to this

    [[nodiscard]] std::filesystem::path split_path(const ManifestSpace& s, Split split) const {
        auto it = splits.find(to_string(split));
        if (it == splits.end()) {
            throw Error(Errc::ConfigError, "manifest has no '" + to_string(split) + "' split");
        }
        return base_dir / s.path / it->second;
    }

    [[nodiscard]] bool has_split(Split split) const { return splits.count(to_string(split)) > 0; }

    [[nodiscard]] const ManifestSpace& space(const std::string& id) const {
        for (const auto& s : spaces) {
            if (s.id == id) return s;
        }
        throw Error(Errc::LookupError, "manifest has no space '" + id + "'");
    }
};

inline nlohmann::json manifest_to_json(const Manifest& m) {
    nlohmann::json j;
    j["spaces"] = nlohmann::json::array();
    for (const auto& s : m.spaces) {
        j["spaces"].push_back({{"id", s.id}, {"path", s.path.generic_string()}, {"dim", s.dim}});
    }
    j["splits"] = m.splits;
    if (m.labels) j["labels"] = m.labels->generic_string();
    if (m.common_dim) j["common_dim"] = *m.common_dim;
    if (m.weak_pair) j["weak_pair"] = {m.weak_pair->first, m.weak_pair->second};
    return j;
}

inline void write_manifest(const Manifest& m, const std::filesystem::path& path) {
    detail::write_file(path, manifest_to_json(m).dump(2) + "\n");
}

/// Parses and checks a manifest: referenced split files must exist and dims be positive.
inline Manifest read_manifest(const std::filesystem::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(detail::read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::ConfigError, path.string() + ": " + e.what());
    } catch (const Error& e) {
        throw Error(Errc::ConfigError, e.what());
    }
    Manifest m;
    m.base_dir = path.parent_path();
    try {
        for (const auto& s : j.at("spaces")) {
            ManifestSpace sp{s.at("id").get<std::string>(), s.at("path").get<std::string>(),
                             s.at("dim").get<std::size_t>()};
            if (sp.dim == 0) throw Error(Errc::ConfigError, "space '" + sp.id + "' has dim 0");
            m.spaces.push_back(std::move(sp));
        }
        m.splits = j.at("splits").get<std::map<std::string, std::string>>();
        if (j.contains("labels") && !j["labels"].is_null()) m.labels = j["labels"].get<std::string>();
        if (j.contains("common_dim") && !j["common_dim"].is_null()) m.common_dim = j["common_dim"].get<std::size_t>();
        if (j.contains("weak_pair") && !j["weak_pair"].is_null()) {
            m.weak_pair = {j["weak_pair"].at(0).get<std::string>(), j["weak_pair"].at(1).get<std::string>()};
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::ConfigError, path.string() + ": " + e.what());
    }
    std::set<std::string> ids;
    for (const auto& s : m.spaces) {
        if (!ids.insert(s.id).second) throw Error(Errc::ConfigError, "duplicate space id '" + s.id + "'");
        for (const auto& [name, file] : m.splits) {
            const auto p = m.base_dir / s.path / file;
            if (!std::filesystem::exists(p)) {
                throw Error(Errc::ConfigError, "space '" + s.id + "': missing " + name + " file " + p.string());
            }
        }
    }
    if (m.labels && !std::filesystem::exists(m.base_dir / *m.labels)) {
        throw Error(Errc::ConfigError, "labels file " + (m.base_dir / *m.labels).string() + " does not exist");
    }
    return m;
}

inline std::unordered_map<std::string, int> read_labels(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::ConfigError, "cannot open labels file " + path.string());
    std::unordered_map<std::string, int> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) throw Error(Errc::ConfigError, "malformed label line: " + line);
        out[line.substr(0, tab)] = std::stoi(line.substr(tab + 1));
    }
    return out;
}

inline void write_labels(const std::filesystem::path& path, const std::vector<std::string>& ids,
                         const std::vector<int>& labels, bool append = false) {
    std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
    for (std::size_t i = 0; i < ids.size(); ++i) out << ids[i] << '\t' << labels[i] << '\n';
}

} // namespace mway
