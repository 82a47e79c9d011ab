#pragma once

#include <cmath>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "chplane/binary_io.hpp"
#include "chplane/image_io.hpp"

namespace chplane {

inline constexpr std::size_t raw_low_dim = 3136;
inline constexpr std::size_t raw_high_dim = 512;
inline constexpr std::size_t embedding_dim = 200;

/// Raw network features, one row per image.
struct RawFeatures {
    std::vector<std::string> ids;
    Eigen::MatrixXd low;
    Eigen::MatrixXd high;

    [[nodiscard]] std::size_t size() const noexcept { return ids.size(); }
};

struct EmbeddingTable {
    std::vector<std::string> ids;
    Eigen::MatrixXd values;

    [[nodiscard]] std::size_t size() const noexcept { return ids.size(); }
};

namespace feature_detail {

inline void write_id(bin::Writer& w, const std::string& id) {
    if (id.size() > std::numeric_limits<std::uint16_t>::max()) throw InvalidArgument("id longer than 65535 bytes");
    w.u16(static_cast<std::uint16_t>(id.size()));
    w.bytes(id);
}

inline void write_row(bin::Writer& w, const Eigen::MatrixXd& m, Eigen::Index r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) w.f32(static_cast<float>(m(r, c)));
}

inline void read_row(bin::Reader& r, Eigen::MatrixXd& m, Eigen::Index row, std::size_t index) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
        const float v = r.f32();
        if (!std::isfinite(v)) throw FormatError("non-finite value in row " + std::to_string(index));
        m(row, c) = v;
    }
}

}  // namespace feature_detail

// CHF1: magic, u32 rows, u32 low_dim, u32 high_dim, then per row
// u16 id_len, id, low_dim f32, high_dim f32.
inline std::vector<std::uint8_t> serialize_features(const RawFeatures& f) {
    if (static_cast<std::size_t>(f.low.rows()) != f.size() || static_cast<std::size_t>(f.high.rows()) != f.size())
        throw DimensionMismatch("feature matrices do not match id count");
    bin::Writer w;
    w.magic("CHF1");
    w.u32(static_cast<std::uint32_t>(f.size()));
    w.u32(static_cast<std::uint32_t>(f.low.cols()));
    w.u32(static_cast<std::uint32_t>(f.high.cols()));
    for (std::size_t i = 0; i < f.size(); ++i) {
        feature_detail::write_id(w, f.ids[i]);
        feature_detail::write_row(w, f.low, static_cast<Eigen::Index>(i));
        feature_detail::write_row(w, f.high, static_cast<Eigen::Index>(i));
    }
    return w.take();
}

inline RawFeatures deserialize_features(std::span<const std::uint8_t> bytes) {
    bin::Reader r(bytes);
    r.expect_magic("CHF1");
    const auto rows = r.u32();
    const auto low = r.u32();
    const auto high = r.u32();
    if (low == 0 || high == 0) throw FormatError("CHF1 feature dimensions must be positive");
    // Smallest possible row: empty id plus the two vectors.
    if (std::uint64_t{rows} * (2 + 4ull * (low + high)) > r.remaining()) throw FormatError("CHF1 file is truncated");
    RawFeatures f;
    f.ids.reserve(rows);
    f.low.resize(rows, low);
    f.high.resize(rows, high);
    for (std::uint32_t i = 0; i < rows; ++i) {
        f.ids.push_back(r.bytes(r.u16()));
        feature_detail::read_row(r, f.low, i, i);
        feature_detail::read_row(r, f.high, i, i);
    }
    r.expect_end();
    return f;
}

inline RawFeatures load_features(const std::filesystem::path& path) { return deserialize_features(read_file(path)); }
inline void save_features(const std::filesystem::path& path, const RawFeatures& f) {
    write_file(path, serialize_features(f));
}

// CHE1: magic, u32 count, u32 dim, then per row u16 id_len, id, dim f32.
inline std::vector<std::uint8_t> serialize_embeddings(const EmbeddingTable& t) {
    if (static_cast<std::size_t>(t.values.rows()) != t.size()) throw DimensionMismatch("embedding rows do not match ids");
    bin::Writer w;
    w.magic("CHE1");
    w.u32(static_cast<std::uint32_t>(t.size()));
    w.u32(static_cast<std::uint32_t>(t.values.cols()));
    for (std::size_t i = 0; i < t.size(); ++i) {
        feature_detail::write_id(w, t.ids[i]);
        feature_detail::write_row(w, t.values, static_cast<Eigen::Index>(i));
    }
    return w.take();
}

inline EmbeddingTable deserialize_embeddings(std::span<const std::uint8_t> bytes) {
    bin::Reader r(bytes);
    r.expect_magic("CHE1");
    const auto count = r.u32();
    const auto dim = r.u32();
    if (dim == 0) throw FormatError("CHE1 dimension must be positive");
    if (std::uint64_t{count} * (2 + 4ull * dim) > r.remaining()) throw FormatError("CHE1 file is truncated");
    EmbeddingTable t;
    t.values.resize(count, dim);
    for (std::uint32_t i = 0; i < count; ++i) {
        t.ids.push_back(r.bytes(r.u16()));
        feature_detail::read_row(r, t.values, i, i);
    }
    r.expect_end();
    return t;
}

inline EmbeddingTable load_embeddings(const std::filesystem::path& path) {
    return deserialize_embeddings(read_file(path));
}
inline void save_embeddings(const std::filesystem::path& path, const EmbeddingTable& t) {
    write_file(path, serialize_embeddings(t));
}

}  // namespace chplane
