#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "chplane/error.hpp"
#include "chplane/image_io.hpp"
#include "chplane/manifest.hpp"

namespace chplane {

/// Embedding dimensions and strides of the sliding dx-by-dy window.
struct EmbeddingParams {
    std::size_t dx = 2;
    std::size_t dy = 2;
    std::size_t taux = 1;
    std::size_t tauy = 1;

    /// Largest window size for which the dense (dx*dy)! distribution is held.
    static constexpr std::size_t max_window = 10;

    [[nodiscard]] std::size_t window_size() const noexcept { return dx * dy; }

    void validate() const {
        if (dx < 1 || dy < 1) throw InvalidArgument("dx and dy must be >= 1");
        if (taux < 1 || tauy < 1) throw InvalidArgument("taux and tauy must be >= 1");
        if (window_size() < 2) throw InvalidArgument("dx*dy must be >= 2");
        if (window_size() > max_window) throw InvalidArgument("dx*dy must be <= 10");
    }
};

inline std::uint64_t factorial(std::size_t k) noexcept {
    std::uint64_t f = 1;
    for (std::size_t i = 2; i <= k; ++i) f *= i;
    return f;
}

/// Relative frequencies of the (dx*dy)! ordinal patterns of one matrix.
struct OrdinalDistribution {
    std::size_t n = 0;                  // pattern count
    std::vector<std::uint64_t> counts;  // occurrences per pattern index
    std::vector<double> probs;          // counts / window_count
    std::uint64_t window_count = 0;

    friend bool operator==(const OrdinalDistribution&, const OrdinalDistribution&) = default;
};

/// Lexicographic index of a permutation of 0..k-1 (Lehmer code).
inline std::uint64_t permutation_index(std::span<const std::uint8_t> perm) noexcept {
    const std::size_t k = perm.size();
    std::uint64_t index = 0;
    for (std::size_t i = 0; i < k; ++i) {
        std::uint64_t smaller = 0;
        for (std::size_t j = i + 1; j < k; ++j) smaller += perm[j] < perm[i];
        index = index * (k - i) + smaller;
    }
    return index;
}

namespace detail {

// Pattern of a window given its values. The pattern is the argsort
// permutation (positions listed in ascending value order), with equal values
// ordered by position.
inline std::uint64_t window_pattern(std::span<const double> v) noexcept {
    std::array<std::uint8_t, EmbeddingParams::max_window> perm{};
    const std::size_t k = v.size();
    for (std::size_t i = 0; i < k; ++i) {
        std::size_t rank = 0;
        for (std::size_t j = 0; j < k; ++j)
            rank += v[j] < v[i] || (v[j] == v[i] && j < i);
        perm[rank] = static_cast<std::uint8_t>(i);
    }
    return permutation_index(std::span(perm.data(), k));
}

// For windows of up to 5 values the pattern is a function of the
// k(k-1)/2 pairwise comparison bits; bit (i,j), i<j, is set when v[j] < v[i].
class ComparisonTable {
public:
    explicit ComparisonTable(std::size_t k) : k_(k) {
        const std::size_t pairs = k * (k - 1) / 2;
        table_.resize(std::size_t{1} << pairs);
        std::array<std::uint8_t, 5> perm{};
        for (std::size_t mask = 0; mask < table_.size(); ++mask) {
            std::array<std::size_t, 5> rank{};
            std::size_t bit = 0;
            for (std::size_t i = 0; i < k; ++i)
                for (std::size_t j = i + 1; j < k; ++j, ++bit) {
                    if (mask >> bit & 1U) ++rank[i];
                    else ++rank[j];
                }
            bool valid = true;
            std::array<bool, 5> used{};
            for (std::size_t i = 0; i < k; ++i) {
                if (rank[i] >= k || used[rank[i]]) {
                    valid = false;
                    break;
                }
                used[rank[i]] = true;
                perm[rank[i]] = static_cast<std::uint8_t>(i);
            }
            table_[mask] = valid ? static_cast<std::uint32_t>(permutation_index(std::span(perm.data(), k))) : 0;
        }
    }

    [[nodiscard]] std::uint32_t lookup(const double* v) const noexcept {
        std::size_t mask = 0;
        std::size_t bit = 0;
        for (std::size_t i = 0; i < k_; ++i)
            for (std::size_t j = i + 1; j < k_; ++j, ++bit) mask |= std::size_t{v[j] < v[i]} << bit;
        return table_[mask];
    }

private:
    std::size_t k_;
    std::vector<std::uint32_t> table_;
};

inline const ComparisonTable& comparison_table(std::size_t k) {
    static const ComparisonTable t2(2), t3(3), t4(4), t5(5);
    switch (k) {
    case 2: return t2;
    case 3: return t3;
    case 4: return t4;
    default: return t5;
    }
}

}  // namespace detail

/// Count the ordinal patterns of every overlapping dx-by-dy window.
///
/// Window values are read row-major (dx columns per row, dy rows) with
/// strides taux/tauy between sampled columns/rows.
inline OrdinalDistribution ordinal_patterns(const GrayMatrix& m, const EmbeddingParams& params = {}) {
    params.validate();
    const std::size_t span_x = (params.dx - 1) * params.taux;
    const std::size_t span_y = (params.dy - 1) * params.tauy;
    if (m.width() <= span_x || m.height() <= span_y)
        throw MatrixTooSmall("matrix " + std::to_string(m.width()) + "x" + std::to_string(m.height()) +
                             " admits no " + std::to_string(params.dx) + "x" + std::to_string(params.dy) +
                             " window");
    const std::size_t nx = m.width() - span_x;
    const std::size_t ny = m.height() - span_y;
    const std::size_t k = params.window_size();

    OrdinalDistribution d;
    d.n = factorial(k);
    d.counts.assign(d.n, 0);
    d.window_count = static_cast<std::uint64_t>(nx) * ny;

    const double* base = m.data().data();
    const std::size_t w = m.width();
    std::array<double, EmbeddingParams::max_window> v{};
    const detail::ComparisonTable* table = k <= 5 ? &detail::comparison_table(k) : nullptr;
    for (std::size_t y0 = 0; y0 < ny; ++y0) {
        for (std::size_t x0 = 0; x0 < nx; ++x0) {
            std::size_t t = 0;
            for (std::size_t r = 0; r < params.dy; ++r) {
                const double* row = base + (y0 + r * params.tauy) * w + x0;
                for (std::size_t c = 0; c < params.dx; ++c) v[t++] = row[c * params.taux];
            }
            const std::uint64_t idx = table ? table->lookup(v.data()) : detail::window_pattern(std::span(v.data(), k));
            ++d.counts[idx];
        }
    }
    d.probs.resize(d.n);
    const auto total = static_cast<double>(d.window_count);
    for (std::size_t i = 0; i < d.n; ++i) d.probs[i] = static_cast<double>(d.counts[i]) / total;
    return d;
}

/// Unnormalized Shannon entropy (natural log); zero terms contribute 0.
inline double shannon_entropy(std::span<const double> p) noexcept {
    double s = 0.0;
    for (double x : p)
        if (x > 0.0) s -= x * std::log(x);
    return s;
}

/// Permutation entropy normalized by ln n, clamped to [0, 1].
inline double normalized_entropy(std::span<const double> probs) {
    if (probs.size() < 2) throw InvalidArgument("distribution needs at least 2 states");
    return std::clamp(shannon_entropy(probs) / std::log(static_cast<double>(probs.size())), 0.0, 1.0);
}

inline double normalized_entropy(const OrdinalDistribution& d) { return normalized_entropy(d.probs); }

/// Jensen-Shannon divergence S((P+Q)/2) - S(P)/2 - S(Q)/2.
inline double js_divergence(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) throw LengthMismatch("distributions differ in length");
    double mixed = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double m = 0.5 * (p[i] + q[i]);
        if (m > 0.0) mixed -= m * std::log(m);
    }
    return std::max(0.0, mixed - 0.5 * shannon_entropy(p) - 0.5 * shannon_entropy(q));
}

/// Largest JS divergence from the uniform distribution over n states,
/// attained by any delta distribution.
inline double max_js_divergence(std::size_t n) {
    if (n < 2) throw InvalidArgument("n must be >= 2");
    const auto nd = static_cast<double>(n);
    return -0.5 * ((nd + 1.0) / nd * std::log(nd + 1.0) - 2.0 * std::log(2.0 * nd) + std::log(nd));
}

/// JS divergence to the uniform distribution without materializing it.
inline double js_divergence_to_uniform(std::span<const double> p) {
    const auto n = static_cast<double>(p.size());
    const double u = 1.0 / n;
    double mixed = 0.0;
    for (double x : p) {
        const double m = 0.5 * (x + u);
        mixed -= m * std::log(m);
    }
    return std::max(0.0, mixed - 0.5 * shannon_entropy(p) - 0.5 * std::log(n));
}

struct ComplexityEntropy {
    double h = 0.0;
    double c = 0.0;
};

/// H and C = D(P,U) H / D* of a probability vector.
inline ComplexityEntropy complexity_entropy(std::span<const double> probs) {
    const double h = normalized_entropy(probs);
    const double c = js_divergence_to_uniform(probs) * h / max_js_divergence(probs.size());
    return {h, std::max(0.0, c)};
}

inline double statistical_complexity(std::span<const double> probs) { return complexity_entropy(probs).c; }
inline double statistical_complexity(const OrdinalDistribution& d) { return complexity_entropy(d.probs).c; }

/// A matrix placed on the complexity-entropy plane, with its corpus labels.
struct CHPoint {
    double h = 0.0;
    double c = 0.0;
    std::uint64_t window_count = 0;
    std::string id;
    std::string group;
    int year = 0;
};

inline CHPoint ch_point(const GrayMatrix& m, const EmbeddingParams& params = {}, const CorpusRecord& record = {}) {
    const auto d = ordinal_patterns(m, params);
    const auto ce = complexity_entropy(d.probs);
    return CHPoint{ce.h, ce.c, d.window_count, record.id, record.group, record.year};
}

}  // namespace chplane
