#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "chplane/csv.hpp"
#include "chplane/error.hpp"
#include "chplane/matching.hpp"
#include "chplane/ordinal.hpp"
#include "chplane/parallel.hpp"
#include "chplane/similarity.hpp"

namespace chplane {

struct GridSpec {
    double c_lo = 0.0;
    double c_hi = 0.31;
    double c_step = 0.01;
    double h_lo = 0.5;
    double h_hi = 1.0;
    double h_step = 0.02;
    std::size_t min_count = 50;

    [[nodiscard]] int c_bins() const { return count(c_lo, c_hi, c_step); }
    [[nodiscard]] int h_bins() const { return count(h_lo, h_hi, h_step); }

    void validate() const {
        auto ok = [](double lo, double hi, double step) {
            return std::isfinite(lo) && std::isfinite(hi) && std::isfinite(step) && step > 0 && hi > lo;
        };
        if (!ok(c_lo, c_hi, c_step) || !ok(h_lo, h_hi, h_step)) throw BadGridSpec("grid needs finite lo < hi and step > 0");
        if ((c_hi - c_lo) / c_step > 1e6 || (h_hi - h_lo) / h_step > 1e6) throw BadGridSpec("grid has too many bins");
    }

    // Bin index of v, or -1 outside [lo, hi). Values within 1e-9 bin widths
    // below an edge count as on it, so decimal edges like 0.03 land high.
    [[nodiscard]] static int index(double v, double lo, double hi, double step) {
        if (!(v >= lo) || !(v < hi)) return -1;
        const double t = (v - lo) / step;
        auto i = static_cast<long>(std::floor(t));
        if (static_cast<double>(i + 1) - t <= 1e-9) ++i;
        const int n = count(lo, hi, step);
        return i < n ? static_cast<int>(i) : -1;
    }

    [[nodiscard]] static double edge(double lo, double step, int i) {
        return std::round((lo + i * step) * 1e12) / 1e12;
    }

private:
    static int count(double lo, double hi, double step) {
        return static_cast<int>(std::ceil((hi - lo) / step - 1e-9));
    }
};

/// Parse "c_lo:c_hi:c_step,h_lo:h_hi:h_step".
inline GridSpec parse_grid(std::string_view text, std::size_t min_count = 50) {
    std::vector<double> v;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= text.size(); ++i) {
        const bool end = i == text.size();
        if (!end && text[i] != ':' && text[i] != ',') continue;
        const char want = v.size() == 2 ? ',' : ':';
        if (!end && (v.size() >= 5 || text[i] != want)) throw BadGridSpec("grid must look like c_lo:c_hi:c_step,h_lo:h_hi:h_step");
        const auto x = csv::parse_double(text.substr(start, i - start));
        if (!x) throw BadGridSpec("grid value '" + std::string(text.substr(start, i - start)) + "' is not a number");
        v.push_back(*x);
        start = i + 1;
    }
    if (v.size() != 6) throw BadGridSpec("grid must look like c_lo:c_hi:c_step,h_lo:h_hi:h_step");
    GridSpec g{v[0], v[1], v[2], v[3], v[4], v[5], min_count};
    g.validate();
    return g;
}

struct BinKey {
    int c = 0;
    int h = 0;
    auto operator<=>(const BinKey&) const = default;
};

struct BinGrid {
    GridSpec spec;
    std::map<BinKey, std::vector<std::size_t>> bins;  // members as point indices
    std::size_t in_range = 0;

    [[nodiscard]] std::vector<BinKey> reportable() const {
        std::vector<BinKey> out;
        for (const auto& [k, members] : bins)
            if (members.size() >= spec.min_count) out.push_back(k);
        return out;
    }
    [[nodiscard]] double c_lo(const BinKey& k) const { return GridSpec::edge(spec.c_lo, spec.c_step, k.c); }
    [[nodiscard]] double h_lo(const BinKey& k) const { return GridSpec::edge(spec.h_lo, spec.h_step, k.h); }
};

inline BinGrid bin_points(std::span<const CHPoint> points, const GridSpec& spec = {}) {
    spec.validate();
    BinGrid g;
    g.spec = spec;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const int ci = GridSpec::index(points[i].c, spec.c_lo, spec.c_hi, spec.c_step);
        const int hi = GridSpec::index(points[i].h, spec.h_lo, spec.h_hi, spec.h_step);
        if (ci < 0 || hi < 0) continue;
        g.bins[{ci, hi}].push_back(i);
        ++g.in_range;
    }
    return g;
}

struct BinDiversity {
    BinKey key;
    double c_lo = 0;
    double h_lo = 0;
    std::size_t count = 0;
    std::optional<double> ie_mean;
    std::optional<double> sift_mean;
    std::size_t sift_n = 0;
    std::vector<std::string> errors;
};

struct DiversityInputs {
    const EmbeddingTable* embeddings = nullptr;
    /// Descriptor set for a point index; may throw to mark the bin null.
    std::function<DescriptorSet(std::size_t)> descriptors;
    MatchOptions match;
    JaccardUnion jaccard_union = JaccardUnion::exclusive;
};

/// IE and SIFT diversity of every reportable bin. IE averages cosine
/// similarity over all members; SIFT averages Jaccard over a seeded subsample
/// sized by required_sample_size.
inline std::vector<BinDiversity> bin_diversity(const BinGrid& grid, std::span<const CHPoint> points,
                                               const DiversityInputs& in, std::uint64_t seed, unsigned jobs = 1) {
    std::unordered_map<std::string, Eigen::Index> emb_row;
    if (in.embeddings)
        for (std::size_t i = 0; i < in.embeddings->size(); ++i)
            emb_row.emplace(in.embeddings->ids[i], static_cast<Eigen::Index>(i));

    std::vector<BinDiversity> out;
    for (const auto& key : grid.reportable()) {
        const auto& members = grid.bins.at(key);
        BinDiversity d;
        d.key = key;
        d.c_lo = grid.c_lo(key);
        d.h_lo = grid.h_lo(key);
        d.count = members.size();

        if (in.embeddings) {
            try {
                EmbeddingTable sub;
                sub.values.resize(static_cast<Eigen::Index>(members.size()), in.embeddings->values.cols());
                for (std::size_t m = 0; m < members.size(); ++m) {
                    const auto& id = points[members[m]].id;
                    const auto it = emb_row.find(id);
                    if (it == emb_row.end()) throw FormatError("no embedding for id '" + id + "'");
                    sub.ids.push_back(id);
                    sub.values.row(static_cast<Eigen::Index>(m)) = in.embeddings->values.row(it->second);
                }
                d.ie_mean = mean_pairwise_similarity(sub, std::nullopt, seed, jobs).mean;
            } catch (const Error& e) {
                d.errors.push_back(std::string("IE: ") + e.what());
            }
        }

        if (in.descriptors) {
            try {
                const auto n = required_sample_size(members.size(), 0.95, 0.05);
                const auto bin_seed = Rng::derive(seed, (static_cast<std::uint64_t>(key.c) << 32) |
                                                            static_cast<std::uint32_t>(key.h));
                const auto chosen = subsample_indices(members.size(), n, bin_seed);
                std::vector<DescriptorSet> sets(chosen.size());
                parallel_for(chosen.size(), jobs, [&](std::size_t i) { sets[i] = in.descriptors(members[chosen[i]]); });
                d.sift_n = chosen.size();
                d.sift_mean = pairwise_mean(
                                  sets.size(),
                                  [&](std::size_t a, std::size_t b) {
                                      return jaccard_similarity(sets[a], sets[b], in.match, in.jaccard_union).value;
                                  },
                                  jobs)
                                  .mean;
            } catch (const Error& e) {
                d.sift_n = 0;
                d.errors.push_back(std::string("SIFT: ") + e.what());
            }
        }
        out.push_back(std::move(d));
    }
    return out;
}

}  // namespace chplane
