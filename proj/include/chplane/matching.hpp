#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <queue>
#include <span>
#include <vector>

#include "chplane/error.hpp"
#include "chplane/rng.hpp"
#include "chplane/sift.hpp"

namespace chplane {

struct Match {
    std::size_t a = 0;
    std::size_t b = 0;
    double distance = 0;

    friend bool operator==(const Match&, const Match&) = default;
};

struct MatchSet {
    std::vector<Match> pairs;  // sorted by index a
    std::size_t k_a = 0;
    std::size_t k_b = 0;

    [[nodiscard]] std::size_t size() const noexcept { return pairs.size(); }
    friend bool operator==(const MatchSet&, const MatchSet&) = default;
};

enum class SearchMode { exact, kd_forest };
enum class JaccardUnion { exclusive, additive };

struct MatchOptions {
    double ratio = 0.75;
    SearchMode mode = SearchMode::exact;
    int trees = 8;
    int checks = 512;
    std::uint64_t seed = 0;
};

namespace match_detail {

inline double squared_distance(std::span<const float, DescriptorSet::dim> a,
                               std::span<const float, DescriptorSet::dim> b) {
    double s = 0;
    for (std::size_t i = 0; i < DescriptorSet::dim; ++i) {
        const double d = double(a[i]) - double(b[i]);
        s += d * d;
    }
    return s;
}

struct Neighbors {
    static constexpr std::size_t none = std::numeric_limits<std::size_t>::max();
    std::size_t first = none;
    double d1 = std::numeric_limits<double>::infinity();
    double d2 = std::numeric_limits<double>::infinity();

    void offer(std::size_t idx, double d) {
        if (d < d1) {
            d2 = d1;
            d1 = d;
            first = idx;
        } else if (d < d2) {
            d2 = d;
        }
    }
};

class KdForest {
public:
    KdForest(const DescriptorSet& set, int trees, std::uint64_t seed) : set_(set) {
        Rng rng(seed);
        const auto n = set.size();
        for (int t = 0; t < trees; ++t) {
            std::vector<std::size_t> idx(n);
            std::iota(idx.begin(), idx.end(), std::size_t{0});
            for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
            roots_.push_back(build(idx, 0, n, rng));
        }
    }

    Neighbors search(std::span<const float, DescriptorSet::dim> q, int max_checks) const {
        Neighbors nb;
        std::vector<char> seen(set_.size(), 0);
        using Branch = std::pair<double, std::int32_t>;
        std::priority_queue<Branch, std::vector<Branch>, std::greater<>> heap;
        int checks = 0;
        for (auto root : roots_) descend(root, 0.0, q, nb, seen, heap, checks);
        while (!heap.empty() && checks < max_checks) {
            const auto [bound, node] = heap.top();
            heap.pop();
            if (bound >= nb.d2) break;
            descend(node, bound, q, nb, seen, heap, checks);
        }
        nb.d1 = std::sqrt(nb.d1);
        nb.d2 = std::sqrt(nb.d2);
        return nb;
    }

private:
    static constexpr std::size_t leaf_size = 4;

    struct Node {
        std::int32_t left = -1;
        std::int32_t right = -1;
        std::uint16_t dim = 0;
        float split = 0.f;
        std::size_t begin = 0;
        std::size_t end = 0;
    };

    std::int32_t build(std::vector<std::size_t>& idx, std::size_t begin, std::size_t end, Rng& rng) {
        const auto id = static_cast<std::int32_t>(nodes_.size());
        nodes_.push_back({});
        if (end - begin <= leaf_size) {
            const auto off = leaf_items_.size();
            leaf_items_.insert(leaf_items_.end(), idx.begin() + begin, idx.begin() + end);
            nodes_[id].begin = off;
            nodes_[id].end = leaf_items_.size();
            return id;
        }
        constexpr std::size_t dim = DescriptorSet::dim;
        const std::size_t sample = std::min<std::size_t>(end - begin, 100);
        std::vector<double> mean(dim, 0.0), var(dim, 0.0);
        for (std::size_t i = 0; i < sample; ++i) {
            const auto r = set_.row(idx[begin + i]);
            for (std::size_t d = 0; d < dim; ++d) mean[d] += r[d];
        }
        for (auto& m : mean) m /= static_cast<double>(sample);
        for (std::size_t i = 0; i < sample; ++i) {
            const auto r = set_.row(idx[begin + i]);
            for (std::size_t d = 0; d < dim; ++d) var[d] += (r[d] - mean[d]) * (r[d] - mean[d]);
        }
        std::vector<std::size_t> order(dim);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::partial_sort(order.begin(), order.begin() + 5, order.end(),
                          [&](std::size_t x, std::size_t y) { return var[x] > var[y] || (var[x] == var[y] && x < y); });
        const auto split_dim = order[rng.below(5)];
        const auto split = static_cast<float>(mean[split_dim]);
        auto mid_it = std::partition(idx.begin() + begin, idx.begin() + end,
                                     [&](std::size_t i) { return set_.row(i)[split_dim] < split; });
        auto mid = static_cast<std::size_t>(mid_it - idx.begin());
        if (mid == begin || mid == end) mid = begin + (end - begin) / 2;
        nodes_[id].dim = static_cast<std::uint16_t>(split_dim);
        nodes_[id].split = split;
        const auto l = build(idx, begin, mid, rng);
        const auto r = build(idx, mid, end, rng);
        nodes_[id].left = l;
        nodes_[id].right = r;
        return id;
    }

    template <class Heap>
    void descend(std::int32_t node, double bound, std::span<const float, DescriptorSet::dim> q, Neighbors& nb,
                 std::vector<char>& seen, Heap& heap, int& checks) const {
        while (nodes_[node].left >= 0) {
            const auto& n = nodes_[node];
            const double diff = double(q[n.dim]) - n.split;
            const auto near = diff < 0 ? n.left : n.right;
            const auto far = diff < 0 ? n.right : n.left;
            const double far_bound = bound + diff * diff;
            if (far_bound < nb.d2) heap.emplace(far_bound, far);
            node = near;
        }
        const auto& leaf = nodes_[node];
        for (std::size_t i = leaf.begin; i < leaf.end; ++i) {
            const auto item = leaf_items_[i];
            if (seen[item]) continue;
            seen[item] = 1;
            ++checks;
            nb.offer(item, squared_distance(q, set_.row(item)));
        }
    }

    const DescriptorSet& set_;
    std::vector<Node> nodes_;
    std::vector<std::size_t> leaf_items_;
    std::vector<std::int32_t> roots_;
};

inline Neighbors exact_neighbors(std::span<const float, DescriptorSet::dim> q, const DescriptorSet& b) {
    Neighbors nb;
    for (std::size_t j = 0; j < b.size(); ++j) nb.offer(j, squared_distance(q, b.row(j)));
    nb.d1 = std::sqrt(nb.d1);
    nb.d2 = std::sqrt(nb.d2);
    return nb;
}

// Keep the lowest-distance match per b index (ties to the lower a index).
inline std::vector<Match> one_to_one(std::vector<Match> cand) {
    std::stable_sort(cand.begin(), cand.end(), [](const Match& x, const Match& y) {
        if (x.b != y.b) return x.b < y.b;
        if (x.distance != y.distance) return x.distance < y.distance;
        return x.a < y.a;
    });
    std::vector<Match> out;
    for (const auto& m : cand)
        if (out.empty() || out.back().b != m.b) out.push_back(m);
    std::sort(out.begin(), out.end(), [](const Match& x, const Match& y) { return x.a < y.a; });
    return out;
}

}  // namespace match_detail

/// Two-nearest-neighbour matching from a into b with Lowe's ratio test and
/// one-to-one enforcement. With a single candidate in b the ratio test passes.
inline MatchSet match_descriptors(const DescriptorSet& a, const DescriptorSet& b, const MatchOptions& opt = {}) {
    if (!(opt.ratio > 0.0 && opt.ratio <= 1.0)) throw InvalidArgument("ratio must lie in (0, 1]");
    MatchSet out;
    out.k_a = a.size();
    out.k_b = b.size();
    if (a.empty() || b.empty()) return out;

    std::vector<Match> cand;
    auto consider = [&](std::size_t i, const match_detail::Neighbors& nb) {
        if (nb.first != match_detail::Neighbors::none && nb.d1 < opt.ratio * nb.d2) cand.push_back({i, nb.first, nb.d1});
    };
    if (opt.mode == SearchMode::kd_forest) {
        if (opt.trees < 1 || opt.checks < 1) throw InvalidArgument("kd-forest needs trees >= 1 and checks >= 1");
        const match_detail::KdForest forest(b, opt.trees, opt.seed);
        for (std::size_t i = 0; i < a.size(); ++i) consider(i, forest.search(a.row(i), opt.checks));
    } else {
        for (std::size_t i = 0; i < a.size(); ++i) consider(i, match_detail::exact_neighbors(a.row(i), b));
    }
    out.pairs = match_detail::one_to_one(std::move(cand));
    return out;
}

struct JaccardResult {
    double value = 0;
    std::size_t matches = 0;
    bool no_keypoints = false;
};

namespace match_detail {

// Strict total order used to pick a canonical matching direction.
inline bool canonical_less(const DescriptorSet& x, const DescriptorSet& y) {
    if (x.size() != y.size()) return x.size() < y.size();
    if (x.descriptors != y.descriptors)
        return std::lexicographical_compare(x.descriptors.begin(), x.descriptors.end(), y.descriptors.begin(),
                                            y.descriptors.end());
    return std::lexicographical_compare(
        x.keypoints.begin(), x.keypoints.end(), y.keypoints.begin(), y.keypoints.end(),
        [](const Keypoint& p, const Keypoint& q) {
            return std::tie(p.x, p.y, p.scale, p.orientation) < std::tie(q.x, q.y, q.scale, q.orientation);
        });
}

}  // namespace match_detail

inline JaccardResult jaccard_similarity(const DescriptorSet& a, const DescriptorSet& b, const MatchOptions& opt = {},
                                        JaccardUnion uni = JaccardUnion::exclusive) {
    JaccardResult r;
    if (a.empty() && b.empty()) {
        r.no_keypoints = true;
        return r;
    }
    const bool swap = match_detail::canonical_less(b, a);
    const auto ms = swap ? match_descriptors(b, a, opt) : match_descriptors(a, b, opt);
    r.matches = ms.size();
    const double m = static_cast<double>(r.matches);
    const double total = static_cast<double>(a.size() + b.size());
    const double denom = uni == JaccardUnion::exclusive ? total - m : total;
    r.value = denom > 0 ? m / denom : 0.0;
    return r;
}

}  // namespace chplane
