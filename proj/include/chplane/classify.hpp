#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <vector>

#include "chplane/error.hpp"
#include "chplane/rng.hpp"

namespace chplane {

using Feature2 = std::array<double, 2>;

struct CvResult {
    std::vector<double> fold_accuracy;
    double mean = 0;
};

enum class DummyStrategy { stratified, uniform };

/// Stratified fold assignment: each class is shuffled and dealt round-robin,
/// continuing where the previous class stopped so fold sizes stay balanced.
inline std::vector<int> stratified_folds(std::span<const int> labels, int folds, std::uint64_t seed,
                                         bool require_per_class = true) {
    if (folds < 2) throw InvalidArgument("need at least 2 folds");
    if (labels.size() < static_cast<std::size_t>(folds)) throw TooFewPerClass("fewer samples than folds");
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
    std::vector<int> fold(labels.size(), 0);
    Rng rng(seed);
    int next = 0;
    for (auto& [label, idx] : by_class) {
        if (require_per_class && idx.size() < static_cast<std::size_t>(folds))
            throw TooFewPerClass("class " + std::to_string(label) + " has " + std::to_string(idx.size()) +
                                 " samples, fewer than " + std::to_string(folds) + " folds");
        for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
        for (auto i : idx) {
            fold[i] = next;
            next = (next + 1) % folds;
        }
    }
    return fold;
}

namespace classify_detail {

inline CvResult finish(std::vector<double> acc) {
    CvResult r;
    r.mean = std::accumulate(acc.begin(), acc.end(), 0.0) / static_cast<double>(acc.size());
    r.fold_accuracy = std::move(acc);
    return r;
}

}  // namespace classify_detail

/// Majority label among the k nearest training points (squared Euclidean;
/// equal distances resolved by training order). A vote tie goes to the tied
/// class owning the nearest neighbour.
inline int knn_predict(std::span<const Feature2> train, std::span<const int> labels, const Feature2& q, int k) {
    if (train.empty() || train.size() != labels.size()) throw InvalidArgument("knn_predict needs labelled training points");
    std::vector<std::pair<double, std::size_t>> dist(train.size());
    for (std::size_t j = 0; j < train.size(); ++j) {
        const double dx = train[j][0] - q[0], dy = train[j][1] - q[1];
        dist[j] = {dx * dx + dy * dy, j};
    }
    const auto kk = std::min<std::size_t>(static_cast<std::size_t>(k), dist.size());
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(kk), dist.end());
    std::map<int, std::pair<int, double>> votes;  // label -> (count, nearest distance)
    for (std::size_t r = 0; r < kk; ++r) ++votes.try_emplace(labels[dist[r].second], 0, dist[r].first).first->second.first;
    int best = 0, best_count = -1;
    double best_dist = std::numeric_limits<double>::infinity();
    for (const auto& [label, v] : votes) {
        if (v.first > best_count || (v.first == best_count && v.second < best_dist)) {
            best = label;
            best_count = v.first;
            best_dist = v.second;
        }
    }
    return best;
}

/// k-nearest-neighbour label prediction under stratified k-fold CV. Features
/// are z-scored with training-fold statistics.
inline CvResult knn_classify_cv(std::span<const Feature2> x, std::span<const int> labels, int k = 5, int folds = 10,
                                std::uint64_t seed = 0) {
    if (x.size() != labels.size()) throw LengthMismatch("features and labels differ in length");
    if (k < 1) throw InvalidArgument("k must be >= 1");
    const auto fold = stratified_folds(labels, folds, seed);
    std::vector<double> acc;
    for (int f = 0; f < folds; ++f) {
        std::vector<std::size_t> train, test;
        for (std::size_t i = 0; i < x.size(); ++i) (fold[i] == f ? test : train).push_back(i);
        Feature2 mean{0, 0}, sd{0, 0};
        for (auto i : train)
            for (int d = 0; d < 2; ++d) mean[d] += x[i][d];
        for (int d = 0; d < 2; ++d) mean[d] /= static_cast<double>(train.size());
        for (auto i : train)
            for (int d = 0; d < 2; ++d) sd[d] += (x[i][d] - mean[d]) * (x[i][d] - mean[d]);
        for (int d = 0; d < 2; ++d) {
            sd[d] = std::sqrt(sd[d] / static_cast<double>(train.size()));
            if (!(sd[d] > 0)) sd[d] = 1.0;
        }
        auto z = [&](std::size_t i) { return Feature2{(x[i][0] - mean[0]) / sd[0], (x[i][1] - mean[1]) / sd[1]}; };
        std::vector<Feature2> zt;
        for (auto i : train) zt.push_back(z(i));

        std::vector<int> train_labels;
        for (auto i : train) train_labels.push_back(labels[i]);
        std::size_t correct = 0;
        for (auto t : test)
            if (knn_predict(zt, train_labels, z(t), k) == labels[t]) ++correct;
        acc.push_back(test.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(test.size()));
    }
    return classify_detail::finish(std::move(acc));
}

/// Label-only baselines: stratified draws from training-fold label
/// frequencies, or uniform draws over training-fold classes.
inline CvResult dummy_classify_cv(std::span<const int> labels, DummyStrategy strategy, int folds = 10,
                                  std::uint64_t seed = 0) {
    const auto fold = stratified_folds(labels, folds, seed, false);
    std::vector<double> acc;
    for (int f = 0; f < folds; ++f) {
        std::map<int, std::size_t> freq;
        std::size_t n_train = 0, n_test = 0, correct = 0;
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (fold[i] != f) {
                ++freq[labels[i]];
                ++n_train;
            }
        std::vector<int> classes;
        for (const auto& [label, cnt] : freq) classes.push_back(label);
        Rng rng(Rng::derive(seed, static_cast<std::uint64_t>(f) + 1));
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (fold[i] != f) continue;
            ++n_test;
            int pred = classes.front();
            if (strategy == DummyStrategy::uniform) {
                pred = classes[rng.below(classes.size())];
            } else {
                auto r = rng.below(n_train);
                for (const auto& [label, cnt] : freq) {
                    if (r < cnt) {
                        pred = label;
                        break;
                    }
                    r -= cnt;
                }
            }
            if (pred == labels[i]) ++correct;
        }
        acc.push_back(n_test ? static_cast<double>(correct) / static_cast<double>(n_test) : 0.0);
    }
    return classify_detail::finish(std::move(acc));
}

}  // namespace chplane
