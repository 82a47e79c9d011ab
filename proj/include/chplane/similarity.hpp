#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <boost/math/distributions/normal.hpp>
#include <Eigen/Dense>

#include "chplane/error.hpp"
#include "chplane/feature_files.hpp"
#include "chplane/parallel.hpp"
#include "chplane/pca.hpp"
#include "chplane/rng.hpp"

namespace chplane {

enum class Measure { ie, sift };

inline const char* measure_name(Measure m) { return m == Measure::ie ? "IE" : "SIFT"; }

struct SimilaritySummary {
    std::string group;
    Measure measure = Measure::ie;
    double mean = 0;
    std::uint64_t pair_count = 0;
    std::uint64_t seed = 0;
    std::vector<std::string> sample_ids;
};

inline double cosine_similarity(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size()) throw LengthMismatch("cosine_similarity: vectors differ in length");
    double uv = 0, uu = 0, vv = 0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        uv += u[i] * v[i];
        uu += u[i] * u[i];
        vv += v[i] * v[i];
    }
    if (uu == 0 || vv == 0) throw ZeroVector("cosine_similarity of a zero vector");
    double denom = std::sqrt(uu * vv);
    if (!std::isfinite(denom) || denom == 0) denom = std::sqrt(uu) * std::sqrt(vv);
    return std::clamp(uv / denom, -1.0, 1.0);
}

inline std::size_t required_sample_size(std::uint64_t population, double confidence = 0.95, double margin = 0.05) {
    if (population < 1) throw InvalidArgument("population must be >= 1");
    if (!(confidence > 0 && confidence < 1) || !(margin > 0 && margin < 1))
        throw InvalidArgument("confidence and margin must lie in (0, 1)");
    const boost::math::normal_distribution<double> normal;
    const double z = boost::math::quantile(normal, 1.0 - (1.0 - confidence) / 2.0);
    const double pq = 0.25;
    const auto n = static_cast<double>(population);
    const double x = n * z * z * pq / (margin * margin * (n - 1) + z * z * pq);
    // Guard exact integers against rounding just above them.
    const auto size = static_cast<std::size_t>(std::ceil(x * (1 - 1e-12)));
    return std::clamp<std::size_t>(size, 1, population);
}

/// n indices drawn uniformly without replacement, ascending.
inline std::vector<std::size_t> subsample_indices(std::size_t population, std::size_t n, std::uint64_t seed) {
    if (n > population) throw NotEnoughRecords("cannot draw " + std::to_string(n) + " of " + std::to_string(population));
    std::vector<std::size_t> idx(population);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i) std::swap(idx[i], idx[i + rng.below(population - i)]);
    idx.resize(n);
    std::sort(idx.begin(), idx.end());
    return idx;
}

template <class T>
std::vector<T> subsample(std::span<const T> records, std::size_t n, std::uint64_t seed) {
    std::vector<T> out;
    out.reserve(n);
    for (auto i : subsample_indices(records.size(), n, seed)) out.push_back(records[i]);
    return out;
}

struct PairwiseMean {
    double mean = 0;
    std::uint64_t pairs = 0;
};

/// Mean of sim(i, j) over all i < j. Rows are summed independently and then
/// combined in index order, so the result does not depend on `jobs`.
template <class Sim>
PairwiseMean pairwise_mean(std::size_t count, Sim&& sim, unsigned jobs = 1) {
    if (count < 2) throw TooFewItems("pairwise mean needs at least 2 items");
    std::vector<double> row_sums(count - 1, 0.0);
    parallel_for(count - 1, jobs, [&](std::size_t i) {
        double s = 0;
        for (std::size_t j = i + 1; j < count; ++j) s += sim(i, j);
        row_sums[i] = s;
    });
    PairwiseMean r;
    r.pairs = static_cast<std::uint64_t>(count) * (count - 1) / 2;
    double total = 0;
    for (double s : row_sums) total += s;
    r.mean = total / static_cast<double>(r.pairs);
    return r;
}

/// Mean pairwise cosine similarity of embedding rows, optionally over a
/// seeded subsample of `subsample_size` rows.
inline SimilaritySummary mean_pairwise_similarity(const EmbeddingTable& items, std::optional<std::size_t> subsample_size,
                                                  std::uint64_t seed, unsigned jobs = 1) {
    std::vector<std::size_t> chosen;
    if (subsample_size) {
        chosen = subsample_indices(items.size(), *subsample_size, seed);
    } else {
        chosen.resize(items.size());
        std::iota(chosen.begin(), chosen.end(), std::size_t{0});
    }
    if (chosen.size() < 2) throw TooFewItems("need at least 2 items for pairwise similarity");
    std::vector<Eigen::VectorXd> unit;
    unit.reserve(chosen.size());
    for (auto i : chosen) {
        Eigen::VectorXd v = items.values.row(static_cast<Eigen::Index>(i)).transpose();
        const double norm = v.norm();
        if (norm == 0) throw ZeroVector("embedding '" + items.ids[i] + "' is zero");
        unit.push_back(v);
    }
    auto sim = [&](std::size_t a, std::size_t b) {
        return cosine_similarity(std::span<const double>(unit[a].data(), unit[a].size()),
                                 std::span<const double>(unit[b].data(), unit[b].size()));
    };
    const auto pm = pairwise_mean(chosen.size(), sim, jobs);
    SimilaritySummary s;
    s.measure = Measure::ie;
    s.mean = pm.mean;
    s.pair_count = pm.pairs;
    s.seed = seed;
    for (auto i : chosen) s.sample_ids.push_back(items.ids[i]);
    return s;
}

/// Concatenate low- and high-level projections into one embedding per row.
inline EmbeddingTable build_embeddings(const RawFeatures& raw, const PcaModel& model_low, const PcaModel& model_high) {
    if (raw.low.cols() != model_low.input_dim() || raw.high.cols() != model_high.input_dim())
        throw DimensionMismatch("raw features do not match the PCA models");
    EmbeddingTable t;
    t.ids = raw.ids;
    t.values.resize(raw.low.rows(), model_low.output_dim() + model_high.output_dim());
    t.values.leftCols(model_low.output_dim()) = model_low.project(raw.low);
    t.values.rightCols(model_high.output_dim()) = model_high.project(raw.high);
    return t;
}

struct EmbeddingFit {
    PcaModel low;
    PcaModel high;
};

inline EmbeddingFit fit_embedding_models(const RawFeatures& raw, std::size_t k_each = embedding_dim / 2,
                                         const PcaOptions& opt = {}) {
    return {fit_pca(raw.low, k_each, opt), fit_pca(raw.high, k_each, opt)};
}

}  // namespace chplane
