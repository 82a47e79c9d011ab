#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include <CLI11.hpp>

#include "chplane/atlas.hpp"
#include "chplane/bounds.hpp"
#include "chplane/classify.hpp"
#include "chplane/csv.hpp"
#include "chplane/descriptor_cache.hpp"
#include "chplane/econometrics/adf.hpp"
#include "chplane/econometrics/arma.hpp"
#include "chplane/feature_files.hpp"
#include "chplane/image_io.hpp"
#include "chplane/manifest.hpp"
#include "chplane/ordinal.hpp"
#include "chplane/parallel.hpp"
#include "chplane/similarity.hpp"
#include "chplane/sift.hpp"
#include "chplane/yearly.hpp"

namespace fs = std::filesystem;
using namespace chplane;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_fatal = 1;
constexpr int exit_partial = 2;

struct Config {
    std::uint64_t seed = 0;
    unsigned jobs = std::max(1u, std::thread::hardware_concurrency());
    EmbeddingParams embed;
    std::string grid = "0:0.31:0.01,0.5:1:0.02";
    std::size_t min_count = 50;
    double ratio = 0.75;
    JaccardUnion jaccard_union = JaccardUnion::exclusive;
    bool difference = false;
    bool ellipse_of_mean = false;
    std::size_t max_side = 0;  // 0 = native resolution
};

void warn(const std::string& msg) { std::cerr << "warning: " << msg << '\n'; }

std::string fmt(double v) { return csv::format(v); }
std::string fmt(std::optional<double> v) { return csv::format(v); }
std::string fmt_int(long long v) { return std::to_string(v); }

GrayMatrix load_gray(const fs::path& path, std::size_t max_side) {
    auto g = to_grayscale(load_image(path));
    return max_side ? downscale_to_max_side(g, max_side) : g;
}

/// File-name-safe form of an id: unsafe bytes become %XX.
std::string safe_name(const std::string& id) {
    static const char* hex = "0123456789ABCDEF";
    std::string out;
    for (std::size_t i = 0; i < id.size(); ++i) {
        const auto c = static_cast<unsigned char>(id[i]);
        const bool safe = std::isalnum(c) || c == '-' || c == '_' || (c == '.' && i > 0);
        if (safe) {
            out += static_cast<char>(c);
        } else {
            out += '%';
            out += hex[c >> 4];
            out += hex[c & 15];
        }
    }
    return out;
}

std::string cache_name(const std::string& id) { return safe_name(id) + ".sft"; }

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// ---------------------------------------------------------------- metrics CSV

struct MetricRow {
    CHPoint point;
    std::string width, height, flag;
};

const std::vector<std::string> metrics_header{"id", "group", "year", "h", "c", "width", "height", "window_count", "flag"};

std::vector<MetricRow> read_metrics(const std::string& path) {
    const auto t = csv::read_table(path);
    if (t.header != metrics_header) throw FormatError(path + ": unexpected metrics header");
    std::vector<MetricRow> rows;
    for (const auto& r : t.rows) {
        MetricRow m;
        m.point.id = r[0];
        m.point.group = r[1];
        const auto year = csv::parse_int(r[2]);
        if (!year) throw FormatError(path + ": bad year for '" + r[0] + "'");
        m.point.year = static_cast<int>(*year);
        m.flag = r[8];
        m.width = r[5];
        m.height = r[6];
        if (m.flag != "abnormal") {
            const auto h = csv::parse_double(r[3]), c = csv::parse_double(r[4]);
            if (!h || !c) throw FormatError(path + ": missing h/c for '" + r[0] + "'");
            m.point.h = *h;
            m.point.c = *c;
            m.point.window_count = static_cast<std::uint64_t>(csv::parse_int(r[7]).value_or(0));
        }
        rows.push_back(std::move(m));
    }
    return rows;
}

/// Points usable downstream: decodable and not the degenerate (0, 0).
std::vector<CHPoint> usable_points(const std::vector<MetricRow>& rows) {
    std::vector<CHPoint> pts;
    for (const auto& r : rows)
        if (r.flag.empty()) pts.push_back(r.point);
    return pts;
}

// ---------------------------------------------------------------- ch

int cmd_ch(const Config& cfg, const std::string& manifest, const std::string& out) {
    const auto records = load_manifest(manifest);
    struct Result {
        std::optional<CHPoint> point;
        std::size_t w = 0, h = 0;
        std::string error;
    };
    std::vector<Result> res(records.size());
    parallel_for(records.size(), cfg.jobs, [&](std::size_t i) {
        try {
            const auto g = load_gray(records[i].path, cfg.max_side);
            res[i].w = g.width();
            res[i].h = g.height();
            res[i].point = ch_point(g, cfg.embed, records[i]);
        } catch (const Error& e) {
            res[i].error = e.what();
        }
    });
    csv::Writer w(out);
    w.row(metrics_header);
    std::size_t failed = 0, zero = 0;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        if (!res[i].point) {
            ++failed;
            warn("abnormal image '" + r.id + "': " + res[i].error);
            w.row({r.id, r.group, fmt_int(r.year), "NA", "NA", "NA", "NA", "NA", "abnormal"});
            continue;
        }
        const auto& p = *res[i].point;
        const bool is_zero = p.h == 0.0 && p.c == 0.0;
        zero += is_zero;
        w.row({r.id, r.group, fmt_int(r.year), fmt(p.h), fmt(p.c), fmt_int(static_cast<long long>(res[i].w)),
               fmt_int(static_cast<long long>(res[i].h)), fmt_int(static_cast<long long>(p.window_count)),
               is_zero ? "zero_ch" : ""});
    }
    std::cerr << records.size() << " images, " << failed << " abnormal, " << zero << " zero_ch\n";
    return failed ? exit_partial : exit_ok;
}

// ---------------------------------------------------------------- bounds

int cmd_bounds(const Config& cfg, std::optional<std::size_t> n, std::size_t resolution, const std::string& out) {
    cfg.embed.validate();
    const auto count = n.value_or(factorial(cfg.embed.dx * cfg.embed.dy));
    const auto b = complexity_bounds(count, resolution);
    csv::Writer w(out);
    w.row({"curve", "h", "c"});
    for (const auto& p : b.lower) w.row({"lower", fmt(p.h), fmt(p.c)});
    for (const auto& p : b.upper) w.row({"upper", fmt(p.h), fmt(p.c)});
    return exit_ok;
}

// ---------------------------------------------------------------- sift-cache

int cmd_sift_cache(const Config& cfg, const std::string& manifest, const std::string& dir, bool force) {
    const auto records = load_manifest(manifest);
    fs::create_directories(dir);
    std::vector<std::string> errors(records.size());
    std::vector<char> reused(records.size(), 0);
    parallel_for(records.size(), cfg.jobs, [&](std::size_t i) {
        const auto path = fs::path(dir) / cache_name(records[i].id);
        try {
            if (!force && fs::exists(path)) {
                (void)load_descriptors(path);
                reused[i] = 1;
                return;
            }
        } catch (const Error&) {
        }
        try {
            save_descriptors(path, detect_and_describe(load_gray(records[i].path, cfg.max_side)));
        } catch (const Error& e) {
            errors[i] = e.what();
        }
    });
    std::size_t failed = 0;
    for (std::size_t i = 0; i < records.size(); ++i)
        if (!errors[i].empty()) {
            ++failed;
            warn("no descriptors for '" + records[i].id + "': " + errors[i]);
        }
    std::cerr << records.size() - failed << " descriptor sets (" << std::count(reused.begin(), reused.end(), 1)
              << " reused), " << failed << " failed\n";
    return failed ? exit_partial : exit_ok;
}

// ---------------------------------------------------------------- embed-ingest

int cmd_embed_ingest(const std::string& features, const std::string& out, const std::string& manifest, bool global_fit,
                     bool standardize, std::size_t components) {
    const auto raw = load_features(features);
    if (raw.ids.empty()) throw FormatError(features + ": no feature rows");
    std::map<std::string, std::vector<std::size_t>> corpora;
    if (manifest.empty() || global_fit) {
        for (std::size_t i = 0; i < raw.ids.size(); ++i) corpora[""].push_back(i);
    } else {
        std::unordered_map<std::string, std::string> group;
        for (const auto& r : load_manifest(manifest)) group.emplace(r.id, r.group);
        for (std::size_t i = 0; i < raw.ids.size(); ++i) {
            const auto it = group.find(raw.ids[i]);
            if (it == group.end()) throw FormatError("feature id '" + raw.ids[i] + "' is not in the manifest");
            corpora[it->second].push_back(i);
        }
    }
    EmbeddingTable all;
    all.ids = raw.ids;
    all.values.resize(static_cast<Eigen::Index>(raw.ids.size()), static_cast<Eigen::Index>(2 * components));
    for (const auto& [name, rows] : corpora) {
        RawFeatures sub;
        sub.low.resize(static_cast<Eigen::Index>(rows.size()), raw.low.cols());
        sub.high.resize(static_cast<Eigen::Index>(rows.size()), raw.high.cols());
        for (std::size_t r = 0; r < rows.size(); ++r) {
            sub.ids.push_back(raw.ids[rows[r]]);
            sub.low.row(static_cast<Eigen::Index>(r)) = raw.low.row(static_cast<Eigen::Index>(rows[r]));
            sub.high.row(static_cast<Eigen::Index>(r)) = raw.high.row(static_cast<Eigen::Index>(rows[r]));
        }
        EmbeddingFit fit;
        try {
            fit = fit_embedding_models(sub, components, {standardize});
        } catch (const InsufficientRows&) {
            throw InsufficientRows("corpus '" + name + "' has " + std::to_string(rows.size()) + " rows; PCA to " +
                                   std::to_string(components) + " components needs more (try --global-fit or --components)");
        }
        const auto emb = build_embeddings(sub, fit.low, fit.high);
        for (std::size_t r = 0; r < rows.size(); ++r)
            all.values.row(static_cast<Eigen::Index>(rows[r])) = emb.values.row(static_cast<Eigen::Index>(r));
        std::cerr << "corpus '" << name << "': " << rows.size() << " rows, explained variance low "
                  << fit.low.explained_variance.sum() / fit.low.total_variance << ", high "
                  << fit.high.explained_variance.sum() / fit.high.total_variance << '\n';
    }
    save_embeddings(out, all);
    return exit_ok;
}

// ---------------------------------------------------------------- diversity

struct DescriptorSource {
    std::string dir;
    std::optional<DescriptorSet> operator()(const std::string& id) const {
        if (dir.empty()) return std::nullopt;
        return load_descriptors(fs::path(dir) / cache_name(id));
    }
};

int cmd_diversity(const Config& cfg, const std::string& metrics, const std::string& embeddings, const std::string& cache,
                  const std::string& out, const std::string& summaries_out) {
    const auto points = usable_points(read_metrics(metrics));
    std::optional<EmbeddingTable> emb;
    if (!embeddings.empty()) emb = load_embeddings(embeddings);
    const DescriptorSource source{cache};
    MatchOptions mopt;
    mopt.ratio = cfg.ratio;
    mopt.seed = cfg.seed;

    const auto grid = bin_points(points, parse_grid(cfg.grid, cfg.min_count));
    DiversityInputs in;
    in.embeddings = emb ? &*emb : nullptr;
    if (!cache.empty()) in.descriptors = [&](std::size_t i) { return *source(points[i].id); };
    in.match = mopt;
    in.jaccard_union = cfg.jaccard_union;
    const auto bins = bin_diversity(grid, points, in, cfg.seed, cfg.jobs);

    bool partial = false;
    csv::Writer w(out);
    w.row({"bin_c_lo", "bin_h_lo", "count", "ie_mean", "sift_mean", "sift_n"});
    for (const auto& b : bins) {
        for (const auto& e : b.errors) {
            warn("bin (" + fmt(b.c_lo) + ", " + fmt(b.h_lo) + "): " + e);
            partial = true;
        }
        w.row({fmt(b.c_lo), fmt(b.h_lo), fmt_int(static_cast<long long>(b.count)), fmt(b.ie_mean), fmt(b.sift_mean),
               fmt_int(static_cast<long long>(b.sift_n))});
    }
    std::cerr << grid.in_range << " of " << points.size() << " points in range, " << bins.size() << " reportable bins\n";

    if (summaries_out.empty()) return partial ? exit_partial : exit_ok;

    std::unordered_map<std::string, Eigen::Index> emb_row;
    if (emb)
        for (std::size_t i = 0; i < emb->size(); ++i) emb_row.emplace(emb->ids[i], static_cast<Eigen::Index>(i));
    std::map<std::pair<std::string, int>, std::vector<std::size_t>> cells;
    for (std::size_t i = 0; i < points.size(); ++i) cells[{points[i].group, points[i].year}].push_back(i);

    csv::Writer s(summaries_out);
    s.row({"group", "measure", "mean", "pair_count", "seed"});
    for (const auto& [key, members] : cells) {
        const std::string label = key.first + "/" + std::to_string(key.second);
        const auto cell_seed = Rng::derive(cfg.seed, fnv1a(label));
        if (emb) {
            try {
                EmbeddingTable sub;
                sub.values.resize(static_cast<Eigen::Index>(members.size()), emb->values.cols());
                for (std::size_t m = 0; m < members.size(); ++m) {
                    const auto it = emb_row.find(points[members[m]].id);
                    if (it == emb_row.end()) throw FormatError("no embedding for '" + points[members[m]].id + "'");
                    sub.ids.push_back(points[members[m]].id);
                    sub.values.row(static_cast<Eigen::Index>(m)) = emb->values.row(it->second);
                }
                const auto r = mean_pairwise_similarity(sub, std::nullopt, cell_seed, cfg.jobs);
                s.row({label, "IE", fmt(r.mean), fmt_int(static_cast<long long>(r.pair_count)), std::to_string(cell_seed)});
            } catch (const Error& e) {
                warn(label + " IE: " + e.what());
                partial = true;
            }
        }
        if (!cache.empty()) {
            try {
                const auto n = required_sample_size(members.size());
                const auto chosen = subsample_indices(members.size(), n, cell_seed);
                std::vector<DescriptorSet> sets(chosen.size());
                parallel_for(chosen.size(), cfg.jobs, [&](std::size_t i) { sets[i] = *source(points[members[chosen[i]]].id); });
                const auto pm = pairwise_mean(
                    sets.size(),
                    [&](std::size_t a, std::size_t b) {
                        return jaccard_similarity(sets[a], sets[b], mopt, cfg.jaccard_union).value;
                    },
                    cfg.jobs);
                s.row({label, "SIFT", fmt(pm.mean), fmt_int(static_cast<long long>(pm.pairs)), std::to_string(cell_seed)});
            } catch (const Error& e) {
                warn(label + " SIFT: " + e.what());
                partial = true;
            }
        }
    }
    return partial ? exit_partial : exit_ok;
}

// ---------------------------------------------------------------- regression helpers

const std::vector<std::string> fit_header{"model", "term", "estimate", "se", "t", "loglik", "p", "q", "converged"};

void write_fit(csv::Writer& w, const std::string& model, const std::vector<std::string>& xnames, const econ::RegressionFit& f,
               int p, int q) {
    std::vector<std::string> terms = xnames;
    std::vector<double> est(f.beta.data(), f.beta.data() + f.beta.size());
    for (int i = 0; i < p; ++i) {
        terms.push_back("ar.L" + std::to_string(i + 1));
        est.push_back(f.phi(i));
    }
    for (int j = 0; j < q; ++j) {
        terms.push_back("ma.L" + std::to_string(j + 1));
        est.push_back(f.theta(j));
    }
    terms.push_back("sigma2");
    est.push_back(f.sigma2);
    for (std::size_t i = 0; i < terms.size(); ++i) {
        const double se = f.se(static_cast<Eigen::Index>(i));
        const double t = se > 0 ? est[i] / se : std::numeric_limits<double>::quiet_NaN();
        w.row({model, terms[i], fmt(est[i]), fmt(se), fmt(t), fmt(f.loglik), fmt_int(p), fmt_int(q),
               f.converged ? "true" : "false"});
    }
}

struct ModelJob {
    std::string name;
    econ::RegressionSpec spec;
    std::vector<std::string> xnames;
    std::optional<econ::RegressionFit> fit;
    std::string error;
};

econ::FitOptions fit_options(bool css) {
    econ::FitOptions o;
    o.objective = css ? econ::Objective::css : econ::Objective::exact;
    return o;
}

/// Fits every job (in parallel), writes the report, returns the failure count.
std::size_t run_models(std::vector<ModelJob>& jobs, unsigned threads, bool css, const std::string& out) {
    parallel_for(jobs.size(), threads, [&](std::size_t i) {
        try {
            jobs[i].fit = econ::fit_arma_regression(jobs[i].spec, fit_options(css));
        } catch (const Error& e) {
            jobs[i].error = e.what();
        }
    });
    csv::Writer w(out);
    w.row(fit_header);
    std::size_t failed = 0;
    for (const auto& j : jobs) {
        if (!j.fit) {
            ++failed;
            warn("model " + j.name + ": " + j.error);
            continue;
        }
        for (const auto& msg : j.fit->warnings) warn("model " + j.name + ": " + msg);
        write_fit(w, j.name, j.xnames, *j.fit, j.spec.p, j.spec.q);
    }
    return failed;
}

/// y (optionally first-differenced) and X rows aligned to it.
void set_response(econ::RegressionSpec& spec, const std::vector<double>& y, const std::vector<std::vector<double>>& x,
                  bool difference) {
    const std::size_t off = difference ? 1 : 0;
    if (y.size() <= off) throw SeriesTooShort("series too short to difference");
    const auto n = static_cast<Eigen::Index>(y.size() - off);
    const auto k = static_cast<Eigen::Index>(x.empty() ? 0 : x.front().size());
    spec.y.resize(n);
    spec.x.resize(n, k);
    for (Eigen::Index t = 0; t < n; ++t) {
        const auto src = static_cast<std::size_t>(t) + off;
        spec.y(t) = difference ? y[src] - y[src - 1] : y[src];
        for (Eigen::Index j = 0; j < k; ++j) spec.x(t, j) = x[src][static_cast<std::size_t>(j)];
    }
}

// ---------------------------------------------------------------- yearly

int cmd_yearly(const Config& cfg, const std::string& metrics, const std::string& summaries, const std::string& dir, int p,
               int q, bool css) {
    const auto points = usable_points(read_metrics(metrics));
    const auto stats = yearly_stats(points);
    fs::create_directories(dir);
    std::map<std::string, std::vector<YearlyStats>> by_group;
    for (const auto& s : stats) by_group[s.group].push_back(s);
    std::map<std::pair<std::string, int>, std::vector<CHPoint>> cells;
    for (const auto& pt : points) cells[{pt.group, pt.year}].push_back(pt);

    std::size_t failed = 0, written = 0;
    for (const auto& [group, gs] : by_group) {
        Trajectory tr;
        try {
            tr = trajectory(gs);
        } catch (const Error& e) {
            warn("group '" + group + "': " + e.what());
            ++failed;
            continue;
        }
        csv::Writer w((fs::path(dir) / ("trajectory_" + safe_name(group) + ".csv")).string());
        w.row({"year", "mean_h", "mean_c", "var_h", "var_c", "skew_h", "skew_c", "ellipse_a", "ellipse_b", "ellipse_angle"});
        for (const auto& s : gs) {
            std::optional<Ellipse> el;
            try {
                el = confidence_ellipse(cells.at({group, s.year}), 0.95, cfg.ellipse_of_mean);
            } catch (const DegenerateCovariance& e) {
                warn("group '" + group + "' year " + std::to_string(s.year) + ": no ellipse (" + e.what() + ")");
            }
            auto opt = [&](double Ellipse::*m) { return el ? fmt((*el).*m) : std::string("NA"); };
            w.row({fmt_int(s.year), fmt(s.mean_h), fmt(s.mean_c), fmt(s.var_h), fmt(s.var_c), fmt(s.skew_h), fmt(s.skew_c),
                   opt(&Ellipse::a), opt(&Ellipse::b), opt(&Ellipse::angle)});
        }
        ++written;
        std::cerr << "group '" << group << "': " << tr.points.front().year << "-" << tr.points.back().year
                  << " dH=" << fmt(tr.delta_h) << " dC=" << fmt(tr.delta_c) << '\n';
    }

    if (!summaries.empty()) {
        const auto t = csv::read_table(summaries);
        if (t.header != std::vector<std::string>{"group", "measure", "mean", "pair_count", "seed"})
            throw FormatError(summaries + ": unexpected summaries header");
        std::map<std::pair<std::string, std::string>, std::map<int, double>> series;  // (group, measure) -> year -> mean
        for (const auto& r : t.rows) {
            const auto slash = r[0].rfind('/');
            const auto year = slash == std::string::npos ? std::nullopt : csv::parse_int(r[0].substr(slash + 1));
            const auto mean = csv::parse_double(r[2]);
            if (!year || !mean) throw FormatError(summaries + ": bad row for '" + r[0] + "'");
            series[{r[0].substr(0, slash), r[1]}][static_cast<int>(*year)] = *mean;
        }
        std::vector<ModelJob> jobs;
        for (const auto& [key, by_year] : series) {
            const auto g = by_group.find(key.first);
            if (g == by_group.end()) continue;
            std::vector<double> y;
            std::vector<std::vector<double>> x;
            for (const auto& s : g->second) {
                const auto it = by_year.find(s.year);
                if (it == by_year.end()) continue;
                y.push_back(it->second);
                x.push_back({s.mean_h, s.var_h, s.mean_c, s.var_c, 1.0});
            }
            ModelJob job;
            job.name = key.first + ":" + key.second;
            job.xnames = {"mean_h", "var_h", "mean_c", "var_c", "const"};
            job.spec.p = p;
            job.spec.q = q;
            try {
                set_response(job.spec, y, x, cfg.difference);
            } catch (const Error& e) {
                warn("model " + job.name + ": " + e.what());
                ++failed;
                continue;
            }
            jobs.push_back(std::move(job));
        }
        failed += run_models(jobs, cfg.jobs, css, (fs::path(dir) / "regression.csv").string());
    }
    if (written == 0) return exit_fatal;
    return failed ? exit_partial : exit_ok;
}

// ---------------------------------------------------------------- classify

int cmd_classify(const Config& cfg, const std::string& metrics, const std::string& out, int k, int folds) {
    const auto points = usable_points(read_metrics(metrics));
    std::map<std::string, std::vector<CHPoint>> by_group;
    for (const auto& pt : points) by_group[pt.group].push_back(pt);
    csv::Writer w(out);
    w.row({"group", "classifier", "fold", "accuracy"});
    std::size_t failed = 0;
    for (const auto& [group, pts] : by_group) {
        std::vector<Feature2> x;
        std::vector<int> labels;
        for (const auto& pt : pts) {
            x.push_back({pt.h, pt.c});
            labels.push_back(pt.year);
        }
        std::vector<std::pair<std::string, CvResult>> results;
        try {
            results.emplace_back("knn", knn_classify_cv(x, labels, k, folds, cfg.seed));
            results.emplace_back("dummy_stratified", dummy_classify_cv(labels, DummyStrategy::stratified, folds, cfg.seed));
            results.emplace_back("dummy_uniform", dummy_classify_cv(labels, DummyStrategy::uniform, folds, cfg.seed));
        } catch (const Error& e) {
            warn("group '" + group + "': " + e.what());
            ++failed;
            continue;
        }
        for (const auto& [name, r] : results) {
            for (std::size_t f = 0; f < r.fold_accuracy.size(); ++f)
                w.row({group, name, fmt_int(static_cast<long long>(f)), fmt(r.fold_accuracy[f])});
            w.row({group, name, "mean", fmt(r.mean)});
        }
    }
    if (failed == by_group.size()) return exit_fatal;
    return failed ? exit_partial : exit_ok;
}

// ---------------------------------------------------------------- sample-size

int cmd_sample_size(std::uint64_t population, double confidence, double margin) {
    const auto n = required_sample_size(population, confidence, margin);
    std::cout << "population,n,pairs\n"
              << population << ',' << n << ',' << (n * (n - 1) / 2) << '\n';
    return exit_ok;
}

// ---------------------------------------------------------------- adf / arma

std::vector<double> read_column(const csv::Table& t, const std::string& path, const std::string& name) {
    const auto it = std::find(t.header.begin(), t.header.end(), name);
    if (it == t.header.end()) throw FormatError(path + ": no column '" + name + "'");
    const auto col = static_cast<std::size_t>(it - t.header.begin());
    std::vector<double> v;
    for (const auto& r : t.rows) {
        const auto d = csv::parse_double(r[col]);
        if (!d) throw FormatError(path + ": missing value in column '" + name + "'");
        v.push_back(*d);
    }
    return v;
}

econ::Trend parse_trend(const std::string& s) {
    if (s == "none" || s == "nc") return econ::Trend::none;
    if (s == "constant" || s == "c") return econ::Trend::constant;
    if (s == "trend" || s == "ct") return econ::Trend::trend;
    throw InvalidArgument("trend must be none, constant or trend");
}

int cmd_adf(const Config& cfg, const std::string& input, const std::vector<std::string>& columns, std::optional<int> lags,
            std::optional<int> max_lags, const std::string& trend_s, bool gls, const std::string& out) {
    const auto t = csv::read_table(input);
    const auto trend = parse_trend(trend_s);
    std::ostream* os = &std::cout;
    std::ofstream file;
    if (!out.empty()) {
        file.open(out, std::ios::binary | std::ios::trunc);
        if (!file) throw IoError("cannot create " + out);
        os = &file;
    }
    *os << "column,statistic,lags,trend,gls,nobs,cv_1,cv_5,cv_10,reject_5\n";
    std::size_t failed = 0;
    for (const auto& name : columns) {
        try {
            auto s = read_column(t, input, name);
            if (cfg.difference) {
                for (std::size_t i = s.size(); i-- > 1;) s[i] -= s[i - 1];
                if (!s.empty()) s.erase(s.begin());
            }
            const int l = lags ? *lags
                               : econ::select_lags_aic(s, max_lags.value_or(econ::default_max_lags(s.size(), trend)),
                                                       trend, gls);
            const auto r = econ::adf_test(s, l, trend, gls);
            *os << csv::escape(name) << ',' << fmt(r.statistic) << ',' << r.lags << ',' << econ::trend_name(r.trend) << ','
                << (r.gls ? "true" : "false") << ',' << r.nobs << ',' << fmt(r.critical[0]) << ',' << fmt(r.critical[1])
                << ',' << fmt(r.critical[2]) << ',' << (r.reject[1] ? "true" : "false") << '\n';
        } catch (const Error& e) {
            warn("column '" + name + "': " + e.what());
            ++failed;
        }
    }
    if (failed == columns.size()) return exit_fatal;
    return failed ? exit_partial : exit_ok;
}

int cmd_arma(const Config& cfg, const std::string& input, const std::string& ycol, const std::vector<std::string>& xcols,
             bool intercept, int p, int q, bool css, const std::string& model, const std::string& out) {
    const auto t = csv::read_table(input);
    const auto y = read_column(t, input, ycol);
    std::vector<std::vector<double>> cols;
    for (const auto& c : xcols) cols.push_back(read_column(t, input, c));
    std::vector<std::vector<double>> x(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        for (const auto& c : cols) x[i].push_back(c[i]);
        if (intercept) x[i].push_back(1.0);
    }
    ModelJob job;
    job.name = model.empty() ? ycol : model;
    job.xnames = xcols;
    if (intercept) job.xnames.push_back("const");
    job.spec.p = p;
    job.spec.q = q;
    set_response(job.spec, y, x, cfg.difference);
    std::vector<ModelJob> jobs{std::move(job)};
    return run_models(jobs, 1, css, out) ? exit_fatal : exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Complexity-entropy analysis of image corpora"};
    app.require_subcommand(1);
    app.fallthrough();
    Config cfg;
    std::string union_s = "exclusive";
    app.add_option("--seed", cfg.seed, "Seed for every random choice")->capture_default_str();
    app.add_option("--jobs", cfg.jobs, "Worker threads (results do not depend on it)")->check(CLI::PositiveNumber);
    app.add_option("--dx", cfg.embed.dx, "Window width")->capture_default_str()->check(CLI::PositiveNumber);
    app.add_option("--dy", cfg.embed.dy, "Window height")->capture_default_str()->check(CLI::PositiveNumber);
    app.add_option("--taux", cfg.embed.taux, "Horizontal stride")->capture_default_str()->check(CLI::PositiveNumber);
    app.add_option("--tauy", cfg.embed.tauy, "Vertical stride")->capture_default_str()->check(CLI::PositiveNumber);
    app.add_option("--grid", cfg.grid, "C-H bins as c_lo:c_hi:c_step,h_lo:h_hi:h_step")->capture_default_str();
    app.add_option("--min-count", cfg.min_count, "Smallest reportable bin")->capture_default_str();
    app.add_option("--ratio", cfg.ratio, "Ratio-test threshold")->capture_default_str()->check(CLI::Range(0.0, 1.0));
    app.add_option("--jaccard-union", union_s, "Jaccard denominator")
        ->check(CLI::IsMember({"exclusive", "additive"}))
        ->capture_default_str();
    app.add_flag("--difference", cfg.difference, "Use first differences of regression responses / tested series");
    app.add_flag("--ellipse-of-mean", cfg.ellipse_of_mean, "Ellipse of the yearly mean instead of the data ellipse");
    app.add_option("--max-side", cfg.max_side, "Downscale images so the longest side is at most this (0 = native)");

    std::string manifest, out, dir, metrics, embeddings, cache, summaries, features, input, ycol, model, trend = "constant";
    std::vector<std::string> xcols, columns;
    bool force = false, global_fit = false, standardize = false, css = false, gls = false, no_intercept = false;
    std::size_t components = embedding_dim / 2, resolution = 200;
    std::optional<std::size_t> bounds_n;
    std::optional<int> lags, max_lags;
    int p = 1, q = 1, k = 5, folds = 10;
    std::uint64_t population = 0;
    double confidence = 0.95, margin = 0.05;

    auto* ch = app.add_subcommand("ch", "Per-image H and C (metrics CSV)");
    ch->add_option("--manifest", manifest)->required();
    ch->add_option("--out", out)->required();

    auto* bounds = app.add_subcommand("bounds", "Lower and upper C-H boundary curves");
    bounds->add_option("--n", bounds_n, "Pattern count (default (dx*dy)!)");
    bounds->add_option("--resolution", resolution)->capture_default_str()->check(CLI::Range(10, 1000000));
    bounds->add_option("--out", out)->required();

    auto* sift = app.add_subcommand("sift-cache", "Detect and cache SIFT descriptors per image");
    sift->add_option("--manifest", manifest)->required();
    sift->add_option("--out-dir", dir)->required();
    sift->add_flag("--force", force, "Recompute existing cache entries");

    auto* ingest = app.add_subcommand("embed-ingest", "PCA-reduce raw features to image embeddings");
    ingest->add_option("--features", features, ".chfeat file")->required();
    ingest->add_option("--out", out, ".chemb file")->required();
    ingest->add_option("--manifest", manifest, "Fit PCA per manifest group");
    ingest->add_flag("--global-fit", global_fit, "One PCA fit over all rows");
    ingest->add_flag("--standardize", standardize, "z-score features before PCA");
    ingest->add_option("--components", components, "Components per feature level")->capture_default_str()->check(CLI::PositiveNumber);

    auto* diversity = app.add_subcommand("diversity", "Per-bin IE and SIFT similarity");
    diversity->add_option("--metrics", metrics)->required();
    diversity->add_option("--embeddings", embeddings);
    diversity->add_option("--sift-cache", cache);
    diversity->add_option("--out", out)->required();
    diversity->add_option("--summaries", summaries, "Also write per group/year similarity summaries");

    auto* yearly = app.add_subcommand("yearly", "Yearly trajectories, ellipses and ARMA-error regressions");
    yearly->add_option("--metrics", metrics)->required();
    yearly->add_option("--summaries", summaries);
    yearly->add_option("--out-dir", dir)->required();
    yearly->add_option("--p", p)->capture_default_str()->check(CLI::NonNegativeNumber);
    yearly->add_option("--q", q)->capture_default_str()->check(CLI::NonNegativeNumber);
    yearly->add_flag("--css", css, "Conditional sum of squares instead of exact likelihood");

    auto* classify = app.add_subcommand("classify", "Year classification: kNN and dummy baselines");
    classify->add_option("--metrics", metrics)->required();
    classify->add_option("--out", out)->required();
    classify->add_option("--k", k)->capture_default_str()->check(CLI::PositiveNumber);
    classify->add_option("--folds", folds)->capture_default_str()->check(CLI::Range(2, 1000));

    auto* ss = app.add_subcommand("sample-size", "Cochran sample size with finite-population correction");
    ss->add_option("--population", population)->required()->check(CLI::PositiveNumber);
    ss->add_option("--confidence", confidence)->capture_default_str();
    ss->add_option("--margin", margin)->capture_default_str();

    auto* adf = app.add_subcommand("adf", "Augmented Dickey-Fuller test on CSV columns");
    adf->add_option("--input", input)->required();
    adf->add_option("--column", columns)->required();
    adf->add_option("--lags", lags, "Fixed lag order (default: AIC)");
    adf->add_option("--max-lags", max_lags);
    adf->add_option("--trend", trend)->capture_default_str()->check(CLI::IsMember({"none", "constant", "trend", "nc", "c", "ct"}));
    adf->add_flag("--gls", gls, "GLS-detrend first (DF-GLS)");
    adf->add_option("--out", out);

    auto* arma = app.add_subcommand("arma", "Regression with ARMA(p,q) errors on CSV columns");
    arma->add_option("--input", input)->required();
    arma->add_option("--y", ycol)->required();
    arma->add_option("--x", xcols)->delimiter(',');
    arma->add_flag("--no-intercept", no_intercept);
    arma->add_option("--p", p)->capture_default_str()->check(CLI::NonNegativeNumber);
    arma->add_option("--q", q)->capture_default_str()->check(CLI::NonNegativeNumber);
    arma->add_flag("--css", css);
    arma->add_option("--model", model);
    arma->add_option("--out", out)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? exit_ok : exit_fatal;
    }
    cfg.jaccard_union = union_s == "additive" ? JaccardUnion::additive : JaccardUnion::exclusive;

    try {
        if (*ch) return cmd_ch(cfg, manifest, out);
        if (*bounds) return cmd_bounds(cfg, bounds_n, resolution, out);
        if (*sift) return cmd_sift_cache(cfg, manifest, dir, force);
        if (*ingest) return cmd_embed_ingest(features, out, manifest, global_fit, standardize, components);
        if (*diversity) return cmd_diversity(cfg, metrics, embeddings, cache, out, summaries);
        if (*yearly) return cmd_yearly(cfg, metrics, summaries, dir, p, q, css);
        if (*classify) return cmd_classify(cfg, metrics, out, k, folds);
        if (*ss) return cmd_sample_size(population, confidence, margin);
        if (*adf) return cmd_adf(cfg, input, columns, lags, max_lags, trend, gls, out);
        if (*arma) return cmd_arma(cfg, input, ycol, xcols, !no_intercept, p, q, css, model, out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_fatal;
    }
    return exit_fatal;
}
