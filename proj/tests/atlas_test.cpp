#include <cmath>
#include <numbers>

#include <boost/math/distributions/students_t.hpp>
#include <gtest/gtest.h>

#include "chplane/atlas.hpp"
#include "chplane/classify.hpp"
#include "chplane/yearly.hpp"
#include "synthetic_scene.hpp"

using namespace chplane;

namespace {

CHPoint pt(double h, double c, std::string id = "", std::string group = "g", int year = 2010) {
    CHPoint p;
    p.h = h;
    p.c = c;
    p.id = std::move(id);
    p.group = std::move(group);
    p.year = year;
    return p;
}

struct Welford {
    std::size_t n = 0;
    double mean = 0, m2 = 0;
    void add(double x) {
        ++n;
        const double d = x - mean;
        mean += d / static_cast<double>(n);
        m2 += d * (x - mean);
    }
};

double welch_p(const std::vector<double>& a, const std::vector<double>& b) {
    const auto ma = moments(a), mb = moments(b);
    const double na = double(a.size()), nb = double(b.size());
    const double va = ma.variance / na, vb = mb.variance / nb;
    const double t = (ma.mean - mb.mean) / std::sqrt(va + vb);
    const double df = (va + vb) * (va + vb) / (va * va / (na - 1) + vb * vb / (nb - 1));
    const boost::math::students_t dist(df);
    return 2 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

}  // namespace

TEST(BinPoints, DefaultGridShape) {
    const GridSpec g;
    EXPECT_EQ(g.c_bins(), 31);
    EXPECT_EQ(g.h_bins(), 25);
    const auto parsed = parse_grid("0:0.31:0.01,0.5:1:0.02");
    EXPECT_EQ(parsed.c_bins(), 31);
    EXPECT_EQ(parsed.h_bins(), 25);
}

TEST(BinPoints, BoundaryGoesToHigherBin) {
    const std::vector<CHPoint> pts = {pt(0.52, 0.03), pt(0.5, 0.0), pt(0.98, 0.30), pt(0.5199999, 0.0299999)};
    const auto g = bin_points(pts);
    EXPECT_EQ(g.bins.at(BinKey{3, 1}), std::vector<std::size_t>{0});
    EXPECT_EQ(g.bins.at(BinKey{0, 0}), std::vector<std::size_t>{1});
    EXPECT_EQ(g.bins.at(BinKey{30, 24}), std::vector<std::size_t>{2});
    EXPECT_EQ(g.bins.at(BinKey{2, 0}), std::vector<std::size_t>{3});
    for (int i = 0; i <= 30; ++i) {
        const double edge = i / 100.0;
        EXPECT_EQ(GridSpec::index(edge, 0.0, 0.31, 0.01), i) << edge;
    }
    for (int j = 0; j < 25; ++j) EXPECT_EQ(GridSpec::index(0.5 + j * 0.02, 0.5, 1.0, 0.02), j);
}

TEST(BinPoints, OutOfRangeDroppedAndCountsConserved) {
    Rng rng(3);
    std::vector<CHPoint> pts;
    std::size_t expected = 0;
    for (int i = 0; i < 5000; ++i) {
        const double h = rng.uniform() * 1.1, c = rng.uniform() * 0.4 - 0.02;
        pts.push_back(pt(h, c));
        if (h >= 0.5 && h < 1.0 && c >= 0 && c < 0.31) ++expected;
    }
    pts.push_back(pt(1.0, 0.1));
    pts.push_back(pt(0.7, 0.31));
    const auto g = bin_points(pts);
    std::size_t total = 0;
    std::vector<int> seen(pts.size(), 0);
    for (const auto& [k, members] : g.bins) {
        total += members.size();
        for (auto m : members) ++seen[m];
    }
    EXPECT_EQ(total, expected);
    EXPECT_EQ(g.in_range, expected);
    EXPECT_TRUE(std::all_of(seen.begin(), seen.end(), [](int s) { return s <= 1; }));
}

TEST(BinPoints, MinCountSuppression) {
    std::vector<CHPoint> pts(49, pt(0.61, 0.05));
    for (int i = 0; i < 50; ++i) pts.push_back(pt(0.81, 0.15));
    const auto g = bin_points(pts);
    ASSERT_EQ(g.bins.size(), 2u);
    const auto rep = g.reportable();
    ASSERT_EQ(rep.size(), 1u);
    EXPECT_EQ(g.bins.at(rep[0]).size(), 50u);
    GridSpec ten;
    ten.min_count = 10;
    EXPECT_EQ(bin_points(pts, ten).reportable().size(), 2u);
}

TEST(BinPoints, BadSpecs) {
    GridSpec g;
    g.c_step = 0;
    EXPECT_THROW(bin_points({}, g), BadGridSpec);
    g = {};
    g.h_hi = 0.4;
    EXPECT_THROW(g.validate(), BadGridSpec);
    EXPECT_THROW(parse_grid("0:0.3:0.01"), BadGridSpec);
    EXPECT_THROW(parse_grid("0:0.3:x,0.5:1:0.02"), BadGridSpec);
    EXPECT_THROW(parse_grid("0,0.3:0.01:0.5:1:0.02"), BadGridSpec);
}

TEST(BinDiversity, IdenticalImagesScoreOne) {
    const auto img = to_grayscale(synth::scene(96, 96, 5));
    const auto desc = detect_and_describe(img);
    ASSERT_GT(desc.size(), 0u);
    std::vector<CHPoint> pts = {pt(0.71, 0.121, "a"), pt(0.712, 0.125, "b")};
    EmbeddingTable emb;
    emb.ids = {"b", "a"};
    emb.values = Eigen::MatrixXd(2, 3);
    emb.values << 1, 2, 3, 1, 2, 3;
    GridSpec spec;
    spec.min_count = 2;
    const auto grid = bin_points(pts, spec);
    DiversityInputs in;
    in.embeddings = &emb;
    in.descriptors = [&](std::size_t) { return desc; };
    const auto out = bin_diversity(grid, pts, in, 1);
    ASSERT_EQ(out.size(), 1u);
    EXPECT_EQ(out[0].count, 2u);
    EXPECT_EQ(out[0].ie_mean, 1.0);
    EXPECT_EQ(out[0].sift_mean, 1.0);
    EXPECT_EQ(out[0].sift_n, 2u);
    EXPECT_DOUBLE_EQ(out[0].c_lo, 0.12);
    EXPECT_DOUBLE_EQ(out[0].h_lo, 0.7);
}

TEST(BinDiversity, CountsMatchAndFailuresAreNull) {
    Rng rng(9);
    std::vector<CHPoint> pts;
    EmbeddingTable emb;
    for (int i = 0; i < 1200; ++i) {
        const double c = i < 1000 ? 0.105 : 0.205;
        pts.push_back(pt(0.75, c, "p" + std::to_string(i)));
    }
    for (int i = 0; i < 1000; ++i) emb.ids.push_back("p" + std::to_string(i));
    emb.values = Eigen::MatrixXd::Random(1000, 4);
    const auto grid = bin_points(pts);
    DiversityInputs in;
    in.embeddings = &emb;
    std::atomic<int> calls = 0;
    in.descriptors = [&](std::size_t i) {
        ++calls;
        if (i >= 1000) throw DecodeError("broken");
        DescriptorSet s;
        s.keypoints.push_back({});
        s.descriptors.assign(128, 0.0f);
        s.descriptors[i % 128] = 1.0f;
        return s;
    };
    const auto out = bin_diversity(grid, pts, in, 7, 4);
    ASSERT_EQ(out.size(), 2u);
    EXPECT_EQ(out[0].count, 1000u);
    EXPECT_EQ(out[1].count, 200u);
    EXPECT_EQ(out[0].sift_n, 278u);
    EXPECT_TRUE(out[0].ie_mean.has_value());
    EXPECT_TRUE(out[0].sift_mean.has_value());
    EXPECT_FALSE(out[1].ie_mean.has_value());
    EXPECT_FALSE(out[1].sift_mean.has_value());
    EXPECT_EQ(out[1].errors.size(), 2u);

    const auto again = bin_diversity(grid, pts, in, 7, 1);
    EXPECT_EQ(again[0].sift_mean, out[0].sift_mean);
    EXPECT_EQ(again[0].ie_mean, out[0].ie_mean);
}

TEST(YearlyStats, SinglePointAndGrouping) {
    const std::vector<CHPoint> pts = {pt(0.8, 0.1, "a", "x", 2012), pt(0.7, 0.2, "b", "x", 2011),
                                      pt(0.6, 0.3, "c", "w", 2015)};
    const auto s = yearly_stats(pts);
    ASSERT_EQ(s.size(), 3u);
    EXPECT_EQ(s[0].group, "w");
    EXPECT_EQ(s[1].year, 2011);
    EXPECT_EQ(s[2].year, 2012);
    EXPECT_EQ(s[0].var_h, 0.0);
    EXPECT_FALSE(s[0].skew_h.has_value());
    EXPECT_FALSE(s[0].skew_c.has_value());
}

TEST(YearlyStats, SkewnessSignAndSymmetry) {
    std::vector<double> sym;
    for (int i = -50; i <= 50; ++i) sym.push_back(0.8 + 0.001 * i * std::abs(i));
    EXPECT_NEAR(*moments(sym).skewness, 0.0, 1e-12);

    Rng rng(4);
    std::vector<double> left;
    for (int i = 0; i < 2000; ++i) left.push_back(1.0 - std::exp(0.5 * rng.normal()) * 0.05);
    EXPECT_LT(*moments(left).skewness, 0.0);

    const std::vector<double> known = {1, 2, 3, 4, 10};
    // scipy.stats.skew(known, bias=False)
    EXPECT_NEAR(*moments(known).skewness, 1.6970562748477143, 1e-12);
}

TEST(YearlyStats, MatchesOnePassReference) {
    Rng rng(5);
    std::vector<CHPoint> pts;
    for (int i = 0; i < 3000; ++i) pts.push_back(pt(0.6 + 0.3 * rng.uniform(), 0.1 + 0.05 * rng.normal(), "", "g", 2010 + int(rng.below(3))));
    const auto stats = yearly_stats(pts);
    for (const auto& s : stats) {
        Welford h, c;
        for (const auto& p : pts)
            if (p.year == s.year) {
                h.add(p.h);
                c.add(p.c);
            }
        EXPECT_EQ(s.count, h.n);
        EXPECT_NEAR(s.mean_h, h.mean, 1e-12 * std::abs(h.mean));
        EXPECT_NEAR(s.mean_c, c.mean, 1e-12 * std::abs(c.mean));
        EXPECT_NEAR(s.var_h, h.m2 / (h.n - 1), 1e-12 * s.var_h);
        EXPECT_NEAR(s.var_c, c.m2 / (c.n - 1), 1e-12 * s.var_c);
    }
}

TEST(ConfidenceEllipse, IsotropicGaussian) {
    Rng rng(6);
    std::vector<double> h, c;
    const double sigma = 0.02;
    for (int i = 0; i < 200000; ++i) {
        h.push_back(0.8 + sigma * rng.normal());
        c.push_back(0.1 + sigma * rng.normal());
    }
    const auto e = confidence_ellipse(h, c, 0.95);
    EXPECT_NEAR(chi2_2dof_quantile(0.95), 5.991464547107979, 1e-12);
    EXPECT_NEAR(e.a, sigma * std::sqrt(5.991464547107979), 0.01 * sigma * 2.45);
    EXPECT_NEAR(e.b, sigma * std::sqrt(5.991464547107979), 0.01 * sigma * 2.45);
    EXPECT_GE(e.a, e.b);
    EXPECT_NEAR(e.center_h, 0.8, 1e-3);
    const auto m = confidence_ellipse(h, c, 0.95, true);
    EXPECT_NEAR(m.a, e.a / std::sqrt(200000.0), 1e-12);
}

TEST(ConfidenceEllipse, DegenerateInputs) {
    EXPECT_THROW(confidence_ellipse(std::vector<double>{0.1, 0.2, 0.3}, std::vector<double>{0.2, 0.4, 0.6}),
                 DegenerateCovariance);
    EXPECT_THROW(confidence_ellipse(std::vector<double>{0.1, 0.2}, std::vector<double>{0.2, 0.1}),
                 DegenerateCovariance);
}

TEST(ConfidenceEllipse, RotationEquivariance) {
    Rng rng(7);
    std::vector<double> h, c;
    for (int i = 0; i < 300; ++i) {
        const double u = 3 * rng.normal(), v = rng.normal();
        h.push_back(u + 0.4 * v);
        c.push_back(v);
    }
    const auto base = confidence_ellipse(h, c);
    for (double theta : {0.3, 1.0, 2.5, -0.7}) {
        std::vector<double> rh, rc;
        for (std::size_t i = 0; i < h.size(); ++i) {
            rh.push_back(std::cos(theta) * h[i] - std::sin(theta) * c[i]);
            rc.push_back(std::sin(theta) * h[i] + std::cos(theta) * c[i]);
        }
        const auto r = confidence_ellipse(rh, rc);
        EXPECT_NEAR(r.a, base.a, 1e-9);
        EXPECT_NEAR(r.b, base.b, 1e-9);
        double diff = std::remainder(r.angle - base.angle - theta, std::numbers::pi);
        EXPECT_NEAR(diff, 0.0, 1e-9);
    }
}

TEST(Trajectory, DeltasAndOrdering) {
    std::vector<YearlyStats> s(2);
    s[0].year = 2020;
    s[0].mean_h = 0.835;
    s[0].mean_c = 0.125;
    s[1].year = 2010;
    s[1].mean_h = 0.84;
    s[1].mean_c = 0.123;
    const auto t = trajectory(s);
    EXPECT_EQ(t.points.front().year, 2010);
    EXPECT_EQ(t.points.back().year, 2020);
    EXPECT_NEAR(t.delta_c, 0.002, 1e-12);
    EXPECT_NEAR(t.delta_h, -0.005, 1e-12);
    s.pop_back();
    EXPECT_THROW(trajectory(s), TooFewYears);
}

TEST(KnnClassify, SeparableBlobs) {
    Rng rng(8);
    std::vector<Feature2> x;
    std::vector<int> y;
    for (int i = 0; i < 400; ++i) {
        const int label = i % 2;
        x.push_back({label * 5.0 + rng.normal(), 0.01 * rng.normal()});
        y.push_back(2010 + label);
    }
    EXPECT_GT(knn_classify_cv(x, y, 5, 10, 1).mean, 0.95);
}

TEST(KnnClassify, ShuffledLabelsAreChance) {
    std::vector<double> knn_acc, dummy_acc;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        Rng rng(seed + 100);
        std::vector<Feature2> x;
        std::vector<int> y;
        for (int i = 0; i < 500; ++i) {
            x.push_back({rng.normal(), rng.normal()});
            y.push_back(i % 10);
        }
        for (std::size_t i = y.size(); i > 1; --i) std::swap(y[i - 1], y[rng.below(i)]);
        knn_acc.push_back(knn_classify_cv(x, y, 5, 10, seed).mean);
        dummy_acc.push_back(dummy_classify_cv(y, DummyStrategy::uniform, 10, seed).mean);
    }
    const auto m = moments(knn_acc);
    EXPECT_NEAR(m.mean, 0.1, 0.03);
    EXPECT_GT(welch_p(knn_acc, dummy_acc), 0.01);
}

TEST(KnnClassify, TrainPointPresentAndErrors) {
    Rng rng(2);
    std::vector<Feature2> x;
    std::vector<int> y;
    for (int i = 0; i < 60; ++i) {
        x.push_back({rng.normal(), rng.normal()});
        y.push_back(static_cast<int>(rng.below(4)));
    }
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(knn_predict(x, y, x[i], 1), y[i]);
    // Vote tie 1-1 resolved by the nearer neighbour.
    const std::vector<Feature2> tx = {{0, 0}, {1, 0}};
    const std::vector<int> ty = {7, 3};
    EXPECT_EQ(knn_predict(tx, ty, {0.9, 0}, 2), 3);
    EXPECT_EQ(knn_predict(tx, ty, {0.1, 0}, 2), 7);

    std::vector<int> few = {1, 1, 1, 2};
    std::vector<Feature2> fx(4, Feature2{0, 0});
    EXPECT_THROW(knn_classify_cv(fx, few, 1, 2, 0), TooFewPerClass);
}

TEST(DummyClassify, Baselines) {
    std::vector<int> balanced;
    for (int i = 0; i < 20000; ++i) balanced.push_back(i % 10);
    EXPECT_NEAR(dummy_classify_cv(balanced, DummyStrategy::uniform, 10, 3).mean, 0.1, 0.02);

    std::vector<int> single(50, 2015);
    EXPECT_EQ(dummy_classify_cv(single, DummyStrategy::uniform, 10, 1).mean, 1.0);
    EXPECT_EQ(dummy_classify_cv(single, DummyStrategy::stratified, 10, 1).mean, 1.0);

    std::vector<int> skewed;
    for (int i = 0; i < 10000; ++i) skewed.push_back(i % 10 == 0 ? 1 : 0);
    EXPECT_NEAR(dummy_classify_cv(skewed, DummyStrategy::stratified, 10, 4).mean, 0.82, 0.03);
}
