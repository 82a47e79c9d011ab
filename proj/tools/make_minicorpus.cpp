// Writes a deterministic synthetic corpus: PNG images, a manifest and a
// .chfeat feature file standing in for network activations.
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "chplane/csv.hpp"
#include "chplane/feature_files.hpp"
#include "chplane/image_io.hpp"
#include "chplane/rng.hpp"
#include "synthetic_scene.hpp"

namespace fs = std::filesystem;
using namespace chplane;

namespace {

constexpr int thumb = 8;
constexpr std::size_t thumb_dim = thumb * thumb * 3;

Eigen::RowVectorXd low_features(const ImageMatrix& img) {
    const auto g = downscale_to_max_side(to_grayscale(img), 56);
    Eigen::RowVectorXd v(static_cast<Eigen::Index>(raw_low_dim));
    for (std::size_t i = 0; i < raw_low_dim; ++i) v(static_cast<Eigen::Index>(i)) = g.data()[i] / 255.0;
    return v;
}

// ReLU of a fixed Gaussian projection of an 8x8 colour thumbnail.
Eigen::RowVectorXd high_features(const ImageMatrix& img, const Eigen::MatrixXd& proj) {
    Eigen::VectorXd t(static_cast<Eigen::Index>(thumb_dim));
    const std::size_t bw = img.width() / thumb, bh = img.height() / thumb;
    for (int ty = 0; ty < thumb; ++ty)
        for (int tx = 0; tx < thumb; ++tx)
            for (int ch = 0; ch < 3; ++ch) {
                double s = 0;
                for (std::size_t y = ty * bh; y < (ty + 1) * bh; ++y)
                    for (std::size_t x = tx * bw; x < (tx + 1) * bw; ++x) s += img.pixel(x, y)[ch];
                t((ty * thumb + tx) * 3 + ch) = s / static_cast<double>(bw * bh) / 255.0 - 0.5;
            }
    return (proj * t).cwiseMax(0.0).transpose();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Generate the synthetic mini-corpus"};
    std::string out;
    std::size_t count = 200, size = 128;
    std::uint64_t seed = 2024;
    bool defects = false;
    app.add_option("--out-dir", out)->required();
    app.add_option("--count", count)->capture_default_str()->check(CLI::PositiveNumber);
    app.add_option("--size", size)->capture_default_str()->check(CLI::Range(16, 4096));
    app.add_option("--seed", seed)->capture_default_str();
    app.add_flag("--defects", defects, "Append a constant image and an undecodable file");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        const fs::path root(out);
        fs::create_directories(root / "images");
        const char* groups[] = {"alpha", "beta"};
        const int first_year = 2010, years = 11;

        Eigen::MatrixXd proj(static_cast<Eigen::Index>(raw_high_dim), static_cast<Eigen::Index>(thumb_dim));
        Rng prng(Rng::derive(seed, 0xFEA7));
        for (Eigen::Index i = 0; i < proj.size(); ++i) proj.data()[i] = prng.normal() / std::sqrt(double(thumb_dim));

        RawFeatures feats;
        feats.low.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(raw_low_dim));
        feats.high.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(raw_high_dim));
        csv::Writer manifest((root / "manifest.csv").string());
        manifest.row({"id", "path", "group", "year", "fields"});
        for (std::size_t i = 0; i < count; ++i) {
            const int g = static_cast<int>(i % 2);
            const int step = static_cast<int>((i / 2) % years);
            const int year = first_year + step;
            // Groups drift in opposite directions: alpha gains texture, beta loses shapes.
            synth::SceneStyle style;
            if (g == 0) {
                style.texture = 4.0 + 2.5 * step;
            } else {
                style.min_shapes = std::max(2, 16 - step);
                style.max_shapes = std::max(4, 32 - 2 * step);
                style.palette_spread = 1.0 - 0.05 * step;
            }
            const auto img = synth::scene(size, size, Rng::derive(seed, i), style);
            char id[32];
            std::snprintf(id, sizeof id, "img%04zu", i);
            const auto rel = fs::path("images") / (std::string(id) + ".png");
            write_file(root / rel, encode_png(img));
            manifest.row({id, rel.generic_string(), groups[g], std::to_string(year), g ? "design" : "illustration"});
            feats.ids.push_back(id);
            feats.low.row(static_cast<Eigen::Index>(i)) = low_features(img);
            feats.high.row(static_cast<Eigen::Index>(i)) = high_features(img, proj);
        }
        if (defects) {
            const ImageMatrix flat(size, size, std::vector<std::uint8_t>(size * size * 3, 128));
            write_file(root / "images/flat.png", encode_png(flat));
            manifest.row({"flat", "images/flat.png", "alpha", "2015", ""});
            std::ofstream(root / "images/broken.png", std::ios::binary) << "\x89PNG\r\n\x1a\nnot really";
            manifest.row({"broken", "images/broken.png", "beta", "2015", ""});
        }
        save_features(root / "features.chfeat", feats);
        std::cerr << count << " images written to " << root.string() << '\n';
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
