#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <set>
#include <tuple>
#include <span>
#include <vector>

#include "chplane/error.hpp"
#include "chplane/image_io.hpp"

namespace chplane {

/// Scale-space keypoint in input-image pixel coordinates (pixel centers at
/// integers). `scale` is the Gaussian sigma of the detection level.
struct Keypoint {
    float x = 0.f;
    float y = 0.f;
    float scale = 0.f;
    float orientation = 0.f;  // radians in [0, 2pi), y axis pointing down

    friend bool operator==(const Keypoint&, const Keypoint&) = default;
};

/// Keypoints with their 128-d descriptors stored row-major (k x 128).
struct DescriptorSet {
    static constexpr std::size_t dim = 128;

    std::vector<Keypoint> keypoints;
    std::vector<float> descriptors;

    [[nodiscard]] std::size_t size() const noexcept { return keypoints.size(); }
    [[nodiscard]] bool empty() const noexcept { return keypoints.empty(); }
    [[nodiscard]] std::span<const float, dim> row(std::size_t i) const noexcept {
        return std::span<const float, dim>(descriptors.data() + i * dim, dim);
    }

    friend bool operator==(const DescriptorSet&, const DescriptorSet&) = default;
};

struct SiftOptions {
    int scales_per_octave = 3;
    double sigma = 1.6;
    double contrast_threshold = 0.04;  // on intensities scaled to [0, 1]
    double edge_threshold = 10.0;
    double assumed_blur = 0.5;
    bool upsample = true;
    /// Keep only the strongest keypoints by |DoG response|; 0 keeps all.
    std::size_t max_keypoints = 0;
};

namespace sift_detail {

inline constexpr int image_border = 5;
inline constexpr int max_interp_steps = 5;
inline constexpr int orientation_bins = 36;
inline constexpr double orientation_sigma_factor = 1.5;
inline constexpr double orientation_radius_factor = 3.0;
inline constexpr double orientation_peak_ratio = 0.8;
inline constexpr int descr_width = 4;
inline constexpr int descr_bins = 8;
inline constexpr double descr_scale_factor = 3.0;
inline constexpr float descr_clamp = 0.2f;

struct Plane {
    int w = 0;
    int h = 0;
    std::vector<float> v;

    Plane() = default;
    Plane(int width, int height) : w(width), h(height), v(static_cast<std::size_t>(width) * height, 0.f) {}
    float& at(int x, int y) { return v[static_cast<std::size_t>(y) * w + x]; }
    [[nodiscard]] float at(int x, int y) const { return v[static_cast<std::size_t>(y) * w + x]; }
};

// Reflect-101 index (…2 1 | 0 1 2 … n-1 | n-2 …).
inline int reflect(int i, int n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) {
        if (i < 0) i = -i;
        if (i >= n) i = 2 * n - 2 - i;
    }
    return i;
}

inline std::vector<float> gaussian_kernel(double sigma) {
    const int radius = std::max(1, static_cast<int>(std::ceil(4.0 * sigma)));
    std::vector<float> k(2 * radius + 1);
    double sum = 0;
    std::vector<double> tmp(k.size());
    for (int i = -radius; i <= radius; ++i) sum += tmp[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    for (std::size_t i = 0; i < k.size(); ++i) k[i] = static_cast<float>(tmp[i] / sum);
    return k;
}

inline Plane blur(const Plane& src, double sigma) {
    if (sigma <= 0) return src;
    const auto k = gaussian_kernel(sigma);
    const int r = static_cast<int>(k.size() / 2);
    Plane tmp(src.w, src.h), out(src.w, src.h);
    for (int y = 0; y < src.h; ++y) {
        const float* row = src.v.data() + static_cast<std::size_t>(y) * src.w;
        for (int x = 0; x < src.w; ++x) {
            float acc = 0.f;
            if (x >= r && x + r < src.w) {
                for (int t = -r; t <= r; ++t) acc += k[t + r] * row[x + t];
            } else {
                for (int t = -r; t <= r; ++t) acc += k[t + r] * row[reflect(x + t, src.w)];
            }
            tmp.at(x, y) = acc;
        }
    }
    for (int y = 0; y < src.h; ++y) {
        for (int x = 0; x < src.w; ++x) {
            float acc = 0.f;
            for (int t = -r; t <= r; ++t) acc += k[t + r] * tmp.at(x, reflect(y + t, src.h));
            out.at(x, y) = acc;
        }
    }
    return out;
}

// 2x bilinear upsampling with pixel centers aligned: dst i samples src (i+0.5)/2-0.5.
inline Plane upsample2(const Plane& src) {
    Plane out(src.w * 2, src.h * 2);
    for (int y = 0; y < out.h; ++y) {
        const double sy = std::clamp((y + 0.5) / 2.0 - 0.5, 0.0, src.h - 1.0);
        const int y0 = std::min(static_cast<int>(sy), src.h - 1);
        const int y1 = std::min(y0 + 1, src.h - 1);
        const auto fy = static_cast<float>(sy - y0);
        for (int x = 0; x < out.w; ++x) {
            const double sx = std::clamp((x + 0.5) / 2.0 - 0.5, 0.0, src.w - 1.0);
            const int x0 = std::min(static_cast<int>(sx), src.w - 1);
            const int x1 = std::min(x0 + 1, src.w - 1);
            const auto fx = static_cast<float>(sx - x0);
            const float top = src.at(x0, y0) * (1 - fx) + src.at(x1, y0) * fx;
            const float bot = src.at(x0, y1) * (1 - fx) + src.at(x1, y1) * fx;
            out.at(x, y) = top * (1 - fy) + bot * fy;
        }
    }
    return out;
}

// Halve resolution by averaging 2x2 blocks; new pixel i is centered at
// 2i+0.5 in the finer grid.
inline Plane downsample2(const Plane& src) {
    Plane out(src.w / 2, src.h / 2);
    for (int y = 0; y < out.h; ++y)
        for (int x = 0; x < out.w; ++x)
            out.at(x, y) = 0.25f * (src.at(2 * x, 2 * y) + src.at(2 * x + 1, 2 * y) + src.at(2 * x, 2 * y + 1) +
                                    src.at(2 * x + 1, 2 * y + 1));
    return out;
}

struct Candidate {
    Keypoint kp;      // input-image coordinates; orientation filled later
    int octave = 0;
    int layer = 0;
    double octave_sigma = 0;  // sigma in octave pixel units
    double octave_x = 0;
    double octave_y = 0;
    float response = 0;
};

class Detector {
public:
    Detector(const GrayMatrix& m, const SiftOptions& opt) : opt_(opt) {
        Plane base(static_cast<int>(m.width()), static_cast<int>(m.height()));
        for (std::size_t i = 0; i < base.v.size(); ++i) base.v[i] = static_cast<float>(m.data()[i] / 255.0);
        double blur0 = opt.assumed_blur;
        if (opt.upsample) {
            base = upsample2(base);
            blur0 *= 2.0;
            base_factor_ = 0.5;
        }
        base = blur(base, std::sqrt(std::max(0.01, opt.sigma * opt.sigma - blur0 * blur0)));
        const int min_side = std::min(base.w, base.h);
        octaves_ = std::max(1, static_cast<int>(std::floor(std::log2(static_cast<double>(min_side)))) - 2);
        build_pyramid(std::move(base));
    }

    DescriptorSet run() {
        std::vector<Candidate> found;
        for (int o = 0; o < octaves_; ++o)
            for (int s = 1; s <= opt_.scales_per_octave; ++s) find_extrema(o, s, found);
        // Neighbouring extrema can refine to the same point.
        std::vector<Candidate> unique;
        std::set<std::tuple<int, float, float, float>> seen;
        for (const auto& c : found)
            if (seen.emplace(c.octave, c.kp.x, c.kp.y, c.kp.scale).second) unique.push_back(c);
        found = std::move(unique);
        if (opt_.max_keypoints > 0 && found.size() > opt_.max_keypoints) {
            std::stable_sort(found.begin(), found.end(),
                             [](const Candidate& a, const Candidate& b) { return std::abs(a.response) > std::abs(b.response); });
            found.resize(opt_.max_keypoints);
        }
        DescriptorSet out;
        std::array<float, DescriptorSet::dim> desc{};
        for (const auto& cand : found) {
            for (float angle : orientations(cand)) {
                Keypoint kp = cand.kp;
                kp.orientation = angle;
                describe(cand, angle, desc);
                out.keypoints.push_back(kp);
                out.descriptors.insert(out.descriptors.end(), desc.begin(), desc.end());
            }
        }
        return out;
    }

private:
    void build_pyramid(Plane base) {
        const int s = opt_.scales_per_octave;
        const double k = std::pow(2.0, 1.0 / s);
        std::vector<double> increments(s + 3);
        increments[0] = opt_.sigma;
        for (int i = 1; i < s + 3; ++i) {
            const double prev = std::pow(k, i - 1) * opt_.sigma;
            const double total = prev * k;
            increments[i] = std::sqrt(total * total - prev * prev);
        }
        gauss_.resize(octaves_);
        dog_.resize(octaves_);
        for (int o = 0; o < octaves_; ++o) {
            auto& g = gauss_[o];
            g.reserve(s + 3);
            if (o == 0) g.push_back(std::move(base));
            else g.push_back(downsample2(gauss_[o - 1][s]));
            for (int i = 1; i < s + 3; ++i) g.push_back(blur(g[i - 1], increments[i]));
            auto& d = dog_[o];
            for (int i = 0; i + 1 < s + 3; ++i) {
                Plane diff(g[i].w, g[i].h);
                for (std::size_t p = 0; p < diff.v.size(); ++p) diff.v[p] = g[i + 1].v[p] - g[i].v[p];
                d.push_back(std::move(diff));
            }
        }
    }

    void find_extrema(int o, int s, std::vector<Candidate>& out) const {
        const auto& prev = dog_[o][s - 1];
        const auto& cur = dog_[o][s];
        const auto& next = dog_[o][s + 1];
        const auto threshold = static_cast<float>(0.5 * opt_.contrast_threshold / opt_.scales_per_octave);
        for (int y = image_border; y < cur.h - image_border; ++y) {
            for (int x = image_border; x < cur.w - image_border; ++x) {
                const float v = cur.at(x, y);
                if (std::abs(v) <= threshold) continue;
                bool is_max = v > 0, is_min = v < 0;
                for (int dz = -1; dz <= 1 && (is_max || is_min); ++dz) {
                    const Plane& p = dz < 0 ? prev : (dz > 0 ? next : cur);
                    for (int dy = -1; dy <= 1; ++dy)
                        for (int dx = -1; dx <= 1; ++dx) {
                            if (dz == 0 && dy == 0 && dx == 0) continue;
                            const float n = p.at(x + dx, y + dy);
                            if (n > v) is_max = false;
                            if (n < v) is_min = false;
                        }
                }
                if (!is_max && !is_min) continue;
                Candidate c;
                if (localize(o, s, x, y, c)) out.push_back(c);
            }
        }
    }

    bool localize(int o, int s, int x, int y, Candidate& c) const {
        const int layers = opt_.scales_per_octave;
        double xi = 0, xr = 0, xc = 0;
        double dDx = 0, dDy = 0, dDs = 0;
        int it = 0;
        for (; it < max_interp_steps; ++it) {
            const auto& img = dog_[o][s];
            const auto& prv = dog_[o][s - 1];
            const auto& nxt = dog_[o][s + 1];
            const double v2 = 2.0 * img.at(x, y);
            dDx = 0.5 * (img.at(x + 1, y) - img.at(x - 1, y));
            dDy = 0.5 * (img.at(x, y + 1) - img.at(x, y - 1));
            dDs = 0.5 * (nxt.at(x, y) - prv.at(x, y));
            const double dxx = img.at(x + 1, y) + img.at(x - 1, y) - v2;
            const double dyy = img.at(x, y + 1) + img.at(x, y - 1) - v2;
            const double dss = nxt.at(x, y) + prv.at(x, y) - v2;
            const double dxy = 0.25 * (img.at(x + 1, y + 1) - img.at(x - 1, y + 1) - img.at(x + 1, y - 1) +
                                       img.at(x - 1, y - 1));
            const double dxs = 0.25 * (nxt.at(x + 1, y) - nxt.at(x - 1, y) - prv.at(x + 1, y) + prv.at(x - 1, y));
            const double dys = 0.25 * (nxt.at(x, y + 1) - nxt.at(x, y - 1) - prv.at(x, y + 1) + prv.at(x, y - 1));
            // Solve H * X = -g by Cramer's rule on the symmetric 3x3 Hessian.
            const double a = dxx, b = dxy, cc = dxs, d = dyy, e = dys, f = dss;
            const double det = a * (d * f - e * e) - b * (b * f - e * cc) + cc * (b * e - d * cc);
            if (std::abs(det) < 1e-18) return false;
            const double gx = -dDx, gy = -dDy, gs = -dDs;
            xc = (gx * (d * f - e * e) - b * (gy * f - e * gs) + cc * (gy * e - d * gs)) / det;
            xr = (a * (gy * f - e * gs) - gx * (b * f - e * cc) + cc * (b * gs - gy * cc)) / det;
            xi = (a * (d * gs - gy * e) - b * (b * gs - gy * cc) + gx * (b * e - d * cc)) / det;
            if (std::abs(xi) < 0.5 && std::abs(xr) < 0.5 && std::abs(xc) < 0.5) break;
            if (std::abs(xi) > 1e6 || std::abs(xr) > 1e6 || std::abs(xc) > 1e6) return false;
            x += static_cast<int>(std::lround(xc));
            y += static_cast<int>(std::lround(xr));
            s += static_cast<int>(std::lround(xi));
            const auto& cur = dog_[o][std::clamp(s, 0, layers + 1)];
            if (s < 1 || s > layers || x < image_border || x >= cur.w - image_border || y < image_border ||
                y >= cur.h - image_border)
                return false;
        }
        if (it >= max_interp_steps) return false;

        const auto& img = dog_[o][s];
        const double contrast = img.at(x, y) + 0.5 * (dDx * xc + dDy * xr + dDs * xi);
        if (std::abs(contrast) * layers < opt_.contrast_threshold) return false;

        const double v2 = 2.0 * img.at(x, y);
        const double dxx = img.at(x + 1, y) + img.at(x - 1, y) - v2;
        const double dyy = img.at(x, y + 1) + img.at(x, y - 1) - v2;
        const double dxy =
            0.25 * (img.at(x + 1, y + 1) - img.at(x - 1, y + 1) - img.at(x + 1, y - 1) + img.at(x - 1, y - 1));
        const double tr = dxx + dyy;
        const double det = dxx * dyy - dxy * dxy;
        const double r = opt_.edge_threshold;
        if (det <= 0 || tr * tr * r >= (r + 1) * (r + 1) * det) return false;

        const double pow_o = std::ldexp(1.0, o);
        c.octave = o;
        c.layer = s;
        c.octave_x = x + xc;
        c.octave_y = y + xr;
        c.octave_sigma = opt_.sigma * std::pow(2.0, (s + xi) / layers);
        // Octave pixel i is centered at 2^o i + (2^o - 1)/2 in the base grid.
        const double bx = pow_o * c.octave_x + 0.5 * (pow_o - 1.0);
        const double by = pow_o * c.octave_y + 0.5 * (pow_o - 1.0);
        const double f = base_factor_;
        c.kp.x = static_cast<float>(f < 1.0 ? (bx + 0.5) * f - 0.5 : bx);
        c.kp.y = static_cast<float>(f < 1.0 ? (by + 0.5) * f - 0.5 : by);
        c.kp.scale = static_cast<float>(c.octave_sigma * pow_o * f);
        c.response = static_cast<float>(contrast);
        return true;
    }

    static void gradient(const Plane& img, int x, int y, float& gx, float& gy) {
        gx = img.at(x + 1, y) - img.at(x - 1, y);
        gy = img.at(x, y + 1) - img.at(x, y - 1);
    }

    std::vector<float> orientations(const Candidate& c) const {
        const auto& img = gauss_[c.octave][c.layer];
        const double sigma_w = orientation_sigma_factor * c.octave_sigma;
        const int radius = static_cast<int>(std::lround(orientation_radius_factor * sigma_w));
        const double weight_scale = -1.0 / (2.0 * sigma_w * sigma_w);
        const int px = static_cast<int>(std::lround(c.octave_x));
        const int py = static_cast<int>(std::lround(c.octave_y));
        std::array<double, orientation_bins> hist{};
        for (int dy = -radius; dy <= radius; ++dy) {
            const int y = py + dy;
            if (y <= 0 || y >= img.h - 1) continue;
            for (int dx = -radius; dx <= radius; ++dx) {
                const int x = px + dx;
                if (x <= 0 || x >= img.w - 1) continue;
                float gx, gy;
                gradient(img, x, y, gx, gy);
                const double mag = std::sqrt(double(gx) * gx + double(gy) * gy);
                double angle = std::atan2(double(gy), double(gx));
                if (angle < 0) angle += 2 * std::numbers::pi;
                int bin = static_cast<int>(std::lround(angle * orientation_bins / (2 * std::numbers::pi)));
                if (bin >= orientation_bins) bin -= orientation_bins;
                hist[bin] += std::exp((dx * dx + dy * dy) * weight_scale) * mag;
            }
        }
        std::array<double, orientation_bins> smooth{};
        for (int i = 0; i < orientation_bins; ++i) {
            auto at = [&](int j) { return hist[(j + orientation_bins) % orientation_bins]; };
            smooth[i] = (at(i - 2) + at(i + 2)) * (1.0 / 16) + (at(i - 1) + at(i + 1)) * (4.0 / 16) + at(i) * (6.0 / 16);
        }
        const double peak = *std::max_element(smooth.begin(), smooth.end());
        std::vector<float> out;
        if (peak <= 0) return out;
        for (int i = 0; i < orientation_bins; ++i) {
            const double l = smooth[(i + orientation_bins - 1) % orientation_bins];
            const double r = smooth[(i + 1) % orientation_bins];
            const double v = smooth[i];
            if (v > l && v > r && v >= orientation_peak_ratio * peak) {
                double bin = i + 0.5 * (l - r) / (l - 2 * v + r);
                if (bin < 0) bin += orientation_bins;
                if (bin >= orientation_bins) bin -= orientation_bins;
                auto angle = static_cast<float>(bin * 2 * std::numbers::pi / orientation_bins);
                if (angle >= static_cast<float>(2 * std::numbers::pi)) angle = 0.f;
                out.push_back(angle);
            }
        }
        return out;
    }

    void describe(const Candidate& c, float angle, std::array<float, DescriptorSet::dim>& out) const {
        constexpr int d = descr_width;
        constexpr int n = descr_bins;
        const auto& img = gauss_[c.octave][c.layer];
        const double hist_width = descr_scale_factor * c.octave_sigma;
        const int radius = std::min(static_cast<int>(std::lround(hist_width * std::sqrt(2.0) * (d + 1) * 0.5)),
                                    static_cast<int>(std::hypot(img.w, img.h)));
        const double cos_t = std::cos(angle) / hist_width;
        const double sin_t = std::sin(angle) / hist_width;
        const double bins_per_rad = n / (2 * std::numbers::pi);
        const double exp_scale = -1.0 / (d * d * 0.5);
        const int px = static_cast<int>(std::lround(c.octave_x));
        const int py = static_cast<int>(std::lround(c.octave_y));

        std::array<double, (d + 2) * (d + 2) * (n + 2)> hist{};
        auto cell = [&](int r, int cidx, int o) -> double& { return hist[((r + 1) * (d + 2) + (cidx + 1)) * (n + 2) + o]; };

        for (int i = -radius; i <= radius; ++i) {
            for (int j = -radius; j <= radius; ++j) {
                // Offset (j, i) expressed in the keypoint frame, in bin units.
                const double c_rot = j * cos_t + i * sin_t;
                const double r_rot = -j * sin_t + i * cos_t;
                const double rbin = r_rot + d / 2.0 - 0.5;
                const double cbin = c_rot + d / 2.0 - 0.5;
                const int x = px + j;
                const int y = py + i;
                if (!(rbin > -1 && rbin < d && cbin > -1 && cbin < d)) continue;
                if (x <= 0 || x >= img.w - 1 || y <= 0 || y >= img.h - 1) continue;
                float gx, gy;
                gradient(img, x, y, gx, gy);
                double ori = std::atan2(double(gy), double(gx)) - angle;
                while (ori < 0) ori += 2 * std::numbers::pi;
                while (ori >= 2 * std::numbers::pi) ori -= 2 * std::numbers::pi;
                const double mag = std::sqrt(double(gx) * gx + double(gy) * gy) *
                                   std::exp((c_rot * c_rot + r_rot * r_rot) * exp_scale);
                const double obin = ori * bins_per_rad;

                const int r0 = static_cast<int>(std::floor(rbin));
                const int c0 = static_cast<int>(std::floor(cbin));
                int o0 = static_cast<int>(std::floor(obin));
                const double fr = rbin - r0, fc = cbin - c0, fo = obin - o0;
                if (o0 >= n) o0 -= n;
                for (int dr = 0; dr <= 1; ++dr) {
                    const double wr = dr ? fr : 1 - fr;
                    for (int dc = 0; dc <= 1; ++dc) {
                        const double wc = dc ? fc : 1 - fc;
                        for (int dob = 0; dob <= 1; ++dob) {
                            const double wo = dob ? fo : 1 - fo;
                            cell(r0 + dr, c0 + dc, (o0 + dob) % n) += mag * wr * wc * wo;
                        }
                    }
                }
            }
        }

        std::size_t k = 0;
        for (int r = 0; r < d; ++r)
            for (int cc = 0; cc < d; ++cc)
                for (int o = 0; o < n; ++o) out[k++] = static_cast<float>(cell(r, cc, o));
        normalize_and_clamp(out);
    }

    static void normalize_and_clamp(std::array<float, DescriptorSet::dim>& v) {
        auto norm = [&] {
            double s = 0;
            for (float x : v) s += double(x) * x;
            return std::sqrt(s);
        };
        double len = norm();
        if (len <= 0) return;
        for (auto& x : v) x = std::min(static_cast<float>(x / len), descr_clamp);
        len = norm();
        if (len <= 0) return;
        for (auto& x : v) x = static_cast<float>(x / len);
    }

    SiftOptions opt_;
    double base_factor_ = 1.0;
    int octaves_ = 1;
    std::vector<std::vector<Plane>> gauss_;
    std::vector<std::vector<Plane>> dog_;
};

}  // namespace sift_detail

/// Difference-of-Gaussian keypoints with 4x4x8 gradient-orientation
/// descriptors (L2-normalized, clamped at 0.2, renormalized).
/// A keypoint with several dominant orientations yields one row per orientation.
inline DescriptorSet detect_and_describe(const GrayMatrix& m, const SiftOptions& options = {}) {
    if (m.width() < 16 || m.height() < 16) throw ImageTooSmall("SIFT needs at least 16x16 pixels");
    if (options.scales_per_octave < 1 || options.sigma <= 0) throw InvalidArgument("bad SIFT options");
    sift_detail::Detector det(m, options);
    return det.run();
}

}  // namespace chplane
