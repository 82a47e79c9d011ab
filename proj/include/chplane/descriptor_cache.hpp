#pragma once

#include <cmath>
#include <filesystem>

#include "chplane/binary_io.hpp"
#include "chplane/image_io.hpp"
#include "chplane/sift.hpp"

namespace chplane {

// SFT1 layout: magic, u32 k, then per keypoint x, y, scale, orientation and
// 128 descriptor values, all little-endian f32.
inline std::vector<std::uint8_t> serialize_descriptors(const DescriptorSet& set) {
    bin::Writer w;
    w.magic("SFT1");
    w.u32(static_cast<std::uint32_t>(set.size()));
    for (std::size_t i = 0; i < set.size(); ++i) {
        const auto& k = set.keypoints[i];
        w.f32(k.x);
        w.f32(k.y);
        w.f32(k.scale);
        w.f32(k.orientation);
        for (float v : set.row(i)) w.f32(v);
    }
    return w.take();
}

inline DescriptorSet deserialize_descriptors(std::span<const std::uint8_t> bytes) {
    bin::Reader r(bytes);
    r.expect_magic("SFT1");
    const std::uint32_t k = r.u32();
    constexpr std::size_t row_bytes = 4 * (4 + DescriptorSet::dim);
    if (r.remaining() != std::size_t{k} * row_bytes) throw FormatError("SFT1 size does not match keypoint count");
    DescriptorSet set;
    set.keypoints.reserve(k);
    set.descriptors.reserve(std::size_t{k} * DescriptorSet::dim);
    for (std::uint32_t i = 0; i < k; ++i) {
        Keypoint kp;
        kp.x = r.f32();
        kp.y = r.f32();
        kp.scale = r.f32();
        kp.orientation = r.f32();
        if (!(kp.scale > 0) || !std::isfinite(kp.x) || !std::isfinite(kp.y))
            throw FormatError("SFT1 keypoint " + std::to_string(i) + " is invalid");
        set.keypoints.push_back(kp);
        for (std::size_t d = 0; d < DescriptorSet::dim; ++d) set.descriptors.push_back(r.f32());
    }
    return set;
}

inline void save_descriptors(const std::filesystem::path& path, const DescriptorSet& set) {
    write_file(path, serialize_descriptors(set));
}

inline DescriptorSet load_descriptors(const std::filesystem::path& path) {
    return deserialize_descriptors(read_file(path));
}

}  // namespace chplane
