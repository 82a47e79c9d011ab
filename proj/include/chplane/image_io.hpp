#pragma once

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include <jpeglib.h>
#include <png.h>

#include "chplane/error.hpp"

namespace chplane {

/// Decoded RGB image, row-major, 8 bits per sample, 3 interleaved channels.
class ImageMatrix {
public:
    static constexpr int channels = 3;

    ImageMatrix() = default;
    ImageMatrix(std::size_t width, std::size_t height, std::vector<std::uint8_t> data)
        : width_(width), height_(height), data_(std::move(data)) {
        if (width_ < 1 || height_ < 1) throw InvalidArgument("image dimensions must be >= 1");
        if (data_.size() != width_ * height_ * channels)
            throw InvalidArgument("image data length does not match width*height*3");
    }

    [[nodiscard]] std::size_t width() const noexcept { return width_; }
    [[nodiscard]] std::size_t height() const noexcept { return height_; }
    [[nodiscard]] std::span<const std::uint8_t> data() const noexcept { return data_; }
    [[nodiscard]] const std::uint8_t* pixel(std::size_t x, std::size_t y) const noexcept {
        return data_.data() + (y * width_ + x) * channels;
    }

    friend bool operator==(const ImageMatrix&, const ImageMatrix&) = default;

private:
    std::size_t width_ = 0;
    std::size_t height_ = 0;
    std::vector<std::uint8_t> data_;
};

/// Real-valued luminance matrix, row-major. Values stay unquantized.
class GrayMatrix {
public:
    GrayMatrix() = default;
    GrayMatrix(std::size_t width, std::size_t height, std::vector<double> data)
        : width_(width), height_(height), data_(std::move(data)) {
        if (width_ < 1 || height_ < 1) throw InvalidArgument("matrix dimensions must be >= 1");
        if (data_.size() != width_ * height_)
            throw InvalidArgument("matrix data length does not match width*height");
        for (double v : data_)
            if (!std::isfinite(v)) throw InvalidArgument("matrix contains non-finite values");
    }
    GrayMatrix(std::size_t width, std::size_t height, double fill)
        : GrayMatrix(width, height, std::vector<double>(width * height, fill)) {}

    [[nodiscard]] std::size_t width() const noexcept { return width_; }
    [[nodiscard]] std::size_t height() const noexcept { return height_; }
    [[nodiscard]] std::span<const double> data() const noexcept { return data_; }
    [[nodiscard]] std::span<double> data() noexcept { return data_; }
    [[nodiscard]] double operator()(std::size_t x, std::size_t y) const noexcept {
        return data_[y * width_ + x];
    }
    [[nodiscard]] double& operator()(std::size_t x, std::size_t y) noexcept {
        return data_[y * width_ + x];
    }

    friend bool operator==(const GrayMatrix&, const GrayMatrix&) = default;

private:
    std::size_t width_ = 0;
    std::size_t height_ = 0;
    std::vector<double> data_;
};

enum class ImageFormat { png, jpeg, unknown };

inline ImageFormat sniff_format(std::span<const std::uint8_t> bytes) noexcept {
    static constexpr std::uint8_t png_sig[8] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
    if (bytes.size() >= 8 && std::memcmp(bytes.data(), png_sig, 8) == 0) return ImageFormat::png;
    if (bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 && bytes[2] == 0xFF)
        return ImageFormat::jpeg;
    return ImageFormat::unknown;
}

namespace detail {

// libpng and libjpeg report errors by longjmp. All C++ state touched after
// setjmp lives behind a reference, so no automatic object in the jumping
// frame is modified between setjmp and longjmp.

struct PngIo {
    std::span<const std::uint8_t> src;
    std::size_t pos = 0;
    std::vector<std::uint8_t> pixels;
    std::vector<png_bytep> rows;
    std::vector<std::uint8_t> out;
    std::size_t width = 0;
    std::size_t height = 0;
    char message[256] = {};
};

inline void png_error_fn(png_structp png, png_const_charp msg) {
    auto* io = static_cast<PngIo*>(png_get_error_ptr(png));
    std::snprintf(io->message, sizeof io->message, "%s", msg);
    png_longjmp(png, 1);
}

inline void png_warning_fn(png_structp, png_const_charp) {}

inline void png_read_fn(png_structp png, png_bytep out, png_size_t n) {
    auto* io = static_cast<PngIo*>(png_get_io_ptr(png));
    if (io->pos + n > io->src.size()) png_error(png, "unexpected end of PNG stream");
    std::memcpy(out, io->src.data() + io->pos, n);
    io->pos += n;
}

inline void png_write_fn(png_structp png, png_bytep data, png_size_t n) {
    auto* io = static_cast<PngIo*>(png_get_io_ptr(png));
    io->out.insert(io->out.end(), data, data + n);
}

inline void png_flush_fn(png_structp) {}

inline bool png_decode_rgb(PngIo& io) {
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &io, png_error_fn, png_warning_fn);
    if (png == nullptr) return false;
    png_infop info = png_create_info_struct(png);
    if (info == nullptr) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        return false;
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        return false;
    }
    png_set_read_fn(png, &io, png_read_fn);
    png_read_info(png, info);
    io.width = png_get_image_width(png, info);
    io.height = png_get_image_height(png, info);
    png_set_expand(png);
    png_set_scale_16(png);
    png_set_strip_alpha(png);
    png_set_gray_to_rgb(png);
    png_set_interlace_handling(png);
    png_read_update_info(png, info);
    const std::size_t rowbytes = png_get_rowbytes(png, info);
    if (rowbytes != io.width * 3) png_error(png, "unexpected row layout after expansion");
    io.pixels.resize(rowbytes * io.height);
    io.rows.resize(io.height);
    for (std::size_t y = 0; y < io.height; ++y) io.rows[y] = io.pixels.data() + y * rowbytes;
    png_read_image(png, io.rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return true;
}

inline bool png_encode(PngIo& io, int color_type, int samples) {
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &io, png_error_fn, png_warning_fn);
    if (png == nullptr) return false;
    png_infop info = png_create_info_struct(png);
    if (info == nullptr) {
        png_destroy_write_struct(&png, nullptr);
        return false;
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        return false;
    }
    png_set_write_fn(png, &io, png_write_fn, png_flush_fn);
    png_set_IHDR(png, info, static_cast<png_uint_32>(io.width), static_cast<png_uint_32>(io.height), 8,
                 color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    const std::size_t rowbytes = io.width * static_cast<std::size_t>(samples);
    for (std::size_t y = 0; y < io.height; ++y)
        png_write_row(png, io.pixels.data() + y * rowbytes);
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return true;
}

struct JpegIo {
    jpeg_error_mgr err{};
    std::jmp_buf jump{};
    char message[JMSG_LENGTH_MAX] = {};
    std::vector<std::uint8_t> pixels;
    std::size_t width = 0;
    std::size_t height = 0;
    unsigned char* out = nullptr;
    unsigned long out_size = 0;
};

inline void jpeg_error_exit(j_common_ptr cinfo) {
    auto* io = reinterpret_cast<JpegIo*>(cinfo->err);
    (*cinfo->err->format_message)(cinfo, io->message);
    std::longjmp(io->jump, 1);
}

// Warnings (truncated data, corrupt markers) are fatal: libjpeg would
// otherwise silently fill the missing scanlines.
inline void jpeg_emit_message(j_common_ptr cinfo, int level) {
    if (level < 0) jpeg_error_exit(cinfo);
}

inline bool jpeg_decode_rgb(JpegIo& io, std::span<const std::uint8_t> src) {
    jpeg_decompress_struct cinfo{};
    cinfo.err = jpeg_std_error(&io.err);
    io.err.error_exit = jpeg_error_exit;
    io.err.emit_message = jpeg_emit_message;
    if (setjmp(io.jump)) {
        jpeg_destroy_decompress(&cinfo);
        return false;
    }
    jpeg_create_decompress(&cinfo);
    jpeg_mem_src(&cinfo, src.data(), static_cast<unsigned long>(src.size()));
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);
    io.width = cinfo.output_width;
    io.height = cinfo.output_height;
    io.pixels.resize(io.width * io.height * 3);
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row = io.pixels.data() + static_cast<std::size_t>(cinfo.output_scanline) * io.width * 3;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return true;
}

inline bool jpeg_encode_rgb(JpegIo& io, std::span<const std::uint8_t> rgb, int quality) {
    jpeg_compress_struct cinfo{};
    cinfo.err = jpeg_std_error(&io.err);
    io.err.error_exit = jpeg_error_exit;
    if (setjmp(io.jump)) {
        jpeg_destroy_compress(&cinfo);
        return false;
    }
    jpeg_create_compress(&cinfo);
    jpeg_mem_dest(&cinfo, &io.out, &io.out_size);
    cinfo.image_width = static_cast<JDIMENSION>(io.width);
    cinfo.image_height = static_cast<JDIMENSION>(io.height);
    cinfo.input_components = 3;
    cinfo.in_color_space = JCS_RGB;
    jpeg_set_defaults(&cinfo);
    jpeg_set_quality(&cinfo, quality, TRUE);
    jpeg_start_compress(&cinfo, TRUE);
    while (cinfo.next_scanline < cinfo.image_height) {
        auto* row = const_cast<JSAMPLE*>(rgb.data() + static_cast<std::size_t>(cinfo.next_scanline) * io.width * 3);
        jpeg_write_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_compress(&cinfo);
    jpeg_destroy_compress(&cinfo);
    return true;
}

}  // namespace detail

/// Decode a PNG or JPEG stream to 8-bit RGB. Gray and paletted sources are
/// expanded to three channels; alpha is dropped without compositing.
inline ImageMatrix decode_image(std::span<const std::uint8_t> bytes) {
    switch (sniff_format(bytes)) {
    case ImageFormat::png: {
        detail::PngIo io;
        io.src = bytes;
        if (!detail::png_decode_rgb(io)) throw DecodeError(std::string("PNG: ") + io.message);
        if (io.width == 0 || io.height == 0) throw DecodeError("PNG: empty image");
        return ImageMatrix(io.width, io.height, std::move(io.pixels));
    }
    case ImageFormat::jpeg: {
        detail::JpegIo io;
        if (!detail::jpeg_decode_rgb(io, bytes)) throw DecodeError(std::string("JPEG: ") + io.message);
        if (io.width == 0 || io.height == 0) throw DecodeError("JPEG: empty image");
        return ImageMatrix(io.width, io.height, std::move(io.pixels));
    }
    case ImageFormat::unknown:
        break;
    }
    throw UnsupportedFormat("not a PNG or JPEG stream");
}

/// Encode 8-bit samples as PNG. `channels` is 1 (gray), 3 (RGB) or 4 (RGBA).
inline std::vector<std::uint8_t> encode_png(std::size_t width, std::size_t height, int channels,
                                            std::span<const std::uint8_t> samples) {
    int color_type = 0;
    switch (channels) {
    case 1: color_type = PNG_COLOR_TYPE_GRAY; break;
    case 3: color_type = PNG_COLOR_TYPE_RGB; break;
    case 4: color_type = PNG_COLOR_TYPE_RGB_ALPHA; break;
    default: throw InvalidArgument("PNG encoder supports 1, 3 or 4 channels");
    }
    if (width < 1 || height < 1 || samples.size() != width * height * static_cast<std::size_t>(channels))
        throw InvalidArgument("PNG encoder: sample count does not match dimensions");
    detail::PngIo io;
    io.width = width;
    io.height = height;
    io.pixels.assign(samples.begin(), samples.end());
    if (!detail::png_encode(io, color_type, channels)) throw Error(std::string("PNG encode: ") + io.message);
    return std::move(io.out);
}

inline std::vector<std::uint8_t> encode_png(const ImageMatrix& img) {
    return encode_png(img.width(), img.height(), ImageMatrix::channels, img.data());
}

inline std::vector<std::uint8_t> encode_jpeg(const ImageMatrix& img, int quality = 90) {
    detail::JpegIo io;
    io.width = img.width();
    io.height = img.height();
    const bool ok = detail::jpeg_encode_rgb(io, img.data(), quality);
    std::vector<std::uint8_t> out;
    if (io.out != nullptr) {
        if (ok) out.assign(io.out, io.out + io.out_size);
        std::free(io.out);
    }
    if (!ok) throw Error(std::string("JPEG encode: ") + io.message);
    return out;
}

/// BT.601 luma: 0.299 R + 0.587 G + 0.114 B, kept as real values.
inline GrayMatrix to_grayscale(const ImageMatrix& img) {
    std::vector<double> out(img.width() * img.height());
    const auto src = img.data();
    for (std::size_t i = 0; i < out.size(); ++i) {
        const std::uint8_t* p = src.data() + i * 3;
        out[i] = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
    }
    return GrayMatrix(img.width(), img.height(), std::move(out));
}

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("read failed: " + path.string());
    return bytes;
}

inline void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot create " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

inline ImageMatrix load_image(const std::filesystem::path& path) { return decode_image(read_file(path)); }

namespace detail {

// One-dimensional area resampling weights: output cell i covers
// [i*scale, (i+1)*scale) in source coordinates.
inline void area_resample_line(std::span<const double> src, std::span<double> dst) {
    const double scale = static_cast<double>(src.size()) / static_cast<double>(dst.size());
    for (std::size_t i = 0; i < dst.size(); ++i) {
        const double lo = i * scale;
        const double hi = lo + scale;
        double acc = 0.0;
        for (auto s = static_cast<std::size_t>(lo); s < src.size() && static_cast<double>(s) < hi; ++s) {
            const double overlap = std::min(hi, s + 1.0) - std::max(lo, static_cast<double>(s));
            if (overlap > 0.0) acc += overlap * src[s];
        }
        dst[i] = acc / scale;
    }
}

}  // namespace detail

/// Area-average downscale so that max(width, height) <= max_side. Returns
/// the input unchanged when it already fits.
inline GrayMatrix downscale_to_max_side(const GrayMatrix& m, std::size_t max_side) {
    if (max_side == 0) throw InvalidArgument("max_side must be positive");
    const std::size_t longest = std::max(m.width(), m.height());
    if (longest <= max_side) return m;
    const double f = static_cast<double>(max_side) / static_cast<double>(longest);
    const auto nw = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(m.width() * f)));
    const auto nh = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(m.height() * f)));

    std::vector<double> rows(nw * m.height());
    for (std::size_t y = 0; y < m.height(); ++y)
        detail::area_resample_line(m.data().subspan(y * m.width(), m.width()),
                                   std::span(rows).subspan(y * nw, nw));
    std::vector<double> out(nw * nh);
    std::vector<double> col_in(m.height()), col_out(nh);
    for (std::size_t x = 0; x < nw; ++x) {
        for (std::size_t y = 0; y < m.height(); ++y) col_in[y] = rows[y * nw + x];
        detail::area_resample_line(col_in, col_out);
        for (std::size_t y = 0; y < nh; ++y) out[y * nw + x] = col_out[y];
    }
    return GrayMatrix(nw, nh, std::move(out));
}

}  // namespace chplane
