#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "srnet/errors.hpp"
#include "srnet/image.hpp"
#include "srnet/image_io.hpp"

namespace srnet {

/// Per-pixel displacement u(p) in pixel units; the warp samples at p + u(p).
struct DisplacementField {
    int width = 0;
    int height = 0;
    std::vector<double> u; // interleaved ux, uy, row-major

    std::size_t pixels() const { return std::size_t(width) * height; }
    double ux(int x, int y) const { return u[2 * (std::size_t(y) * width + x)]; }
    double uy(int x, int y) const { return u[2 * (std::size_t(y) * width + x) + 1]; }
    double& ux(int x, int y) { return u[2 * (std::size_t(y) * width + x)]; }
    double& uy(int x, int y) { return u[2 * (std::size_t(y) * width + x) + 1]; }
};

inline DisplacementField make_field(int width, int height) {
    if (width <= 0 || height <= 0)
        throw FieldTooSmall("field dimensions must be positive");
    DisplacementField f;
    f.width = width;
    f.height = height;
    f.u.assign(std::size_t(width) * height * 2, 0.0);
    return f;
}

// ---------------------------------------------------------------------------
// serialization: magic "SRFD", u32 LE width, u32 LE height, f32 LE ux,uy pairs
// ---------------------------------------------------------------------------

namespace detail {

inline void put_u32le(std::string& out, std::uint32_t v) {
    out += char(v & 0xff);
    out += char((v >> 8) & 0xff);
    out += char((v >> 16) & 0xff);
    out += char((v >> 24) & 0xff);
}

inline void put_f32le(std::string& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32le(out, bits);
}

inline std::uint32_t get_u32le(const unsigned char* p) {
    return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) |
           (std::uint32_t(p[2]) << 16) | (std::uint32_t(p[3]) << 24);
}

inline float get_f32le(const unsigned char* p) {
    const std::uint32_t bits = get_u32le(p);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

} // namespace detail

inline std::string field_to_bytes(const DisplacementField& f) {
    std::string out = "SRFD";
    detail::put_u32le(out, std::uint32_t(f.width));
    detail::put_u32le(out, std::uint32_t(f.height));
    for (double v : f.u)
        detail::put_f32le(out, float(v));
    return out;
}

inline void save_field(const DisplacementField& f, const std::string& path) {
    write_file_atomic(path, field_to_bytes(f));
}

inline DisplacementField load_field(const std::string& path) {
    const std::string bytes = read_file(path);
    if (bytes.size() < 12 || bytes.compare(0, 4, "SRFD") != 0)
        throw UnsupportedFormat(path + ": not an SRFD field file");
    const unsigned char* p = reinterpret_cast<const unsigned char*>(bytes.data());
    const int w = int(detail::get_u32le(p + 4));
    const int h = int(detail::get_u32le(p + 8));
    if (w <= 0 || h <= 0)
        throw CorruptHeader(path + ": bad field dimensions");
    const std::size_t need = 12 + std::size_t(w) * h * 2 * 4;
    if (bytes.size() != need)
        throw CorruptHeader(path + ": declared size does not match payload");
    DisplacementField f = make_field(w, h);
    for (std::size_t i = 0; i < f.u.size(); ++i) {
        f.u[i] = detail::get_f32le(p + 12 + 4 * i);
        if (!std::isfinite(f.u[i]))
            throw CorruptHeader(path + ": non-finite displacement component");
    }
    return f;
}

inline std::string field_to_csv(const DisplacementField& f) {
    std::string out = "x,y,ux,uy\n";
    char buf[120];
    for (int y = 0; y < f.height; ++y)
        for (int x = 0; x < f.width; ++x) {
            std::snprintf(buf, sizeof(buf), "%d,%d,%.17g,%.17g\n", x, y, f.ux(x, y), f.uy(x, y));
            out += buf;
        }
    return out;
}

/// Resize to new dimensions, scaling displacement values by value_scale
/// (x2 when moving one pyramid level finer, so motion stays physical).
inline DisplacementField resize_field(const DisplacementField& f, int width, int height,
                                      double value_scale) {
    Image cx = make_image(f.width, f.height), cy = make_image(f.width, f.height);
    for (int y = 0; y < f.height; ++y)
        for (int x = 0; x < f.width; ++x) {
            cx.at(x, y) = f.ux(x, y);
            cy.at(x, y) = f.uy(x, y);
        }
    // resize_bilinear enforces [0,1] only on save paths; values here are free
    const Image rx = resize_bilinear(cx, width, height);
    const Image ry = resize_bilinear(cy, width, height);
    DisplacementField out = make_field(width, height);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            out.ux(x, y) = rx.at(x, y) * value_scale;
            out.uy(x, y) = ry.at(x, y) * value_scale;
        }
    return out;
}

inline double mean_magnitude(const DisplacementField& f) {
    double sum = 0.0;
    for (std::size_t i = 0; i < f.pixels(); ++i)
        sum += std::hypot(f.u[2 * i], f.u[2 * i + 1]);
    return f.pixels() ? sum / double(f.pixels()) : 0.0;
}

} // namespace srnet
