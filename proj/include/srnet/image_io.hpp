#pragma once

#include <cctype>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <png.h>

#include "srnet/errors.hpp"
#include "srnet/image.hpp"

namespace srnet {

// Color inputs are reduced to one channel at load with fixed luminance
// weights; all downstream math is single-channel.
constexpr double kLumaR = 0.299;
constexpr double kLumaG = 0.587;
constexpr double kLumaB = 0.114;

inline double byte_to_intensity(unsigned char b) { return double(b) / 255.0; }

inline unsigned char intensity_to_byte(double v) {
    const double q = std::lround(std::clamp(v, 0.0, 1.0) * 255.0);
    return static_cast<unsigned char>(q);
}

/// write-temp-then-rename so readers never observe partial files
inline void write_file_atomic(const std::string& path, const std::string& bytes) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open for writing: " + tmp);
        out.write(bytes.data(), std::streamsize(bytes.size()));
        if (!out) throw IoError("write failed: " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("rename failed: " + path + " (" + ec.message() + ")");
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// ---------------------------------------------------------------------------
// netpbm (binary P5 grayscale / P6 color, maxval 255)
// ---------------------------------------------------------------------------

namespace detail {

inline std::size_t pnm_next_token(const std::string& bytes, std::size_t pos, std::string& tok) {
    // whitespace-separated tokens; '#' starts a comment running to end of line
    while (pos < bytes.size()) {
        if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
            ++pos;
        } else if (bytes[pos] == '#') {
            while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        } else {
            break;
        }
    }
    tok.clear();
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos])))
        tok += bytes[pos++];
    return pos;
}

inline int pnm_parse_int(const std::string& tok, const std::string& path) {
    int v = 0;
    const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || p != tok.data() + tok.size() || v <= 0)
        throw CorruptHeader(path + ": bad netpbm header field '" + tok + "'");
    return v;
}

} // namespace detail

inline Image load_pnm(const std::string& path) {
    const std::string bytes = read_file(path);
    std::string tok;
    std::size_t pos = detail::pnm_next_token(bytes, 0, tok);
    if (tok != "P5" && tok != "P6")
        throw UnsupportedFormat(path + ": not a binary netpbm image (P5/P6)");
    const bool color = (tok == "P6");
    pos = detail::pnm_next_token(bytes, pos, tok);
    const int w = detail::pnm_parse_int(tok, path);
    pos = detail::pnm_next_token(bytes, pos, tok);
    const int h = detail::pnm_parse_int(tok, path);
    pos = detail::pnm_next_token(bytes, pos, tok);
    const int maxval = detail::pnm_parse_int(tok, path);
    if (maxval != 255)
        throw UnsupportedFormat(path + ": only maxval 255 supported");
    if (pos >= bytes.size())
        throw CorruptHeader(path + ": missing payload");
    ++pos; // single whitespace after maxval
    const std::size_t need = std::size_t(w) * h * (color ? 3 : 1);
    if (bytes.size() - pos != need)
        throw CorruptHeader(path + ": declared size does not match payload");
    Image img = make_image(w, h);
    const unsigned char* p = reinterpret_cast<const unsigned char*>(bytes.data() + pos);
    if (color) {
        for (std::size_t i = 0; i < img.data.size(); ++i) {
            const double r = byte_to_intensity(p[3 * i]);
            const double g = byte_to_intensity(p[3 * i + 1]);
            const double b = byte_to_intensity(p[3 * i + 2]);
            img.data[i] = std::clamp(kLumaR * r + kLumaG * g + kLumaB * b, 0.0, 1.0);
        }
    } else {
        for (std::size_t i = 0; i < img.data.size(); ++i)
            img.data[i] = byte_to_intensity(p[i]);
    }
    return img;
}

inline void save_pnm(const Image& img, const std::string& path) {
    check_image(img, path);
    std::string bytes = "P5\n" + std::to_string(img.width) + " " +
                        std::to_string(img.height) + "\n255\n";
    bytes.reserve(bytes.size() + img.data.size());
    for (double v : img.data)
        bytes += char(intensity_to_byte(v));
    write_file_atomic(path, bytes);
}

// ---------------------------------------------------------------------------
// PNG, 8-bit grayscale or RGB (libpng)
// ---------------------------------------------------------------------------

namespace detail {

struct PngReader {
    std::FILE* fp = nullptr;
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngReader() {
        if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
        if (fp) std::fclose(fp);
    }
};

struct PngWriter {
    std::FILE* fp = nullptr;
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngWriter() {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
        if (fp) std::fclose(fp);
    }
};

} // namespace detail

inline Image load_png(const std::string& path) {
    detail::PngReader r;
    r.fp = std::fopen(path.c_str(), "rb");
    if (!r.fp) throw IoError("cannot open: " + path);
    unsigned char sig[8];
    if (std::fread(sig, 1, 8, r.fp) != 8 || png_sig_cmp(sig, 0, 8))
        throw UnsupportedFormat(path + ": not a PNG file");
    r.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!r.png) throw IoError("libpng init failed");
    r.info = png_create_info_struct(r.png);
    if (!r.info) throw IoError("libpng init failed");

    std::vector<unsigned char> pixels;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(r.png)))
        throw CorruptHeader(path + ": invalid PNG stream");

    png_init_io(r.png, r.fp);
    png_set_sig_bytes(r.png, 8);
    png_read_info(r.png, r.info);

    const int w = int(png_get_image_width(r.png, r.info));
    const int h = int(png_get_image_height(r.png, r.info));
    const int depth = png_get_bit_depth(r.png, r.info);
    const int color = png_get_color_type(r.png, r.info);
    if (depth != 8 || (color != PNG_COLOR_TYPE_GRAY && color != PNG_COLOR_TYPE_RGB))
        throw UnsupportedFormat(path + ": only 8-bit grayscale or RGB PNG supported");
    const int channels = (color == PNG_COLOR_TYPE_RGB) ? 3 : 1;

    pixels.assign(std::size_t(w) * h * channels, 0);
    rows.resize(h);
    for (int y = 0; y < h; ++y)
        rows[std::size_t(y)] = pixels.data() + std::size_t(y) * w * channels;
    png_set_interlace_handling(r.png);
    png_read_image(r.png, rows.data());
    png_read_end(r.png, nullptr);

    Image img = make_image(w, h);
    if (channels == 3) {
        for (std::size_t i = 0; i < img.data.size(); ++i) {
            const double rr = byte_to_intensity(pixels[3 * i]);
            const double gg = byte_to_intensity(pixels[3 * i + 1]);
            const double bb = byte_to_intensity(pixels[3 * i + 2]);
            img.data[i] = std::clamp(kLumaR * rr + kLumaG * gg + kLumaB * bb, 0.0, 1.0);
        }
    } else {
        for (std::size_t i = 0; i < img.data.size(); ++i)
            img.data[i] = byte_to_intensity(pixels[i]);
    }
    return img;
}

inline void save_png(const Image& img, const std::string& path) {
    check_image(img, path);
    const std::string tmp = path + ".tmp";
    {
        detail::PngWriter w;
        w.fp = std::fopen(tmp.c_str(), "wb");
        if (!w.fp) throw IoError("cannot open for writing: " + tmp);
        w.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
        if (!w.png) throw IoError("libpng init failed");
        w.info = png_create_info_struct(w.png);
        if (!w.info) throw IoError("libpng init failed");

        std::vector<unsigned char> bytes(img.data.size());
        for (std::size_t i = 0; i < img.data.size(); ++i)
            bytes[i] = intensity_to_byte(img.data[i]);
        std::vector<png_bytep> rows(img.height);
        for (int y = 0; y < img.height; ++y)
            rows[std::size_t(y)] = bytes.data() + std::size_t(y) * img.width;

        if (setjmp(png_jmpbuf(w.png)))
            throw IoError("PNG write failed: " + tmp);
        png_init_io(w.png, w.fp);
        png_set_IHDR(w.png, w.info, img.width, img.height, 8, PNG_COLOR_TYPE_GRAY,
                     PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
        png_write_info(w.png, w.info);
        png_write_image(w.png, rows.data());
        png_write_end(w.png, nullptr);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("rename failed: " + path + " (" + ec.message() + ")");
}

// ---------------------------------------------------------------------------
// format dispatch
// ---------------------------------------------------------------------------

inline Image load_image(const std::string& path) {
    std::ifstream probe(path, std::ios::binary);
    if (!probe) throw IoError("cannot open: " + path);
    char magic[2] = {0, 0};
    probe.read(magic, 2);
    probe.close();
    if (magic[0] == 'P' && (magic[1] == '5' || magic[1] == '6')) return load_pnm(path);
    if (magic[0] == char(0x89) && magic[1] == 'P') return load_png(path);
    throw UnsupportedFormat(path + ": not a P5/P6 netpbm or PNG image");
}

inline void save_image(const Image& img, const std::string& path) {
    const auto ext = std::filesystem::path(path).extension().string();
    if (ext == ".png") {
        save_png(img, path);
    } else {
        save_pnm(img, path);
    }
}

// ---------------------------------------------------------------------------
// landmark CSV: header line, then rows "index,x,y" with contiguous indices
// ---------------------------------------------------------------------------

inline LandmarkSet load_landmarks(const std::string& path, Frame frame = Frame::reference) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    std::string line;
    if (!std::getline(in, line))
        throw MalformedRow(path + ": missing header line");
    LandmarkSet set;
    set.frame = frame;
    int expected = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::string fields[3];
        int nf = 0;
        std::size_t start = 0;
        for (std::size_t i = 0; i <= line.size(); ++i) {
            if (i == line.size() || line[i] == ',') {
                if (nf >= 3) throw MalformedRow(path + ": too many fields: " + line);
                fields[nf++] = line.substr(start, i - start);
                start = i + 1;
            }
        }
        if (nf != 3) throw MalformedRow(path + ": expected index,x,y: " + line);
        const auto trim = [](std::string& s) {
            while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.erase(s.begin());
            while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
        };
        for (auto& f : fields) trim(f);
        int idx = 0;
        const auto [p, ec] = std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), idx);
        if (ec != std::errc() || p != fields[0].data() + fields[0].size())
            throw MalformedRow(path + ": bad index: " + line);
        if (idx != expected)
            throw NonContiguousIndices(path + ": expected index " + std::to_string(expected) +
                                       ", got " + std::to_string(idx));
        ++expected;
        char* end = nullptr;
        const double x = std::strtod(fields[1].c_str(), &end);
        if (end != fields[1].c_str() + fields[1].size() || fields[1].empty())
            throw MalformedRow(path + ": bad x: " + line);
        const double y = std::strtod(fields[2].c_str(), &end);
        if (end != fields[2].c_str() + fields[2].size() || fields[2].empty())
            throw MalformedRow(path + ": bad y: " + line);
        if (!std::isfinite(x) || !std::isfinite(y))
            throw MalformedRow(path + ": non-finite coordinate: " + line);
        set.points.push_back({x, y});
    }
    return set;
}

inline void save_landmarks(const LandmarkSet& set, const std::string& path) {
    std::string out = "index,x,y\n";
    char buf[80];
    for (std::size_t i = 0; i < set.points.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g\n", i, set.points[i].x, set.points[i].y);
        out += buf;
    }
    write_file_atomic(path, out);
}

} // namespace srnet
