#include "mrd/image.hpp"

#include <zlib.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "mrd/errors.hpp"

namespace mrd {

double reinhard(double x) { return x / (1.0 + x); }

double srgb_encode(double x) {
    if (x <= 0.0031308) return 12.92 * x;
    return 1.055 * std::pow(x, 1.0 / 2.4) - 0.055;
}

double tonemap_derivative(double x) {
    const double r = reinhard(x);
    const double dr = 1.0 / ((1.0 + x) * (1.0 + x));
    double ds;
    if (r <= 0.0031308) {
        ds = 12.92;
    } else {
        ds = (1.055 / 2.4) * std::pow(r, 1.0 / 2.4 - 1.0);
    }
    return ds * dr;
}

DisplayImage tonemap(const HDRImage& img) {
    DisplayImage out(img.width, img.height);
    for (size_t i = 0; i < img.data.size(); ++i) {
        const double x = img.data[i];
        if (!std::isfinite(x)) {
            const size_t p = i / 3;
            throw ValidationError("tonemap: non-finite value at pixel (" +
                                  std::to_string(p % img.width) + ", " +
                                  std::to_string(p / img.width) + ") channel " +
                                  std::to_string(i % 3));
        }
        out.data[i] = std::clamp(srgb_encode(reinhard(x)), 0.0, 1.0);
    }
    return out;
}

// PFM, little-endian (scale header -1.0), rows bottom-to-top.
void write_pfm(const HDRImage& img, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << "PF\n" << img.width << " " << img.height << "\n-1.0\n";
    std::vector<float> row(static_cast<size_t>(img.width) * 3);
    for (int y = img.height - 1; y >= 0; --y) {
        const double* src = &img.data[3 * static_cast<size_t>(y) * img.width];
        for (size_t i = 0; i < row.size(); ++i) row[i] = static_cast<float>(src[i]);
        f.write(reinterpret_cast<const char*>(row.data()),
                static_cast<std::streamsize>(row.size() * sizeof(float)));
    }
}

HDRImage read_pfm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open: " + path);
    std::string magic;
    int w = 0, h = 0;
    double scale = 0.0;
    f >> magic >> w >> h >> scale;
    if (magic != "PF" || w <= 0 || h <= 0) throw ParseError("not a color PFM file: " + path);
    if (scale >= 0.0) throw ParseError("big-endian PFM unsupported: " + path);
    f.get();  // single whitespace after scale
    HDRImage img(w, h);
    std::vector<float> row(static_cast<size_t>(w) * 3);
    for (int y = h - 1; y >= 0; --y) {
        f.read(reinterpret_cast<char*>(row.data()),
               static_cast<std::streamsize>(row.size() * sizeof(float)));
        if (!f) throw ParseError("truncated PFM file: " + path);
        double* dst = &img.data[3 * static_cast<size_t>(y) * w];
        for (size_t i = 0; i < row.size(); ++i) dst[i] = row[i];
    }
    return img;
}

namespace {

void put_u32_be(std::vector<uint8_t>& v, uint32_t x) {
    v.push_back(static_cast<uint8_t>(x >> 24));
    v.push_back(static_cast<uint8_t>(x >> 16));
    v.push_back(static_cast<uint8_t>(x >> 8));
    v.push_back(static_cast<uint8_t>(x));
}

void write_chunk(std::ofstream& f, const char tag[4], const std::vector<uint8_t>& payload) {
    std::vector<uint8_t> head;
    put_u32_be(head, static_cast<uint32_t>(payload.size()));
    f.write(reinterpret_cast<const char*>(head.data()), 4);
    f.write(tag, 4);
    if (!payload.empty())
        f.write(reinterpret_cast<const char*>(payload.data()),
                static_cast<std::streamsize>(payload.size()));
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, reinterpret_cast<const Bytef*>(tag), 4);
    if (!payload.empty()) crc = crc32(crc, payload.data(), static_cast<uInt>(payload.size()));
    std::vector<uint8_t> tail;
    put_u32_be(tail, static_cast<uint32_t>(crc));
    f.write(reinterpret_cast<const char*>(tail.data()), 4);
}

}  // namespace

// Minimal 8-bit RGB PNG writer (zlib deflate, filter type 0 per scanline).
void write_png(const DisplayImage& img, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    static const uint8_t sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
    f.write(reinterpret_cast<const char*>(sig), 8);

    std::vector<uint8_t> ihdr;
    put_u32_be(ihdr, static_cast<uint32_t>(img.width));
    put_u32_be(ihdr, static_cast<uint32_t>(img.height));
    ihdr.push_back(8);   // bit depth
    ihdr.push_back(2);   // color type: truecolor
    ihdr.push_back(0);   // compression
    ihdr.push_back(0);   // filter
    ihdr.push_back(0);   // interlace
    write_chunk(f, "IHDR", ihdr);

    std::vector<uint8_t> raw;
    raw.reserve(static_cast<size_t>(img.height) * (1 + 3 * static_cast<size_t>(img.width)));
    for (int y = 0; y < img.height; ++y) {
        raw.push_back(0);  // filter: none
        for (int x = 0; x < img.width; ++x) {
            const RGB c = img.pixel(x, y);
            raw.push_back(static_cast<uint8_t>(std::lround(std::clamp(c.x, 0.0, 1.0) * 255.0)));
            raw.push_back(static_cast<uint8_t>(std::lround(std::clamp(c.y, 0.0, 1.0) * 255.0)));
            raw.push_back(static_cast<uint8_t>(std::lround(std::clamp(c.z, 0.0, 1.0) * 255.0)));
        }
    }
    uLongf bound = compressBound(static_cast<uLong>(raw.size()));
    std::vector<uint8_t> compressed(bound);
    if (compress2(compressed.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
        throw std::runtime_error("png deflate failed: " + path);
    compressed.resize(bound);
    write_chunk(f, "IDAT", compressed);
    write_chunk(f, "IEND", {});
}

}  // namespace mrd
