#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mrd/vec3.hpp"

namespace mrd {

// Linear scene-referred radiance, row-major RGB, unbounded non-negative.
struct HDRImage {
    int width = 0, height = 0;
    std::vector<double> data;  // 3 * width * height

    HDRImage() = default;
    HDRImage(int w, int h) : width(w), height(h), data(static_cast<size_t>(3) * w * h, 0.0) {}

    RGB pixel(int x, int y) const {
        const size_t i = 3 * (static_cast<size_t>(y) * width + x);
        return {data[i], data[i + 1], data[i + 2]};
    }
    void set_pixel(int x, int y, const RGB& c) {
        const size_t i = 3 * (static_cast<size_t>(y) * width + x);
        data[i] = c.x;
        data[i + 1] = c.y;
        data[i + 2] = c.z;
    }
    size_t value_count() const { return data.size(); }
};

// Display-referred RGB in [0, 1] after tone mapping and the transfer function.
struct DisplayImage {
    int width = 0, height = 0;
    std::vector<double> data;

    DisplayImage() = default;
    DisplayImage(int w, int h) : width(w), height(h), data(static_cast<size_t>(3) * w * h, 0.0) {}
    RGB pixel(int x, int y) const {
        const size_t i = 3 * (static_cast<size_t>(y) * width + x);
        return {data[i], data[i + 1], data[i + 2]};
    }
    size_t value_count() const { return data.size(); }
};

double reinhard(double x);
double srgb_encode(double x);
// Derivative of the display mapping at linear value x (subgradient of the
// linear branch at the sRGB joint).
double tonemap_derivative(double x);

// Per-channel Reinhard x/(1+x) followed by the piecewise sRGB OETF.
DisplayImage tonemap(const HDRImage& img);

void write_pfm(const HDRImage& img, const std::string& path);
HDRImage read_pfm(const std::string& path);

void write_png(const DisplayImage& img, const std::string& path);

}  // namespace mrd
