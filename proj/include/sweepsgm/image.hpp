#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

namespace sweepsgm {

/// Row-major 2-D buffer. Pixel (0,0) is the top-left pixel center.
template <typename T>
class Image {
public:
    Image() = default;
    Image(int width, int height, T fill = T{})
        : width_(width), height_(height) {
        if (width < 1 || height < 1)
            throw std::invalid_argument("Image: dimensions must be positive");
        data_.assign(static_cast<std::size_t>(width) * height, fill);
    }

    int width() const { return width_; }
    int height() const { return height_; }
    bool empty() const { return data_.empty(); }
    std::size_t pixel_count() const { return data_.size(); }

    bool in_bounds(int x, int y) const {
        return x >= 0 && x < width_ && y >= 0 && y < height_;
    }
    bool same_size(const Image& other) const {
        return width_ == other.width_ && height_ == other.height_;
    }

    T& at(int x, int y) { return data_[index(x, y)]; }
    const T& at(int x, int y) const { return data_[index(x, y)]; }

    /// Replicated-edge access: coordinates are clamped into the image.
    const T& at_clamped(int x, int y) const {
        return data_[index(std::clamp(x, 0, width_ - 1),
                           std::clamp(y, 0, height_ - 1))];
    }

    T* row(int y) { return data_.data() + static_cast<std::size_t>(y) * width_; }
    const T* row(int y) const {
        return data_.data() + static_cast<std::size_t>(y) * width_;
    }
    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

    std::size_t index(int x, int y) const {
        return static_cast<std::size_t>(y) * width_ + x;
    }

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<T> data_;
};

using GrayImage = Image<float>;          // intensities in [0, 255]
using MaskImage = Image<std::uint8_t>;   // 0/1
using DepthMap = Image<float>;           // fronto-parallel depth, invalid = -inf
using ConfidenceMap = Image<float>;      // [0, 1], invalid = -inf
using NormalMap = Image<Eigen::Vector3f>;  // unit camera-frame normals, invalid = 0

inline constexpr float kInvalidValue = -std::numeric_limits<float>::infinity();

inline bool is_valid(float v) { return std::isfinite(v); }
inline bool is_valid(const Eigen::Vector3f& n) { return n.squaredNorm() > 0.25f; }

/// Bilinear sample with coordinates clamped to the image domain.
inline float bilinear_clamped(const GrayImage& img, double x, double y) {
    x = std::clamp(x, 0.0, static_cast<double>(img.width() - 1));
    y = std::clamp(y, 0.0, static_cast<double>(img.height() - 1));
    const int x0 = std::min(static_cast<int>(x), img.width() - 1);
    const int y0 = std::min(static_cast<int>(y), img.height() - 1);
    const int x1 = std::min(x0 + 1, img.width() - 1);
    const int y1 = std::min(y0 + 1, img.height() - 1);
    const double fx = x - x0;
    const double fy = y - y0;
    const double top = (1.0 - fx) * img.at(x0, y0) + fx * img.at(x1, y0);
    const double bot = (1.0 - fx) * img.at(x0, y1) + fx * img.at(x1, y1);
    return static_cast<float>((1.0 - fy) * top + fy * bot);
}

/// Separable Gaussian blur, replicated edges, kernel radius ceil(3*sigma).
inline GrayImage gaussian_blur(const GrayImage& img, double sigma) {
    if (sigma <= 0.0)
        throw std::invalid_argument("gaussian_blur: sigma must be positive");
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> kernel(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
        sum += kernel[i + radius];
    }
    for (double& k : kernel) k /= sum;

    GrayImage tmp(img.width(), img.height());
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i)
                acc += kernel[i + radius] * img.at_clamped(x + i, y);
            tmp.at(x, y) = static_cast<float>(acc);
        }
    GrayImage out(img.width(), img.height());
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i)
                acc += kernel[i + radius] * tmp.at_clamped(x, y + i);
            out.at(x, y) = static_cast<float>(acc);
        }
    return out;
}

/// Nearest-neighbor upscale; source pixel = (x*src_w/dst_w, y*src_h/dst_h).
template <typename T>
Image<T> nn_resize(const Image<T>& src, int dst_w, int dst_h) {
    Image<T> out(dst_w, dst_h);
    for (int y = 0; y < dst_h; ++y) {
        const int sy = std::min(src.height() - 1,
                                static_cast<int>(static_cast<std::int64_t>(y) * src.height() / dst_h));
        for (int x = 0; x < dst_w; ++x) {
            const int sx = std::min(src.width() - 1,
                                    static_cast<int>(static_cast<std::int64_t>(x) * src.width() / dst_w));
            out.at(x, y) = src.at(sx, sy);
        }
    }
    return out;
}

}  // namespace sweepsgm
