#pragma once

#include "sweepsgm/geometry.hpp"
#include "sweepsgm/image.hpp"
#include "sweepsgm/parallel.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace sweepsgm {

enum class CostKind { census, ncc };

inline constexpr int kCensusWidth = 9;
inline constexpr int kCensusHeight = 7;
inline constexpr int kCensusBits = kCensusWidth * kCensusHeight - 1;  // 62
inline constexpr int kNccWindow = 5;
inline constexpr int kBundleSize = 5;
inline constexpr int kReferenceIndex = 2;  // center of the bundle

inline double worst_cost(CostKind kind) {
    return kind == CostKind::census ? static_cast<double>(kCensusBits) : 255.0;
}

using CensusImage = Image<std::uint64_t>;

/// 9x7 census transform with replicated-edge sampling. Bit k of a pixel's
/// string is set iff the k-th window neighbor (row-major, center skipped)
/// is strictly darker than the center.
inline CensusImage census_transform(const GrayImage& img) {
    if (img.width() < kCensusWidth || img.height() < kCensusHeight)
        throw std::invalid_argument("census_transform: image smaller than 9x7 window");
    const int rx = kCensusWidth / 2;
    const int ry = kCensusHeight / 2;
    CensusImage out(img.width(), img.height());
    auto transform_at = [&](int x, int y, auto sample) {
        const float center = sample(x, y);
        std::uint64_t bits = 0;
        int k = 0;
        for (int dy = -ry; dy <= ry; ++dy)
            for (int dx = -rx; dx <= rx; ++dx) {
                if (dx == 0 && dy == 0) continue;
                if (sample(x + dx, y + dy) < center) bits |= std::uint64_t{1} << k;
                ++k;
            }
        out.at(x, y) = bits;
    };
    for (int y = 0; y < img.height(); ++y) {
        const bool interior_row = y >= ry && y < img.height() - ry;
        for (int x = 0; x < img.width(); ++x) {
            if (interior_row && x >= rx && x < img.width() - rx)
                transform_at(x, y, [&](int sx, int sy) { return img.at(sx, sy); });
            else
                transform_at(x, y, [&](int sx, int sy) { return img.at_clamped(sx, sy); });
        }
    }
    return out;
}

inline int census_cost(std::uint64_t a, std::uint64_t b) {
    return std::popcount(a ^ b);
}

/// Negated, truncated and scaled NCC between two equally sized patches:
/// 255 * min(1 - NCC, 1). Zero-variance patches rate as the worst cost.
inline double ncc_cost(const float* ref_patch, const float* match_patch, int n) {
    double mean_a = 0.0, mean_b = 0.0;
    for (int i = 0; i < n; ++i) {
        mean_a += ref_patch[i];
        mean_b += match_patch[i];
    }
    mean_a /= n;
    mean_b /= n;
    double var_a = 0.0, var_b = 0.0, cov = 0.0;
    for (int i = 0; i < n; ++i) {
        const double da = ref_patch[i] - mean_a;
        const double db = match_patch[i] - mean_b;
        var_a += da * da;
        var_b += db * db;
        cov += da * db;
    }
    if (var_a <= 1e-12 || var_b <= 1e-12) return 255.0;
    double ncc = cov / std::sqrt(var_a * var_b);
    ncc = std::clamp(ncc, -1.0, 1.0);
    return 255.0 * std::min(1.0 - ncc, 1.0);
}

inline double ncc_cost(const std::array<float, kNccWindow * kNccWindow>& ref_patch,
                       const std::array<float, kNccWindow * kNccWindow>& match_patch) {
    return ncc_cost(ref_patch.data(), match_patch.data(),
                    kNccWindow * kNccWindow);
}

/// Per-pixel sampling ranges into a plane set: global index of the first
/// sampled plane and the number of consecutive planes.
struct PixelRangeMap {
    int width = 0;
    int height = 0;
    std::vector<std::int32_t> start;
    std::vector<std::int32_t> length;

    static PixelRangeMap full(int width, int height, int plane_count) {
        PixelRangeMap m;
        m.width = width;
        m.height = height;
        m.start.assign(static_cast<std::size_t>(width) * height, 0);
        m.length.assign(static_cast<std::size_t>(width) * height, plane_count);
        return m;
    }

    std::size_t index(int x, int y) const {
        return static_cast<std::size_t>(y) * width + x;
    }
};

/// Shared pixel/range layout of the dynamic cost volume and every volume
/// derived from it. Per-pixel cost runs are concatenated; offset[p] locates
/// pixel p's run.
class VolumeLayout {
public:
    VolumeLayout() = default;
    VolumeLayout(const PixelRangeMap& ranges, int plane_count)
        : width_(ranges.width), height_(ranges.height), start_(ranges.start),
          length_(ranges.length) {
        const std::size_t n = static_cast<std::size_t>(width_) * height_;
        if (start_.size() != n || length_.size() != n)
            throw std::invalid_argument("VolumeLayout: range map size mismatch");
        offset_.resize(n + 1);
        offset_[0] = 0;
        int max_len = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (start_[i] < 0 || length_[i] < 1 ||
                start_[i] + length_[i] > plane_count)
                throw std::invalid_argument(
                    "VolumeLayout: pixel range exceeds the plane set");
            offset_[i + 1] = offset_[i] + length_[i];
            max_len = std::max(max_len, static_cast<int>(length_[i]));
        }
        max_length_ = max_len;
        plane_count_ = plane_count;
    }

    int width() const { return width_; }
    int height() const { return height_; }
    int plane_count() const { return plane_count_; }
    int max_length() const { return max_length_; }
    std::size_t total() const { return offset_.back(); }
    std::size_t pixel_count() const {
        return static_cast<std::size_t>(width_) * height_;
    }

    std::size_t pixel(int x, int y) const {
        return static_cast<std::size_t>(y) * width_ + x;
    }
    int start(std::size_t p) const { return start_[p]; }
    int length(std::size_t p) const { return length_[p]; }
    std::size_t offset(std::size_t p) const { return offset_[p]; }

private:
    int width_ = 0;
    int height_ = 0;
    int plane_count_ = 0;
    int max_length_ = 0;
    std::vector<std::int32_t> start_;
    std::vector<std::int32_t> length_;
    std::vector<std::size_t> offset_;
};

struct CostVolume {
    VolumeLayout layout;
    CostKind kind = CostKind::census;
    std::vector<float> costs;

    float cost(int x, int y, int local_index) const {
        return costs[layout.offset(layout.pixel(x, y)) + local_index];
    }
};

struct WarpedImage {
    GrayImage image;
    MaskImage valid;  // 1 where the warped center landed inside the source
};

/// Backward-warps `src` through H (dst pixel -> src pixel), bilinear with
/// clamped coordinates. Pixels whose mapped position leaves the source
/// image are flagged invalid.
inline WarpedImage warp_by_homography(const GrayImage& src,
                                      const Eigen::Matrix3d& H, int dst_w,
                                      int dst_h) {
    WarpedImage out{GrayImage(dst_w, dst_h), MaskImage(dst_w, dst_h, 0)};
    for (int y = 0; y < dst_h; ++y)
        for (int x = 0; x < dst_w; ++x) {
            const Eigen::Vector3d q = H * Eigen::Vector3d(x, y, 1.0);
            if (q.z() <= 1e-12) {
                out.image.at(x, y) = 0.0f;
                continue;
            }
            const double sx = q.x() / q.z();
            const double sy = q.y() / q.z();
            out.image.at(x, y) = bilinear_clamped(src, sx, sy);
            if (sx >= 0.0 && sx <= src.width() - 1.0 && sy >= 0.0 &&
                sy <= src.height() - 1.0)
                out.valid.at(x, y) = 1;
        }
    return out;
}

/// Multi-image matching cost volume. The reference is the bundle center;
/// every in-range plane warps the four match images onto the reference,
/// the per-view costs of the two views on each side of the reference are
/// averaged, and the cheaper side wins (occlusion handling). Out-of-image
/// warps contribute the metric's worst cost for that view.
inline CostVolume build_cost_volume(
    const std::array<GrayImage, kBundleSize>& images,
    const std::array<CameraView, kBundleSize>& views,
    const SamplingPlaneSet& planes, const PixelRangeMap& ranges,
    CostKind kind, int threads = 0) {
    const GrayImage& ref = images[kReferenceIndex];
    for (const auto& img : images)
        if (!img.same_size(ref))
            throw std::invalid_argument("build_cost_volume: bundle images must share one size");
    if (ranges.width != ref.width() || ranges.height != ref.height())
        throw std::invalid_argument("build_cost_volume: range map size mismatch");

    CostVolume volume;
    volume.layout = VolumeLayout(ranges, planes.size());
    volume.kind = kind;
    volume.costs.assign(volume.layout.total(), 0.0f);

    const int w = ref.width();
    const int h = ref.height();
    const double worst = worst_cost(kind);
    const CensusImage ref_census =
        kind == CostKind::census ? census_transform(ref) : CensusImage();
    constexpr int match_order[4] = {0, 1, 3, 4};  // left pair, right pair

    // Planes write to disjoint slots of each pixel's cost run.
    parallel_for(
        0, planes.size(),
        [&](int k) {
            std::array<WarpedImage, 4> warped;
            std::array<CensusImage, 4> warped_census;
            for (int m = 0; m < 4; ++m) {
                const int v = match_order[m];
                const Eigen::Matrix3d H =
                    plane_homography(views[kReferenceIndex], views[v], planes.plane(k));
                warped[m] = warp_by_homography(images[v], H, w, h);
                if (kind == CostKind::census)
                    warped_census[m] = census_transform(warped[m].image);
            }
            std::array<float, kNccWindow * kNccWindow> ref_patch{};
            std::array<float, kNccWindow * kNccWindow> match_patch{};
            const int nr = kNccWindow / 2;
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    const std::size_t p = volume.layout.pixel(x, y);
                    const int local = k - volume.layout.start(p);
                    if (local < 0 || local >= volume.layout.length(p)) continue;
                    double view_cost[4];
                    if (kind == CostKind::census) {
                        const std::uint64_t rc = ref_census.at(x, y);
                        for (int m = 0; m < 4; ++m)
                            view_cost[m] = warped[m].valid.at(x, y)
                                               ? census_cost(rc, warped_census[m].at(x, y))
                                               : worst;
                    } else {
                        int i = 0;
                        for (int dy = -nr; dy <= nr; ++dy)
                            for (int dx = -nr; dx <= nr; ++dx)
                                ref_patch[i++] = ref.at_clamped(x + dx, y + dy);
                        for (int m = 0; m < 4; ++m) {
                            if (!warped[m].valid.at(x, y)) {
                                view_cost[m] = worst;
                                continue;
                            }
                            i = 0;
                            for (int dy = -nr; dy <= nr; ++dy)
                                for (int dx = -nr; dx <= nr; ++dx)
                                    match_patch[i++] =
                                        warped[m].image.at_clamped(x + dx, y + dy);
                            view_cost[m] = ncc_cost(ref_patch, match_patch);
                        }
                    }
                    const double left = 0.5 * (view_cost[0] + view_cost[1]);
                    const double right = 0.5 * (view_cost[2] + view_cost[3]);
                    volume.costs[volume.layout.offset(p) + local] =
                        static_cast<float>(std::min(left, right));
                }
        },
        threads);
    return volume;
}

}  // namespace sweepsgm
