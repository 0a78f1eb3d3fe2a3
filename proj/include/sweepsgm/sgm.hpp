#pragma once

#include "sweepsgm/geometry.hpp"
#include "sweepsgm/image.hpp"
#include "sweepsgm/matching.hpp"
#include "sweepsgm/parallel.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace sweepsgm {

enum class P2Mode { gradient, line };
enum class SgmVariant { fp, sn, pg };

inline constexpr int kIndexJumpClamp = 3;
inline constexpr int kSgmDirections = 8;
inline constexpr int kMedianWindow = 5;

struct PenaltyConfig {
    double p1 = 15.0;
    double p2 = 135.0;
    P2Mode p2_mode = P2Mode::gradient;
    double alpha = 8.0;
    double beta = 10.0;

    void validate() const {
        if (!(p1 > 0.0) || !(p2 >= p1))
            throw std::invalid_argument("PenaltyConfig: need 0 < P1 <= P2");
        if (!(alpha > 0.0) || !(beta > 0.0))
            throw std::invalid_argument("PenaltyConfig: alpha and beta must be positive");
    }
};

struct VariantSpec {
    SgmVariant kind = SgmVariant::fp;
    const NormalMap* normal_map = nullptr;  // required for sn
};

/// Large-jump penalty for one path transition. Gradient mode derives it
/// from the intensity step to the path predecessor, line mode drops to P1
/// on detected line pixels.
inline double adaptive_p2(const PenaltyConfig& cfg, double abs_intensity_step,
                          bool line_mask_hit) {
    if (cfg.p2_mode == P2Mode::gradient)
        return cfg.p1 * (1.0 + cfg.alpha * std::exp(-abs_intensity_step / cfg.beta));
    return line_mask_hit ? cfg.p1 : cfg.p2;
}

/// Binary line/edge image: Sobel gradient magnitude thresholded at
/// mean + 2*sigma, thinned by 3x3 non-maximum suppression across the
/// gradient direction.
inline MaskImage line_mask(const GrayImage& img) {
    const int w = img.width();
    const int h = img.height();
    Image<float> gx(w, h), gy(w, h), mag(w, h);
    double sum = 0.0, sum_sq = 0.0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double tl = img.at_clamped(x - 1, y - 1), tc = img.at_clamped(x, y - 1),
                         tr = img.at_clamped(x + 1, y - 1), ml = img.at_clamped(x - 1, y),
                         mr = img.at_clamped(x + 1, y), bl = img.at_clamped(x - 1, y + 1),
                         bc = img.at_clamped(x, y + 1), br = img.at_clamped(x + 1, y + 1);
            const double dx = (tr + 2.0 * mr + br) - (tl + 2.0 * ml + bl);
            const double dy = (bl + 2.0 * bc + br) - (tl + 2.0 * tc + tr);
            const double m = std::sqrt(dx * dx + dy * dy);
            gx.at(x, y) = static_cast<float>(dx);
            gy.at(x, y) = static_cast<float>(dy);
            mag.at(x, y) = static_cast<float>(m);
            sum += m;
            sum_sq += m * m;
        }
    const double n = static_cast<double>(w) * h;
    const double mean = sum / n;
    const double sd = std::sqrt(std::max(0.0, sum_sq / n - mean * mean));
    const double threshold = mean + 2.0 * sd;

    MaskImage out(w, h, 0);
    constexpr double tan67 = 2.414213562373095;  // direction quantization
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const float m = mag.at(x, y);
            if (!(m > threshold)) continue;
            const float ax = std::abs(gx.at(x, y));
            const float ay = std::abs(gy.at(x, y));
            float n1, n2;
            if (ax >= tan67 * ay) {
                n1 = mag.at_clamped(x - 1, y);
                n2 = mag.at_clamped(x + 1, y);
            } else if (ay >= tan67 * ax) {
                n1 = mag.at_clamped(x, y - 1);
                n2 = mag.at_clamped(x, y + 1);
            } else if (gx.at(x, y) * gy.at(x, y) >= 0.0f) {
                n1 = mag.at_clamped(x - 1, y - 1);
                n2 = mag.at_clamped(x + 1, y + 1);
            } else {
                n1 = mag.at_clamped(x + 1, y - 1);
                n2 = mag.at_clamped(x - 1, y + 1);
            }
            if (m >= n1 && m >= n2) out.at(x, y) = 1;
        }
    return out;
}

/// Plane-index jump induced by the tangent plane to `normal` at the point
/// where the ray through p meets the plane `plane_index`: the sampling
/// plane nearest to the tangent-plane depth under the path predecessor
/// p - dir, relative to plane_index, clamped to +-kIndexJumpClamp.
inline int index_jump_sn(const Eigen::Vector2i& p, const Eigen::Vector2i& dir,
                         const Eigen::Vector3f& normal, int plane_index,
                         const SamplingPlaneSet& planes, const CameraView& ref,
                         bool* grazing = nullptr) {
    if (grazing) *grazing = false;
    const Eigen::Matrix3d kinv = ref.K_inverse();
    const Eigen::Vector3d n = normal.cast<double>();
    const Eigen::Vector3d vp = kinv * Eigen::Vector3d(p.x(), p.y(), 1.0);
    const Eigen::Vector3d vq =
        kinv * Eigen::Vector3d(p.x() - dir.x(), p.y() - dir.y(), 1.0);
    const double denom = n.dot(vq);
    if (std::abs(denom) <= 1e-12 * vq.norm()) {
        if (grazing) *grazing = true;
        return 0;
    }
    const double pred_depth = planes.depth(plane_index) * n.dot(vp) / denom;
    const int jump = planes.nearest_index(pred_depth) - plane_index;
    return std::clamp(jump, -kIndexJumpClamp, kIndexJumpClamp);
}

/// Summed path costs plus the per-pixel sum of per-path minima.
struct AggregatedVolume {
    VolumeLayout layout;
    std::vector<double> summed;
    std::vector<double> path_min_sum;
    // Per-direction path costs, retained only on request (testing aid).
    std::array<std::vector<double>, kSgmDirections> path_costs;
    bool has_path_costs = false;

    double at(int x, int y, int local_index) const {
        return summed[layout.offset(layout.pixel(x, y)) + local_index];
    }
};

namespace detail {

struct PathDir {
    int dx, dy;
};

inline constexpr std::array<PathDir, kSgmDirections> kPathDirs = {{
    {1, 0}, {-1, 0}, {0, 1}, {0, -1}, {1, 1}, {-1, -1}, {-1, 1}, {1, -1}}};

}  // namespace detail

/// Semi-global path aggregation over the dynamic cost volume along 8
/// concentric directions. Each path runs the recursion
///   L(p,k) = S(p,k) + min(L(q,a), L(q,a+-1)+P1, min L(q,.)+P2') - min L(q,.)
/// with q = p - r and a the zero-cost anchor k shifted by the variant's
/// plane-index jump (0 for fp). Anchor and P1 lookups are clamped into the
/// predecessor's valid range; paths entering the image start at L = S.
/// P2' adapts per transition (gradient or line strategy).
inline AggregatedVolume aggregate_paths(
    const CostVolume& volume, const GrayImage& ref, const PenaltyConfig& cfg,
    const VariantSpec& variant, const SamplingPlaneSet& planes,
    const CameraView& view, int threads = 0, bool keep_path_costs = false) {
    cfg.validate();
    const VolumeLayout& layout = volume.layout;
    const int w = layout.width();
    const int h = layout.height();
    if (ref.width() != w || ref.height() != h)
        throw std::invalid_argument("aggregate_paths: volume/image size mismatch");
    if (variant.kind == SgmVariant::sn) {
        if (!variant.normal_map)
            throw std::invalid_argument("aggregate_paths: sn variant requires a normal map");
        if (variant.normal_map->width() != w || variant.normal_map->height() != h)
            throw std::invalid_argument("aggregate_paths: normal map size mismatch");
    }

    AggregatedVolume agg;
    agg.layout = layout;
    agg.summed.assign(layout.total(), 0.0);
    agg.path_min_sum.assign(layout.pixel_count(), 0.0);
    agg.has_path_costs = keep_path_costs;
    if (keep_path_costs)
        for (auto& pc : agg.path_costs) pc.assign(layout.total(), 0.0);

    const MaskImage lines =
        cfg.p2_mode == P2Mode::line ? line_mask(ref) : MaskImage();
    const Eigen::Matrix3d kinv = view.K_inverse();
    const int buf_len = layout.max_length();

    for (int di = 0; di < kSgmDirections; ++di) {
        const auto dir = detail::kPathDirs[di];

        // Relaxes pixel (x,y) against predecessor state; writes L into
        // `lp` and returns {min, argmin(global index)} of the new costs.
        auto relax = [&](int x, int y, const double* q_l, int q_start,
                         int q_len, double q_min, int q_arg,
                         double* lp) -> std::pair<double, int> {
            const std::size_t p = layout.pixel(x, y);
            const int s = layout.start(p);
            const int len = layout.length(p);
            const float* sp = volume.costs.data() + layout.offset(p);
            double best_min = std::numeric_limits<double>::infinity();
            int best_arg = s;
            if (!q_l) {
                for (int i = 0; i < len; ++i) {
                    lp[i] = sp[i];
                    if (lp[i] < best_min) {
                        best_min = lp[i];
                        best_arg = s + i;
                    }
                }
                return {best_min, best_arg};
            }
            const double step =
                std::abs(static_cast<double>(ref.at(x, y)) -
                         static_cast<double>(ref.at(x - dir.dx, y - dir.dy)));
            const bool line_hit =
                cfg.p2_mode == P2Mode::line && lines.at(x, y) != 0;
            const double p2 = adaptive_p2(cfg, step, line_hit);
            const int q_end = q_start + q_len - 1;

            bool use_sn = false;
            double rho = 1.0;
            if (variant.kind == SgmVariant::sn) {
                const Eigen::Vector3f& nf = variant.normal_map->at(x, y);
                if (is_valid(nf)) {
                    const Eigen::Vector3d n = nf.cast<double>();
                    const Eigen::Vector3d vp = kinv * Eigen::Vector3d(x, y, 1.0);
                    const Eigen::Vector3d vq =
                        kinv * Eigen::Vector3d(x - dir.dx, y - dir.dy, 1.0);
                    const double denom = n.dot(vq);
                    if (std::abs(denom) > 1e-12 * vq.norm()) {
                        rho = n.dot(vp) / denom;
                        use_sn = true;
                    }
                }
            }

            for (int i = 0; i < len; ++i) {
                const int k = s + i;
                int jump = 0;
                if (use_sn)
                    jump = std::clamp(planes.nearest_index(planes.depth(k) * rho) - k,
                                      -kIndexJumpClamp, kIndexJumpClamp);
                else if (variant.kind == SgmVariant::pg)
                    jump = std::clamp(q_arg - k, -kIndexJumpClamp, kIndexJumpClamp);
                const int anchor = k + jump;
                const int c0 = std::clamp(anchor, q_start, q_end);
                const int cm = std::clamp(anchor - 1, q_start, q_end);
                const int cp = std::clamp(anchor + 1, q_start, q_end);
                double best = q_l[c0 - q_start];
                best = std::min(best, q_l[cm - q_start] + cfg.p1);
                best = std::min(best, q_l[cp - q_start] + cfg.p1);
                best = std::min(best, q_min + p2);
                lp[i] = sp[i] + best - q_min;
                if (lp[i] < best_min) {
                    best_min = lp[i];
                    best_arg = k;
                }
            }
            return {best_min, best_arg};
        };

        auto accumulate = [&](int x, int y, const double* lp, double l_min) {
            const std::size_t p = layout.pixel(x, y);
            const std::size_t off = layout.offset(p);
            const int len = layout.length(p);
            for (int i = 0; i < len; ++i) agg.summed[off + i] += lp[i];
            agg.path_min_sum[p] += l_min;
            if (keep_path_costs)
                for (int i = 0; i < len; ++i)
                    agg.path_costs[di][off + i] = lp[i];
        };

        if (dir.dy == 0) {
            // Horizontal paths: one independent path per row.
            parallel_for(
                0, h,
                [&](int y) {
                    std::vector<double> buf_a(buf_len), buf_b(buf_len);
                    double* cur = buf_a.data();
                    double* prev = buf_b.data();
                    double prev_min = 0.0;
                    int prev_arg = 0;
                    bool has_prev = false;
                    const int x0 = dir.dx > 0 ? 0 : w - 1;
                    for (int t = 0; t < w; ++t) {
                        const int x = x0 + t * dir.dx;
                        std::pair<double, int> state;
                        if (!has_prev) {
                            state = relax(x, y, nullptr, 0, 0, 0.0, 0, cur);
                        } else {
                            const std::size_t q = layout.pixel(x - dir.dx, y);
                            state = relax(x, y, prev, layout.start(q),
                                          layout.length(q), prev_min, prev_arg, cur);
                        }
                        accumulate(x, y, cur, state.first);
                        std::swap(cur, prev);
                        prev_min = state.first;
                        prev_arg = state.second;
                        has_prev = true;
                    }
                },
                threads);
        } else {
            // Vertical/diagonal paths: rows advance sequentially, pixels
            // within a row only read the previous row.
            std::vector<double> row_a(static_cast<std::size_t>(w) * buf_len);
            std::vector<double> row_b(static_cast<std::size_t>(w) * buf_len);
            std::vector<double> min_a(w), min_b(w);
            std::vector<int> arg_a(w), arg_b(w);
            double* cur = row_a.data();
            double* prev = row_b.data();
            double* cur_min = min_a.data();
            double* prev_min = min_b.data();
            int* cur_arg = arg_a.data();
            int* prev_arg = arg_b.data();
            const int y0 = dir.dy > 0 ? 0 : h - 1;
            for (int t = 0; t < h; ++t) {
                const int y = y0 + t * dir.dy;
                parallel_for(
                    0, w,
                    [&](int x) {
                        double* lp = cur + static_cast<std::size_t>(x) * buf_len;
                        const int qx = x - dir.dx;
                        std::pair<double, int> state;
                        if (t == 0 || qx < 0 || qx >= w) {
                            state = relax(x, y, nullptr, 0, 0, 0.0, 0, lp);
                        } else {
                            const std::size_t q = layout.pixel(qx, y - dir.dy);
                            state = relax(x, y,
                                          prev + static_cast<std::size_t>(qx) * buf_len,
                                          layout.start(q), layout.length(q),
                                          prev_min[qx], prev_arg[qx], lp);
                        }
                        cur_min[x] = state.first;
                        cur_arg[x] = state.second;
                        accumulate(x, y, lp, state.first);
                    },
                    threads);
                std::swap(cur, prev);
                std::swap(cur_min, prev_min);
                std::swap(cur_arg, prev_arg);
            }
        }
    }
    return agg;
}

/// Winner-takes-all depth extraction: per-pixel argmin of the summed costs
/// over the pixel's range, ties to the lowest plane index.
inline DepthMap extract_winners(const AggregatedVolume& agg,
                                const SamplingPlaneSet& planes) {
    const VolumeLayout& layout = agg.layout;
    DepthMap depth(layout.width(), layout.height());
    for (int y = 0; y < layout.height(); ++y)
        for (int x = 0; x < layout.width(); ++x) {
            const std::size_t p = layout.pixel(x, y);
            const std::size_t off = layout.offset(p);
            const int len = layout.length(p);
            int best = 0;
            double best_cost = agg.summed[off];
            for (int i = 1; i < len; ++i)
                if (agg.summed[off + i] < best_cost) {
                    best_cost = agg.summed[off + i];
                    best = i;
                }
            depth.at(x, y) =
                static_cast<float>(planes.depth(layout.start(p) + best));
        }
    return depth;
}

/// 5x5 median over valid depths in the window (clipped at borders);
/// invalid pixels stay invalid. Even sample counts take the lower median.
inline DepthMap median_filter_5x5(const DepthMap& depth) {
    const int r = kMedianWindow / 2;
    DepthMap out(depth.width(), depth.height(), kInvalidValue);
    std::vector<float> samples;
    samples.reserve(kMedianWindow * kMedianWindow);
    for (int y = 0; y < depth.height(); ++y)
        for (int x = 0; x < depth.width(); ++x) {
            if (!is_valid(depth.at(x, y))) continue;
            samples.clear();
            for (int dy = -r; dy <= r; ++dy)
                for (int dx = -r; dx <= r; ++dx) {
                    if (!depth.in_bounds(x + dx, y + dy)) continue;
                    const float v = depth.at(x + dx, y + dy);
                    if (is_valid(v)) samples.push_back(v);
                }
            auto mid = samples.begin() + (samples.size() - 1) / 2;
            std::nth_element(samples.begin(), mid, samples.end());
            out.at(x, y) = *mid;
        }
    return out;
}

}  // namespace sweepsgm
