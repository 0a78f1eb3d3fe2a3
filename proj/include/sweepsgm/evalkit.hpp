#pragma once

#include "sweepsgm/geometry.hpp"
#include "sweepsgm/image.hpp"
#include "sweepsgm/matching.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace sweepsgm {

struct MeanStd {
    double mean = 0.0;
    double stddev = 0.0;
    std::size_t count = 0;
};

struct MetricReport {
    MeanStd l1_abs;
    MeanStd l1_rel;
    double density = 0.0;  // co-valid fraction of all pixels
    std::size_t pixel_count = 0;
};

namespace detail {

template <typename Fn>
MeanStd accumulate_covalid(const DepthMap& pred, const DepthMap& gt, Fn&& term) {
    if (!pred.same_size(gt))
        throw std::invalid_argument("depth metric: map dimensions differ");
    double sum = 0.0, sum_sq = 0.0;
    std::size_t n = 0;
    for (int y = 0; y < pred.height(); ++y)
        for (int x = 0; x < pred.width(); ++x) {
            const float p = pred.at(x, y);
            const float g = gt.at(x, y);
            if (!is_valid(p) || !is_valid(g)) continue;
            const double v = term(p, g);
            sum += v;
            sum_sq += v * v;
            ++n;
        }
    if (n == 0)
        throw std::runtime_error("depth metric: no co-valid pixels");
    MeanStd out;
    out.count = n;
    out.mean = sum / n;
    out.stddev = std::sqrt(std::max(0.0, sum_sq / n - out.mean * out.mean));
    return out;
}

}  // namespace detail

/// Mean absolute depth error over co-valid pixels.
inline MeanStd l1_abs(const DepthMap& pred, const DepthMap& gt) {
    return detail::accumulate_covalid(
        pred, gt, [](double p, double g) { return std::abs(p - g); });
}

/// Mean depth error relative to the ground-truth depth over co-valid pixels.
inline MeanStd l1_rel(const DepthMap& pred, const DepthMap& gt) {
    return detail::accumulate_covalid(pred, gt, [](double p, double g) {
        if (g <= 0.0)
            throw std::runtime_error("l1_rel: nonpositive ground-truth depth");
        return std::abs(p - g) / g;
    });
}

inline MetricReport metric_report(const DepthMap& pred, const DepthMap& gt) {
    MetricReport r;
    r.l1_abs = l1_abs(pred, gt);
    r.l1_rel = l1_rel(pred, gt);
    r.pixel_count = r.l1_abs.count;
    r.density = static_cast<double>(r.pixel_count) / pred.pixel_count();
    return r;
}

struct RocPoint {
    double threshold = 0.0;
    double density = 0.0;  // kept / co-valid
    double ml1_abs = 0.0;
    double ml1_rel = 0.0;
    double ml1_rel_normalized = 0.0;  // ml1_rel / density
};

inline std::vector<double> default_roc_thresholds() {
    std::vector<double> t;
    for (int i = 0; i <= 20; ++i) t.push_back(i * 0.05);
    return t;
}

/// Accuracy-vs-completeness curve: per confidence threshold, the depth
/// metrics restricted to pixels at or above it. Thresholds with no
/// surviving pixels are omitted.
inline std::vector<RocPoint> roc_curve(
    const DepthMap& pred, const ConfidenceMap& conf, const DepthMap& gt,
    const std::vector<double>& thresholds = default_roc_thresholds()) {
    if (!pred.same_size(gt) || pred.width() != conf.width() ||
        pred.height() != conf.height())
        throw std::invalid_argument("roc_curve: map dimensions differ");
    std::size_t covalid = 0;
    for (int y = 0; y < pred.height(); ++y)
        for (int x = 0; x < pred.width(); ++x)
            if (is_valid(pred.at(x, y)) && is_valid(gt.at(x, y))) ++covalid;
    std::vector<RocPoint> curve;
    if (covalid == 0) return curve;
    for (const double t : thresholds) {
        double abs_sum = 0.0, rel_sum = 0.0;
        std::size_t kept = 0;
        for (int y = 0; y < pred.height(); ++y)
            for (int x = 0; x < pred.width(); ++x) {
                const float p = pred.at(x, y);
                const float g = gt.at(x, y);
                const float c = conf.at(x, y);
                if (!is_valid(p) || !is_valid(g) || !is_valid(c) || c < t)
                    continue;
                abs_sum += std::abs(static_cast<double>(p) - g);
                rel_sum += std::abs(static_cast<double>(p) - g) / g;
                ++kept;
            }
        if (kept == 0) continue;
        RocPoint point;
        point.threshold = t;
        point.density = static_cast<double>(kept) / covalid;
        point.ml1_abs = abs_sum / kept;
        point.ml1_rel = rel_sum / kept;
        point.ml1_rel_normalized = point.ml1_rel / point.density;
        curve.push_back(point);
    }
    return curve;
}

// ---------------------------------------------------------------------------
// Synthetic-scene oracle
// ---------------------------------------------------------------------------

/// Textured planar parallelogram: origin plus two edge vectors (world
/// coordinates). texture_scale is the number of noise periods per edge.
struct PatchSpec {
    Eigen::Vector3d origin = Eigen::Vector3d::Zero();
    Eigen::Vector3d e1 = Eigen::Vector3d::UnitX();
    Eigen::Vector3d e2 = Eigen::Vector3d::UnitY();
    double texture_scale = 8.0;
    std::uint64_t texture_seed = 0;
};

/// Lateral five-camera rig looking down +z: centers at (i-2)*baseline on
/// the x axis, shared intrinsics, plus a list of scene patches.
struct SceneSpec {
    int width = 320;
    int height = 240;
    double focal = 400.0;
    double baseline = 0.1;
    double d_min = 1.0;
    double d_max = 10.0;
    double noise_sigma = 0.0;
    std::uint64_t seed = 1;
    std::vector<PatchSpec> patches;
};

struct SyntheticScene {
    std::array<GrayImage, kBundleSize> images;
    std::array<CameraView, kBundleSize> views;
    DepthMap gt_depth;      // reference view, fronto-parallel depth
    NormalMap gt_normals;   // reference view, camera frame
};

namespace detail {

inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline double lattice01(std::int64_t xi, std::int64_t yi, std::uint64_t seed) {
    const std::uint64_t key = mix64(seed ^ mix64(static_cast<std::uint64_t>(xi) *
                                                     0x9ddfea08eb382d69ull +
                                                 static_cast<std::uint64_t>(yi)));
    return static_cast<double>(key >> 11) * (1.0 / 9007199254740992.0);
}

inline double smooth_noise(double x, double y, std::uint64_t seed) {
    const std::int64_t xi = static_cast<std::int64_t>(std::floor(x));
    const std::int64_t yi = static_cast<std::int64_t>(std::floor(y));
    double fx = x - xi;
    double fy = y - yi;
    fx = fx * fx * (3.0 - 2.0 * fx);  // smoothstep
    fy = fy * fy * (3.0 - 2.0 * fy);
    const double v00 = lattice01(xi, yi, seed);
    const double v10 = lattice01(xi + 1, yi, seed);
    const double v01 = lattice01(xi, yi + 1, seed);
    const double v11 = lattice01(xi + 1, yi + 1, seed);
    const double top = v00 + fx * (v10 - v00);
    const double bot = v01 + fx * (v11 - v01);
    return top + fy * (bot - top);
}

// Two-octave value noise mapped to [40, 220]; the base octave is coarse
// enough to survive one pyramid blur-and-halve step.
inline float patch_texture(double u, double v, std::uint64_t seed) {
    const double n =
        (smooth_noise(u, v, seed) + 0.5 * smooth_noise(2.0 * u, 2.0 * v, seed + 1)) /
        1.5;
    return static_cast<float>(40.0 + 180.0 * n);
}

}  // namespace detail

inline std::array<CameraView, kBundleSize> make_lateral_rig(const SceneSpec& spec) {
    Eigen::Matrix3d K = Eigen::Matrix3d::Identity();
    K(0, 0) = K(1, 1) = spec.focal;
    K(0, 2) = (spec.width - 1) / 2.0;
    K(1, 2) = (spec.height - 1) / 2.0;
    std::array<CameraView, kBundleSize> views;
    for (int i = 0; i < kBundleSize; ++i)
        views[i] = CameraView(K, Eigen::Matrix3d::Identity(),
                              Eigen::Vector3d((i - kReferenceIndex) * spec.baseline, 0, 0),
                              spec.width, spec.height);
    return views;
}

/// Renders the bundle by exact ray/plane intersection with procedural
/// textures, resolves occlusions nearest-first, adds seeded Gaussian noise,
/// and reports analytic ground truth for the reference view. Pixels that
/// hit no patch render black and carry invalid ground truth.
inline SyntheticScene render_synthetic(const SceneSpec& spec) {
    if (spec.patches.empty())
        throw std::invalid_argument("render_synthetic: scene has no patches");
    SyntheticScene scene;
    scene.views = make_lateral_rig(spec);

    for (std::size_t pi = 0; pi < spec.patches.size(); ++pi) {
        const PatchSpec& patch = spec.patches[pi];
        const Eigen::Vector3d corners[4] = {
            patch.origin, patch.origin + patch.e1, patch.origin + patch.e2,
            patch.origin + patch.e1 + patch.e2};
        for (int v = 0; v < kBundleSize; ++v)
            for (const auto& corner : corners)
                if (scene.views[v].world_to_camera(corner).z() <= 0.0)
                    throw std::runtime_error("render_synthetic: patch " +
                                             std::to_string(pi) +
                                             " behind camera " + std::to_string(v));
    }

    scene.gt_depth = DepthMap(spec.width, spec.height, kInvalidValue);
    scene.gt_normals = NormalMap(spec.width, spec.height, Eigen::Vector3f::Zero());

    for (int v = 0; v < kBundleSize; ++v) {
        const CameraView& view = scene.views[v];
        const Eigen::Matrix3d kinv = view.K_inverse();
        GrayImage img(spec.width, spec.height, 0.0f);
        for (int y = 0; y < spec.height; ++y)
            for (int x = 0; x < spec.width; ++x) {
                // Ray scaled so the parameter equals camera-frame depth.
                const Eigen::Vector3d dir_cam = kinv * Eigen::Vector3d(x, y, 1.0);
                const Eigen::Vector3d dir = view.R * dir_cam;
                double best_t = std::numeric_limits<double>::infinity();
                int best_patch = -1;
                double best_s = 0.0, best_u = 0.0;
                for (std::size_t pi = 0; pi < spec.patches.size(); ++pi) {
                    const PatchSpec& patch = spec.patches[pi];
                    const Eigen::Vector3d n = patch.e1.cross(patch.e2);
                    const double denom = n.dot(dir);
                    if (std::abs(denom) < 1e-15) continue;
                    const double t = n.dot(patch.origin - view.C) / denom;
                    if (t <= 1e-9 || t >= best_t) continue;
                    const Eigen::Vector3d rel = view.C + t * dir - patch.origin;
                    const double g11 = patch.e1.squaredNorm();
                    const double g22 = patch.e2.squaredNorm();
                    const double g12 = patch.e1.dot(patch.e2);
                    const double b1 = rel.dot(patch.e1);
                    const double b2 = rel.dot(patch.e2);
                    const double det = g11 * g22 - g12 * g12;
                    if (std::abs(det) < 1e-15) continue;
                    const double s = (b1 * g22 - b2 * g12) / det;
                    const double u = (b2 * g11 - b1 * g12) / det;
                    if (s < -1e-9 || s > 1.0 + 1e-9 || u < -1e-9 || u > 1.0 + 1e-9)
                        continue;
                    best_t = t;
                    best_patch = static_cast<int>(pi);
                    best_s = s;
                    best_u = u;
                }
                if (best_patch < 0) continue;
                const PatchSpec& patch = spec.patches[best_patch];
                img.at(x, y) = detail::patch_texture(
                    best_s * patch.texture_scale, best_u * patch.texture_scale,
                    detail::mix64(spec.seed) ^ patch.texture_seed);
                if (v == kReferenceIndex) {
                    scene.gt_depth.at(x, y) = static_cast<float>(best_t);
                    Eigen::Vector3d n =
                        view.R.transpose() * patch.e1.cross(patch.e2).normalized();
                    if (n.dot(dir_cam) > 0.0) n = -n;
                    scene.gt_normals.at(x, y) = n.cast<float>();
                }
            }
        if (spec.noise_sigma > 0.0) {
            std::mt19937_64 rng(detail::mix64(spec.seed * 1000003ull + v));
            auto uniform01 = [&rng] {
                return (static_cast<double>(rng() >> 11) + 1.0) *
                       (1.0 / 9007199254740993.0);
            };
            for (int y = 0; y < spec.height; ++y)
                for (int x = 0; x < spec.width; ++x) {
                    const double u1 = uniform01();
                    const double u2 = uniform01();
                    const double gauss =
                        std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
                    img.at(x, y) = static_cast<float>(std::clamp(
                        img.at(x, y) + spec.noise_sigma * gauss, 0.0, 255.0));
                }
        }
        scene.images[v] = std::move(img);
    }
    return scene;
}

}  // namespace sweepsgm
