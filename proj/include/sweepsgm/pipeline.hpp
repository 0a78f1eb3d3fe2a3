#pragma once

#include "sweepsgm/confidence.hpp"
#include "sweepsgm/geometry.hpp"
#include "sweepsgm/image.hpp"
#include "sweepsgm/matching.hpp"
#include "sweepsgm/sgm.hpp"
#include "sweepsgm/surface.hpp"

#include <array>
#include <chrono>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace sweepsgm {

/// Full estimation configuration. Penalty and confidence parameters left
/// unset resolve to the defaults of the active cost/penalty combination:
///   ncc:    P1 = 150 (gradient)   P1 = 60, P2 = 220 (line)   phi/tau = 80/10
///   census: P1 = 15  (gradient)   P1 = 10, P2 = 55  (line)   phi/tau = 650/80
/// Gradient mode computes P2 adaptively; its P2 field defaults to the
/// |dI| = 0 value P1 * (1 + alpha).
struct PipelineConfig {
    int levels = 3;
    int delta_d = 6;
    CostKind cost = CostKind::ncc;
    SgmVariant variant = SgmVariant::fp;
    P2Mode p2_mode = P2Mode::gradient;
    std::optional<double> p1, p2, phi, tau;
    double alpha = 8.0;
    double beta = 10.0;
    double d_min = 1.0;
    double d_max = 10.0;
    double dog_sigma1 = 1.0;
    double dog_sigma2 = 2.0;
    double dog_threshold = 2.0;
    int gestalt_radius = kGestaltRadius;
    int threads = 0;

    double resolved_p1() const {
        if (p1) return *p1;
        if (cost == CostKind::ncc) return p2_mode == P2Mode::gradient ? 150.0 : 60.0;
        return p2_mode == P2Mode::gradient ? 15.0 : 10.0;
    }
    double resolved_p2() const {
        if (p2) return *p2;
        if (p2_mode == P2Mode::gradient) return resolved_p1() * (1.0 + alpha);
        return cost == CostKind::ncc ? 220.0 : 55.0;
    }
    double resolved_phi() const {
        if (phi) return *phi;
        return cost == CostKind::ncc ? 80.0 : 650.0;
    }
    double resolved_tau() const {
        if (tau) return *tau;
        return cost == CostKind::ncc ? 10.0 : 80.0;
    }

    PenaltyConfig penalties() const {
        PenaltyConfig p{resolved_p1(), resolved_p2(), p2_mode, alpha, beta};
        p.validate();
        return p;
    }
    ConfidenceParams confidence() const {
        ConfidenceParams c{resolved_phi(), resolved_tau()};
        c.validate();
        return c;
    }

    void validate() const {
        if (levels < 1) throw std::invalid_argument("PipelineConfig: levels must be >= 1");
        if (delta_d < 1) throw std::invalid_argument("PipelineConfig: delta_d must be >= 1");
        if (!(d_min > 0.0) || !(d_min < d_max))
            throw std::invalid_argument("PipelineConfig: need 0 < d_min < d_max");
        if (!(dog_sigma2 > dog_sigma1) || !(dog_sigma1 > 0.0))
            throw std::invalid_argument("PipelineConfig: need dog_sigma2 > dog_sigma1 > 0");
        if (gestalt_radius < 1)
            throw std::invalid_argument("PipelineConfig: gestalt_radius must be >= 1");
        penalties();
        confidence();
    }
};

/// Image pyramid, level 0 coarsest, last level the original image, with
/// intrinsics scaled per level.
struct ImagePyramid {
    std::vector<GrayImage> images;
    std::vector<CameraView> views;

    int levels() const { return static_cast<int>(images.size()); }
};

namespace detail {

// Gaussian blur with the fixed 3x3 sigma = 1 pyramid kernel, then drop
// every second row/column (floor halving).
inline GrayImage blur_and_halve(const GrayImage& img) {
    const double a = std::exp(-0.5);
    const double k0 = a / (2.0 * a + 1.0);
    const double k1 = 1.0 / (2.0 * a + 1.0);
    GrayImage tmp(img.width(), img.height());
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x)
            tmp.at(x, y) = static_cast<float>(k0 * img.at_clamped(x - 1, y) +
                                              k1 * img.at(x, y) +
                                              k0 * img.at_clamped(x + 1, y));
    GrayImage blurred(img.width(), img.height());
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x)
            blurred.at(x, y) = static_cast<float>(k0 * tmp.at_clamped(x, y - 1) +
                                                  k1 * tmp.at(x, y) +
                                                  k0 * tmp.at_clamped(x, y + 1));
    GrayImage out(std::max(1, img.width() / 2), std::max(1, img.height() / 2));
    for (int y = 0; y < out.height(); ++y)
        for (int x = 0; x < out.width(); ++x)
            out.at(x, y) = blurred.at(2 * x, 2 * y);
    return out;
}

}  // namespace detail

/// Builds an L-level pyramid by repeated blur-then-halve from the original
/// image (which stays as the finest level). The census window must still
/// fit at the coarsest level.
inline ImagePyramid build_pyramid(const GrayImage& img, const CameraView& view,
                                  int levels) {
    if (levels < 1)
        throw std::invalid_argument("build_pyramid: levels must be >= 1");
    if (img.width() != view.width || img.height() != view.height)
        throw std::invalid_argument("build_pyramid: image/view size mismatch");
    const int factor = 1 << (levels - 1);
    if (img.width() / factor < kCensusWidth || img.height() / factor < kCensusHeight)
        throw std::invalid_argument(
            "build_pyramid: image too small for the census window at the coarsest level");

    ImagePyramid pyr;
    pyr.images.resize(levels);
    pyr.views.resize(levels);
    pyr.images[levels - 1] = img;
    pyr.views[levels - 1] = view;
    for (int l = levels - 2; l >= 0; --l) {
        pyr.images[l] = detail::blur_and_halve(pyr.images[l + 1]);
        pyr.views[l] = scale_view(view, levels - 1 - l);
    }
    return pyr;
}

/// Per-pixel sampling ranges for the next level: the previous depth map is
/// upscaled (nearest neighbor) to the target size and each valid pixel gets
/// delta_d plane-index steps on both sides of the plane nearest to its
/// predicted depth. Invalid pixels fall back to the full range.
inline PixelRangeMap refine_ranges(const DepthMap& prev_depth,
                                   const SamplingPlaneSet& planes, int delta_d,
                                   int target_w, int target_h) {
    if (delta_d < 1)
        throw std::invalid_argument("refine_ranges: delta_d must be >= 1");
    const DepthMap scaled = nn_resize(prev_depth, target_w, target_h);
    PixelRangeMap ranges = PixelRangeMap::full(target_w, target_h, planes.size());
    for (int y = 0; y < target_h; ++y)
        for (int x = 0; x < target_w; ++x) {
            const float d = scaled.at(x, y);
            if (!is_valid(d)) continue;
            const int k = planes.nearest_index(d);
            const int lo = std::max(0, k - delta_d);
            const int hi = std::min(planes.size() - 1, k + delta_d);
            const std::size_t p = ranges.index(x, y);
            ranges.start[p] = lo;
            ranges.length[p] = hi - lo + 1;
        }
    return ranges;
}

/// Difference-of-Gaussians texture mask: 1 where |G_s1 - G_s2| reaches the
/// threshold (textured, kept), 0 where matching would be unreliable.
inline MaskImage dog_mask(const GrayImage& ref, double sigma1, double sigma2,
                          double threshold) {
    if (!(sigma2 > sigma1) || !(sigma1 > 0.0))
        throw std::invalid_argument("dog_mask: need sigma2 > sigma1 > 0");
    const GrayImage g1 = gaussian_blur(ref, sigma1);
    const GrayImage g2 = gaussian_blur(ref, sigma2);
    MaskImage mask(ref.width(), ref.height(), 0);
    for (int y = 0; y < ref.height(); ++y)
        for (int x = 0; x < ref.width(); ++x)
            if (std::abs(g1.at(x, y) - g2.at(x, y)) >= threshold)
                mask.at(x, y) = 1;
    return mask;
}

struct LevelStats {
    int level = 0;
    int width = 0;
    int height = 0;
    int planes = 0;
    double seconds = 0.0;
};

struct PipelineResult {
    DepthMap depth;
    NormalMap normals;
    ConfidenceMap confidence;
    MaskImage texture_mask;
    std::vector<LevelStats> level_stats;
    std::vector<std::string> warnings;
    std::vector<DepthMap> level_depths;  // per-level estimates, coarse first
};

/// Coarse-to-fine estimation over a five-image bundle: per level a plane
/// set is generated from the scaled intrinsics, the cost volume is built
/// (full range at the coarsest level, refined ranges after), aggregated
/// with the configured variant, and reduced to depth, confidence and
/// smoothed normals that seed the next level. The sn variant uses the
/// previous level's normals (or the caller-supplied prior); without either
/// the coarsest level runs fronto-parallel. The final maps are invalidated
/// where the DoG mask flags missing texture.
inline PipelineResult run_pipeline(const std::array<GrayImage, kBundleSize>& images,
                                   const std::array<CameraView, kBundleSize>& views,
                                   const PipelineConfig& cfg,
                                   const NormalMap* prior_normals = nullptr) {
    cfg.validate();
    for (int i = 0; i < kBundleSize; ++i)
        if (images[i].width() != views[i].width ||
            images[i].height() != views[i].height)
            throw std::invalid_argument("run_pipeline: image/view size mismatch");
    if (prior_normals &&
        (prior_normals->width() != images[kReferenceIndex].width() ||
         prior_normals->height() != images[kReferenceIndex].height()))
        throw std::invalid_argument("run_pipeline: prior normal map size mismatch");

    std::array<ImagePyramid, kBundleSize> pyramids;
    for (int i = 0; i < kBundleSize; ++i)
        pyramids[i] = build_pyramid(images[i], views[i], cfg.levels);

    const PenaltyConfig penalties = cfg.penalties();
    const ConfidenceParams conf_params = cfg.confidence();

    PipelineResult result;
    DepthMap prev_depth;
    NormalMap prev_normals;

    for (int l = 0; l < cfg.levels; ++l) {
        const auto t0 = std::chrono::steady_clock::now();
        std::array<GrayImage, kBundleSize> level_images;
        std::array<CameraView, kBundleSize> level_views;
        for (int i = 0; i < kBundleSize; ++i) {
            level_images[i] = pyramids[i].images[l];
            level_views[i] = pyramids[i].views[l];
        }
        const GrayImage& ref = level_images[kReferenceIndex];
        const CameraView& ref_view = level_views[kReferenceIndex];

        std::vector<CameraView> match_views;
        for (int i = 0; i < kBundleSize; ++i)
            if (i != kReferenceIndex) match_views.push_back(level_views[i]);
        PlaneGenDiagnostics plane_diag;
        const SamplingPlaneSet planes = generate_sampling_planes(
            ref_view, match_views, cfg.d_min, cfg.d_max, &plane_diag);
        if (plane_diag.degenerate_baseline)
            result.warnings.push_back(
                "level " + std::to_string(l) +
                ": baseline too short for one pixel of plane displacement; "
                "using the two bounding planes only");

        const PixelRangeMap ranges =
            l == 0 ? PixelRangeMap::full(ref.width(), ref.height(), planes.size())
                   : refine_ranges(prev_depth, planes, cfg.delta_d, ref.width(),
                                   ref.height());
        const CostVolume volume = build_cost_volume(
            level_images, level_views, planes, ranges, cfg.cost, cfg.threads);

        NormalMap level_prior;
        VariantSpec variant{cfg.variant, nullptr};
        if (cfg.variant == SgmVariant::sn) {
            if (prior_normals)
                level_prior = nn_resize(*prior_normals, ref.width(), ref.height());
            else if (l > 0)
                level_prior = nn_resize(prev_normals, ref.width(), ref.height());
            if (!level_prior.empty())
                variant.normal_map = &level_prior;
            else
                variant.kind = SgmVariant::fp;  // no prior at the coarsest level
        }

        const AggregatedVolume agg =
            aggregate_paths(volume, ref, penalties, variant, planes, ref_view,
                            cfg.threads);
        DepthMap depth = median_filter_5x5(extract_winners(agg, planes));
        ConfidenceMap conf = confidence_map(agg, conf_params, cfg.threads);
        NormalMap normals = gestalt_smooth(
            normals_from_depth(depth, ref_view, cfg.threads), ref,
            cfg.gestalt_radius, cfg.beta, cfg.threads);

        const auto t1 = std::chrono::steady_clock::now();
        result.level_stats.push_back(
            {l, ref.width(), ref.height(), planes.size(),
             std::chrono::duration<double>(t1 - t0).count()});
        result.level_depths.push_back(depth);

        prev_depth = std::move(depth);
        prev_normals = std::move(normals);
        if (l == cfg.levels - 1) {
            result.depth = prev_depth;
            result.normals = prev_normals;
            result.confidence = std::move(conf);
        }
    }

    result.texture_mask =
        dog_mask(images[kReferenceIndex], cfg.dog_sigma1, cfg.dog_sigma2,
                 cfg.dog_threshold);
    for (int y = 0; y < result.depth.height(); ++y)
        for (int x = 0; x < result.depth.width(); ++x)
            if (!result.texture_mask.at(x, y)) {
                result.depth.at(x, y) = kInvalidValue;
                result.confidence.at(x, y) = kInvalidValue;
                result.normals.at(x, y) = Eigen::Vector3f::Zero();
            }
    return result;
}

}  // namespace sweepsgm
