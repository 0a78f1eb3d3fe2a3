#pragma once

#include "sweepsgm/geometry.hpp"
#include "sweepsgm/image.hpp"
#include "sweepsgm/parallel.hpp"

#include <cmath>

namespace sweepsgm {

inline constexpr int kGestaltRadius = 10;  // 21x21 window

/// Surface normals from a depth map: depths are lifted to camera-frame
/// points, differenced horizontally and vertically (central differences,
/// one-sided at borders and holes), and crossed. Normals face the camera.
/// Pixels without a usable difference on either axis come out invalid.
inline NormalMap normals_from_depth(const DepthMap& depth,
                                    const CameraView& view, int threads = 0) {
    const int w = depth.width();
    const int h = depth.height();
    const Eigen::Matrix3d kinv = view.K_inverse();
    NormalMap out(w, h, Eigen::Vector3f::Zero());

    auto point = [&](int x, int y) -> Eigen::Vector3d {
        const double z = depth.at(x, y);
        return z * (kinv * Eigen::Vector3d(x, y, 1.0));
    };
    auto valid_at = [&](int x, int y) {
        return depth.in_bounds(x, y) && is_valid(depth.at(x, y));
    };
    // Difference along one axis at p, or false if no two usable samples.
    auto axis_diff = [&](int x, int y, int dx, int dy,
                         Eigen::Vector3d& d) -> bool {
        const bool fwd = valid_at(x + dx, y + dy);
        const bool bwd = valid_at(x - dx, y - dy);
        if (fwd && bwd)
            d = point(x + dx, y + dy) - point(x - dx, y - dy);
        else if (fwd)
            d = point(x + dx, y + dy) - point(x, y);
        else if (bwd)
            d = point(x, y) - point(x - dx, y - dy);
        else
            return false;
        return true;
    };

    parallel_for(
        0, h,
        [&](int y) {
            for (int x = 0; x < w; ++x) {
                if (!is_valid(depth.at(x, y))) continue;
                Eigen::Vector3d hvec, vvec;
                if (!axis_diff(x, y, 1, 0, hvec) || !axis_diff(x, y, 0, 1, vvec))
                    continue;
                Eigen::Vector3d n = hvec.cross(vvec);
                const double norm = n.norm();
                if (norm < 1e-15) continue;
                n /= norm;
                const Eigen::Vector3d ray = kinv * Eigen::Vector3d(x, y, 1.0);
                if (n.dot(ray) > 0.0) n = -n;
                out.at(x, y) = n.cast<float>();
            }
        },
        threads);
    return out;
}

/// Appearance-weighted Gaussian smoothing of a normal map. Each neighbor
/// contributes its normal weighted by an isotropic spatial Gaussian
/// (sigma = radius, including the 1/sqrt(2*pi*sigma^2) factor) and an
/// intensity affinity exp(-|I_q - I_p| / beta); the center normal enters
/// with weight one. The result is renormalized; validity is unchanged.
inline NormalMap gestalt_smooth(const NormalMap& normals, const GrayImage& ref,
                                int radius = kGestaltRadius, double beta = 10.0,
                                int threads = 0) {
    if (radius < 1)
        throw std::invalid_argument("gestalt_smooth: radius must be >= 1");
    if (normals.width() != ref.width() || normals.height() != ref.height())
        throw std::invalid_argument("gestalt_smooth: image size mismatch");
    const int w = normals.width();
    const int h = normals.height();
    const double sigma = radius;
    const double gauss_scale = 1.0 / std::sqrt(2.0 * M_PI * sigma * sigma);

    const int side = 2 * radius + 1;
    std::vector<double> spatial(static_cast<std::size_t>(side) * side);
    for (int dy = -radius; dy <= radius; ++dy)
        for (int dx = -radius; dx <= radius; ++dx)
            spatial[(dy + radius) * side + (dx + radius)] =
                gauss_scale *
                std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));

    NormalMap out(w, h, Eigen::Vector3f::Zero());
    parallel_for(
        0, h,
        [&](int y) {
            for (int x = 0; x < w; ++x) {
                const Eigen::Vector3f& center = normals.at(x, y);
                if (!is_valid(center)) continue;
                const double i_p = ref.at(x, y);
                Eigen::Vector3d acc = center.cast<double>();
                for (int dy = -radius; dy <= radius; ++dy) {
                    const int qy = y + dy;
                    if (qy < 0 || qy >= h) continue;
                    for (int dx = -radius; dx <= radius; ++dx) {
                        if (dx == 0 && dy == 0) continue;
                        const int qx = x + dx;
                        if (qx < 0 || qx >= w) continue;
                        const Eigen::Vector3f& nq = normals.at(qx, qy);
                        if (!is_valid(nq)) continue;
                        const double weight =
                            spatial[(dy + radius) * side + (dx + radius)] *
                            std::exp(-std::abs(ref.at(qx, qy) - i_p) / beta);
                        acc += weight * nq.cast<double>();
                    }
                }
                const double norm = acc.norm();
                out.at(x, y) =
                    norm < 1e-15 ? center : (acc / norm).cast<float>();
            }
        },
        threads);
    return out;
}

}  // namespace sweepsgm
