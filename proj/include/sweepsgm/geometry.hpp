#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sweepsgm {

/// Pinhole camera: intrinsics K, camera-to-world rotation R, center C.
/// World point X maps to pixel via K * R^T * (X - C), so the projection
/// matrix is K [R^T | -R^T C]. Pixels are (x, y, 1) homogeneous with
/// (0,0) at the top-left pixel center.
struct CameraView {
    Eigen::Matrix3d K = Eigen::Matrix3d::Identity();
    Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
    Eigen::Vector3d C = Eigen::Vector3d::Zero();
    int width = 1;
    int height = 1;

    CameraView() = default;
    CameraView(const Eigen::Matrix3d& K_in, const Eigen::Matrix3d& R_in,
               const Eigen::Vector3d& C_in, int w, int h)
        : K(K_in), R(R_in), C(C_in), width(w), height(h) {
        validate();
    }

    void validate() const {
        if (width < 1 || height < 1)
            throw std::invalid_argument("CameraView: image size must be at least 1x1");
        if (std::abs(K(1, 0)) > 1e-12 || std::abs(K(2, 0)) > 1e-12 ||
            std::abs(K(2, 1)) > 1e-12 || std::abs(K(2, 2) - 1.0) > 1e-12)
            throw std::invalid_argument("CameraView: K must be upper-triangular with K(2,2)=1");
        if (K(0, 0) <= 0.0 || K(1, 1) <= 0.0)
            throw std::invalid_argument("CameraView: focal lengths must be positive");
        const double ortho = (R.transpose() * R - Eigen::Matrix3d::Identity())
                                 .cwiseAbs()
                                 .maxCoeff();
        if (ortho > 1e-9 || std::abs(R.determinant() - 1.0) > 1e-9)
            throw std::invalid_argument("CameraView: R must be orthonormal with det +1");
    }

    Eigen::Matrix3d K_inverse() const {
        // K is upper triangular with unit bottom-right entry.
        const double fx = K(0, 0), s = K(0, 1), cx = K(0, 2);
        const double fy = K(1, 1), cy = K(1, 2);
        Eigen::Matrix3d inv = Eigen::Matrix3d::Zero();
        inv(0, 0) = 1.0 / fx;
        inv(0, 1) = -s / (fx * fy);
        inv(0, 2) = (s * cy - cx * fy) / (fx * fy);
        inv(1, 1) = 1.0 / fy;
        inv(1, 2) = -cy / fy;
        inv(2, 2) = 1.0;
        return inv;
    }

    Eigen::Vector3d world_to_camera(const Eigen::Vector3d& X) const {
        return R.transpose() * (X - C);
    }
    Eigen::Vector3d camera_to_world(const Eigen::Vector3d& x) const {
        return R * x + C;
    }

    /// Projects a world point; the point must lie in front of the camera.
    Eigen::Vector2d project(const Eigen::Vector3d& X) const {
        const Eigen::Vector3d h = K * world_to_camera(X);
        return {h.x() / h.z(), h.y() / h.z()};
    }
};

inline Eigen::Matrix<double, 3, 4> projection_matrix(const CameraView& view) {
    Eigen::Matrix<double, 3, 4> P;
    P.leftCols<3>() = view.R.transpose();
    P.col(3) = -view.R.transpose() * view.C;
    return view.K * P;
}

/// Fronto-parallel scene plane in reference-camera coordinates:
/// points X with normal . X = depth.
struct SamplingPlane {
    Eigen::Vector3d normal{0.0, 0.0, 1.0};
    double depth = 1.0;
};

/// Ordered sampling planes, strictly ascending in depth. The plane index
/// is its position in this order.
class SamplingPlaneSet {
public:
    SamplingPlaneSet() = default;
    explicit SamplingPlaneSet(std::vector<SamplingPlane> planes)
        : planes_(std::move(planes)) {
        if (planes_.empty())
            throw std::invalid_argument("SamplingPlaneSet: empty plane list");
        depths_.reserve(planes_.size());
        for (const auto& p : planes_) {
            if (p.depth <= 0.0)
                throw std::invalid_argument("SamplingPlaneSet: plane depth must be positive");
            if (!depths_.empty() && p.depth <= depths_.back())
                throw std::invalid_argument("SamplingPlaneSet: depths must strictly increase");
            depths_.push_back(p.depth);
        }
    }

    int size() const { return static_cast<int>(planes_.size()); }
    const SamplingPlane& plane(int i) const { return planes_[i]; }
    double depth(int i) const { return depths_[i]; }
    const std::vector<double>& depths() const { return depths_; }

    /// Index of the plane closest in depth; equidistant ties go to the
    /// lower index.
    int nearest_index(double depth) const {
        const auto it = std::lower_bound(depths_.begin(), depths_.end(), depth);
        if (it == depths_.begin()) return 0;
        if (it == depths_.end()) return size() - 1;
        const int hi = static_cast<int>(it - depths_.begin());
        const int lo = hi - 1;
        return (depth - depths_[lo] <= depths_[hi] - depth) ? lo : hi;
    }

private:
    std::vector<SamplingPlane> planes_;
    std::vector<double> depths_;
};

/// Homography mapping reference pixels to match pixels for points on the
/// given plane (plane expressed in reference-camera coordinates).
inline Eigen::Matrix3d plane_homography(const CameraView& ref,
                                        const CameraView& match,
                                        const SamplingPlane& plane) {
    if (plane.depth <= 1e-12)
        throw std::invalid_argument("plane_homography: degenerate plane depth");
    const Eigen::Matrix3d R_rel = match.R.transpose() * ref.R;
    const Eigen::Vector3d t_rel = match.R.transpose() * (ref.C - match.C);
    const Eigen::Matrix3d core =
        R_rel + t_rel * plane.normal.transpose() / plane.depth;
    return match.K * core * ref.K_inverse();
}

/// Camera-frame intersection of the viewing ray through pixel p with the
/// plane. For fronto-parallel planes the z coordinate equals plane.depth.
inline Eigen::Vector3d ray_plane_intersection(const Eigen::Vector2d& p,
                                              const SamplingPlane& plane,
                                              const CameraView& ref) {
    const Eigen::Vector3d v = ref.K_inverse() * Eigen::Vector3d(p.x(), p.y(), 1.0);
    const double denom = plane.normal.dot(v);
    if (std::abs(denom) <= 1e-12 * v.norm())
        throw std::runtime_error("ray_plane_intersection: ray parallel to plane");
    return (plane.depth / denom) * v;
}

/// View scaled down by `levels_down` factor-two steps: image size is
/// floor-halved per step, K focal/principal/skew entries divided exactly.
inline CameraView scale_view(const CameraView& view, int levels_down) {
    if (levels_down < 0)
        throw std::invalid_argument("scale_view: levels_down must be >= 0");
    CameraView out = view;
    for (int i = 0; i < levels_down; ++i) {
        out.width = std::max(1, out.width / 2);
        out.height = std::max(1, out.height / 2);
    }
    const double f = std::pow(2.0, levels_down);
    out.K(0, 0) = view.K(0, 0) / f;
    out.K(1, 1) = view.K(1, 1) / f;
    out.K(0, 1) = view.K(0, 1) / f;
    out.K(0, 2) = view.K(0, 2) / f;
    out.K(1, 2) = view.K(1, 2) / f;
    return out;
}

struct PlaneGenDiagnostics {
    bool degenerate_baseline = false;
    int farthest_match = -1;
    double corner_displacement = 0.0;  // total px displacement across the range
};

namespace detail {

inline Eigen::Vector2d dehomogenize(const Eigen::Vector3d& h) {
    return {h.x() / h.z(), h.y() / h.z()};
}

}  // namespace detail

/// Fronto-parallel sampling planes over [d_min, d_max], spaced uniformly in
/// inverse depth so that consecutive planes displace the worst reference
/// corner pixel by at most one pixel on its epipolar line in the match view
/// farthest from the reference. First and last planes sit exactly at the
/// bounds. A baseline too short to ever reach one pixel of displacement
/// degenerates to the two bounding planes.
inline SamplingPlaneSet generate_sampling_planes(
    const CameraView& ref, std::span<const CameraView> matches, double d_min,
    double d_max, PlaneGenDiagnostics* diag = nullptr) {
    if (!(d_min > 0.0) || !(d_min < d_max))
        throw std::invalid_argument("generate_sampling_planes: need 0 < d_min < d_max");
    if (matches.empty())
        throw std::invalid_argument("generate_sampling_planes: need at least one match view");

    int farthest = 0;
    double best_dist = -1.0;
    for (std::size_t i = 0; i < matches.size(); ++i) {
        const double dist = (matches[i].C - ref.C).norm();
        if (dist > best_dist) {
            best_dist = dist;
            farthest = static_cast<int>(i);
        }
    }

    const SamplingPlane near_plane{Eigen::Vector3d(0, 0, 1), d_min};
    const SamplingPlane far_plane{Eigen::Vector3d(0, 0, 1), d_max};
    const Eigen::Matrix3d H_near = plane_homography(ref, matches[farthest], near_plane);
    const Eigen::Matrix3d H_far = plane_homography(ref, matches[farthest], far_plane);

    const double w = ref.width - 1.0;
    const double h = ref.height - 1.0;
    const Eigen::Vector3d corners[4] = {
        {0.0, 0.0, 1.0}, {w, 0.0, 1.0}, {0.0, h, 1.0}, {w, h, 1.0}};
    double span_px = 0.0;
    for (const auto& c : corners) {
        const Eigen::Vector2d a = detail::dehomogenize(H_near * c);
        const Eigen::Vector2d b = detail::dehomogenize(H_far * c);
        span_px = std::max(span_px, (a - b).norm());
    }

    if (diag) {
        diag->farthest_match = farthest;
        diag->corner_displacement = span_px;
        diag->degenerate_baseline = span_px < 1.0;
    }

    std::vector<SamplingPlane> planes;
    if (span_px < 1.0) {
        planes.push_back(near_plane);
        planes.push_back(far_plane);
        return SamplingPlaneSet(std::move(planes));
    }

    const int count = static_cast<int>(std::ceil(span_px - 1e-9)) + 1;
    const double inv_hi = 1.0 / d_min;
    const double inv_lo = 1.0 / d_max;
    const double step = (inv_hi - inv_lo) / (count - 1);
    planes.reserve(count);
    planes.push_back(near_plane);
    for (int i = 1; i < count - 1; ++i)
        planes.push_back({Eigen::Vector3d(0, 0, 1), 1.0 / (inv_hi - i * step)});
    planes.push_back(far_plane);
    return SamplingPlaneSet(std::move(planes));
}

}  // namespace sweepsgm
