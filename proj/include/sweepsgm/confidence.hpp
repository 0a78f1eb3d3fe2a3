#pragma once

#include "sweepsgm/parallel.hpp"
#include "sweepsgm/sgm.hpp"

#include <cmath>
#include <stdexcept>

namespace sweepsgm {

struct ConfidenceParams {
    double phi = 80.0;
    double tau = 10.0;

    void validate() const {
        if (!(phi > 0.0) || !(tau >= 0.0))
            throw std::invalid_argument("ConfidenceParams: need phi > 0 and tau >= 0");
    }
};

/// Gap between the winning summed cost and the sum of per-path minima.
/// Zero when all path minima align on one plane; never negative.
inline double path_consistency(const AggregatedVolume& agg, int x, int y) {
    const VolumeLayout& layout = agg.layout;
    const std::size_t p = layout.pixel(x, y);
    const std::size_t off = layout.offset(p);
    const int len = layout.length(p);
    double best = agg.summed[off];
    for (int i = 1; i < len; ++i) best = std::min(best, agg.summed[off + i]);
    return best - agg.path_min_sum[p];
}

/// Margin between the lowest and second-lowest summed costs. A
/// single-plane range has no margin; it reports 0 and raises the flag.
inline double uniqueness(const AggregatedVolume& agg, int x, int y,
                         bool* single_plane_range = nullptr) {
    const VolumeLayout& layout = agg.layout;
    const std::size_t p = layout.pixel(x, y);
    const std::size_t off = layout.offset(p);
    const int len = layout.length(p);
    if (single_plane_range) *single_plane_range = len < 2;
    if (len < 2) return 0.0;
    double lowest = std::min(agg.summed[off], agg.summed[off + 1]);
    double second = std::max(agg.summed[off], agg.summed[off + 1]);
    for (int i = 2; i < len; ++i) {
        const double v = agg.summed[off + i];
        if (v < lowest) {
            second = lowest;
            lowest = v;
        } else if (v < second) {
            second = v;
        }
    }
    return second - lowest;
}

/// Per-pixel confidence exp(-U_p/phi) * min(exp(U_u - tau), 1).
/// Single-plane ranges keep the first factor only.
inline ConfidenceMap confidence_map(const AggregatedVolume& agg,
                                    const ConfidenceParams& params,
                                    int threads = 0) {
    params.validate();
    const VolumeLayout& layout = agg.layout;
    ConfidenceMap out(layout.width(), layout.height());
    parallel_for(
        0, layout.height(),
        [&](int y) {
            for (int x = 0; x < layout.width(); ++x) {
                const double u_p = std::max(0.0, path_consistency(agg, x, y));
                bool single = false;
                const double u_u = uniqueness(agg, x, y, &single);
                const double margin_term =
                    single ? 1.0 : std::min(std::exp(u_u - params.tau), 1.0);
                out.at(x, y) =
                    static_cast<float>(std::exp(-u_p / params.phi) * margin_term);
            }
        },
        threads);
    return out;
}

}  // namespace sweepsgm
