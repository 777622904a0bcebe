#pragma once

#include <vector>

#include "superalign/kabsch.hpp"
#include "superalign/kdtree.hpp"

namespace superalign {

struct IcpConfig {
    int max_iterations = 50;
    double convergence_epsilon = 1e-6;       // meters of residual change
    double max_correspondence_distance = 0.25;  // meters

    void validate() const {
        if (max_iterations < 1 || convergence_epsilon <= 0.0 || max_correspondence_distance <= 0.0) {
            fail(ErrorCode::Parameter, "icp config values must be positive");
        }
    }
};

struct IcpResult {
    RigidTransform transform;
    double residual = 0.0;  // RMS correspondence distance at the final estimate
    int iterations = 0;
    bool stalled = false;   // no correspondences within range, or residual stopped improving early
};

namespace detail {

struct IcpCorrespondences {
    std::vector<Vec3> src;
    std::vector<Vec3> dst;
    double rms = 0.0;
};

inline IcpCorrespondences icp_correspondences(const PointCloud& src, const KdTree& dst_index,
                                              const RigidTransform& t, double max_dist) {
    IcpCorrespondences c;
    double sum_sq = 0.0;
    const double max_sq = max_dist * max_dist;
    for (const auto& p : src.points) {
        const Vec3 moved = t.apply(p);
        const auto [idx, dist] = dst_index.nearest(moved);
        if (dist * dist <= max_sq) {
            c.src.push_back(p);
            c.dst.push_back(dst_index.point(idx));
            sum_sq += dist * dist;
        }
    }
    if (!c.src.empty()) c.rms = std::sqrt(sum_sq / static_cast<double>(c.src.size()));
    return c;
}

}  // namespace detail

/// Alternates nearest-neighbor association (within the distance cap) and an
/// unweighted rigid fit. Iterations that would increase the RMS residual are
/// rejected and terminate the loop, so the accepted residual sequence is
/// non-increasing.
inline IcpResult icp_refine(const PointCloud& src, const PointCloud& dst,
                            const RigidTransform& init, const IcpConfig& cfg) {
    cfg.validate();
    if (src.empty() || dst.empty()) fail(ErrorCode::EmptyInput, "icp requires nonempty clouds");

    const KdTree dst_index(dst);
    IcpResult result;
    result.transform = init;

    auto current = detail::icp_correspondences(src, dst_index, result.transform,
                                               cfg.max_correspondence_distance);
    if (current.src.empty()) {
        result.stalled = true;
        return result;
    }
    result.residual = current.rms;

    for (int it = 0; it < cfg.max_iterations; ++it) {
        if (current.src.size() < 3) {
            result.stalled = true;
            break;
        }
        RigidTransform candidate;
        try {
            candidate = kabsch_umeyama(current.src, current.dst);
        } catch (const Error&) {
            result.stalled = true;
            break;
        }

        const auto next = detail::icp_correspondences(src, dst_index, candidate,
                                                      cfg.max_correspondence_distance);
        if (next.src.empty()) {
            result.stalled = true;
            break;
        }
        if (next.rms > result.residual) break;  // keep the previous estimate

        const double improvement = result.residual - next.rms;
        result.transform = candidate;
        result.residual = next.rms;
        result.iterations = it + 1;
        current = next;
        if (improvement < cfg.convergence_epsilon) break;
    }
    return result;
}

}  // namespace superalign
