#pragma once

#include <map>
#include <string>
#include <vector>

#include "superalign/kdtree.hpp"
#include "superalign/matching.hpp"
#include "superalign/superpoints.hpp"

namespace superalign {

struct ThresholdConfig {
    double rr_rre_max = 5.0;       // degrees
    double rr_rte_max = 0.3;       // meters
    double ir_distance_max = 0.1;  // meters
    double fmr_ir_min = 0.05;

    void validate() const {
        if (rr_rre_max <= 0.0 || rr_rte_max <= 0.0 || ir_distance_max <= 0.0) {
            fail(ErrorCode::Parameter, "metric thresholds must be positive");
        }
        if (fmr_ir_min <= 0.0 || fmr_ir_min >= 1.0) {
            fail(ErrorCode::Parameter, "fmr_ir_min must be in (0, 1)");
        }
    }
};

struct MetricsReport {
    double rre_deg = 0.0;
    double rte_m = 0.0;
    double chamfer = 0.0;
    double inlier_ratio = 0.0;
    bool registered = false;
    std::map<std::string, double> timing_s;
};

/// Relative rotation error in degrees: the geodesic angle
/// acos((trace(R_gt^T R_est) - 1) / 2), evaluated through the chord form for
/// small angles where the plain trace-acos floors at ~1e-6 degrees.
inline double rre(const RigidTransform& est, const RigidTransform& gt) {
    return rad_to_deg(rotation_geodesic_angle(gt.rotation, est.rotation));
}

/// Relative translation error in meters.
inline double rte(const RigidTransform& est, const RigidTransform& gt) {
    return (est.translation - gt.translation).norm();
}

/// Symmetric Chamfer distance with squared nearest-neighbor distances.
inline double chamfer_distance(const PointCloud& x, const PointCloud& y) {
    if (x.empty() || y.empty()) fail(ErrorCode::EmptyInput, "chamfer_distance requires nonempty clouds");
    const KdTree ix(x), iy(y);

    const auto one_direction = [](const PointCloud& from, const KdTree& to) {
        std::vector<double> d2(from.size());
        parallel_for(from.size(), [&](std::size_t i) {
            const auto [idx, dist] = to.nearest(from.points[i]);
            (void)idx;
            d2[i] = dist * dist;
        });
        double total = 0.0;
        for (double v : d2) total += v;  // fixed order, schedule independent
        return total / static_cast<double>(from.size());
    };
    return one_direction(x, iy) + one_direction(y, ix);
}

/// Fraction of correspondences whose ground-truth-transformed source
/// superpoint lands within ir_distance_max of its matched target superpoint.
inline double inlier_ratio(const WeightedCorrespondences& wc, const SuperpointSet& sx,
                           const SuperpointSet& sy, const RigidTransform& gt,
                           const ThresholdConfig& cfg) {
    if (wc.empty()) fail(ErrorCode::EmptyInput, "inlier_ratio on empty correspondences");
    const double max_sq = cfg.ir_distance_max * cfg.ir_distance_max;
    std::size_t inliers = 0;
    for (const auto& pair : wc.pairs) {
        const Vec3& x = sx.points.points[static_cast<std::size_t>(pair.src)];
        const Vec3& y = sy.points.points[static_cast<std::size_t>(pair.dst)];
        if ((gt.apply(x) - y).squaredNorm() <= max_sq) ++inliers;
    }
    return static_cast<double>(inliers) / static_cast<double>(wc.size());
}

/// Fraction of pairs whose inlier ratio reaches the FMR floor.
inline double feature_matching_recall(const std::vector<double>& inlier_ratios,
                                      const ThresholdConfig& cfg) {
    if (inlier_ratios.empty()) fail(ErrorCode::EmptyInput, "feature_matching_recall on empty list");
    std::size_t hits = 0;
    for (double ir : inlier_ratios) {
        if (ir >= cfg.fmr_ir_min) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(inlier_ratios.size());
}

/// Fraction of reports with both errors inside the registration thresholds.
inline double registration_recall(const std::vector<MetricsReport>& reports,
                                  const ThresholdConfig& cfg) {
    if (reports.empty()) fail(ErrorCode::EmptyInput, "registration_recall on empty list");
    std::size_t hits = 0;
    for (const auto& r : reports) {
        if (r.rre_deg <= cfg.rr_rre_max && r.rte_m <= cfg.rr_rte_max) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(reports.size());
}

}  // namespace superalign
