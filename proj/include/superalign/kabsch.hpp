#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <span>
#include <vector>

#include "superalign/geometry.hpp"

namespace superalign {

namespace detail {

struct WeightedFit {
    Vec3 src_centroid = Vec3::Zero();
    Vec3 dst_centroid = Vec3::Zero();
    Mat3 cross_covariance = Mat3::Zero();  // H = sum a_i (x_i - xbar)(y_i - ybar)^T
    double weight_sum = 0.0;
};

inline WeightedFit weighted_fit_terms(std::span<const Vec3> src, std::span<const Vec3> dst,
                                      std::span<const double> weights) {
    WeightedFit fit;
    for (double w : weights) {
        if (w < 0.0 || !std::isfinite(w)) fail(ErrorCode::Parameter, "weights must be finite and >= 0");
        fit.weight_sum += w;
    }
    if (fit.weight_sum <= 0.0) fail(ErrorCode::Underdetermined, "all weights are zero");

    for (std::size_t i = 0; i < src.size(); ++i) {
        const double a = weights[i] / fit.weight_sum;
        fit.src_centroid += a * src[i];
        fit.dst_centroid += a * dst[i];
    }
    for (std::size_t i = 0; i < src.size(); ++i) {
        const double a = weights[i] / fit.weight_sum;
        fit.cross_covariance += a * (src[i] - fit.src_centroid) * (dst[i] - fit.dst_centroid).transpose();
    }
    return fit;
}

}  // namespace detail

/// Weighted Kabsch-Umeyama: the closed-form minimizer of
/// sum_i w_i ||R x_i + t - y_i||^2 over SE(3). Weights are normalized to sum 1
/// internally, so any common positive scaling of them is a no-op. The
/// det(V U^T) sign correction keeps the result a proper rotation even for
/// mirrored configurations.
inline RigidTransform weighted_kabsch_umeyama(std::span<const Vec3> src, std::span<const Vec3> dst,
                                              std::span<const double> weights) {
    if (src.size() != dst.size() || src.size() != weights.size()) {
        fail(ErrorCode::Parameter, "src, dst and weights must have equal lengths");
    }
    if (src.size() < 3) fail(ErrorCode::Underdetermined, "rigid fit needs at least 3 pairs");

    int positive = 0;
    for (double w : weights) {
        if (w > 0.0) ++positive;
    }
    if (positive < 3) fail(ErrorCode::Underdetermined, "rigid fit needs at least 3 positive weights");

    const auto fit = detail::weighted_fit_terms(src, dst, weights);

    Eigen::JacobiSVD<Mat3> svd(fit.cross_covariance, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vec3 sigma = svd.singularValues();
    // rank < 2 means the weighted points are collinear: rotation about the
    // line is unobservable
    if (sigma[1] <= 1e-9 * std::max(1.0, sigma[0]) && sigma[2] <= 1e-9 * std::max(1.0, sigma[0])) {
        fail(ErrorCode::DegenerateGeometry, "weighted points are collinear or coincident");
    }

    const Mat3 u = svd.matrixU();
    const Mat3 v = svd.matrixV();
    Mat3 d = Mat3::Identity();
    d(2, 2) = (v * u.transpose()).determinant() < 0.0 ? -1.0 : 1.0;

    RigidTransform out;
    out.rotation = v * d * u.transpose();
    out.translation = fit.dst_centroid - out.rotation * fit.src_centroid;
    return out;
}

inline RigidTransform weighted_kabsch_umeyama(const std::vector<Vec3>& src,
                                              const std::vector<Vec3>& dst,
                                              const std::vector<double>& weights) {
    return weighted_kabsch_umeyama(std::span<const Vec3>(src), std::span<const Vec3>(dst),
                                   std::span<const double>(weights));
}

/// Unweighted convenience overload.
inline RigidTransform kabsch_umeyama(const std::vector<Vec3>& src, const std::vector<Vec3>& dst) {
    const std::vector<double> ones(src.size(), 1.0);
    return weighted_kabsch_umeyama(src, dst, ones);
}

/// Weighted sum of squared residuals of a candidate transform.
inline double weighted_sse(std::span<const Vec3> src, std::span<const Vec3> dst,
                           std::span<const double> weights, const RigidTransform& t) {
    double sse = 0.0;
    for (std::size_t i = 0; i < src.size(); ++i) {
        sse += weights[i] * (t.apply(src[i]) - dst[i]).squaredNorm();
    }
    return sse;
}

}  // namespace superalign
