#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <array>
#include <span>
#include <vector>

#include "superalign/kabsch.hpp"
#include "superalign/losses.hpp"

namespace superalign {

namespace detail {

// Differential state of the weighted rigid fit at a solution point.
struct KabschDifferential {
    Vec3 src_centroid;
    Vec3 dst_centroid;
    Mat3 cross_covariance;
    Mat3 u, v;        // SVD of the cross covariance
    Vec3 sigma;
    double det_sign;  // det(V U^T) branch
    RigidTransform transform;
    double weight_sum;
};

inline KabschDifferential kabsch_differential(std::span<const Vec3> src, std::span<const Vec3> dst,
                                              std::span<const double> weights) {
    KabschDifferential kd;
    const auto fit = weighted_fit_terms(src, dst, weights);
    kd.src_centroid = fit.src_centroid;
    kd.dst_centroid = fit.dst_centroid;
    kd.cross_covariance = fit.cross_covariance;
    kd.weight_sum = fit.weight_sum;

    Eigen::JacobiSVD<Mat3> svd(kd.cross_covariance, Eigen::ComputeFullU | Eigen::ComputeFullV);
    kd.u = svd.matrixU();
    kd.v = svd.matrixV();
    kd.sigma = svd.singularValues();
    kd.det_sign = (kd.v * kd.u.transpose()).determinant() < 0.0 ? -1.0 : 1.0;

    Mat3 d = Mat3::Identity();
    d(2, 2) = kd.det_sign;
    kd.transform.rotation = kd.v * d * kd.u.transpose();
    kd.transform.translation = kd.dst_centroid - kd.transform.rotation * kd.src_centroid;
    return kd;
}

// Directional derivative of the rotation for a perturbation dH of the cross
// covariance. Uses the constraint pair {R in SO(3), R H symmetric}: writing
// dR = R What with What = U W' U^T skew, the symmetry of d(RH) reduces in the
// V basis to a diagonal 3x3 system with denominators
//   sigma_1 + sigma_2,  s*sigma_1 + sigma_3,  s*sigma_2 + sigma_3,
// which is exactly the well-posedness condition of the differential.
inline Mat3 rotation_directional_derivative(const KabschDifferential& kd, const Mat3& dh,
                                            double guard = 1e-9) {
    const Mat3& r = kd.transform.rotation;
    const Mat3 a = dh.transpose() * r.transpose() - r * dh;  // antisymmetric
    const Mat3 a_v = kd.v.transpose() * a * kd.v;

    const double s = kd.det_sign;
    const double den01 = kd.sigma[0] + kd.sigma[1];
    const double den02 = s * kd.sigma[0] + kd.sigma[2];
    const double den12 = s * kd.sigma[1] + kd.sigma[2];
    const double scale = std::max(1.0, kd.sigma[0]);
    if (std::abs(den01) < guard * scale || std::abs(den02) < guard * scale ||
        std::abs(den12) < guard * scale) {
        fail(ErrorCode::GradientUndefined,
             "rotation derivative is ill-defined: singular values too close to degenerate");
    }

    Mat3 w_prime = Mat3::Zero();
    w_prime(0, 1) = a_v(0, 1) / den01;
    w_prime(1, 0) = -w_prime(0, 1);
    w_prime(0, 2) = a_v(0, 2) / den02;
    w_prime(2, 0) = -w_prime(0, 2);
    w_prime(1, 2) = a_v(1, 2) / den12;
    w_prime(2, 1) = -w_prime(1, 2);

    const Mat3 what = kd.u * w_prime * kd.u.transpose();
    return r * what;
}

// Subgradient of |r|_1 with a dead zone: residuals at the scale of solver
// round-off must not produce O(1) gradients at an exact fit.
inline double sign_with_deadzone(double x, double eps = 1e-12) {
    if (x > eps) return 1.0;
    if (x < -eps) return -1.0;
    return 0.0;
}

}  // namespace detail

/// Gradients of the transformation loss through the weighted Kabsch solver.
struct GradientBundle {
    std::vector<double> d_weights;   // dL/dw_i
    std::vector<Vec3> d_src_points;  // dL/dx_i (eval points held fixed)
    double loss = 0.0;
};

/// Analytic gradient of L_T(weighted_kabsch(src, dst, weights), gt) evaluated
/// at eval_points, with respect to the correspondence weights and the source
/// points. Differentiates through the weight normalization, the centroids,
/// the cross covariance, and the SVD-based rotation.
inline GradientBundle grad_transformation_loss(std::span<const Vec3> src, std::span<const Vec3> dst,
                                               std::span<const double> weights,
                                               const RigidTransform& gt,
                                               std::span<const Vec3> eval_points) {
    if (eval_points.empty()) fail(ErrorCode::EmptyInput, "gradient needs evaluation points");
    if (src.size() != dst.size() || src.size() != weights.size()) {
        fail(ErrorCode::Parameter, "src, dst and weights must have equal lengths");
    }

    const auto kd = detail::kabsch_differential(src, dst, weights);
    const RigidTransform& est = kd.transform;

    // L = (1/M) sum_m |R p_m + t - gt(p_m)|_1
    const double inv_m = 1.0 / static_cast<double>(eval_points.size());
    Mat3 dl_dr = Mat3::Zero();
    Vec3 dl_dt = Vec3::Zero();
    double loss = 0.0;
    for (const auto& p : eval_points) {
        const Vec3 residual = est.apply(p) - gt.apply(p);
        loss += residual.cwiseAbs().sum();
        Vec3 sgn;
        for (int c = 0; c < 3; ++c) sgn[c] = detail::sign_with_deadzone(residual[c]);
        dl_dr += inv_m * sgn * p.transpose();
        dl_dt += inv_m * sgn;
    }
    loss *= inv_m;

    // t = ybar - R xbar, so dL/dR picks up -dl_dt xbar^T and dL/d(centroids)
    // flow straight through
    const Mat3 dl_dr_total = dl_dr - dl_dt * kd.src_centroid.transpose();

    // Precompute dR/dH as nine directional derivatives of the basis entries.
    std::array<Mat3, 9> dr_dh;
    for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) {
            Mat3 e = Mat3::Zero();
            e(a, b) = 1.0;
            dr_dh[static_cast<std::size_t>(3 * a + b)] = detail::rotation_directional_derivative(kd, e);
        }
    }
    // Contract to dL/dH
    Mat3 dl_dh = Mat3::Zero();
    for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) {
            dl_dh(a, b) = dl_dr_total.cwiseProduct(dr_dh[static_cast<std::size_t>(3 * a + b)]).sum();
        }
    }

    GradientBundle out;
    out.loss = loss;
    out.d_weights.resize(weights.size());
    out.d_src_points.resize(src.size());

    const double inv_s = 1.0 / kd.weight_sum;
    for (std::size_t i = 0; i < src.size(); ++i) {
        const Vec3 x_c = src[i] - kd.src_centroid;
        const Vec3 y_c = dst[i] - kd.dst_centroid;

        // dH/dw_i = ((x_i - xbar)(y_i - ybar)^T - H) / S,
        // d(xbar)/dw_i = (x_i - xbar)/S, d(ybar)/dw_i = (y_i - ybar)/S
        const Mat3 dh = (x_c * y_c.transpose() - kd.cross_covariance) * inv_s;
        const double via_h = dl_dh.cwiseProduct(dh).sum();
        const double via_t = dl_dt.dot(y_c * inv_s - est.rotation * (x_c * inv_s));
        out.d_weights[i] = via_h + via_t;

        // dH/d(x_i)_c = a_i e_c (y_i - ybar)^T, d(xbar)/d(x_i)_c = a_i e_c
        const double a_i = weights[i] * inv_s;
        Vec3 g;
        for (int c = 0; c < 3; ++c) {
            Mat3 dh_x = Mat3::Zero();
            dh_x.row(c) = a_i * y_c.transpose();
            g[c] = dl_dh.cwiseProduct(dh_x).sum() - a_i * dl_dt.dot(est.rotation.col(c));
        }
        out.d_src_points[i] = g;
    }
    return out;
}

}  // namespace superalign
