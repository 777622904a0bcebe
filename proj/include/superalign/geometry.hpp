#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>
#include <vector>

#include "superalign/core.hpp"

namespace superalign {

inline constexpr double kPi = 3.14159265358979323846;

inline double deg_to_rad(double deg) { return deg * kPi / 180.0; }
inline double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

// Projects a near-rotation onto SO(3) via SVD (polar factor, det forced +1).
inline Mat3 project_to_so3(const Mat3& m) {
    Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 r = svd.matrixU() * svd.matrixV().transpose();
    if (r.determinant() < 0.0) {
        Mat3 d = Mat3::Identity();
        d(2, 2) = -1.0;
        r = svd.matrixU() * d * svd.matrixV().transpose();
    }
    return r;
}

inline double so3_residual(const Mat3& r) {
    return (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff();
}

// Rigid SE(3) transform: rotation stored as a 3x3 matrix (consumed directly by
// the weighted solver and the rotation-error metric), translation in meters.
struct RigidTransform {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    static RigidTransform identity() { return {}; }

    static RigidTransform from_matrix(const Mat4& m) {
        RigidTransform t;
        t.rotation = m.block<3, 3>(0, 0);
        t.translation = m.block<3, 1>(0, 3);
        return t;
    }

    Mat4 matrix() const {
        Mat4 m = Mat4::Identity();
        m.block<3, 3>(0, 0) = rotation;
        m.block<3, 1>(0, 3) = translation;
        return m;
    }

    Vec3 apply(const Vec3& p) const { return rotation * p + translation; }

    // this after other: apply(other.apply(p))
    RigidTransform compose(const RigidTransform& other) const {
        RigidTransform out;
        out.rotation = rotation * other.rotation;
        out.translation = rotation * other.translation + translation;
        // long compose chains drift out of SO(3); snap back when measurable
        if (so3_residual(out.rotation) > 1e-7) {
            out.rotation = project_to_so3(out.rotation);
        }
        return out;
    }

    RigidTransform inverse() const {
        RigidTransform out;
        out.rotation = rotation.transpose();
        out.translation = -(rotation.transpose() * translation);
        return out;
    }

    bool is_valid(double tol = 1e-9) const {
        if (!rotation.allFinite() || !translation.allFinite()) return false;
        if (so3_residual(rotation) > tol) return false;
        return std::abs(rotation.determinant() - 1.0) <= tol;
    }

    // Geodesic rotation angle in radians.
    double rotation_angle() const {
        const double c = std::clamp((rotation.trace() - 1.0) / 2.0, -1.0, 1.0);
        return std::acos(c);
    }
};

inline RigidTransform axis_angle_transform(const Vec3& axis, double angle_rad,
                                           const Vec3& translation = Vec3::Zero()) {
    RigidTransform t;
    t.rotation = Eigen::AngleAxisd(angle_rad, axis.normalized()).toRotationMatrix();
    t.translation = translation;
    return t;
}

inline Eigen::Quaterniond to_quaternion(const Mat3& r) { return Eigen::Quaterniond(r); }
inline Mat3 from_quaternion(const Eigen::Quaterniond& q) { return q.normalized().toRotationMatrix(); }

/// Geodesic angle between two rotations in radians. The trace-acos form
/// saturates near sqrt(machine eps) for tiny angles; the Frobenius chord
/// ||R-I||_F = 2 sqrt(2) sin(angle/2) stays exact there, so small angles use
/// the chord and large ones fall back to the trace.
inline double rotation_geodesic_angle(const Mat3& a, const Mat3& b) {
    const Mat3 rel = a.transpose() * b;
    const double chord = (rel - Mat3::Identity()).norm();
    if (chord < 1.0) {
        return 2.0 * std::asin(std::clamp(chord / 2.8284271247461903, 0.0, 1.0));
    }
    return std::acos(std::clamp((rel.trace() - 1.0) / 2.0, -1.0, 1.0));
}

/// Ordered 3D point set with optional unit normals.
struct PointCloud {
    std::vector<Vec3> points;
    std::vector<Vec3> normals;  // empty or same length as points

    std::size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }
    bool has_normals() const { return !normals.empty(); }

    void validate() const {
        for (const auto& p : points) {
            if (!p.allFinite()) fail(ErrorCode::Data, "point cloud contains non-finite coordinates");
        }
        if (!normals.empty()) {
            if (normals.size() != points.size()) {
                fail(ErrorCode::Data, "normal count does not match point count");
            }
            for (const auto& n : normals) {
                if (!n.allFinite() || std::abs(n.norm() - 1.0) > 1e-6) {
                    fail(ErrorCode::Data, "normals must be unit length");
                }
            }
        }
    }

    PointCloud transformed(const RigidTransform& t) const {
        PointCloud out;
        out.points.reserve(points.size());
        for (const auto& p : points) out.points.push_back(t.apply(p));
        out.normals.reserve(normals.size());
        for (const auto& n : normals) out.normals.push_back(t.rotation * n);
        return out;
    }

    Vec3 centroid() const {
        Vec3 c = Vec3::Zero();
        for (const auto& p : points) c += p;
        return points.empty() ? c : Vec3(c / static_cast<double>(points.size()));
    }

    // Axis-aligned bounding-box diagonal; used as the cloud scale.
    double diameter() const {
        if (points.empty()) return 0.0;
        Vec3 lo = points.front(), hi = points.front();
        for (const auto& p : points) {
            lo = lo.cwiseMin(p);
            hi = hi.cwiseMax(p);
        }
        return (hi - lo).norm();
    }
};

inline Vec3 random_unit_vector(Rng& rng) {
    while (true) {
        Vec3 v(rng.normal(), rng.normal(), rng.normal());
        const double n = v.norm();
        if (n > 1e-12) return v / n;
    }
}

/// Seed-deterministic random rigid transform with bounded rotation angle
/// (degrees) and translation norm (meters).
inline RigidTransform random_se3(std::uint64_t seed, double max_angle_deg,
                                 double max_translation) {
    if (max_angle_deg < 0.0 || max_angle_deg > 180.0) {
        fail(ErrorCode::Parameter, "max_angle must be in [0, 180] degrees");
    }
    if (max_translation < 0.0) {
        fail(ErrorCode::Parameter, "max_translation must be non-negative");
    }
    Rng rng(seed);
    RigidTransform t;
    if (max_angle_deg > 0.0) {
        const Vec3 axis = random_unit_vector(rng);
        const double angle = rng.uniform(0.0, deg_to_rad(max_angle_deg));
        t.rotation = Eigen::AngleAxisd(angle, axis).toRotationMatrix();
    }
    if (max_translation > 0.0) {
        t.translation = random_unit_vector(rng) * rng.uniform(0.0, max_translation);
    }
    return t;
}

}  // namespace superalign
