#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <vector>

#include "superalign/core.hpp"
#include "superalign/kdtree.hpp"
#include "superalign/superpoints.hpp"

namespace superalign {

/// Per-superpoint descriptor rows (N x D). Rows flagged degenerate are zero
/// and excluded from matching, keeping superpoint indices aligned.
struct FeatureMatrix {
    Eigen::MatrixXd rows;               // N x D
    std::vector<std::uint8_t> degenerate;  // empty means all rows valid

    Eigen::Index count() const { return rows.rows(); }
    Eigen::Index dim() const { return rows.cols(); }

    bool is_degenerate(Eigen::Index i) const {
        return !degenerate.empty() && degenerate[static_cast<std::size_t>(i)] != 0;
    }

    void validate() const {
        if (!rows.allFinite()) fail(ErrorCode::Data, "feature matrix contains non-finite entries");
        if (rows.cols() < 2) fail(ErrorCode::Data, "feature dimension must be >= 2");
        if (!degenerate.empty() && degenerate.size() != static_cast<std::size_t>(rows.rows())) {
            fail(ErrorCode::Data, "degenerate flag count does not match row count");
        }
    }
};

struct DescriptorConfig {
    double neighborhood_radius = 0.45;  // meters; must cover the voxel size
    int histogram_bins = 12;
    bool normalize_rows = true;

    // 3 covariance eigenvalue ratios + the normal-angle histogram
    int feature_dim() const { return 3 + histogram_bins; }

    void validate() const {
        if (neighborhood_radius <= 0.0) fail(ErrorCode::Parameter, "neighborhood_radius must be positive");
        if (histogram_bins < 2) fail(ErrorCode::Parameter, "histogram_bins must be >= 2");
    }
};

namespace detail {

// Smallest-eigenvector normal, sign-oriented toward the cloud centroid.
inline Vec3 estimated_normal(const Eigen::SelfAdjointEigenSolver<Mat3>& eig,
                             const Vec3& superpoint, const Vec3& cloud_centroid) {
    Vec3 n = eig.eigenvectors().col(0);  // ascending eigenvalues in Eigen
    if (n.dot(cloud_centroid - superpoint) < 0.0) n = -n;
    const double len = n.norm();
    return len > 1e-12 ? Vec3(n / len) : Vec3(0, 0, 1);
}

}  // namespace detail

/// Handcrafted local-geometry descriptor: sorted covariance eigenvalue ratios
/// concatenated with a histogram of angles between neighbor offsets and the
/// local normal. Rotation and translation of the input leave the eigenvalue
/// ratios unchanged. Superpoints with fewer than 3 neighbors inside the radius
/// get a zero row and a degenerate flag.
inline FeatureMatrix compute_local_descriptors(const SuperpointSet& sp, const PointCloud& full,
                                               const DescriptorConfig& cfg) {
    cfg.validate();
    const Eigen::Index n = static_cast<Eigen::Index>(sp.size());
    const int dim = cfg.feature_dim();

    FeatureMatrix out;
    out.rows = Eigen::MatrixXd::Zero(n, dim);
    out.degenerate.assign(static_cast<std::size_t>(n), 0);
    if (n == 0) return out;

    const KdTree index(full);
    const Vec3 cloud_centroid = full.centroid();

    parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
        const Vec3& center = sp.points.points[i];
        const std::vector<int> nbrs = index.radius_search(center, cfg.neighborhood_radius);
        if (nbrs.size() < 3) {
            out.degenerate[i] = 1;
            return;
        }

        Vec3 mean = Vec3::Zero();
        for (int j : nbrs) mean += full.points[static_cast<std::size_t>(j)];
        mean /= static_cast<double>(nbrs.size());

        Mat3 cov = Mat3::Zero();
        for (int j : nbrs) {
            const Vec3 d = full.points[static_cast<std::size_t>(j)] - mean;
            cov += d * d.transpose();
        }
        cov /= static_cast<double>(nbrs.size());

        Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
        const Vec3 lambda = eig.eigenvalues().cwiseMax(0.0);
        const double total = lambda.sum();
        if (total <= 1e-18) {  // all neighbors coincide
            out.degenerate[i] = 1;
            return;
        }

        Eigen::VectorXd row = Eigen::VectorXd::Zero(dim);
        row[0] = lambda[2] / total;  // descending order
        row[1] = lambda[1] / total;
        row[2] = lambda[0] / total;

        Vec3 normal;
        if (full.has_normals()) {
            Vec3 acc = Vec3::Zero();
            for (int j : nbrs) acc += full.normals[static_cast<std::size_t>(j)];
            const double len = acc.norm();
            normal = len > 1e-12 ? Vec3(acc / len) : detail::estimated_normal(eig, center, cloud_centroid);
        } else {
            normal = detail::estimated_normal(eig, center, cloud_centroid);
        }

        int counted = 0;
        for (int j : nbrs) {
            const Vec3 offset = full.points[static_cast<std::size_t>(j)] - center;
            const double len = offset.norm();
            if (len < 1e-12) continue;
            const double cosine = std::clamp(offset.dot(normal) / len, -1.0, 1.0);
            const double angle = std::acos(cosine);  // [0, pi]
            int bin = static_cast<int>(angle / kPi * cfg.histogram_bins);
            bin = std::clamp(bin, 0, cfg.histogram_bins - 1);
            row[3 + bin] += 1.0;
            ++counted;
        }
        if (counted > 0) row.tail(cfg.histogram_bins) /= static_cast<double>(counted);

        if (cfg.normalize_rows) {
            const double norm = row.norm();
            if (norm > 1e-12) row /= norm;
        }
        out.rows.row(static_cast<Eigen::Index>(i)) = row;
    });

    return out;
}

}  // namespace superalign
