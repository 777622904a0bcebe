#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "superalign/kdtree.hpp"
#include "superalign/matching.hpp"
#include "superalign/superpoints.hpp"

namespace superalign {

struct LossWeights {
    double alpha = 0.1;  // feature-loss weight
    double beta = 1.0;   // overlap-loss weight

    void validate() const {
        if (alpha < 0.0 || beta < 0.0) fail(ErrorCode::Parameter, "loss weights must be >= 0");
    }
};

/// Per-superpoint overlap targets in {0,1} and predictions clamped into
/// (0, 1) at 1e-7 so the cross-entropy logs stay finite.
struct OverlapLabels {
    std::vector<double> target;
    std::vector<double> predicted;

    static constexpr double kClamp = 1e-7;

    void clamp_predictions() {
        for (double& p : predicted) p = std::clamp(p, kClamp, 1.0 - kClamp);
    }

    void validate() const {
        if (target.size() != predicted.size()) {
            fail(ErrorCode::Parameter, "overlap target/prediction size mismatch");
        }
        for (double p : predicted) {
            if (!(p > 0.0 && p < 1.0)) fail(ErrorCode::Parameter, "overlap predictions must lie in (0, 1)");
        }
    }
};

/// Symmetric bilinear form for the contrastive feature loss, parameterized by
/// an upper-triangular U with W = U + U^T.
struct InfoNceParams {
    Eigen::MatrixXd upper;  // D x D, strictly lower triangle zero

    static InfoNceParams identity(Eigen::Index dim) {
        InfoNceParams p;
        p.upper = Eigen::MatrixXd::Identity(dim, dim);
        return p;
    }

    Eigen::MatrixXd bilinear() const { return upper + upper.transpose(); }

    void validate() const {
        if (upper.rows() != upper.cols()) fail(ErrorCode::Parameter, "U must be square");
        for (Eigen::Index i = 0; i < upper.rows(); ++i) {
            for (Eigen::Index j = 0; j < i; ++j) {
                if (upper(i, j) != 0.0) fail(ErrorCode::Parameter, "U must be upper triangular");
            }
        }
    }
};

/// Mean L1 distance between the two transforms' images of the evaluation
/// points: (1/M) sum_i | est(p_i) - gt(p_i) |_1.
inline double transformation_loss(const RigidTransform& est, const RigidTransform& gt,
                                  std::span<const Vec3> eval_points) {
    if (eval_points.empty()) fail(ErrorCode::EmptyInput, "transformation_loss needs evaluation points");
    double total = 0.0;
    for (const auto& p : eval_points) {
        total += (est.apply(p) - gt.apply(p)).cwiseAbs().sum();
    }
    return total / static_cast<double>(eval_points.size());
}

/// Mean binary cross-entropy (negated mean, the usual sign convention).
/// Predictions are clamped into (0, 1) so the logs stay finite.
inline double overlap_loss(const OverlapLabels& labels) {
    if (labels.target.size() != labels.predicted.size()) {
        fail(ErrorCode::Parameter, "overlap target/prediction size mismatch");
    }
    if (labels.target.empty()) return 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < labels.target.size(); ++i) {
        const double o = labels.target[i];
        const double p = std::clamp(labels.predicted[i], OverlapLabels::kClamp,
                                    1.0 - OverlapLabels::kClamp);
        total += o * std::log(p) + (1.0 - o) * std::log(1.0 - p);
    }
    return -total / static_cast<double>(labels.target.size());
}

/// d(overlap_loss)/d(predicted).
inline std::vector<double> overlap_loss_grad(const OverlapLabels& labels) {
    if (labels.target.size() != labels.predicted.size()) {
        fail(ErrorCode::Parameter, "overlap target/prediction size mismatch");
    }
    std::vector<double> grad(labels.predicted.size());
    const double inv_n = 1.0 / static_cast<double>(std::max<std::size_t>(1, labels.target.size()));
    for (std::size_t i = 0; i < grad.size(); ++i) {
        const double o = labels.target[i];
        const double p = std::clamp(labels.predicted[i], OverlapLabels::kClamp,
                                    1.0 - OverlapLabels::kClamp);
        grad[i] = -inv_n * (o / p - (1.0 - o) / (1.0 - p));
    }
    return grad;
}

namespace detail {

// Bilinear scores s(i,j) = fx_i^T W fy_j over the matched pairs.
inline Eigen::MatrixXd infonce_scores(const FeatureMatrix& fx, const FeatureMatrix& fy,
                                      const std::vector<Correspondence>& pairs,
                                      const Eigen::MatrixXd& w) {
    const Eigen::Index k = static_cast<Eigen::Index>(pairs.size());
    Eigen::MatrixXd s(k, k);
    for (Eigen::Index i = 0; i < k; ++i) {
        const Eigen::VectorXd wf = w * fx.rows.row(pairs[static_cast<std::size_t>(i)].src).transpose();
        for (Eigen::Index j = 0; j < k; ++j) {
            s(i, j) = fy.rows.row(pairs[static_cast<std::size_t>(j)].dst) * wf;
        }
    }
    return s;
}

}  // namespace detail

/// Contrastive feature loss over matched pairs: scores are exponentiated so
/// the positive/negative ratio is well defined for negative bilinear values,
/// which reduces to -(1/K) sum_i log softmax_j(s(i,.))[i], evaluated with
/// log-sum-exp stabilization.
inline double infonce_feature_loss(const FeatureMatrix& fx, const FeatureMatrix& fy,
                                   const std::vector<Correspondence>& pairs,
                                   const InfoNceParams& params) {
    params.validate();
    if (fx.dim() != fy.dim() || fx.dim() != params.upper.rows()) {
        fail(ErrorCode::Parameter, "feature/param dimension mismatch");
    }
    if (pairs.size() < 2) fail(ErrorCode::NeedsNegatives, "infonce needs at least 2 pairs");

    const Eigen::MatrixXd s = detail::infonce_scores(fx, fy, pairs, params.bilinear());
    const Eigen::Index k = s.rows();
    double total = 0.0;
    for (Eigen::Index i = 0; i < k; ++i) {
        const double mx = s.row(i).maxCoeff();
        const double lse = mx + std::log((s.row(i).array() - mx).exp().sum());
        total += lse - s(i, i);
    }
    return total / static_cast<double>(k);
}

struct InfoNceGradient {
    Eigen::MatrixXd d_fx;     // same shape as fx.rows; zero rows for unmatched superpoints
    Eigen::MatrixXd d_fy;
    Eigen::MatrixXd d_upper;  // gradient w.r.t. U
};

inline InfoNceGradient infonce_feature_loss_grad(const FeatureMatrix& fx, const FeatureMatrix& fy,
                                                 const std::vector<Correspondence>& pairs,
                                                 const InfoNceParams& params) {
    params.validate();
    if (pairs.size() < 2) fail(ErrorCode::NeedsNegatives, "infonce needs at least 2 pairs");

    const Eigen::MatrixXd w = params.bilinear();
    const Eigen::MatrixXd s = detail::infonce_scores(fx, fy, pairs, w);
    const Eigen::Index k = s.rows();
    const double inv_k = 1.0 / static_cast<double>(k);

    // dL/ds(i,j) = (softmax_row_i(j) - delta_ij) / K
    Eigen::MatrixXd ds(k, k);
    for (Eigen::Index i = 0; i < k; ++i) {
        const double mx = s.row(i).maxCoeff();
        Eigen::VectorXd p = (s.row(i).array() - mx).exp();
        p /= p.sum();
        for (Eigen::Index j = 0; j < k; ++j) {
            ds(i, j) = inv_k * (p[j] - (i == j ? 1.0 : 0.0));
        }
    }

    InfoNceGradient grad;
    grad.d_fx = Eigen::MatrixXd::Zero(fx.rows.rows(), fx.rows.cols());
    grad.d_fy = Eigen::MatrixXd::Zero(fy.rows.rows(), fy.rows.cols());
    Eigen::MatrixXd dw = Eigen::MatrixXd::Zero(w.rows(), w.cols());

    for (Eigen::Index i = 0; i < k; ++i) {
        const auto& pi = pairs[static_cast<std::size_t>(i)];
        const Eigen::VectorXd fxi = fx.rows.row(pi.src).transpose();
        for (Eigen::Index j = 0; j < k; ++j) {
            const auto& pj = pairs[static_cast<std::size_t>(j)];
            const Eigen::VectorXd fyj = fy.rows.row(pj.dst).transpose();
            const double g = ds(i, j);
            if (g == 0.0) continue;
            grad.d_fx.row(pi.src) += g * (w * fyj).transpose();
            grad.d_fy.row(pj.dst) += g * (w.transpose() * fxi).transpose();
            dw += g * fxi * fyj.transpose();
        }
    }

    // W = U + U^T, so dL/dU is the upper triangle of dW + dW^T
    grad.d_upper = (dw + dw.transpose()).triangularView<Eigen::Upper>();
    return grad;
}

/// Combined objective: L_T + alpha * L_f + beta * (L_oX + L_oY).
inline double total_loss(double transformation, double feature, double overlap_x, double overlap_y,
                         const LossWeights& w) {
    w.validate();
    if (!std::isfinite(transformation) || !std::isfinite(feature) || !std::isfinite(overlap_x) ||
        !std::isfinite(overlap_y)) {
        fail(ErrorCode::Parameter, "loss components must be finite");
    }
    return transformation + w.alpha * feature + w.beta * (overlap_x + overlap_y);
}

/// Ground-truth overlap labels: a source superpoint overlaps when its
/// gt-transformed position has a neighbor in the other superpoint set within
/// the radius; symmetric for the target side.
struct OverlapGroundTruth {
    std::vector<double> x_labels;
    std::vector<double> y_labels;
};

inline OverlapGroundTruth overlap_ground_truth(const SuperpointSet& x, const SuperpointSet& y,
                                               const RigidTransform& gt, double radius) {
    if (radius <= 0.0) fail(ErrorCode::Parameter, "overlap radius must be positive");
    OverlapGroundTruth out;
    out.x_labels.assign(x.size(), 0.0);
    out.y_labels.assign(y.size(), 0.0);
    if (x.size() == 0 || y.size() == 0) return out;

    const KdTree y_index(y.points);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const auto [idx, dist] = y_index.nearest(gt.apply(x.points.points[i]));
        (void)idx;
        out.x_labels[i] = dist <= radius ? 1.0 : 0.0;
    }
    const RigidTransform inv = gt.inverse();
    const KdTree x_index(x.points);
    for (std::size_t i = 0; i < y.size(); ++i) {
        const auto [idx, dist] = x_index.nearest(inv.apply(y.points.points[i]));
        (void)idx;
        out.y_labels[i] = dist <= radius ? 1.0 : 0.0;
    }
    return out;
}

}  // namespace superalign
