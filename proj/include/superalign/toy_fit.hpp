#pragma once

#include <Eigen/Dense>
#include <vector>

#include "superalign/kabsch_grad.hpp"
#include "superalign/losses.hpp"
#include "superalign/matching.hpp"
#include "superalign/metrics.hpp"

namespace superalign {

/// Synthetic instance for the end-to-end optimization demo: two index-aligned
/// superpoint sets related by a known transform, with free feature embeddings
/// as the optimization variables.
struct ToyFitInstance {
    std::vector<Vec3> src;
    std::vector<Vec3> dst;  // dst[i] = gt(src[i])
    RigidTransform gt;
    Eigen::MatrixXd fx0;  // initial embeddings
    Eigen::MatrixXd fy0;
};

inline ToyFitInstance make_toy_instance(std::uint64_t seed, int count = 64, int dim = 16) {
    if (count < 4 || dim < 2) fail(ErrorCode::Parameter, "toy instance needs count >= 4, dim >= 2");
    ToyFitInstance inst;
    Rng rng(seed);
    inst.gt = random_se3(seed ^ 0x5eedULL, 45.0, 0.5);
    inst.src.reserve(static_cast<std::size_t>(count));
    inst.dst.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        const Vec3 p(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5));
        inst.src.push_back(p);
        inst.dst.push_back(inst.gt.apply(p));
    }
    inst.fx0.resize(count, dim);
    inst.fy0.resize(count, dim);
    for (int i = 0; i < count; ++i) {
        for (int j = 0; j < dim; ++j) {
            inst.fx0(i, j) = 0.1 * rng.normal();
            inst.fy0(i, j) = 0.1 * rng.normal();
        }
    }
    return inst;
}

struct ToyFitStep {
    double total = 0.0;
    double transformation = 0.0;
    double feature = 0.0;
    double overlap = 0.0;  // L_oX + L_oY
    double rre_deg = 0.0;
};

struct ToyFitTrace {
    std::vector<ToyFitStep> steps;  // steps + 1 entries, index 0 is the initial state
    bool diverged = false;
};

namespace detail {

struct ToyForward {
    WeightedCorrespondences wc;
    CorrelationMatrix c;
    RigidTransform est;
    ToyFitStep record;
};

inline ToyForward toy_forward(const ToyFitInstance& inst, const Eigen::MatrixXd& fx,
                              const Eigen::MatrixXd& fy, const Eigen::VectorXd& zx,
                              const Eigen::VectorXd& zy, const InfoNceParams& nce,
                              const LossWeights& lw) {
    const int n = static_cast<int>(inst.src.size());
    ToyForward fwd;

    FeatureMatrix fmx, fmy;
    fmx.rows = fx;
    fmy.rows = fy;
    fwd.c = global_softmax_correlation(fmx, fmy);
    fwd.wc = extract_correspondences(fwd.c, fmx, fmy);

    std::vector<Vec3> src, dst;
    std::vector<double> w;
    for (const auto& pair : fwd.wc.pairs) {
        src.push_back(inst.src[static_cast<std::size_t>(pair.src)]);
        dst.push_back(inst.dst[static_cast<std::size_t>(pair.dst)]);
        w.push_back(pair.weight);
    }
    fwd.est = weighted_kabsch_umeyama(src, dst, w);

    fwd.record.transformation = transformation_loss(fwd.est, inst.gt, inst.src);
    fwd.record.rre_deg = rre(fwd.est, inst.gt);

    // ground-truth correspondences (index aligned) drive the feature loss
    std::vector<Correspondence> gt_pairs(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) gt_pairs[static_cast<std::size_t>(i)] = {i, i, 1.0};
    fwd.record.feature = infonce_feature_loss(fmx, fmy, gt_pairs, nce);

    OverlapLabels ox, oy;
    ox.target.assign(static_cast<std::size_t>(n), 1.0);  // full-overlap instance
    oy.target.assign(static_cast<std::size_t>(n), 1.0);
    ox.predicted.resize(static_cast<std::size_t>(n));
    oy.predicted.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        ox.predicted[static_cast<std::size_t>(i)] = 1.0 / (1.0 + std::exp(-zx[i]));
        oy.predicted[static_cast<std::size_t>(i)] = 1.0 / (1.0 + std::exp(-zy[i]));
    }
    ox.clamp_predictions();
    oy.clamp_predictions();
    fwd.record.overlap = overlap_loss(ox) + overlap_loss(oy);

    fwd.record.total = total_loss(fwd.record.transformation, fwd.record.feature, overlap_loss(ox),
                                  overlap_loss(oy), lw);
    return fwd;
}

}  // namespace detail

/// Gradient descent on free feature embeddings and overlap logits, minimizing
/// the combined loss through the softmax matching and the weighted rigid
/// solver. Correspondences are re-extracted every step; gradients flow through
/// the correlation weights and the solver, with the point geometry fixed.
inline ToyFitTrace toy_end_to_end_fit(const ToyFitInstance& inst, int steps, double step_size,
                                      LossWeights lw = {}) {
    if (steps < 0 || step_size < 0.0) fail(ErrorCode::Parameter, "steps and step_size must be >= 0");
    lw.validate();

    const int n = static_cast<int>(inst.src.size());
    const Eigen::Index dim = inst.fx0.cols();
    Eigen::MatrixXd fx = inst.fx0;
    Eigen::MatrixXd fy = inst.fy0;
    Eigen::VectorXd zx = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd zy = Eigen::VectorXd::Zero(n);
    const InfoNceParams nce = InfoNceParams::identity(dim);
    // the BCE mean makes dL/dz scale like 1/n; undo that so the logits train
    // at the same pace as the features
    const double z_step = step_size * static_cast<double>(n);

    ToyFitTrace trace;
    auto fwd = detail::toy_forward(inst, fx, fy, zx, zy, nce, lw);
    trace.steps.push_back(fwd.record);
    const double initial_total = fwd.record.total;

    std::vector<Correspondence> gt_pairs(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) gt_pairs[static_cast<std::size_t>(i)] = {i, i, 1.0};

    for (int step = 0; step < steps; ++step) {
        // --- transformation-loss path: d L_T / d features via the solver and
        // the softmax weights of the matched entries
        std::vector<Vec3> src, dst;
        std::vector<double> w;
        for (const auto& pair : fwd.wc.pairs) {
            src.push_back(inst.src[static_cast<std::size_t>(pair.src)]);
            dst.push_back(inst.dst[static_cast<std::size_t>(pair.dst)]);
            w.push_back(pair.weight);
        }

        Eigen::MatrixXd g_fx = Eigen::MatrixXd::Zero(n, dim);
        Eigen::MatrixXd g_fy = Eigen::MatrixXd::Zero(n, dim);
        bool have_lt_grad = true;
        GradientBundle bundle;
        try {
            bundle = grad_transformation_loss(src, dst, w, inst.gt, inst.src);
        } catch (const Error&) {
            have_lt_grad = false;  // degenerate geometry this step; skip the path
        }
        if (have_lt_grad) {
            for (std::size_t k = 0; k < fwd.wc.pairs.size(); ++k) {
                const auto& pair = fwd.wc.pairs[k];
                const double gw = bundle.d_weights[k];
                if (gw == 0.0) continue;
                const Eigen::Index i = pair.src;
                // w_k = C(i, j); dC(i,j)/dlogit(i,l) = C(i,j) (delta_lj - C(i,l))
                const double cij = pair.weight;
                for (Eigen::Index l = 0; l < n; ++l) {
                    const double dw_dl = cij * ((l == pair.dst ? 1.0 : 0.0) - fwd.c.entries(i, l));
                    if (dw_dl == 0.0) continue;
                    g_fx.row(i) += gw * dw_dl * fy.row(l);
                    g_fy.row(l) += gw * dw_dl * fx.row(i);
                }
            }
        }

        // --- feature-loss path
        FeatureMatrix fmx, fmy;
        fmx.rows = fx;
        fmy.rows = fy;
        const InfoNceGradient nce_grad = infonce_feature_loss_grad(fmx, fmy, gt_pairs, nce);
        g_fx += lw.alpha * nce_grad.d_fx;
        g_fy += lw.alpha * nce_grad.d_fy;

        // --- overlap path: d BCE / d z = (sigmoid(z) - target) / n per side
        Eigen::VectorXd g_zx(n), g_zy(n);
        for (int i = 0; i < n; ++i) {
            const double px = 1.0 / (1.0 + std::exp(-zx[i]));
            const double py = 1.0 / (1.0 + std::exp(-zy[i]));
            g_zx[i] = lw.beta * (px - 1.0) / n;
            g_zy[i] = lw.beta * (py - 1.0) / n;
        }

        fx -= step_size * g_fx;
        fy -= step_size * g_fy;
        zx -= z_step * g_zx;
        zy -= z_step * g_zy;

        fwd = detail::toy_forward(inst, fx, fy, zx, zy, nce, lw);
        trace.steps.push_back(fwd.record);
        if (fwd.record.total > 10.0 * initial_total) {
            trace.diverged = true;
            break;
        }
    }
    return trace;
}

}  // namespace superalign
