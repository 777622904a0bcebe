#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <numeric>
#include <vector>

#include "superalign/descriptors.hpp"

namespace superalign {

/// Row-stochastic similarity matrix between two feature sets. Rows index the
/// cloud named by rows_are_source; every row sums to 1.
struct CorrelationMatrix {
    Eigen::MatrixXd entries;  // rows x cols, entries in [0, 1]
    bool rows_are_source = true;

    void validate(double tol = 1e-6) const {
        for (Eigen::Index i = 0; i < entries.rows(); ++i) {
            const double s = entries.row(i).sum();
            if (std::abs(s - 1.0) > tol) fail(ErrorCode::Data, "correlation row does not sum to 1");
        }
        if ((entries.array() < -tol).any() || (entries.array() > 1.0 + tol).any()) {
            fail(ErrorCode::Data, "correlation entries outside [0, 1]");
        }
    }
};

struct Correspondence {
    int src = 0;
    int dst = 0;
    double weight = 0.0;
};

/// Matched superpoint index pairs with their correlation weights.
struct WeightedCorrespondences {
    std::vector<Correspondence> pairs;

    std::size_t size() const { return pairs.size(); }
    bool empty() const { return pairs.empty(); }
};

struct SinkhornConfig {
    int iterations = 100;
    double epsilon = 0.05;  // entropic regularization
    bool slack = true;      // dustbin row/column, dropped before return

    void validate() const {
        if (iterations < 1) fail(ErrorCode::Parameter, "sinkhorn iterations must be >= 1");
        if (epsilon <= 0.0) fail(ErrorCode::Parameter, "sinkhorn epsilon must be positive");
    }
};

namespace detail {

inline void check_dims(const FeatureMatrix& fx, const FeatureMatrix& fy) {
    if (fx.dim() != fy.dim()) {
        fail(ErrorCode::Parameter, "feature dimension mismatch between clouds");
    }
}

// Max-subtracted row softmax; rows flagged degenerate become uniform rather
// than carrying meaningless logits.
inline void softmax_rows_in_place(Eigen::MatrixXd& logits, const FeatureMatrix& fx) {
    const Eigen::Index cols = logits.cols();
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        if (fx.is_degenerate(i)) {
            logits.row(i).setConstant(1.0 / static_cast<double>(cols));
            continue;
        }
        const double mx = logits.row(i).maxCoeff();
        logits.row(i) = (logits.row(i).array() - mx).exp();
        logits.row(i) /= logits.row(i).sum();
    }
}

}  // namespace detail

/// Normalized correlation matrix: softmax over the feature dot products, rows
/// normalized across the column cloud. Temperature 1 applies the dot products
/// unscaled.
inline CorrelationMatrix global_softmax_correlation(const FeatureMatrix& fx, const FeatureMatrix& fy,
                                                    double temperature = 1.0) {
    detail::check_dims(fx, fy);
    if (temperature <= 0.0) fail(ErrorCode::Parameter, "temperature must be positive");

    CorrelationMatrix c;
    c.entries = (fx.rows * fy.rows.transpose()) / temperature;
    detail::softmax_rows_in_place(c.entries, fx);
    return c;
}

/// Elementwise product of row-wise and column-wise softmaxes, renormalized per
/// row to share the CorrelationMatrix contract. Renormalization never changes
/// a row's argmax.
inline CorrelationMatrix dual_softmax_correlation(const FeatureMatrix& fx, const FeatureMatrix& fy,
                                                  double temperature = 1.0) {
    detail::check_dims(fx, fy);
    if (temperature <= 0.0) fail(ErrorCode::Parameter, "temperature must be positive");

    const Eigen::MatrixXd logits = (fx.rows * fy.rows.transpose()) / temperature;
    Eigen::MatrixXd row_sm = logits;
    detail::softmax_rows_in_place(row_sm, fx);

    Eigen::MatrixXd col_sm = logits;
    for (Eigen::Index j = 0; j < col_sm.cols(); ++j) {
        if (fy.is_degenerate(j)) {
            col_sm.col(j).setConstant(1.0 / static_cast<double>(col_sm.rows()));
            continue;
        }
        const double mx = col_sm.col(j).maxCoeff();
        col_sm.col(j) = (col_sm.col(j).array() - mx).exp();
        col_sm.col(j) /= col_sm.col(j).sum();
    }

    CorrelationMatrix c;
    c.entries = row_sm.cwiseProduct(col_sm);
    for (Eigen::Index i = 0; i < c.entries.rows(); ++i) {
        const double s = c.entries.row(i).sum();
        if (s > 0.0) {
            c.entries.row(i) /= s;
        } else {
            c.entries.row(i).setConstant(1.0 / static_cast<double>(c.entries.cols()));
        }
    }
    return c;
}

/// Log-domain Sinkhorn transport plan for exp(<fx_i, fy_j>/epsilon), iterated
/// for a fixed number of row/column scaling rounds. With slack enabled the
/// plan carries a dustbin row and column (logit 0) which the caller drops.
inline Eigen::MatrixXd sinkhorn_transport_plan(const FeatureMatrix& fx, const FeatureMatrix& fy,
                                               const SinkhornConfig& cfg) {
    detail::check_dims(fx, fy);
    cfg.validate();

    const Eigen::Index m = fx.count();
    const Eigen::Index n = fy.count();
    const Eigen::Index rows = m + (cfg.slack ? 1 : 0);
    const Eigen::Index cols = n + (cfg.slack ? 1 : 0);

    Eigen::MatrixXd log_kernel = Eigen::MatrixXd::Zero(rows, cols);
    log_kernel.topLeftCorner(m, n) = (fx.rows * fy.rows.transpose()) / cfg.epsilon;

    Eigen::VectorXd u = Eigen::VectorXd::Zero(rows);
    Eigen::VectorXd v = Eigen::VectorXd::Zero(cols);

    const auto logsumexp = [](const Eigen::VectorXd& z) {
        const double mx = z.maxCoeff();
        return mx + std::log((z.array() - mx).exp().sum());
    };

    for (int it = 0; it < cfg.iterations; ++it) {
        for (Eigen::Index i = 0; i < rows; ++i) {
            u[i] = -logsumexp(log_kernel.row(i).transpose() + v);
        }
        for (Eigen::Index j = 0; j < cols; ++j) {
            v[j] = -logsumexp(log_kernel.col(j) + u);
        }
    }

    Eigen::MatrixXd plan(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) {
            plan(i, j) = std::exp(u[i] + log_kernel(i, j) + v[j]);
        }
    }
    return plan;
}

/// Sinkhorn matcher: converged transport plan with any dustbin dropped, then
/// row-renormalized to satisfy the CorrelationMatrix invariants.
inline CorrelationMatrix sinkhorn_match(const FeatureMatrix& fx, const FeatureMatrix& fy,
                                        const SinkhornConfig& cfg) {
    const Eigen::MatrixXd plan = sinkhorn_transport_plan(fx, fy, cfg);

    CorrelationMatrix c;
    c.entries = plan.topLeftCorner(fx.count(), fy.count());
    for (Eigen::Index i = 0; i < c.entries.rows(); ++i) {
        const double s = c.entries.row(i).sum();
        if (s > 0.0) {
            c.entries.row(i) /= s;
        } else {
            c.entries.row(i).setConstant(1.0 / static_cast<double>(c.entries.cols()));
        }
    }
    return c;
}

/// Argmax correspondences for the smaller cloud, weighted by the correlation
/// entry at the matched pair. Degenerate superpoints on either side never
/// produce or receive matches; argmax ties resolve to the smaller index.
inline WeightedCorrespondences extract_correspondences(const CorrelationMatrix& c,
                                                       const FeatureMatrix& row_features,
                                                       const FeatureMatrix& col_features) {
    const Eigen::Index m = c.entries.rows();
    const Eigen::Index n = c.entries.cols();
    if (m != row_features.count() || n != col_features.count()) {
        fail(ErrorCode::Parameter, "correlation size inconsistent with feature sets");
    }

    WeightedCorrespondences wc;
    const bool iterate_rows = m <= n;
    const Eigen::Index outer = iterate_rows ? m : n;

    for (Eigen::Index i = 0; i < outer; ++i) {
        if (iterate_rows ? row_features.is_degenerate(i) : col_features.is_degenerate(i)) continue;
        int best = -1;
        double best_value = -1.0;
        const Eigen::Index inner = iterate_rows ? n : m;
        for (Eigen::Index j = 0; j < inner; ++j) {
            if (iterate_rows ? col_features.is_degenerate(j) : row_features.is_degenerate(j)) continue;
            const double value = iterate_rows ? c.entries(i, j) : c.entries(j, i);
            if (value > best_value) {
                best_value = value;
                best = static_cast<int>(j);
            }
        }
        if (best < 0) continue;
        Correspondence pair;
        pair.src = iterate_rows ? static_cast<int>(i) : best;  // row-cloud index first
        pair.dst = iterate_rows ? best : static_cast<int>(i);
        pair.weight = best_value;
        if (!c.rows_are_source) std::swap(pair.src, pair.dst);
        wc.pairs.push_back(pair);
    }

    if (wc.empty()) fail(ErrorCode::EmptyCorrespondence, "no usable rows to match");
    return wc;
}

/// Keeps the ceil(fraction * count) highest-weight pairs, ties resolved to the
/// smaller pair index; output preserves the input pair order. The default 0.15
/// keeps the top 15%.
inline WeightedCorrespondences filter_top_fraction(const WeightedCorrespondences& wc,
                                                   double fraction = 0.15) {
    if (wc.empty()) fail(ErrorCode::EmptyInput, "filter_top_fraction on empty correspondences");
    if (fraction <= 0.0 || fraction > 1.0) {
        fail(ErrorCode::Parameter, "filter fraction must be in (0, 1]");
    }
    if (fraction == 1.0) return wc;

    const std::size_t keep = static_cast<std::size_t>(
        std::ceil(fraction * static_cast<double>(wc.size())));
    if (keep < 3) {
        fail(ErrorCode::Underdetermined,
             "fewer than 3 pairs would survive filtering; the rigid fit needs at least 3");
    }

    std::vector<std::size_t> order(wc.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double wa = wc.pairs[a].weight;
        const double wb = wc.pairs[b].weight;
        return wa > wb || (wa == wb && a < b);
    });
    order.resize(keep);
    std::sort(order.begin(), order.end());

    WeightedCorrespondences out;
    out.pairs.reserve(keep);
    for (std::size_t idx : order) out.pairs.push_back(wc.pairs[idx]);
    return out;
}

/// Uniform-width histogram of correspondence weights over [0, 1].
struct WeightHistogram {
    std::vector<double> edges;  // bins + 1 edges
    std::vector<std::size_t> counts;
};

inline WeightHistogram weight_histogram(const WeightedCorrespondences& wc, int bins) {
    if (bins < 1) fail(ErrorCode::Parameter, "histogram needs at least 1 bin");
    WeightHistogram h;
    h.edges.resize(static_cast<std::size_t>(bins) + 1);
    for (int b = 0; b <= bins; ++b) {
        h.edges[static_cast<std::size_t>(b)] = static_cast<double>(b) / bins;
    }
    h.counts.assign(static_cast<std::size_t>(bins), 0);
    for (const auto& pair : wc.pairs) {
        int bin = static_cast<int>(pair.weight * bins);
        bin = std::clamp(bin, 0, bins - 1);  // weight 1.0 lands in the last bin
        ++h.counts[static_cast<std::size_t>(bin)];
    }
    return h;
}

}  // namespace superalign
