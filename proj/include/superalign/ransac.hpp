#pragma once

#include <array>
#include <vector>

#include "superalign/kabsch.hpp"
#include "superalign/matching.hpp"
#include "superalign/superpoints.hpp"

namespace superalign {

struct RansacConfig {
    int max_iterations = 10000;
    double inlier_threshold = 0.05;  // meters
    int sample_size = 3;
    double confidence = 0.999;
    std::uint64_t seed = 0;
    bool weighted_sampling = false;  // hypothesis sampling by correspondence weight

    void validate() const {
        if (sample_size < 3 || sample_size > 8) {
            fail(ErrorCode::Parameter, "ransac sample_size must be in [3, 8]");
        }
        if (inlier_threshold <= 0.0) fail(ErrorCode::Parameter, "ransac inlier_threshold must be positive");
        if (confidence <= 0.0 || confidence >= 1.0) {
            fail(ErrorCode::Parameter, "ransac confidence must be in (0, 1)");
        }
        if (max_iterations < 1) fail(ErrorCode::Parameter, "ransac max_iterations must be >= 1");
    }
};

struct RansacResult {
    RigidTransform transform;
    std::vector<int> inliers;  // indices into the correspondence list
    int iterations_run = 0;
    bool failed = false;       // no hypothesis reached 3 inliers
};

namespace detail {

// Draw sample_size distinct correspondence indices. Weighted mode samples by
// cumulative weight (without replacement via rejection).
inline bool draw_sample(Rng& rng, std::size_t count, int sample_size, bool weighted,
                        const std::vector<double>& cumulative, std::array<int, 8>& out) {
    for (int s = 0; s < sample_size; ++s) {
        int pick = -1;
        for (int attempt = 0; attempt < 64; ++attempt) {
            std::size_t candidate;
            if (weighted) {
                const double r = rng.uniform() * cumulative.back();
                candidate = static_cast<std::size_t>(
                    std::lower_bound(cumulative.begin(), cumulative.end(), r) - cumulative.begin());
                if (candidate >= count) candidate = count - 1;
            } else {
                candidate = rng.uniform_index(count);
            }
            bool duplicate = false;
            for (int t = 0; t < s; ++t) {
                if (out[static_cast<std::size_t>(t)] == static_cast<int>(candidate)) duplicate = true;
            }
            if (!duplicate) {
                pick = static_cast<int>(candidate);
                break;
            }
        }
        if (pick < 0) return false;
        out[static_cast<std::size_t>(s)] = pick;
    }
    return true;
}

}  // namespace detail

/// Classic hypothesize-and-verify pose estimation over weighted superpoint
/// correspondences: minimal Kabsch hypotheses, inlier counting at the distance
/// threshold, adaptive early exit on the confidence bound, and a final
/// weighted refit on the best inlier set. Deterministic for a fixed seed.
inline RansacResult ransac_estimate(const WeightedCorrespondences& wc, const SuperpointSet& sx,
                                    const SuperpointSet& sy, const RansacConfig& cfg) {
    cfg.validate();
    const std::size_t count = wc.size();
    if (count < static_cast<std::size_t>(cfg.sample_size)) {
        fail(ErrorCode::Parameter, "fewer correspondences than the ransac sample size");
    }

    std::vector<Vec3> src_pts(count), dst_pts(count);
    for (std::size_t i = 0; i < count; ++i) {
        src_pts[i] = sx.points.points[static_cast<std::size_t>(wc.pairs[i].src)];
        dst_pts[i] = sy.points.points[static_cast<std::size_t>(wc.pairs[i].dst)];
    }

    std::vector<double> cumulative;
    if (cfg.weighted_sampling) {
        cumulative.reserve(count);
        double acc = 0.0;
        for (const auto& pair : wc.pairs) {
            acc += std::max(pair.weight, 1e-12);
            cumulative.push_back(acc);
        }
    }

    Rng rng(cfg.seed);
    const double threshold_sq = cfg.inlier_threshold * cfg.inlier_threshold;
    std::vector<Vec3> sample_src(static_cast<std::size_t>(cfg.sample_size));
    std::vector<Vec3> sample_dst(static_cast<std::size_t>(cfg.sample_size));
    const std::vector<double> sample_w(static_cast<std::size_t>(cfg.sample_size), 1.0);
    std::array<int, 8> sample_idx{};

    std::size_t best_count = 0;
    RigidTransform best_model;
    int iteration_bound = cfg.max_iterations;
    int it = 0;
    for (; it < iteration_bound; ++it) {
        if (!detail::draw_sample(rng, count, cfg.sample_size, cfg.weighted_sampling, cumulative,
                                 sample_idx)) {
            continue;
        }
        for (int s = 0; s < cfg.sample_size; ++s) {
            sample_src[static_cast<std::size_t>(s)] = src_pts[static_cast<std::size_t>(sample_idx[static_cast<std::size_t>(s)])];
            sample_dst[static_cast<std::size_t>(s)] = dst_pts[static_cast<std::size_t>(sample_idx[static_cast<std::size_t>(s)])];
        }

        RigidTransform hypothesis;
        try {
            hypothesis = weighted_kabsch_umeyama(sample_src, sample_dst, sample_w);
        } catch (const Error&) {
            continue;  // collinear minimal sample
        }

        std::size_t inlier_count = 0;
        for (std::size_t i = 0; i < count; ++i) {
            if ((hypothesis.apply(src_pts[i]) - dst_pts[i]).squaredNorm() <= threshold_sq) {
                ++inlier_count;
            }
        }
        if (inlier_count > best_count) {
            best_count = inlier_count;
            best_model = hypothesis;
            // standard adaptive bound: enough iterations that an all-inlier
            // sample was drawn with the configured confidence
            const double inlier_ratio = static_cast<double>(inlier_count) / static_cast<double>(count);
            const double p_good = std::pow(inlier_ratio, cfg.sample_size);
            if (p_good >= 1.0 - 1e-15) {
                iteration_bound = it + 1;
            } else if (p_good > 0.0) {
                const double needed = std::log(1.0 - cfg.confidence) / std::log(1.0 - p_good);
                iteration_bound = static_cast<int>(
                    std::min<double>(cfg.max_iterations, std::max(1.0, std::ceil(needed))));
            }
        }
    }

    RansacResult result;
    result.iterations_run = it;
    if (best_count < 3) {
        result.failed = true;
        result.transform = RigidTransform::identity();
        return result;
    }

    // refit on the inlier set with the correspondence weights
    std::vector<Vec3> in_src, in_dst;
    std::vector<double> in_w;
    for (std::size_t i = 0; i < count; ++i) {
        if ((best_model.apply(src_pts[i]) - dst_pts[i]).squaredNorm() <= threshold_sq) {
            in_src.push_back(src_pts[i]);
            in_dst.push_back(dst_pts[i]);
            in_w.push_back(std::max(wc.pairs[i].weight, 1e-12));
            result.inliers.push_back(static_cast<int>(i));
        }
    }
    try {
        result.transform = weighted_kabsch_umeyama(in_src, in_dst, in_w);
    } catch (const Error&) {
        result.transform = best_model;  // inliers degenerate, keep the hypothesis
    }
    return result;
}

}  // namespace superalign
