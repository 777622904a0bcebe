#pragma once

#include <chrono>
#include <string>
#include <utility>
#include <vector>

#include "superalign/descriptors.hpp"
#include "superalign/feature_io.hpp"
#include "superalign/icp.hpp"
#include "superalign/kabsch.hpp"
#include "superalign/matching.hpp"
#include "superalign/metrics.hpp"
#include "superalign/ransac.hpp"
#include "superalign/superpoints.hpp"

namespace superalign {

enum class MatcherKind { GlobalSoftmax, DualSoftmax, Sinkhorn };
enum class EstimatorKind { WeightedKabsch, Ransac, KabschIcp };

inline MatcherKind matcher_from_name(const std::string& name) {
    if (name == "softmax") return MatcherKind::GlobalSoftmax;
    if (name == "dual") return MatcherKind::DualSoftmax;
    if (name == "sinkhorn") return MatcherKind::Sinkhorn;
    fail(ErrorCode::Parameter, "unknown matcher '" + name + "' (softmax, dual, sinkhorn)");
}

inline std::string matcher_name(MatcherKind kind) {
    switch (kind) {
        case MatcherKind::GlobalSoftmax: return "softmax";
        case MatcherKind::DualSoftmax: return "dual";
        case MatcherKind::Sinkhorn: return "sinkhorn";
    }
    return "softmax";
}

inline EstimatorKind estimator_from_name(const std::string& name) {
    if (name == "weighted_kabsch") return EstimatorKind::WeightedKabsch;
    if (name == "ransac") return EstimatorKind::Ransac;
    if (name == "kabsch_icp") return EstimatorKind::KabschIcp;
    fail(ErrorCode::Parameter,
         "unknown estimator '" + name + "' (weighted_kabsch, ransac, kabsch_icp)");
}

inline std::string estimator_name(EstimatorKind kind) {
    switch (kind) {
        case EstimatorKind::WeightedKabsch: return "weighted_kabsch";
        case EstimatorKind::Ransac: return "ransac";
        case EstimatorKind::KabschIcp: return "kabsch_icp";
    }
    return "weighted_kabsch";
}

struct PipelineConfig {
    // defaults are tuned for unit-scale clouds like the bundled
    // synthetic shapes; set scale-appropriate values for other data
    double voxel_size = 0.0075;
    DescriptorConfig descriptor;
    std::string source_feature_path;  // when set, features are loaded, not computed
    std::string target_feature_path;

    MatcherKind matcher = MatcherKind::GlobalSoftmax;
    double temperature = 1.0;
    SinkhornConfig sinkhorn;

    double filter_fraction = 0.15;  // 1.0 disables filtering
    EstimatorKind estimator = EstimatorKind::WeightedKabsch;
    RansacConfig ransac;
    IcpConfig icp;

    double injected_outlier_fraction = 0.0;  // robustness experiments only
    ThresholdConfig thresholds;
    std::uint64_t seed = 0;

    void validate() const {
        if (voxel_size <= 0.0) fail(ErrorCode::Parameter, "voxel_size must be positive");
        descriptor.validate();
        if (temperature <= 0.0) fail(ErrorCode::Parameter, "temperature must be positive");
        sinkhorn.validate();
        if (filter_fraction <= 0.0 || filter_fraction > 1.0) {
            fail(ErrorCode::Parameter, "filter_fraction must be in (0, 1]");
        }
        if (injected_outlier_fraction < 0.0 || injected_outlier_fraction >= 1.0) {
            fail(ErrorCode::Parameter, "injected_outlier_fraction must be in [0, 1)");
        }
        ransac.validate();
        icp.validate();
        thresholds.validate();
    }
};

struct StageTiming {
    std::string stage;
    double seconds = 0.0;
};

struct RegistrationResult {
    RigidTransform transform;  // source -> target
    WeightedCorrespondences correspondences;
    double residual = 0.0;  // weighted RMS alignment error over the used pairs
    std::vector<StageTiming> timings;
    bool flagged = false;  // estimator failed or stalled; transform still usable as reported
    std::string flag_reason;
    std::size_t source_superpoints = 0;
    std::size_t target_superpoints = 0;

    double total_seconds() const {
        double total = 0.0;
        for (const auto& t : timings) total += t.seconds;
        return total;
    }
    double stage_seconds(const std::string& name) const {
        for (const auto& t : timings) {
            if (t.stage == name) return t.seconds;
        }
        return 0.0;
    }
};

namespace detail {

class StageClock {
public:
    StageClock() : start_(std::chrono::steady_clock::now()) {}

    double lap() {
        const auto now = std::chrono::steady_clock::now();
        const double s = std::chrono::duration<double>(now - start_).count();
        start_ = now;
        return s;
    }

private:
    std::chrono::steady_clock::time_point start_;
};

[[noreturn]] inline void rethrow_with_stage(const Error& e, const std::string& stage) {
    throw Error(e.code(), stage + ": " + std::string(e.what()));
}

}  // namespace detail

/// Matching phase shared by register_pair and the match CLI: downsample,
/// describe (or load features), correlate, extract, filter. When the source
/// has more superpoints than the target the matching roles are swapped
/// internally, so correspondences always cover the smaller side.
struct MatchOutput {
    SuperpointSet source_superpoints;
    SuperpointSet target_superpoints;
    WeightedCorrespondences all;       // argmax pairs before filtering
    WeightedCorrespondences filtered;  // after the top-fraction filter
    std::vector<StageTiming> timings;
};

inline MatchOutput match_pair(const PointCloud& x, const PointCloud& y, const PipelineConfig& cfg) {
    cfg.validate();
    MatchOutput out;
    detail::StageClock clock;

    try {
        out.source_superpoints = voxel_downsample(x, cfg.voxel_size);
        out.target_superpoints = voxel_downsample(y, cfg.voxel_size);
    } catch (const Error& e) {
        detail::rethrow_with_stage(e, "downsample");
    }
    out.timings.push_back({"downsample", clock.lap()});

    FeatureMatrix fx, fy;
    try {
        fx = cfg.source_feature_path.empty()
                 ? compute_local_descriptors(out.source_superpoints, x, cfg.descriptor)
                 : load_features(cfg.source_feature_path);
        fy = cfg.target_feature_path.empty()
                 ? compute_local_descriptors(out.target_superpoints, y, cfg.descriptor)
                 : load_features(cfg.target_feature_path);
        if (fx.count() != static_cast<Eigen::Index>(out.source_superpoints.size()) ||
            fy.count() != static_cast<Eigen::Index>(out.target_superpoints.size())) {
            fail(ErrorCode::Parameter, "feature row count does not match superpoint count");
        }
    } catch (const Error& e) {
        detail::rethrow_with_stage(e, "descriptors");
    }
    out.timings.push_back({"descriptors", clock.lap()});

    // row side = smaller superpoint set
    const bool swapped = out.source_superpoints.size() > out.target_superpoints.size();
    const FeatureMatrix& row_f = swapped ? fy : fx;
    const FeatureMatrix& col_f = swapped ? fx : fy;

    CorrelationMatrix c;
    try {
        switch (cfg.matcher) {
            case MatcherKind::GlobalSoftmax:
                c = global_softmax_correlation(row_f, col_f, cfg.temperature);
                break;
            case MatcherKind::DualSoftmax:
                c = dual_softmax_correlation(row_f, col_f, cfg.temperature);
                break;
            case MatcherKind::Sinkhorn:
                c = sinkhorn_match(row_f, col_f, cfg.sinkhorn);
                break;
        }
        c.rows_are_source = !swapped;
    } catch (const Error& e) {
        detail::rethrow_with_stage(e, "correlation");
    }
    out.timings.push_back({"correlation", clock.lap()});

    try {
        out.all = extract_correspondences(c, row_f, col_f);
        if (cfg.injected_outlier_fraction > 0.0) {
            // replace nothing; append random gross pairs weighted by their own
            // correlation entries, so filtering sees the true low scores
            Rng rng(cfg.seed ^ 0x0071ULL);
            const double f = cfg.injected_outlier_fraction;
            const std::size_t extra = static_cast<std::size_t>(
                std::llround(f / (1.0 - f) * static_cast<double>(out.all.size())));
            for (std::size_t k = 0; k < extra; ++k) {
                const int ri = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(c.entries.rows())));
                const int rj = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(c.entries.cols())));
                Correspondence pair;
                pair.src = c.rows_are_source ? ri : rj;
                pair.dst = c.rows_are_source ? rj : ri;
                pair.weight = c.entries(ri, rj);
                out.all.pairs.push_back(pair);
            }
        }
    } catch (const Error& e) {
        detail::rethrow_with_stage(e, "extract");
    }
    out.timings.push_back({"extract", clock.lap()});

    try {
        out.filtered = cfg.filter_fraction >= 1.0 ? out.all
                                                  : filter_top_fraction(out.all, cfg.filter_fraction);
    } catch (const Error& e) {
        detail::rethrow_with_stage(e, "filter");
    }
    out.timings.push_back({"filter", clock.lap()});
    return out;
}

/// Full registration pipeline: the matching phase above plus the configured
/// estimator, with per-stage timing and the weighted RMS residual of the used
/// pairs.
inline RegistrationResult register_pair(const PointCloud& x, const PointCloud& y,
                                        const PipelineConfig& cfg) {
    MatchOutput match = match_pair(x, y, cfg);
    const SuperpointSet& sx = match.source_superpoints;
    const SuperpointSet& sy = match.target_superpoints;
    WeightedCorrespondences& filtered = match.filtered;

    RegistrationResult result;
    result.source_superpoints = sx.size();
    result.target_superpoints = sy.size();
    result.timings = std::move(match.timings);
    detail::StageClock clock;

    std::vector<Vec3> src_pts, dst_pts;
    std::vector<double> wts;
    for (const auto& pair : filtered.pairs) {
        src_pts.push_back(sx.points.points[static_cast<std::size_t>(pair.src)]);
        dst_pts.push_back(sy.points.points[static_cast<std::size_t>(pair.dst)]);
        wts.push_back(pair.weight);
    }

    try {
        switch (cfg.estimator) {
            case EstimatorKind::WeightedKabsch: {
                result.transform = weighted_kabsch_umeyama(src_pts, dst_pts, wts);
                break;
            }
            case EstimatorKind::Ransac: {
                const RansacResult rr = ransac_estimate(filtered, sx, sy, cfg.ransac);
                result.transform = rr.transform;
                if (rr.failed) {
                    result.flagged = true;
                    result.flag_reason = "ransac found no model with 3 inliers";
                }
                break;
            }
            case EstimatorKind::KabschIcp: {
                const RigidTransform init = weighted_kabsch_umeyama(src_pts, dst_pts, wts);
                const IcpResult icp = icp_refine(x, y, init, cfg.icp);
                result.transform = icp.transform;
                if (icp.stalled) {
                    result.flagged = true;
                    result.flag_reason = "icp stalled";
                }
                break;
            }
        }
    } catch (const Error& e) {
        detail::rethrow_with_stage(e, "estimate");
    }
    result.timings.push_back({"estimate", clock.lap()});

    result.correspondences = std::move(filtered);
    double wsum = 0.0, sse = 0.0;
    for (std::size_t i = 0; i < src_pts.size(); ++i) {
        wsum += wts[i];
        sse += wts[i] * (result.transform.apply(src_pts[i]) - dst_pts[i]).squaredNorm();
    }
    result.residual = wsum > 0.0 ? std::sqrt(sse / wsum) : 0.0;
    return result;
}

}  // namespace superalign
