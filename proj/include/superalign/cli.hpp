#pragma once

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <string>

#include "superalign/superalign.hpp"

namespace superalign {

namespace detail {

// Report values are rounded to 6 decimals; precise transforms live in the
// pose file.
inline double round6(double v) {
    const double r = std::round(v * 1e6) / 1e6;
    return r == 0.0 ? 0.0 : r;
}

inline nlohmann::json report_json(const RegistrationResult& result, double filter_fraction,
                                  int histogram_bins) {
    nlohmann::json j;
    const Mat4 m = result.transform.matrix();
    std::vector<double> transform;
    transform.reserve(16);
    for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) transform.push_back(round6(m(r, c)));
    }
    j["transform"] = transform;
    j["residual"] = round6(result.residual);
    j["num_correspondences"] = result.correspondences.size();
    j["filter_fraction"] = round6(filter_fraction);
    j["flagged"] = result.flagged;
    if (result.flagged) j["flag_reason"] = result.flag_reason;
    j["source_superpoints"] = result.source_superpoints;
    j["target_superpoints"] = result.target_superpoints;

    nlohmann::json timings = nlohmann::json::object();
    const bool with_time = timing_output_enabled();
    for (const auto& t : result.timings) {
        timings[t.stage] = with_time ? round6(t.seconds) : 0.0;
    }
    j["timings"] = timings;

    const WeightHistogram hist = weight_histogram(result.correspondences, histogram_bins);
    nlohmann::json hj;
    std::vector<double> edges;
    for (double e : hist.edges) edges.push_back(round6(e));
    hj["edges"] = edges;
    hj["counts"] = hist.counts;
    j["weight_histogram"] = hj;
    return j;
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) fail(ErrorCode::Format, "cannot open for writing: " + path);
    out << content;
}

inline std::string correspondences_csv(const WeightedCorrespondences& wc) {
    std::string out = "src_idx,dst_idx,weight\n";
    char buf[96];
    for (const auto& pair : wc.pairs) {
        std::snprintf(buf, sizeof(buf), "%d,%d,%.6f\n", pair.src, pair.dst, pair.weight);
        out += buf;
    }
    return out;
}

inline PipelineConfig config_from_option(const std::string& path) {
    return path.empty() ? PipelineConfig{} : load_pipeline_config(path);
}

}  // namespace detail

/// CLI entry point. Exit codes: 0 success, 1 recoverable pipeline failure
/// (flagged result), 2 usage or file-format errors.
inline int cli_main(int argc, const char* const* argv) {
    CLI::App app{"superalign: rigid point-cloud registration via softmax superpoint matching"};
    app.require_subcommand(1);

    // --- register
    auto* reg = app.add_subcommand("register", "estimate the source-to-target transform");
    std::string reg_source, reg_target, reg_config, reg_out_pose, reg_out_report;
    int reg_hist_bins = 10;
    reg->add_option("--source", reg_source, "source cloud (.ply or .xyz)")->required();
    reg->add_option("--target", reg_target, "target cloud (.ply or .xyz)")->required();
    reg->add_option("--config", reg_config, "pipeline config file");
    reg->add_option("--out-pose", reg_out_pose, "write the 4x4 pose here");
    reg->add_option("--out-report", reg_out_report, "write the JSON report here");
    reg->add_option("--histogram-bins", reg_hist_bins, "weight-histogram bins in the report");

    // --- match
    auto* match = app.add_subcommand("match", "emit weighted superpoint correspondences");
    std::string match_source, match_target, match_matcher = "softmax", match_config, match_out;
    double match_fraction = 1.0;
    match->add_option("--source", match_source)->required();
    match->add_option("--target", match_target)->required();
    match->add_option("--matcher", match_matcher, "softmax, dual or sinkhorn")->required();
    match->add_option("--top-fraction", match_fraction, "keep this weight fraction (default all)");
    match->add_option("--config", match_config, "pipeline config file");
    match->add_option("--out", match_out, "output CSV (default stdout)");

    // --- eval
    auto* eval = app.add_subcommand("eval", "compare an estimated pose against ground truth");
    std::string eval_est, eval_gt, eval_source, eval_target, eval_config;
    eval->add_option("--est", eval_est, "estimated pose file")->required();
    eval->add_option("--gt", eval_gt, "ground-truth pose file")->required();
    eval->add_option("--source", eval_source, "source cloud for CD/IR");
    eval->add_option("--target", eval_target, "target cloud for CD/IR");
    eval->add_option("--config", eval_config, "pipeline config file");

    // --- bench
    auto* bench = app.add_subcommand("bench", "run an ablation suite over synthetic pairs");
    std::string bench_suite, bench_out;
    bench->add_option("--suite", bench_suite, "suite config file")->required();
    bench->add_option("--out", bench_out, "output CSV")->required();

    // --- demo-fit
    auto* demo = app.add_subcommand("demo-fit", "end-to-end feature optimization demo");
    std::uint64_t demo_seed = 0;
    int demo_steps = 200;
    double demo_step_size = 0.5;
    std::string demo_out;
    demo->add_option("--seed", demo_seed);
    demo->add_option("--steps", demo_steps);
    demo->add_option("--step-size", demo_step_size);
    demo->add_option("--out", demo_out, "trace CSV (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (reg->parsed()) {
            const PointCloud x = read_cloud(reg_source);
            const PointCloud y = read_cloud(reg_target);
            const PipelineConfig cfg = detail::config_from_option(reg_config);
            const RegistrationResult result = register_pair(x, y, cfg);
            if (!reg_out_pose.empty()) write_pose(result.transform, reg_out_pose);
            const nlohmann::json report = detail::report_json(result, cfg.filter_fraction, reg_hist_bins);
            if (!reg_out_report.empty()) {
                detail::write_text_file(reg_out_report, report.dump(2) + "\n");
            } else {
                std::cout << report.dump(2) << "\n";
            }
            return result.flagged ? 1 : 0;
        }

        if (match->parsed()) {
            const PointCloud x = read_cloud(match_source);
            const PointCloud y = read_cloud(match_target);
            PipelineConfig cfg = detail::config_from_option(match_config);
            cfg.matcher = matcher_from_name(match_matcher);
            cfg.filter_fraction = match_fraction;
            const MatchOutput match_result = match_pair(x, y, cfg);
            const std::string csv = detail::correspondences_csv(match_result.filtered);
            if (match_out.empty()) {
                std::cout << csv;
            } else {
                detail::write_text_file(match_out, csv);
            }
            return 0;
        }

        if (eval->parsed()) {
            const RigidTransform est = read_pose(eval_est);
            const RigidTransform gt = read_pose(eval_gt);
            char buf[64];
            std::snprintf(buf, sizeof(buf), "rre %.6f\n", rre(est, gt));
            std::cout << buf;
            std::snprintf(buf, sizeof(buf), "rte %.6f\n", rte(est, gt));
            std::cout << buf;
            if (!eval_source.empty() && !eval_target.empty()) {
                const PointCloud x = read_cloud(eval_source);
                const PointCloud y = read_cloud(eval_target);
                const PipelineConfig cfg = detail::config_from_option(eval_config);
                std::snprintf(buf, sizeof(buf), "cd %.6f\n", chamfer_distance(x.transformed(est), y));
                std::cout << buf;
                const MatchOutput match_result = match_pair(x, y, cfg);
                std::snprintf(buf, sizeof(buf), "ir %.6f\n",
                              inlier_ratio(match_result.filtered, match_result.source_superpoints,
                                           match_result.target_superpoints, gt, cfg.thresholds));
                std::cout << buf;
            }
            return 0;
        }

        if (bench->parsed()) {
            const AblationSuite suite = load_suite(bench_suite);
            const AblationReport report = run_ablation(suite);
            detail::write_text_file(bench_out, ablation_csv(report));
            return 0;
        }

        if (demo->parsed()) {
            if (demo_steps < 0) fail(ErrorCode::Parameter, "--steps must be >= 0");
            const ToyFitInstance inst = make_toy_instance(demo_seed);
            const ToyFitTrace trace = toy_end_to_end_fit(inst, demo_steps, demo_step_size);
            std::string csv = "step,total_loss,transformation_loss,feature_loss,overlap_loss,rre_deg\n";
            char buf[192];
            for (std::size_t i = 0; i < trace.steps.size(); ++i) {
                const auto& s = trace.steps[i];
                std::snprintf(buf, sizeof(buf), "%zu,%.6f,%.6f,%.6f,%.6f,%.6f\n", i, s.total,
                              s.transformation, s.feature, s.overlap, s.rre_deg);
                csv += buf;
            }
            if (demo_out.empty()) {
                std::cout << csv;
            } else {
                detail::write_text_file(demo_out, csv);
            }
            return trace.diverged ? 1 : 0;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        switch (e.code()) {
            case ErrorCode::Format:
            case ErrorCode::Parameter:
            case ErrorCode::Data:
                return 2;
            default:
                return 1;  // recoverable pipeline failure
        }
    }
    return 2;
}

}  // namespace superalign
