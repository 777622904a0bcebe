#pragma once

#include <cstdio>
#include <string>
#include <vector>

#include "superalign/config.hpp"
#include "superalign/metrics.hpp"
#include "superalign/pipeline.hpp"
#include "superalign/synthetic.hpp"

namespace superalign {

// SUPERALIGN_TIMING=off zeroes every timing field written to output files so
// reruns are byte-identical; computation is unaffected.
inline bool timing_output_enabled() {
    if (const char* env = std::getenv("SUPERALIGN_TIMING")) {
        const std::string v(env);
        if (v == "off" || v == "0") return false;
    }
    return true;
}

struct AblationCombo {
    std::string name;
    MatcherKind matcher = MatcherKind::GlobalSoftmax;
    double filter_fraction = 0.15;
    EstimatorKind estimator = EstimatorKind::WeightedKabsch;
};

struct AblationSuite {
    SyntheticPairSpec pair_spec;
    int pair_count = 10;
    PipelineConfig base;  // matcher/filter/estimator fields are overridden per combo
    std::vector<AblationCombo> combos;
};

struct AblationRow {
    AblationCombo combo;
    double mean_rre_deg = 0.0;  // over pairs that completed
    double mean_rte_m = 0.0;
    double rr = 0.0;            // failures count against recall
    double mean_ir = 0.0;
    double mean_estimate_time_s = 0.0;  // per-pair transform-estimation time
    int failures = 0;
};

struct AblationReport {
    std::vector<AblationRow> rows;
    ThresholdConfig thresholds;
};

/// Parses a bench suite file: pairs.* for the synthetic spec, pairs.count,
/// pipeline/descriptor/... keys for the shared base config, and numbered
/// combo.<n>.{name,matcher,filter,estimator} rows.
inline AblationSuite load_suite(const std::string& path) {
    KeyValueConfig kv = KeyValueConfig::parse_file(path);
    AblationSuite suite;
    suite.pair_count = static_cast<int>(kv.take_int("pairs.count", suite.pair_count));
    if (suite.pair_count < 1) fail(ErrorCode::Parameter, "pairs.count must be >= 1");
    suite.pair_spec = pair_spec_from(kv);
    suite.base = pipeline_config_from(kv);

    for (int n = 1;; ++n) {
        const std::string prefix = "combo." + std::to_string(n) + ".";
        if (kv.keys_with_prefix(prefix).empty()) break;
        AblationCombo combo;
        combo.name = kv.take_string(prefix + "name", "combo " + std::to_string(n));
        combo.matcher = matcher_from_name(kv.take_string(prefix + "matcher", "softmax"));
        combo.filter_fraction = kv.take_double(prefix + "filter", 0.15);
        combo.estimator = estimator_from_name(kv.take_string(prefix + "estimator", "weighted_kabsch"));
        if (combo.filter_fraction <= 0.0 || combo.filter_fraction > 1.0) {
            fail(ErrorCode::Parameter, "combo filter fraction must be in (0, 1]");
        }
        suite.combos.push_back(combo);
    }
    if (suite.combos.empty()) fail(ErrorCode::Parameter, path + ": suite declares no combos");
    kv.reject_unknown();
    return suite;
}

/// Runs every matcher x filter x estimator combination over the suite's
/// synthetic pairs. Individual pair failures are recorded, never fatal. Pairs
/// run in parallel; aggregation is in pair-index order, so reports are
/// deterministic for a fixed suite.
inline AblationReport run_ablation(const AblationSuite& suite) {
    AblationReport report;
    report.thresholds = suite.base.thresholds;

    struct PairOutcome {
        bool completed = false;
        MetricsReport metrics;
        double estimate_seconds = 0.0;
        double ir = 0.0;
    };

    for (const auto& combo : suite.combos) {
        PipelineConfig cfg = suite.base;
        cfg.matcher = combo.matcher;
        cfg.filter_fraction = combo.filter_fraction;
        cfg.estimator = combo.estimator;

        std::vector<PairOutcome> outcomes(static_cast<std::size_t>(suite.pair_count));
        parallel_for(static_cast<std::size_t>(suite.pair_count), [&](std::size_t i) {
            SyntheticPairSpec spec = suite.pair_spec;
            spec.seed = suite.pair_spec.seed + i;
            PipelineConfig pair_cfg = cfg;
            pair_cfg.seed = spec.seed;
            try {
                const SyntheticPair pair = generate_synthetic_pair(spec);
                const RegistrationResult res = register_pair(pair.source, pair.target, pair_cfg);

                PairOutcome& out = outcomes[i];
                out.completed = true;
                out.metrics.rre_deg = rre(res.transform, pair.gt);
                out.metrics.rte_m = rte(res.transform, pair.gt);
                out.metrics.registered = out.metrics.rre_deg <= cfg.thresholds.rr_rre_max &&
                                         out.metrics.rte_m <= cfg.thresholds.rr_rte_max;
                out.estimate_seconds = res.stage_seconds("estimate");

                const SuperpointSet sx = voxel_downsample(pair.source, pair_cfg.voxel_size);
                const SuperpointSet sy = voxel_downsample(pair.target, pair_cfg.voxel_size);
                out.ir = inlier_ratio(res.correspondences, sx, sy, pair.gt, cfg.thresholds);
            } catch (const Error&) {
                outcomes[i].completed = false;
            }
        });

        AblationRow row;
        row.combo = combo;
        int completed = 0;
        for (const auto& out : outcomes) {
            if (!out.completed) {
                ++row.failures;
                continue;
            }
            ++completed;
            row.mean_rre_deg += out.metrics.rre_deg;
            row.mean_rte_m += out.metrics.rte_m;
            row.mean_ir += out.ir;
            row.mean_estimate_time_s += out.estimate_seconds;
            if (out.metrics.registered) row.rr += 1.0;
        }
        if (completed > 0) {
            row.mean_rre_deg /= completed;
            row.mean_rte_m /= completed;
            row.mean_ir /= completed;
            row.mean_estimate_time_s /= completed;
        }
        row.rr /= static_cast<double>(suite.pair_count);
        report.rows.push_back(row);
    }
    return report;
}

inline std::string ablation_csv(const AblationReport& report) {
    const bool with_time = timing_output_enabled();
    std::string out = "combo,matcher,filter,estimator,rre_deg,rte_m,rr,mean_ir,time_s\n";
    char buf[256];
    for (const auto& row : report.rows) {
        std::string name = row.combo.name;
        if (name.find(',') != std::string::npos) name = "\"" + name + "\"";
        std::snprintf(buf, sizeof(buf), "%s,%s,%.6g,%s,%.6g,%.6g,%.6g,%.6g,%.6g\n", name.c_str(),
                      matcher_name(row.combo.matcher).c_str(), row.combo.filter_fraction,
                      estimator_name(row.combo.estimator).c_str(), row.mean_rre_deg, row.mean_rte_m,
                      row.rr, row.mean_ir, with_time ? row.mean_estimate_time_s : 0.0);
        out += buf;
    }
    return out;
}

}  // namespace superalign
