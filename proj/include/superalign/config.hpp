#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "superalign/pipeline.hpp"
#include "superalign/synthetic.hpp"

namespace superalign {

namespace detail {

inline std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

}  // namespace detail

/// Flat key=value configuration with dotted section prefixes
/// (matcher.temperature=0.5). '#' starts a comment. Typos surface as errors:
/// consumers must drain every parsed key and reject leftovers.
class KeyValueConfig {
public:
    static KeyValueConfig parse_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) fail(ErrorCode::Format, "cannot open config file: " + path);
        std::ostringstream buffer;
        buffer << in.rdbuf();
        return parse_text(buffer.str(), path);
    }

    static KeyValueConfig parse_text(const std::string& text, const std::string& origin = "<config>") {
        KeyValueConfig cfg;
        cfg.origin_ = origin;
        std::istringstream in(text);
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line = line.substr(0, hash);
            line = detail::trim(line);
            if (line.empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos) {
                fail(ErrorCode::Format,
                     origin + ":" + std::to_string(line_no) + ": expected key=value");
            }
            const std::string key = detail::trim(line.substr(0, eq));
            const std::string value = detail::trim(line.substr(eq + 1));
            if (key.empty()) {
                fail(ErrorCode::Format, origin + ":" + std::to_string(line_no) + ": empty key");
            }
            cfg.values_[key] = value;
        }
        return cfg;
    }

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    std::string take_string(const std::string& key, const std::string& fallback) {
        const auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        const std::string v = it->second;
        values_.erase(it);
        return v;
    }

    double take_double(const std::string& key, double fallback) {
        const auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        char* end = nullptr;
        const double v = std::strtod(it->second.c_str(), &end);
        if (end == it->second.c_str() || *end != '\0') {
            fail(ErrorCode::Format, origin_ + ": key '" + key + "' is not a number: " + it->second);
        }
        values_.erase(it);
        return v;
    }

    long take_int(const std::string& key, long fallback) {
        const auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        char* end = nullptr;
        const long v = std::strtol(it->second.c_str(), &end, 10);
        if (end == it->second.c_str() || *end != '\0') {
            fail(ErrorCode::Format, origin_ + ": key '" + key + "' is not an integer: " + it->second);
        }
        values_.erase(it);
        return v;
    }

    bool take_bool(const std::string& key, bool fallback) {
        const auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        const std::string v = it->second;
        values_.erase(it);
        if (v == "true" || v == "1" || v == "on") return true;
        if (v == "false" || v == "0" || v == "off") return false;
        fail(ErrorCode::Format, origin_ + ": key '" + key + "' is not a boolean: " + v);
    }

    void reject_unknown() const {
        if (values_.empty()) return;
        std::ostringstream msg;
        msg << origin_ << ": unknown config key(s):";
        for (const auto& [k, v] : values_) msg << " " << k;
        fail(ErrorCode::Format, msg.str());
    }

    std::vector<std::string> keys_with_prefix(const std::string& prefix) const {
        std::vector<std::string> out;
        for (const auto& [k, v] : values_) {
            if (k.rfind(prefix, 0) == 0) out.push_back(k);
        }
        return out;
    }

    const std::string& origin() const { return origin_; }

private:
    std::map<std::string, std::string> values_;
    std::string origin_;
};

/// Reads the pipeline keys from a parsed config. Drains only the keys it owns;
/// call reject_unknown() afterwards once all consumers have run.
inline PipelineConfig pipeline_config_from(KeyValueConfig& kv) {
    PipelineConfig cfg;
    cfg.voxel_size = kv.take_double("pipeline.voxel_size", cfg.voxel_size);
    cfg.seed = static_cast<std::uint64_t>(kv.take_int("pipeline.seed", 0));

    cfg.descriptor.neighborhood_radius =
        kv.take_double("descriptor.radius", cfg.descriptor.neighborhood_radius);
    cfg.descriptor.histogram_bins =
        static_cast<int>(kv.take_int("descriptor.bins", cfg.descriptor.histogram_bins));
    cfg.descriptor.normalize_rows = kv.take_bool("descriptor.normalize", cfg.descriptor.normalize_rows);

    cfg.source_feature_path = kv.take_string("features.source_path", "");
    cfg.target_feature_path = kv.take_string("features.target_path", "");

    cfg.matcher = matcher_from_name(kv.take_string("matcher.kind", matcher_name(cfg.matcher)));
    cfg.temperature = kv.take_double("matcher.temperature", cfg.temperature);
    cfg.sinkhorn.iterations =
        static_cast<int>(kv.take_int("sinkhorn.iterations", cfg.sinkhorn.iterations));
    cfg.sinkhorn.epsilon = kv.take_double("sinkhorn.epsilon", cfg.sinkhorn.epsilon);
    cfg.sinkhorn.slack = kv.take_bool("sinkhorn.slack", cfg.sinkhorn.slack);

    cfg.filter_fraction = kv.take_double("filter.fraction", cfg.filter_fraction);

    cfg.estimator = estimator_from_name(kv.take_string("estimator.kind", estimator_name(cfg.estimator)));
    cfg.ransac.max_iterations =
        static_cast<int>(kv.take_int("ransac.max_iterations", cfg.ransac.max_iterations));
    cfg.ransac.inlier_threshold = kv.take_double("ransac.inlier_threshold", cfg.ransac.inlier_threshold);
    cfg.ransac.sample_size = static_cast<int>(kv.take_int("ransac.sample_size", cfg.ransac.sample_size));
    cfg.ransac.confidence = kv.take_double("ransac.confidence", cfg.ransac.confidence);
    cfg.ransac.seed = static_cast<std::uint64_t>(kv.take_int("ransac.seed", 0));
    cfg.ransac.weighted_sampling = kv.take_bool("ransac.weighted_sampling", cfg.ransac.weighted_sampling);

    cfg.icp.max_iterations = static_cast<int>(kv.take_int("icp.max_iterations", cfg.icp.max_iterations));
    cfg.icp.convergence_epsilon = kv.take_double("icp.epsilon", cfg.icp.convergence_epsilon);
    cfg.icp.max_correspondence_distance =
        kv.take_double("icp.max_distance", cfg.icp.max_correspondence_distance);

    cfg.injected_outlier_fraction =
        kv.take_double("pipeline.injected_outlier_fraction", cfg.injected_outlier_fraction);

    cfg.thresholds.rr_rre_max = kv.take_double("thresholds.rr_rre_max", cfg.thresholds.rr_rre_max);
    cfg.thresholds.rr_rte_max = kv.take_double("thresholds.rr_rte_max", cfg.thresholds.rr_rte_max);
    cfg.thresholds.ir_distance_max =
        kv.take_double("thresholds.ir_distance_max", cfg.thresholds.ir_distance_max);
    cfg.thresholds.fmr_ir_min = kv.take_double("thresholds.fmr_ir_min", cfg.thresholds.fmr_ir_min);

    cfg.validate();
    return cfg;
}

inline PipelineConfig load_pipeline_config(const std::string& path) {
    KeyValueConfig kv = KeyValueConfig::parse_file(path);
    PipelineConfig cfg = pipeline_config_from(kv);
    kv.reject_unknown();
    return cfg;
}

inline SyntheticPairSpec pair_spec_from(KeyValueConfig& kv, const std::string& prefix = "pairs.") {
    SyntheticPairSpec spec;
    spec.point_count = static_cast<int>(kv.take_int(prefix + "point_count", spec.point_count));
    spec.overlap_fraction = kv.take_double(prefix + "overlap", spec.overlap_fraction);
    spec.noise_sigma = kv.take_double(prefix + "noise_sigma", spec.noise_sigma);
    spec.max_angle_deg = kv.take_double(prefix + "max_angle", spec.max_angle_deg);
    spec.max_translation = kv.take_double(prefix + "max_translation", spec.max_translation);
    spec.seed = static_cast<std::uint64_t>(kv.take_int(prefix + "seed", 0));
    spec.shape = shape_from_name(kv.take_string(prefix + "shape", "l_bracket"));
    spec.validate();
    return spec;
}

}  // namespace superalign
