#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "chickcall/audio.hpp"
#include "chickcall/clustering.hpp"
#include "chickcall/detection.hpp"
#include "chickcall/evaluation.hpp"
#include "chickcall/features.hpp"

namespace chickcall {

struct ClusteringConfig {
    std::vector<ClusterMethod> methods = {ClusterMethod::kmeans, ClusterMethod::hac_ward,
                                          ClusterMethod::gmm, ClusterMethod::fcm};
    int k_min = 1;
    int k_max = 10;
    std::optional<std::uint64_t> seed;  // required when a stochastic method is enabled
    double fcm_fuzzifier = 2.0;
    std::optional<double> dbscan_eps;   // dbscan has no defaults by design
    std::optional<int> dbscan_min_pts;
    double representative_percentile = 5.0;
    ClusterMethod report_method = ClusterMethod::hac_ward;  // writes assignments
    int report_k = 2;
};

struct AnalysisConfig {
    double r_threshold = 0.8;
    std::map<std::string, std::string> overrides;  // "a|b" (sorted) -> keeper
    double bin_len_s = 60.0;
    double session_len_s = 360.0;
};

struct PipelineConfig {
    std::filesystem::path input_dir;
    std::optional<std::filesystem::path> annotation_csv;
    std::optional<std::filesystem::path> metadata_csv;
    std::filesystem::path output_dir;

    BandpassSpec band;
    DetectionParams detection;
    bool detect_bandpass_first = false;  // paper order: detect on the unfiltered signal
    FeatureParams features;              // F0/centroid bands default from `band`
    EvalTolerances evaluation;
    ClusteringConfig clustering;
    AnalysisConfig analysis;
    int jobs = 0;  // worker threads; 0 = hardware concurrency (capped)
};

/// Parse + validate a JSON config file. Unknown keys are rejected.
PipelineConfig load_config(const std::filesystem::path& path);

/// Same, from a JSON string (tests, CLI overrides).
PipelineConfig parse_config(const std::string& json_text);

/// Serialized echo of the effective config (stable key order).
std::string config_echo(const PipelineConfig& config);

}  // namespace chickcall
