#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "chickcall/analysis.hpp"
#include "chickcall/config.hpp"
#include "chickcall/detection.hpp"
#include "chickcall/features.hpp"

namespace chickcall {

// Process exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitPartial = 3;

struct RunReport {
    std::string command;
    std::string version;
    std::string input_hash;
    std::string config_echo;
    std::vector<std::pair<std::string, double>> stage_seconds;
    std::map<std::string, std::size_t> calls_per_file;
    std::vector<std::string> dropped;  // dropped calls / rows, with reason codes
    std::vector<std::string> failed_files;
    std::vector<std::string> notes;

    void save(const std::filesystem::path& path) const;
};

/// Onset/offset detection over every WAV under input_dir -> segments.csv.
/// Unreadable files fail individually; nonzero exit only when all fail.
int cmd_detect(const PipelineConfig& config, RunReport* report = nullptr);

/// Score segments.csv against annotation_csv -> eval_report.json +
/// eval_summary.csv. Files present on only one side are listed and excluded.
int cmd_evaluate(const PipelineConfig& config, RunReport* report = nullptr);

/// Bandpass + per-call track extraction -> features.csv (nulls as empty).
int cmd_extract(const PipelineConfig& config, RunReport* report = nullptr);

/// Z-score, grid-search fits, validity metrics, report-model assignments,
/// dendrogram and representative calls.
int cmd_cluster(const PipelineConfig& config, RunReport* report = nullptr);

/// Correlation/VIF/Cohen's-d pruning plus production binning and summaries.
int cmd_select(const PipelineConfig& config, RunReport* report = nullptr);

/// All stages in order with a manifest; evaluate/select run when their
/// inputs are configured. A failing stage halts the rest (partial manifest).
int cmd_pipeline(const PipelineConfig& config, RunReport* report = nullptr);

// Artifact names under output_dir.
namespace artifacts {
inline constexpr const char* kSegments = "segments.csv";
inline constexpr const char* kFeatures = "features.csv";
inline constexpr const char* kAssignments = "assignments.csv";
inline constexpr const char* kDendrogram = "dendrogram.json";
inline constexpr const char* kValidity = "validity.csv";
inline constexpr const char* kRecommendations = "recommendations.csv";
inline constexpr const char* kRepresentatives = "representatives.csv";
inline constexpr const char* kEvalReport = "eval_report.json";
inline constexpr const char* kEvalSummary = "eval_summary.csv";
inline constexpr const char* kCorrelation = "correlation.csv";
inline constexpr const char* kVif = "vif.csv";
inline constexpr const char* kPruningAudit = "pruning_audit.json";
inline constexpr const char* kBinnedCounts = "binned_counts.csv";
inline constexpr const char* kClusterSummary = "cluster_summary.csv";
inline constexpr const char* kRunReport = "run_report.json";
inline constexpr const char* kManifest = "manifest.json";
}  // namespace artifacts

// Artifact readers/writers shared by the commands, tests and bindings.
void write_segments_csv(const std::filesystem::path& path,
                        const std::vector<CallSegment>& segments);
std::vector<CallSegment> read_segments_csv(const std::filesystem::path& path);

struct FeatureRow {
    CallSegment segment;
    std::vector<std::optional<double>> values;  // aligned with CallFeatureVector::names()
};
void write_features_csv(const std::filesystem::path& path,
                        const std::vector<FeatureRow>& rows);
std::vector<FeatureRow> read_features_csv(const std::filesystem::path& path);

std::vector<GroupLabel> read_metadata_csv(const std::filesystem::path& path);

struct AssignmentRow {
    CallSegment segment;
    int cluster = 0;
};
void write_assignments_csv(const std::filesystem::path& path,
                           const std::vector<AssignmentRow>& rows);
std::vector<AssignmentRow> read_assignments_csv(const std::filesystem::path& path);

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

std::string tool_version();

}  // namespace chickcall
