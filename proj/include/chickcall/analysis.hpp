#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace chickcall {

/// Per-recording subject metadata joined onto calls by source_id.
struct GroupLabel {
    std::string source_id;
    std::string chick_id;
    std::string condition;  // e.g. control / vpa
};

struct FlaggedPair {
    std::string feat_a;
    std::string feat_b;
    double r = 0.0;
};

struct CorrelationReport {
    std::vector<std::string> features;
    Eigen::MatrixXd pearson;                    // NaN where undefined
    std::vector<std::string> degenerate;        // constant columns
    std::vector<FlaggedPair> flagged_pairs;     // |r| >= threshold, |r| descending
};

/// Pearson matrix + pairs with |r| >= r_threshold. Needs >= 3 rows.
CorrelationReport pearson_matrix(const Eigen::MatrixXd& X,
                                 const std::vector<std::string>& features,
                                 double r_threshold = 0.8);

struct VifScore {
    std::string feature;
    double vif = 1.0;
    bool infinite = false;  // exact collinearity
    bool flagged = false;   // vif > 10
};

/// VIF_j = 1 / (1 - R2_j), feature j regressed on all others plus intercept.
std::vector<VifScore> vif_scores(const Eigen::MatrixXd& X,
                                 const std::vector<std::string>& features);

/// Standardized mean difference with pooled (N-1) standard deviation.
double cohens_d(const std::vector<double>& values_a, const std::vector<double>& values_b);

struct PruneDecision {
    std::string feat_a;
    std::string feat_b;
    double r = 0.0;
    double d_a = 0.0;
    double d_b = 0.0;
    std::string dropped;
    std::string kept;
    std::string reason;  // "cohens_d" | "override" | "already_dropped"
};

struct PruneResult {
    std::vector<std::string> retained;
    std::vector<PruneDecision> audit;
};

/// Iterate flagged pairs by descending |r|; drop the member with the smaller
/// |Cohen's d| unless an override names the keeper. Overrides are keyed by
/// "a|b" with names sorted. Post-condition: no retained pair with |r| >=
/// threshold.
PruneResult prune_multicollinear(const Eigen::MatrixXd& X,
                                 const std::vector<std::string>& features,
                                 const std::vector<int>& group_of_row, double r_threshold = 0.8,
                                 const std::map<std::string, std::string>& overrides = {});

struct BinnedCount {
    std::string condition;
    int cluster = 0;
    int bin = 0;       // 0-based bin index
    double mean = 0.0;  // mean calls per chick
    double sem = 0.0;   // across chicks (N-1 SD / sqrt(n)); 0 for n = 1
    std::size_t n_chicks = 0;
};

struct CallForBinning {
    std::string source_id;
    double onset_s = 0.0;
    int cluster = 0;
};

/// Per-chick counts per (cluster, bin), averaged across chicks per condition.
/// Calls outside [0, session_len_s) are flagged into `out_of_session`.
std::vector<BinnedCount> bin_call_counts(const std::vector<CallForBinning>& calls,
                                         const std::vector<GroupLabel>& groups,
                                         double bin_len_s, double session_len_s,
                                         std::size_t* out_of_session = nullptr);

struct SummaryRow {
    std::string condition;
    int cluster = 0;
    std::string feature;
    double mean = 0.0;
    double sd = 0.0;  // N-1; 0 for singleton groups
    std::size_t n = 0;
};

/// Mean +- SD of raw (un-normalized) descriptor values per (condition,
/// cluster, feature). Rows with a missing value for a feature are skipped
/// for that feature only.
std::vector<SummaryRow> cluster_summary(
    const std::vector<std::vector<std::optional<double>>>& raw_rows,
    const std::vector<std::string>& features, const std::vector<int>& clusters,
    const std::vector<std::string>& conditions);

}  // namespace chickcall
