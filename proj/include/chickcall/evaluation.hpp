#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "chickcall/detection.hpp"

namespace chickcall {

struct MatchResult {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn_ = 0;
    std::vector<std::pair<double, double>> matched_pairs;  // (ref_s, pred_s)
};

struct PrfScores {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct EvalTolerances {
    double onset_tol_s = 0.05;        // +-50 ms fixed window
    double offset_base_tol_s = 0.1;   // adaptive: max(base, ref_duration/2)
};

/// One-to-one event matching with |pred - ref| <= tol_s. Greedy earliest-first
/// over sorted inputs; equivalent to maximum bipartite matching for interval
/// constraints on a line. Throws on unsorted input.
MatchResult match_onsets(const std::vector<double>& pred, const std::vector<double>& ref,
                         double tol_s = 0.05);

/// Offset matching anchored on onset matching: call pairs are formed by
/// matching onsets first, then each pair's offset counts TP iff
/// |pred_off - ref_off| <= max(base_tol_s, ref_duration/2).
MatchResult match_offsets(const std::vector<CallSegment>& pred,
                          const std::vector<CallSegment>& ref, double base_tol_s = 0.1,
                          double onset_tol_s = 0.05);

/// Precision/recall/F1 with the zero-denominator-means-zero convention.
PrfScores prf(const MatchResult& m);

/// Call-count weighted mean of per-file scores; weights normalized to sum 1.
PrfScores weighted_aggregate(const std::map<std::string, PrfScores>& per_file,
                             const std::map<std::string, std::size_t>& weights);

struct FileScores {
    PrfScores onset;
    PrfScores offset;
    std::size_t n_ref_calls = 0;
};

struct EvalReport {
    std::map<std::string, FileScores> per_file;
    PrfScores weighted_onset;
    PrfScores weighted_offset;
};

/// Per-file onset/offset evaluation plus weighted aggregation over files.
/// Only source_ids present in `ref` are scored.
EvalReport evaluate_segments(const std::vector<CallSegment>& pred,
                             const std::vector<CallSegment>& ref,
                             const EvalTolerances& tol = {});

}  // namespace chickcall
