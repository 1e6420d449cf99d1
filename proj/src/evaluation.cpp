#include "chickcall/evaluation.hpp"

#include <algorithm>
#include <cmath>

#include "chickcall/errors.hpp"

namespace chickcall {

namespace {

void require_sorted(const std::vector<double>& v, const char* name) {
    if (!std::is_sorted(v.begin(), v.end()))
        throw Error(std::string("event list not sorted ascending: ") + name);
}

}  // namespace

MatchResult match_onsets(const std::vector<double>& pred, const std::vector<double>& ref,
                         double tol_s) {
    require_sorted(pred, "pred");
    require_sorted(ref, "ref");

    MatchResult m;
    std::size_t j = 0;
    for (double r : ref) {
        while (j < pred.size() && pred[j] < r - tol_s) ++j;  // too early for this and all later refs
        if (j < pred.size() && std::abs(pred[j] - r) <= tol_s) {
            m.matched_pairs.emplace_back(r, pred[j]);
            ++j;
        }
    }
    m.tp = m.matched_pairs.size();
    m.fp = pred.size() - m.tp;
    m.fn_ = ref.size() - m.tp;
    return m;
}

MatchResult match_offsets(const std::vector<CallSegment>& pred,
                          const std::vector<CallSegment>& ref, double base_tol_s,
                          double onset_tol_s) {
    std::vector<double> pred_on(pred.size()), ref_on(ref.size());
    std::transform(pred.begin(), pred.end(), pred_on.begin(),
                   [](const CallSegment& s) { return s.onset_s; });
    std::transform(ref.begin(), ref.end(), ref_on.begin(),
                   [](const CallSegment& s) { return s.onset_s; });

    // Anchor rule: pair calls by onset first, then judge offsets pair-wise.
    const MatchResult anchors = match_onsets(pred_on, ref_on, onset_tol_s);

    MatchResult m;
    std::size_t pi = 0, ri = 0;
    for (const auto& [r_on, p_on] : anchors.matched_pairs) {
        while (ri < ref.size() && ref[ri].onset_s != r_on) ++ri;
        while (pi < pred.size() && pred[pi].onset_s != p_on) ++pi;
        if (ri >= ref.size() || pi >= pred.size()) break;
        const double tol = std::max(base_tol_s, ref[ri].duration_s() / 2.0);
        if (std::abs(pred[pi].offset_s - ref[ri].offset_s) <= tol)
            m.matched_pairs.emplace_back(ref[ri].offset_s, pred[pi].offset_s);
        ++ri;
        ++pi;
    }
    m.tp = m.matched_pairs.size();
    m.fp = pred.size() - m.tp;
    m.fn_ = ref.size() - m.tp;
    return m;
}

PrfScores prf(const MatchResult& m) {
    PrfScores s;
    const double tp = static_cast<double>(m.tp);
    if (m.tp + m.fp > 0) s.precision = tp / static_cast<double>(m.tp + m.fp);
    if (m.tp + m.fn_ > 0) s.recall = tp / static_cast<double>(m.tp + m.fn_);
    if (s.precision + s.recall > 0.0)
        s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
    return s;
}

PrfScores weighted_aggregate(const std::map<std::string, PrfScores>& per_file,
                             const std::map<std::string, std::size_t>& weights) {
    double total = 0.0;
    for (const auto& [file, w] : weights) {
        (void)file;
        total += static_cast<double>(w);
    }
    if (total <= 0.0) throw Error("weighted_aggregate: all weights zero");

    PrfScores out;
    for (const auto& [file, scores] : per_file) {
        const auto it = weights.find(file);
        if (it == weights.end()) continue;
        const double w = static_cast<double>(it->second) / total;
        out.precision += w * scores.precision;
        out.recall += w * scores.recall;
        out.f1 += w * scores.f1;
    }
    return out;
}

EvalReport evaluate_segments(const std::vector<CallSegment>& pred,
                             const std::vector<CallSegment>& ref, const EvalTolerances& tol) {
    std::map<std::string, std::vector<CallSegment>> pred_by, ref_by;
    for (const auto& s : pred) pred_by[s.source_id].push_back(s);
    for (const auto& s : ref) ref_by[s.source_id].push_back(s);

    auto by_onset = [](std::vector<CallSegment>& v) {
        std::sort(v.begin(), v.end(),
                  [](const CallSegment& a, const CallSegment& b) { return a.onset_s < b.onset_s; });
    };

    EvalReport report;
    std::map<std::string, PrfScores> onset_scores, offset_scores;
    std::map<std::string, std::size_t> weights;
    for (auto& [file, refs] : ref_by) {
        by_onset(refs);
        auto& preds = pred_by[file];  // empty when the file has no predictions
        by_onset(preds);

        std::vector<double> pred_on(preds.size()), ref_on(refs.size());
        std::transform(preds.begin(), preds.end(), pred_on.begin(),
                       [](const CallSegment& s) { return s.onset_s; });
        std::transform(refs.begin(), refs.end(), ref_on.begin(),
                       [](const CallSegment& s) { return s.onset_s; });

        FileScores fs;
        fs.onset = prf(match_onsets(pred_on, ref_on, tol.onset_tol_s));
        fs.offset = prf(match_offsets(preds, refs, tol.offset_base_tol_s, tol.onset_tol_s));
        fs.n_ref_calls = refs.size();
        report.per_file[file] = fs;
        onset_scores[file] = fs.onset;
        offset_scores[file] = fs.offset;
        weights[file] = fs.n_ref_calls;
    }
    if (!report.per_file.empty()) {
        report.weighted_onset = weighted_aggregate(onset_scores, weights);
        report.weighted_offset = weighted_aggregate(offset_scores, weights);
    }
    return report;
}

}  // namespace chickcall
