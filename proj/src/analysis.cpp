#include "chickcall/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "chickcall/errors.hpp"

namespace chickcall {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

double mean_of(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_var(const std::vector<double>& v, double mu) {
    double acc = 0.0;
    for (double x : v) acc += (x - mu) * (x - mu);
    return acc / static_cast<double>(v.size() - 1);
}

std::string pair_key(std::string a, std::string b) {
    if (b < a) std::swap(a, b);
    return a + "|" + b;
}

}  // namespace

CorrelationReport pearson_matrix(const Eigen::MatrixXd& X,
                                 const std::vector<std::string>& features,
                                 double r_threshold) {
    const Eigen::Index n = X.rows();
    const Eigen::Index p = X.cols();
    if (n < 3) throw Error("pearson_matrix: need at least 3 rows");
    if (static_cast<std::size_t>(p) != features.size())
        throw Error("pearson_matrix: feature-name count mismatch");
    if (!X.allFinite()) throw Error("pearson_matrix: nulls/non-finite values present");

    CorrelationReport report;
    report.features = features;
    report.pearson.setConstant(p, p, kNan);

    Eigen::RowVectorXd mu = X.colwise().mean();
    Eigen::MatrixXd centered = X.rowwise() - mu;
    Eigen::VectorXd norms = centered.colwise().norm().transpose();
    for (Eigen::Index j = 0; j < p; ++j)
        if (norms[j] == 0.0) report.degenerate.push_back(features[static_cast<std::size_t>(j)]);

    for (Eigen::Index a = 0; a < p; ++a) {
        report.pearson(a, a) = 1.0;
        for (Eigen::Index b = a + 1; b < p; ++b) {
            if (norms[a] == 0.0 || norms[b] == 0.0) continue;  // undefined stays NaN
            const double r = centered.col(a).dot(centered.col(b)) / (norms[a] * norms[b]);
            report.pearson(a, b) = r;
            report.pearson(b, a) = r;
            if (std::abs(r) >= r_threshold)
                report.flagged_pairs.push_back({features[static_cast<std::size_t>(a)],
                                                features[static_cast<std::size_t>(b)], r});
        }
    }
    std::stable_sort(report.flagged_pairs.begin(), report.flagged_pairs.end(),
                     [](const FlaggedPair& x, const FlaggedPair& y) {
                         if (std::abs(x.r) != std::abs(y.r)) return std::abs(x.r) > std::abs(y.r);
                         return pair_key(x.feat_a, x.feat_b) < pair_key(y.feat_a, y.feat_b);
                     });
    return report;
}

std::vector<VifScore> vif_scores(const Eigen::MatrixXd& X,
                                 const std::vector<std::string>& features) {
    const Eigen::Index n = X.rows();
    const Eigen::Index p = X.cols();
    if (n <= p) throw Error("vif_scores: need more rows than features");
    if (static_cast<std::size_t>(p) != features.size())
        throw Error("vif_scores: feature-name count mismatch");

    std::vector<VifScore> out;
    out.reserve(static_cast<std::size_t>(p));
    for (Eigen::Index j = 0; j < p; ++j) {
        VifScore score;
        score.feature = features[static_cast<std::size_t>(j)];

        Eigen::VectorXd y = X.col(j);
        Eigen::MatrixXd design(n, p);  // intercept + the other features
        design.col(0).setOnes();
        Eigen::Index col = 1;
        for (Eigen::Index o = 0; o < p; ++o)
            if (o != j) design.col(col++) = X.col(o);

        const Eigen::VectorXd beta = design.colPivHouseholderQr().solve(y);
        const double ssr = (y - design * beta).squaredNorm();
        const double sst = (y.array() - y.mean()).square().sum();
        if (sst <= 0.0) {
            score.vif = kNan;
            score.infinite = true;  // constant feature: undefined, flag it
        } else {
            const double r2 = 1.0 - ssr / sst;
            if (r2 >= 1.0 - 1e-12) {
                score.infinite = true;
                score.vif = std::numeric_limits<double>::infinity();
            } else {
                score.vif = 1.0 / (1.0 - r2);
            }
        }
        score.flagged = score.infinite || score.vif > 10.0;
        out.push_back(score);
    }
    return out;
}

double cohens_d(const std::vector<double>& values_a, const std::vector<double>& values_b) {
    if (values_a.size() < 2 || values_b.size() < 2)
        throw Error("cohens_d: both groups need at least 2 values");
    const double ma = mean_of(values_a);
    const double mb = mean_of(values_b);
    const double na = static_cast<double>(values_a.size());
    const double nb = static_cast<double>(values_b.size());
    const double pooled = std::sqrt(((na - 1.0) * sample_var(values_a, ma) +
                                     (nb - 1.0) * sample_var(values_b, mb)) /
                                    (na + nb - 2.0));
    if (pooled <= 0.0) {
        if (ma == mb) return 0.0;
        throw Error("cohens_d: zero pooled standard deviation");
    }
    return (ma - mb) / pooled;
}

PruneResult prune_multicollinear(const Eigen::MatrixXd& X,
                                 const std::vector<std::string>& features,
                                 const std::vector<int>& group_of_row, double r_threshold,
                                 const std::map<std::string, std::string>& overrides) {
    if (group_of_row.size() != static_cast<std::size_t>(X.rows()))
        throw Error("prune_multicollinear: group labels do not match rows");
    const auto report = pearson_matrix(X, features, r_threshold);

    // |d| per feature between the two groups.
    std::vector<double> col_a, col_b;
    std::map<std::string, double> d_of;
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
        col_a.clear();
        col_b.clear();
        for (Eigen::Index i = 0; i < X.rows(); ++i) {
            if (group_of_row[static_cast<std::size_t>(i)] == 0)
                col_a.push_back(X(i, j));
            else if (group_of_row[static_cast<std::size_t>(i)] == 1)
                col_b.push_back(X(i, j));
        }
        double d = 0.0;
        try {
            d = cohens_d(col_a, col_b);
        } catch (const Error&) {
            d = 0.0;  // degenerate feature: no discriminative power
        }
        d_of[features[static_cast<std::size_t>(j)]] = d;
    }

    std::set<std::string> dropped;
    PruneResult result;
    for (const auto& pair : report.flagged_pairs) {
        PruneDecision decision;
        decision.feat_a = pair.feat_a;
        decision.feat_b = pair.feat_b;
        decision.r = pair.r;
        decision.d_a = d_of[pair.feat_a];
        decision.d_b = d_of[pair.feat_b];

        if (dropped.count(pair.feat_a) || dropped.count(pair.feat_b)) {
            decision.kept = dropped.count(pair.feat_a) ? pair.feat_b : pair.feat_a;
            decision.dropped = dropped.count(pair.feat_a) ? pair.feat_a : pair.feat_b;
            decision.reason = "already_dropped";
            result.audit.push_back(decision);
            continue;
        }

        const auto ov = overrides.find(pair_key(pair.feat_a, pair.feat_b));
        if (ov != overrides.end() &&
            (ov->second == pair.feat_a || ov->second == pair.feat_b)) {
            decision.kept = ov->second;
            decision.dropped = decision.kept == pair.feat_a ? pair.feat_b : pair.feat_a;
            decision.reason = "override";
        } else {
            // Keep the larger effect size; ties keep the lexicographically first.
            const bool keep_a = std::abs(decision.d_a) != std::abs(decision.d_b)
                                    ? std::abs(decision.d_a) > std::abs(decision.d_b)
                                    : pair.feat_a < pair.feat_b;
            decision.kept = keep_a ? pair.feat_a : pair.feat_b;
            decision.dropped = keep_a ? pair.feat_b : pair.feat_a;
            decision.reason = "cohens_d";
        }
        dropped.insert(decision.dropped);
        result.audit.push_back(decision);
    }

    for (const auto& f : features)
        if (!dropped.count(f)) result.retained.push_back(f);
    return result;
}

std::vector<BinnedCount> bin_call_counts(const std::vector<CallForBinning>& calls,
                                         const std::vector<GroupLabel>& groups,
                                         double bin_len_s, double session_len_s,
                                         std::size_t* out_of_session) {
    if (!(bin_len_s > 0.0) || !(session_len_s > 0.0))
        throw Error("bin_call_counts: bin and session lengths must be positive");
    const double ratio = session_len_s / bin_len_s;
    const int n_bins = static_cast<int>(std::lround(ratio));
    if (std::abs(ratio - n_bins) > 1e-9)
        throw Error("bin_call_counts: session_len_s must be a multiple of bin_len_s");

    std::map<std::string, const GroupLabel*> by_source;
    for (const auto& g : groups) by_source[g.source_id] = &g;

    // counts[(chick, cluster)][bin]
    std::map<std::pair<std::string, int>, std::vector<double>> counts;
    std::set<int> clusters;
    std::size_t flagged = 0;
    for (const auto& call : calls) {
        const auto it = by_source.find(call.source_id);
        if (it == by_source.end())
            throw Error("bin_call_counts: no metadata for source_id " + call.source_id);
        if (call.cluster < 0) continue;  // noise rows do not enter production counts
        clusters.insert(call.cluster);
        if (call.onset_s < 0.0 || call.onset_s >= session_len_s) {
            ++flagged;
            continue;
        }
        auto& row = counts[{it->second->chick_id, call.cluster}];
        row.resize(static_cast<std::size_t>(n_bins), 0.0);
        row[static_cast<std::size_t>(call.onset_s / bin_len_s)] += 1.0;
    }
    if (out_of_session) *out_of_session = flagged;

    // Chicks per condition (every chick contributes, including all-zero rows).
    std::map<std::string, std::set<std::string>> chicks_of;
    for (const auto& g : groups) chicks_of[g.condition].insert(g.chick_id);

    std::vector<BinnedCount> table;
    for (const auto& [condition, chicks] : chicks_of) {
        for (int cluster : clusters) {
            for (int bin = 0; bin < n_bins; ++bin) {
                std::vector<double> values;
                values.reserve(chicks.size());
                for (const auto& chick : chicks) {
                    const auto it = counts.find({chick, cluster});
                    values.push_back(it == counts.end()
                                         ? 0.0
                                         : it->second[static_cast<std::size_t>(bin)]);
                }
                BinnedCount row;
                row.condition = condition;
                row.cluster = cluster;
                row.bin = bin;
                row.n_chicks = values.size();
                row.mean = values.empty() ? 0.0 : mean_of(values);
                if (values.size() >= 2)
                    row.sem = std::sqrt(sample_var(values, row.mean) /
                                        static_cast<double>(values.size()));
                table.push_back(row);
            }
        }
    }
    return table;
}

std::vector<SummaryRow> cluster_summary(
    const std::vector<std::vector<std::optional<double>>>& raw_rows,
    const std::vector<std::string>& features, const std::vector<int>& clusters,
    const std::vector<std::string>& conditions) {
    if (raw_rows.size() != clusters.size() || raw_rows.size() != conditions.size())
        throw Error("cluster_summary: rows, clusters and conditions must align");

    std::map<std::pair<std::string, int>, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < raw_rows.size(); ++i) {
        if (clusters[i] < 0) continue;
        members[{conditions[i], clusters[i]}].push_back(i);
    }

    std::vector<SummaryRow> table;
    for (const auto& [key, rows] : members) {
        for (std::size_t j = 0; j < features.size(); ++j) {
            std::vector<double> values;
            values.reserve(rows.size());
            for (std::size_t i : rows)
                if (raw_rows[i][j]) values.push_back(*raw_rows[i][j]);
            if (values.empty()) continue;
            SummaryRow row;
            row.condition = key.first;
            row.cluster = key.second;
            row.feature = features[j];
            row.n = values.size();
            row.mean = mean_of(values);
            row.sd = values.size() >= 2 ? std::sqrt(sample_var(values, row.mean)) : 0.0;
            table.push_back(row);
        }
    }
    return table;
}

}  // namespace chickcall
