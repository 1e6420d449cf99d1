#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace chickcall {

/// Z-scored feature table ready for clustering.
struct FeatureMatrix {
    std::vector<std::string> columns;
    Eigen::MatrixXd values;                           // rows = calls, z-scored
    std::vector<std::pair<double, double>> scaler;    // per-column (mean, std)
    std::vector<std::string> constant_columns;        // mapped to 0 with a warning
};

/// Per-column (x - mean) / std with the N-1 std; constant columns map to 0.
FeatureMatrix zscore_fit_transform(const Eigen::MatrixXd& raw,
                                   const std::vector<std::string>& columns);

enum class ClusterMethod { kmeans, hac_ward, gmm, fcm, dbscan };

ClusterMethod cluster_method_from_name(const std::string& name);
std::string cluster_method_name(ClusterMethod m);

struct ClusterModel {
    ClusterMethod method = ClusterMethod::kmeans;
    int k = 0;                          // cluster count (0 for dbscan)
    std::vector<int> labels;            // per-row id in [0, k), noise = -1
    Eigen::MatrixXd centroids;          // k x d mean vectors
    Eigen::MatrixXd soft_memberships;   // n x k, rows sum to 1 (fcm/gmm only)
    std::uint64_t seed = 0;

    // Fit diagnostics.
    std::vector<double> objective_history;  // k-means WCSS / GMM log-likelihood per iter
    double log_likelihood = 0.0;            // GMM final total log-likelihood
    std::vector<Eigen::MatrixXd> covariances;  // GMM
    Eigen::VectorXd mixture_weights;           // GMM
};

struct Dendrogram {
    struct Merge {
        int a = 0;       // node ids: leaves 0..n-1, merge i creates node n+i
        int b = 0;
        double height = 0.0;  // Ward distance at the merge
        int size = 0;         // leaves under the new node
    };
    std::vector<Merge> merges;  // exactly n-1, heights non-decreasing
    int n_leaves = 0;
};

/// Lloyd iterations from k-means++ until centroid shift < 1e-6 or 300 iters.
/// objective_history holds WCSS after each assignment step (non-increasing).
ClusterModel fit_kmeans(const Eigen::MatrixXd& X, int k, std::uint64_t seed);

/// Agglomerative Ward via the Lance-Williams recurrence (nearest-neighbor
/// chain), merges sorted by height.
Dendrogram fit_hac_ward(const Eigen::MatrixXd& X);

/// Clusters present below the (n-k)-th merge; labels ordered by smallest row.
ClusterModel cut(const Dendrogram& tree, const Eigen::MatrixXd& X, int k);

/// EM with full covariances and a 1e-6 diagonal ridge. objective_history
/// holds the per-iteration total log-likelihood (non-decreasing).
ClusterModel fit_gmm(const Eigen::MatrixXd& X, int k, std::uint64_t seed);

/// Fuzzy C-Means with fuzzifier m > 1; memberships from seeded random init,
/// iterated until max |delta u| < 1e-6.
ClusterModel fit_fcm(const Eigen::MatrixXd& X, int k, double fuzzifier, std::uint64_t seed);

/// Classic core/border/noise assignment; noise labeled -1.
ClusterModel fit_dbscan(const Eigen::MatrixXd& X, double eps, int min_pts);

struct ValidityReport {
    ClusterMethod method = ClusterMethod::kmeans;
    int k = 0;
    std::optional<double> silhouette;  // undefined for < 2 clusters
    std::optional<double> chi;
    std::optional<double> wcss;
    std::optional<double> fpc;  // fcm only
    std::optional<double> aic;  // gmm only
    std::optional<double> bic;  // gmm only
};

/// Silhouette, CHI and WCSS on hardened labels (noise rows excluded), plus
/// FPC for fuzzy models and AIC/BIC for mixture models.
ValidityReport validity_metrics(const Eigen::MatrixXd& X, const ClusterModel& model);

/// Elbow pick: the k whose (k, wcss) point lies farthest from the chord
/// between the first and last points, axes normalized to [0, 1].
int elbow_k(const std::vector<std::pair<int, double>>& wcss_by_k);

struct GridRecommendation {
    ClusterMethod method;
    std::string metric;  // silhouette | chi | wcss_elbow | fpc | aic | bic
    int k = 0;
};

struct GridSearchResult {
    std::vector<ValidityReport> cells;  // one per (method, k)
    std::vector<GridRecommendation> recommended;
};

/// One fit per (method, k) over k_min..k_max (K=1 contributes WCSS/AIC/BIC
/// only). Cells run in parallel against the shared immutable matrix. DBSCAN
/// has no K and is not part of the grid.
GridSearchResult grid_search(const Eigen::MatrixXd& X,
                             const std::vector<ClusterMethod>& methods, int k_min, int k_max,
                             std::uint64_t seed, double fcm_fuzzifier = 2.0);

struct RepresentativeCall {
    int row = 0;
    double distance = 0.0;
};

/// Per cluster: rows within the p-th percentile of the distance-to-centroid
/// distribution, closest first (nearest-rank: ceil(p/100 * size), min 1).
std::vector<std::vector<RepresentativeCall>> representative_calls(const Eigen::MatrixXd& X,
                                                                  const ClusterModel& model,
                                                                  double percentile = 5.0);

/// Minimal-cost pairing of two centroid sets (Hungarian assignment on
/// Euclidean cost). result[i] = cluster of `b` matched to cluster i of `a`.
/// A correspondence heuristic, not an identity proof.
std::vector<int> align_clusters(const Eigen::MatrixXd& centroids_a,
                                const Eigen::MatrixXd& centroids_b);

}  // namespace chickcall
