#include "chickcall/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <future>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <random>
#include <set>

#include <Eigen/Cholesky>

#include "chickcall/errors.hpp"

namespace chickcall {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Platform-stable uniform in [0, 1): 53 bits straight from the generator.
double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double sq_dist(const Eigen::MatrixXd& X, Eigen::Index i, const Eigen::RowVectorXd& c) {
    return (X.row(i) - c).squaredNorm();
}

Eigen::MatrixXd kmeanspp_init(const Eigen::MatrixXd& X, int k, std::mt19937_64& rng) {
    const Eigen::Index n = X.rows();
    Eigen::MatrixXd centers(k, X.cols());
    std::vector<char> taken(n, 0);

    Eigen::Index first = static_cast<Eigen::Index>(uniform01(rng) * static_cast<double>(n));
    first = std::min(first, n - 1);
    centers.row(0) = X.row(first);
    taken[first] = 1;

    Eigen::VectorXd d2(n);
    for (Eigen::Index i = 0; i < n; ++i) d2[i] = sq_dist(X, i, centers.row(0));

    for (int c = 1; c < k; ++c) {
        const double total = d2.sum();
        Eigen::Index pick = -1;
        if (total > 0.0) {
            double r = uniform01(rng) * total;
            for (Eigen::Index i = 0; i < n; ++i) {
                r -= d2[i];
                if (r <= 0.0) {
                    pick = i;
                    break;
                }
            }
            if (pick < 0) pick = n - 1;
        }
        if (pick < 0 || taken[pick]) {
            // All remaining mass on duplicates: take the first untaken row.
            pick = -1;
            for (Eigen::Index i = 0; i < n; ++i)
                if (!taken[i]) {
                    pick = i;
                    break;
                }
            if (pick < 0) pick = 0;
        }
        centers.row(c) = X.row(pick);
        taken[pick] = 1;
        for (Eigen::Index i = 0; i < n; ++i)
            d2[i] = std::min(d2[i], sq_dist(X, i, centers.row(c)));
    }
    return centers;
}

double assign_labels(const Eigen::MatrixXd& X, const Eigen::MatrixXd& centers,
                     std::vector<int>& labels) {
    double wcss = 0.0;
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        int best = 0;
        double best_d = sq_dist(X, i, centers.row(0));
        for (Eigen::Index c = 1; c < centers.rows(); ++c) {
            const double d = sq_dist(X, i, centers.row(c));
            if (d < best_d) {
                best_d = d;
                best = static_cast<int>(c);
            }
        }
        labels[static_cast<std::size_t>(i)] = best;
        wcss += best_d;
    }
    return wcss;
}

Eigen::MatrixXd centroids_of(const Eigen::MatrixXd& X, const std::vector<int>& labels, int k) {
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(k, X.cols());
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(k);
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        const int l = labels[static_cast<std::size_t>(i)];
        if (l < 0) continue;
        c.row(l) += X.row(i);
        counts[l] += 1.0;
    }
    for (int j = 0; j < k; ++j)
        if (counts[j] > 0.0) c.row(j) /= counts[j];
    return c;
}

double log_sum_exp(const Eigen::VectorXd& v) {
    const double m = v.maxCoeff();
    if (m == -kInf) return -kInf;
    return m + std::log((v.array() - m).exp().sum());
}

}  // namespace

ClusterMethod cluster_method_from_name(const std::string& name) {
    if (name == "kmeans") return ClusterMethod::kmeans;
    if (name == "hac_ward") return ClusterMethod::hac_ward;
    if (name == "gmm") return ClusterMethod::gmm;
    if (name == "fcm") return ClusterMethod::fcm;
    if (name == "dbscan") return ClusterMethod::dbscan;
    throw ConfigError("unknown clustering method: " + name);
}

std::string cluster_method_name(ClusterMethod m) {
    switch (m) {
        case ClusterMethod::kmeans: return "kmeans";
        case ClusterMethod::hac_ward: return "hac_ward";
        case ClusterMethod::gmm: return "gmm";
        case ClusterMethod::fcm: return "fcm";
        case ClusterMethod::dbscan: return "dbscan";
    }
    return "kmeans";
}

FeatureMatrix zscore_fit_transform(const Eigen::MatrixXd& raw,
                                   const std::vector<std::string>& columns) {
    if (raw.rows() < 2) throw Error("zscore: need at least 2 rows");
    if (static_cast<std::size_t>(raw.cols()) != columns.size())
        throw Error("zscore: column-name count does not match the matrix");

    FeatureMatrix out;
    out.columns = columns;
    out.values.resize(raw.rows(), raw.cols());
    out.scaler.resize(columns.size());
    const double n = static_cast<double>(raw.rows());
    for (Eigen::Index j = 0; j < raw.cols(); ++j) {
        const double mu = raw.col(j).mean();
        const double var = (raw.col(j).array() - mu).square().sum() / (n - 1.0);
        const double sd = std::sqrt(var);
        out.scaler[static_cast<std::size_t>(j)] = {mu, sd};
        if (sd > 0.0) {
            out.values.col(j) = (raw.col(j).array() - mu) / sd;
        } else {
            out.values.col(j).setZero();
            out.constant_columns.push_back(columns[static_cast<std::size_t>(j)]);
        }
    }
    return out;
}

ClusterModel fit_kmeans(const Eigen::MatrixXd& X, int k, std::uint64_t seed) {
    const Eigen::Index n = X.rows();
    if (k < 1 || k > n) throw Error("kmeans: need 1 <= k <= n");

    std::mt19937_64 rng(seed);
    ClusterModel model;
    model.method = ClusterMethod::kmeans;
    model.k = k;
    model.seed = seed;
    model.labels.assign(static_cast<std::size_t>(n), 0);

    Eigen::MatrixXd centers = kmeanspp_init(X, k, rng);
    for (int iter = 0; iter < 300; ++iter) {
        model.objective_history.push_back(assign_labels(X, centers, model.labels));

        Eigen::MatrixXd next = centroids_of(X, model.labels, k);
        // Re-seed empty clusters with the worst-fitted point.
        Eigen::VectorXd counts = Eigen::VectorXd::Zero(k);
        for (int l : model.labels) counts[l] += 1.0;
        for (int j = 0; j < k; ++j) {
            if (counts[j] > 0.0) continue;
            Eigen::Index worst = 0;
            double worst_d = -1.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                const double d = sq_dist(X, i, next.row(model.labels[i]));
                if (d > worst_d) {
                    worst_d = d;
                    worst = i;
                }
            }
            next.row(j) = X.row(worst);
            model.labels[static_cast<std::size_t>(worst)] = j;
        }

        const double shift = (next - centers).rowwise().norm().maxCoeff();
        centers = next;
        if (shift < 1e-6) break;
    }
    model.objective_history.push_back(assign_labels(X, centers, model.labels));
    model.centroids = centroids_of(X, model.labels, k);
    return model;
}

Dendrogram fit_hac_ward(const Eigen::MatrixXd& X) {
    const int n = static_cast<int>(X.rows());
    if (n < 2) throw Error("hac_ward: need at least 2 rows");

    // Condensed squared-distance store over active clusters.
    std::vector<double> d2(static_cast<std::size_t>(n) * (n - 1) / 2);
    auto at = [n](int i, int j) -> std::size_t {
        if (i > j) std::swap(i, j);
        return static_cast<std::size_t>(i) * (2 * n - i - 1) / 2 + (j - i - 1);
    };
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) d2[at(i, j)] = (X.row(i) - X.row(j)).squaredNorm();

    std::vector<int> size(n, 1);
    std::vector<char> active(n, 1);

    struct RawMerge {
        int a, b;  // representative leaf slots at merge time
        double height;
        int size;
    };
    std::vector<RawMerge> raw;
    raw.reserve(n - 1);

    // Nearest-neighbor chain; Ward is reducible so merges are valid even when
    // found out of height order (sorted afterwards).
    std::vector<int> chain;
    chain.reserve(n);
    int remaining = n;
    while (remaining > 1) {
        if (chain.empty()) {
            for (int i = 0; i < n; ++i)
                if (active[i]) {
                    chain.push_back(i);
                    break;
                }
        }
        while (true) {
            const int a = chain.back();
            int nearest = -1;
            double best = kInf;
            for (int c = 0; c < n; ++c) {
                if (!active[c] || c == a) continue;
                const double d = d2[at(a, c)];
                if (d < best || (d == best && nearest >= 0 && c < nearest)) {
                    best = d;
                    nearest = c;
                }
            }
            if (chain.size() >= 2 && nearest == chain[chain.size() - 2]) {
                const int b = nearest;
                chain.pop_back();
                chain.pop_back();
                const int lo = std::min(a, b), hi = std::max(a, b);
                raw.push_back({lo, hi, std::sqrt(best), size[lo] + size[hi]});

                // Lance-Williams Ward update into slot `lo`.
                const double sa = size[lo], sb = size[hi];
                for (int c = 0; c < n; ++c) {
                    if (!active[c] || c == lo || c == hi) continue;
                    const double sc = size[c];
                    d2[at(lo, c)] = ((sa + sc) * d2[at(lo, c)] + (sb + sc) * d2[at(hi, c)] -
                                     sc * best) /
                                    (sa + sb + sc);
                }
                size[lo] += size[hi];
                active[hi] = 0;
                --remaining;
                break;
            }
            chain.push_back(nearest);
        }
    }

    std::stable_sort(raw.begin(), raw.end(),
                     [](const RawMerge& x, const RawMerge& y) { return x.height < y.height; });

    // Relabel to dendrogram node ids: leaves 0..n-1, merge i creates n+i.
    Dendrogram tree;
    tree.n_leaves = n;
    std::vector<int> node_of(n);
    std::iota(node_of.begin(), node_of.end(), 0);
    std::vector<int> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const int ra = find(raw[i].a);
        const int rb = find(raw[i].b);
        Dendrogram::Merge m;
        m.a = std::min(node_of[ra], node_of[rb]);
        m.b = std::max(node_of[ra], node_of[rb]);
        m.height = raw[i].height;
        m.size = raw[i].size;
        tree.merges.push_back(m);
        parent[rb] = ra;
        node_of[ra] = n + static_cast<int>(i);
    }
    return tree;
}

ClusterModel cut(const Dendrogram& tree, const Eigen::MatrixXd& X, int k) {
    const int n = tree.n_leaves;
    if (k < 1 || k > n) throw Error("cut: need 1 <= k <= n_leaves");
    if (X.rows() != n) throw Error("cut: matrix rows do not match dendrogram leaves");

    std::vector<int> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    // The merge ids reference internal nodes; track a representative leaf.
    std::vector<int> leaf_of(static_cast<std::size_t>(2 * n - 1));
    for (int i = 0; i < 2 * n - 1; ++i) leaf_of[static_cast<std::size_t>(i)] = i < n ? i : -1;
    for (int m = 0; m < n - k; ++m) {
        const auto& mg = tree.merges[static_cast<std::size_t>(m)];
        const int la = leaf_of[static_cast<std::size_t>(mg.a)];
        const int lb = leaf_of[static_cast<std::size_t>(mg.b)];
        parent[find(lb)] = find(la);
        leaf_of[static_cast<std::size_t>(n + m)] = la;
    }

    // Deterministic labels: clusters ordered by their smallest row index.
    std::map<int, int> label_of_root;
    std::vector<int> labels(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const int r = find(i);
        auto [it, fresh] = label_of_root.emplace(r, static_cast<int>(label_of_root.size()));
        labels[static_cast<std::size_t>(i)] = it->second;
        (void)fresh;
    }

    ClusterModel model;
    model.method = ClusterMethod::hac_ward;
    model.k = k;
    model.labels = std::move(labels);
    model.centroids = centroids_of(X, model.labels, k);
    return model;
}

ClusterModel fit_gmm(const Eigen::MatrixXd& X, int k, std::uint64_t seed) {
    const Eigen::Index n = X.rows();
    const Eigen::Index d = X.cols();
    if (k < 1 || n <= k) throw Error("gmm: need n > k >= 1");
    constexpr double kRidge = 1e-6;

    std::mt19937_64 rng(seed);
    Eigen::MatrixXd means = kmeanspp_init(X, k, rng);
    Eigen::VectorXd weights = Eigen::VectorXd::Constant(k, 1.0 / k);

    Eigen::RowVectorXd grand_mean = X.colwise().mean();
    Eigen::MatrixXd centered = X.rowwise() - grand_mean;
    Eigen::MatrixXd base_cov =
        centered.transpose() * centered / static_cast<double>(n);
    base_cov.diagonal().array() += kRidge;
    std::vector<Eigen::MatrixXd> covs(static_cast<std::size_t>(k), base_cov);

    ClusterModel model;
    model.method = ClusterMethod::gmm;
    model.k = k;
    model.seed = seed;

    Eigen::MatrixXd log_resp(n, k);
    const double log2pi = std::log(2.0 * std::numbers::pi);

    auto component_llt = [&](const Eigen::MatrixXd& cov) {
        Eigen::LLT<Eigen::MatrixXd> llt(cov);
        if (llt.info() != Eigen::Success) {
            Eigen::MatrixXd bumped = cov;
            bumped.diagonal().array() += 1e-3;
            llt.compute(bumped);
            if (llt.info() != Eigen::Success)
                throw ConvergenceError("gmm: singular covariance despite ridge");
        }
        return llt;
    };

    double prev_ll = -kInf;
    for (int iter = 0; iter < 200; ++iter) {
        // E-step.
        for (int c = 0; c < k; ++c) {
            const auto llt = component_llt(covs[static_cast<std::size_t>(c)]);
            const Eigen::MatrixXd& L = llt.matrixLLT();
            double log_det = 0.0;
            for (Eigen::Index j = 0; j < d; ++j) log_det += 2.0 * std::log(L(j, j));
            const double log_norm =
                -0.5 * (static_cast<double>(d) * log2pi + log_det) + std::log(weights[c]);
            for (Eigen::Index i = 0; i < n; ++i) {
                const Eigen::VectorXd diff = (X.row(i) - means.row(c)).transpose();
                const double maha = llt.matrixL().solve(diff).squaredNorm();
                log_resp(i, c) = log_norm - 0.5 * maha;
            }
        }
        double ll = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double norm = log_sum_exp(log_resp.row(i).transpose());
            ll += norm;
            log_resp.row(i).array() -= norm;
        }
        model.objective_history.push_back(ll);
        const bool converged =
            iter > 0 && std::abs(ll - prev_ll) < 1e-8 * std::max(1.0, std::abs(ll));
        prev_ll = ll;
        if (converged) break;

        // M-step.
        Eigen::MatrixXd resp = log_resp.array().exp();
        Eigen::VectorXd nk = resp.colwise().sum().transpose();
        for (int c = 0; c < k; ++c) {
            if (nk[c] < 1e-12) nk[c] = 1e-12;
            means.row(c) = (resp.col(c).transpose() * X) / nk[c];
            Eigen::MatrixXd diff = X.rowwise() - means.row(c);
            Eigen::MatrixXd cov =
                diff.transpose() * (diff.array().colwise() * resp.col(c).array()).matrix() /
                nk[c];
            cov.diagonal().array() += kRidge;
            covs[static_cast<std::size_t>(c)] = cov;
        }
        weights = nk / static_cast<double>(n);
    }

    model.log_likelihood = prev_ll;
    model.soft_memberships = log_resp.array().exp();
    model.labels.resize(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::Index arg;
        model.soft_memberships.row(i).maxCoeff(&arg);
        model.labels[static_cast<std::size_t>(i)] = static_cast<int>(arg);
    }
    model.centroids = means;
    model.covariances = covs;
    model.mixture_weights = weights;
    return model;
}

ClusterModel fit_fcm(const Eigen::MatrixXd& X, int k, double fuzzifier, std::uint64_t seed) {
    const Eigen::Index n = X.rows();
    if (k < 1 || k > n) throw Error("fcm: need 1 <= k <= n");
    if (!(fuzzifier > 1.0)) throw Error("fcm: fuzzifier must be > 1");

    std::mt19937_64 rng(seed);
    Eigen::MatrixXd u(n, k);
    for (Eigen::Index i = 0; i < n; ++i) {
        double row = 0.0;
        for (int c = 0; c < k; ++c) {
            u(i, c) = uniform01(rng) + 1e-9;
            row += u(i, c);
        }
        u.row(i) /= row;
    }

    Eigen::MatrixXd centers(k, X.cols());
    const double expo = 2.0 / (fuzzifier - 1.0);
    for (int iter = 0; iter < 300; ++iter) {
        Eigen::MatrixXd um = u.array().pow(fuzzifier);
        for (int c = 0; c < k; ++c) {
            const double denom = um.col(c).sum();
            centers.row(c) = (um.col(c).transpose() * X) / (denom > 0.0 ? denom : 1.0);
        }

        Eigen::MatrixXd next(n, k);
        for (Eigen::Index i = 0; i < n; ++i) {
            // Coincident point: crisp membership on the first zero-distance centroid.
            int zero_at = -1;
            for (int c = 0; c < k; ++c) {
                if ((X.row(i) - centers.row(c)).squaredNorm() == 0.0) {
                    zero_at = c;
                    break;
                }
            }
            if (zero_at >= 0) {
                next.row(i).setZero();
                next(i, zero_at) = 1.0;
                continue;
            }
            double denom_sum = 0.0;
            for (int c = 0; c < k; ++c) {
                const double dc = (X.row(i) - centers.row(c)).norm();
                double acc = 0.0;
                for (int l = 0; l < k; ++l) {
                    const double dl = (X.row(i) - centers.row(l)).norm();
                    acc += std::pow(dc / dl, expo);
                }
                next(i, c) = 1.0 / acc;
                denom_sum += next(i, c);
            }
            next.row(i) /= denom_sum;  // guard tiny numeric drift
        }

        const double delta = (next - u).cwiseAbs().maxCoeff();
        u = next;
        if (delta < 1e-6) break;
    }

    ClusterModel model;
    model.method = ClusterMethod::fcm;
    model.k = k;
    model.seed = seed;
    model.soft_memberships = u;
    model.labels.resize(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::Index arg;
        u.row(i).maxCoeff(&arg);
        model.labels[static_cast<std::size_t>(i)] = static_cast<int>(arg);
    }
    model.centroids = centers;
    return model;
}

ClusterModel fit_dbscan(const Eigen::MatrixXd& X, double eps, int min_pts) {
    if (!(eps > 0.0) || min_pts < 1) throw Error("dbscan: need eps > 0 and min_pts >= 1");
    const Eigen::Index n = X.rows();
    const double eps2 = eps * eps;

    auto neighbors = [&](Eigen::Index i) {
        std::vector<Eigen::Index> out;
        for (Eigen::Index j = 0; j < n; ++j)
            if ((X.row(i) - X.row(j)).squaredNorm() <= eps2) out.push_back(j);
        return out;
    };

    constexpr int kUnvisited = -2;
    std::vector<int> labels(static_cast<std::size_t>(n), kUnvisited);
    int cluster = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (labels[static_cast<std::size_t>(i)] != kUnvisited) continue;
        auto nb = neighbors(i);
        if (static_cast<int>(nb.size()) < min_pts) {
            labels[static_cast<std::size_t>(i)] = -1;
            continue;
        }
        labels[static_cast<std::size_t>(i)] = cluster;
        std::vector<Eigen::Index> queue(nb.begin(), nb.end());
        for (std::size_t q = 0; q < queue.size(); ++q) {
            const Eigen::Index j = queue[q];
            auto& lj = labels[static_cast<std::size_t>(j)];
            if (lj == -1) lj = cluster;  // border point
            if (lj != kUnvisited) continue;
            lj = cluster;
            auto nbj = neighbors(j);
            if (static_cast<int>(nbj.size()) >= min_pts)
                queue.insert(queue.end(), nbj.begin(), nbj.end());
        }
        ++cluster;
    }

    ClusterModel model;
    model.method = ClusterMethod::dbscan;
    model.k = cluster;
    model.labels = std::move(labels);
    model.centroids = centroids_of(X, model.labels, std::max(cluster, 1));
    return model;
}

ValidityReport validity_metrics(const Eigen::MatrixXd& X, const ClusterModel& model) {
    ValidityReport report;
    report.method = model.method;
    report.k = model.k;

    const Eigen::Index n = X.rows();
    std::vector<Eigen::Index> rows;  // non-noise rows
    std::set<int> label_set;
    for (Eigen::Index i = 0; i < n; ++i) {
        const int l = model.labels[static_cast<std::size_t>(i)];
        if (l < 0) continue;
        rows.push_back(i);
        label_set.insert(l);
    }
    const int k = static_cast<int>(label_set.size());
    if (rows.empty()) return report;

    // Compact labels for noise-tolerant indexing.
    std::map<int, int> compact;
    for (int l : label_set) compact.emplace(l, static_cast<int>(compact.size()));

    Eigen::MatrixXd centers = Eigen::MatrixXd::Zero(std::max(k, 1), X.cols());
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(std::max(k, 1));
    for (Eigen::Index i : rows) {
        const int c = compact[model.labels[static_cast<std::size_t>(i)]];
        centers.row(c) += X.row(i);
        counts[c] += 1.0;
    }
    for (int c = 0; c < k; ++c) centers.row(c) /= counts[c];

    double wcss = 0.0;
    for (Eigen::Index i : rows) {
        const int c = compact[model.labels[static_cast<std::size_t>(i)]];
        wcss += (X.row(i) - centers.row(c)).squaredNorm();
    }
    report.wcss = wcss;

    if (k >= 2 && static_cast<Eigen::Index>(rows.size()) > k) {
        Eigen::RowVectorXd grand = Eigen::RowVectorXd::Zero(X.cols());
        for (Eigen::Index i : rows) grand += X.row(i);
        grand /= static_cast<double>(rows.size());
        double between = 0.0;
        for (int c = 0; c < k; ++c)
            between += counts[c] * (centers.row(c) - grand).squaredNorm();
        const double m = static_cast<double>(rows.size());
        report.chi = (between / (k - 1)) / (wcss / (m - k));
    }

    if (k >= 2) {
        // Silhouette on pairwise Euclidean distances; singleton clusters score 0.
        const std::size_t m = rows.size();
        std::vector<int> lab(m);
        for (std::size_t i = 0; i < m; ++i)
            lab[i] = compact[model.labels[static_cast<std::size_t>(rows[i])]];
        double total = 0.0;
        std::vector<double> sums(static_cast<std::size_t>(k));
        for (std::size_t i = 0; i < m; ++i) {
            std::fill(sums.begin(), sums.end(), 0.0);
            for (std::size_t j = 0; j < m; ++j) {
                if (i == j) continue;
                sums[static_cast<std::size_t>(lab[j])] +=
                    (X.row(rows[i]) - X.row(rows[j])).norm();
            }
            const int own = lab[i];
            const double own_count = counts[own] - 1.0;
            if (own_count <= 0.0) continue;  // singleton contributes 0
            const double a = sums[static_cast<std::size_t>(own)] / own_count;
            double b = kInf;
            for (int c = 0; c < k; ++c) {
                if (c == own) continue;
                b = std::min(b, sums[static_cast<std::size_t>(c)] / counts[c]);
            }
            const double denom = std::max(a, b);
            if (denom > 0.0) total += (b - a) / denom;
        }
        report.silhouette = total / static_cast<double>(m);
    }

    if (model.method == ClusterMethod::fcm && model.soft_memberships.size() > 0) {
        report.fpc = model.soft_memberships.array().square().sum() /
                     static_cast<double>(model.soft_memberships.rows());
    }
    if (model.method == ClusterMethod::gmm) {
        const double d = static_cast<double>(X.cols());
        const double p = (model.k - 1) + model.k * d + model.k * d * (d + 1.0) / 2.0;
        report.aic = 2.0 * p - 2.0 * model.log_likelihood;
        report.bic = p * std::log(static_cast<double>(n)) - 2.0 * model.log_likelihood;
    }
    report.k = model.method == ClusterMethod::dbscan ? k : model.k;
    return report;
}

int elbow_k(const std::vector<std::pair<int, double>>& wcss_by_k) {
    if (wcss_by_k.size() < 3) return wcss_by_k.empty() ? 0 : wcss_by_k.front().first;
    auto sorted = wcss_by_k;
    std::sort(sorted.begin(), sorted.end());
    const double k0 = sorted.front().first, k1 = sorted.back().first;
    const double w0 = sorted.front().second, w1 = sorted.back().second;
    const double kspan = std::max(1.0, k1 - k0);
    const double wspan = std::max(1e-12, std::abs(w0 - w1));

    // Normalized axes put the chord on x + y = 1; the elbow is the point
    // farthest below it.
    int best_k = sorted.front().first;
    double best_d = -kInf;
    for (const auto& [k, w] : sorted) {
        const double x = (static_cast<double>(k) - k0) / kspan;
        const double y = (w - w1) / wspan;
        const double dist = (1.0 - x - y) / std::numbers::sqrt2;
        if (dist > best_d) {
            best_d = dist;
            best_k = k;
        }
    }
    return best_k;
}

GridSearchResult grid_search(const Eigen::MatrixXd& X,
                             const std::vector<ClusterMethod>& methods, int k_min, int k_max,
                             std::uint64_t seed, double fcm_fuzzifier) {
    if (k_min < 1 || k_max < k_min) throw Error("grid_search: invalid k range");
    GridSearchResult result;

    struct Cell {
        ClusterMethod method;
        int k;
    };
    std::vector<Cell> cells;
    for (ClusterMethod m : methods) {
        if (m == ClusterMethod::dbscan) continue;  // no K to sweep
        for (int k = k_min; k <= std::min<int>(k_max, static_cast<int>(X.rows())); ++k) {
            if (m == ClusterMethod::gmm && k >= X.rows()) continue;
            cells.push_back({m, k});
        }
    }

    // The dendrogram is shared across every HAC cell.
    const bool wants_hac =
        std::find(methods.begin(), methods.end(), ClusterMethod::hac_ward) != methods.end();
    Dendrogram tree;
    if (wants_hac) tree = fit_hac_ward(X);

    auto run_cell = [&](const Cell& cell) -> ValidityReport {
        ClusterModel model;
        switch (cell.method) {
            case ClusterMethod::kmeans: model = fit_kmeans(X, cell.k, seed); break;
            case ClusterMethod::hac_ward: model = cut(tree, X, cell.k); break;
            case ClusterMethod::gmm: model = fit_gmm(X, cell.k, seed); break;
            case ClusterMethod::fcm: model = fit_fcm(X, cell.k, fcm_fuzzifier, seed); break;
            case ClusterMethod::dbscan: throw Error("dbscan has no grid");
        }
        return validity_metrics(X, model);
    };

    std::vector<std::future<ValidityReport>> futures;
    futures.reserve(cells.size());
    for (const auto& cell : cells)
        futures.push_back(std::async(std::launch::async, run_cell, cell));
    for (auto& f : futures) result.cells.push_back(f.get());

    // Per-method recommendations.
    for (ClusterMethod m : methods) {
        if (m == ClusterMethod::dbscan) continue;
        std::vector<const ValidityReport*> mine;
        for (const auto& cell : result.cells)
            if (cell.method == m) mine.push_back(&cell);
        if (mine.empty()) continue;

        auto arg_best = [&](auto getter, bool maximize) -> std::optional<int> {
            std::optional<int> best_k;
            double best = maximize ? -kInf : kInf;
            for (const auto* c : mine) {
                const auto v = getter(*c);
                if (!v) continue;
                if ((maximize && *v > best) || (!maximize && *v < best)) {
                    best = *v;
                    best_k = c->k;
                }
            }
            return best_k;
        };

        if (auto k = arg_best([](const ValidityReport& r) { return r.silhouette; }, true))
            result.recommended.push_back({m, "silhouette", *k});
        if (auto k = arg_best([](const ValidityReport& r) { return r.chi; }, true))
            result.recommended.push_back({m, "chi", *k});
        std::vector<std::pair<int, double>> wcss;
        for (const auto* c : mine)
            if (c->wcss) wcss.emplace_back(c->k, *c->wcss);
        if (wcss.size() >= 3) result.recommended.push_back({m, "wcss_elbow", elbow_k(wcss)});
        if (m == ClusterMethod::fcm) {
            std::vector<const ValidityReport*> k2;
            for (const auto* c : mine)
                if (c->k >= 2) k2.push_back(c);
            std::swap(mine, k2);
            if (auto k = arg_best([](const ValidityReport& r) { return r.fpc; }, true))
                result.recommended.push_back({m, "fpc", *k});
            std::swap(mine, k2);
        }
        if (m == ClusterMethod::gmm) {
            if (auto k = arg_best([](const ValidityReport& r) { return r.aic; }, false))
                result.recommended.push_back({m, "aic", *k});
            if (auto k = arg_best([](const ValidityReport& r) { return r.bic; }, false))
                result.recommended.push_back({m, "bic", *k});
        }
    }
    return result;
}

std::vector<std::vector<RepresentativeCall>> representative_calls(const Eigen::MatrixXd& X,
                                                                  const ClusterModel& model,
                                                                  double percentile) {
    if (model.centroids.rows() == 0) throw Error("representative_calls: unfitted model");
    const int k = std::max(model.k, static_cast<int>(model.centroids.rows()));
    std::vector<std::vector<RepresentativeCall>> all(static_cast<std::size_t>(k));

    std::vector<std::vector<RepresentativeCall>> members(static_cast<std::size_t>(k));
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        const int l = model.labels[static_cast<std::size_t>(i)];
        if (l < 0 || l >= k) continue;
        members[static_cast<std::size_t>(l)].push_back(
            {static_cast<int>(i), (X.row(i) - model.centroids.row(l)).norm()});
    }
    for (int c = 0; c < k; ++c) {
        auto& m = members[static_cast<std::size_t>(c)];
        if (m.empty()) continue;
        std::sort(m.begin(), m.end(), [](const RepresentativeCall& a, const RepresentativeCall& b) {
            return a.distance != b.distance ? a.distance < b.distance : a.row < b.row;
        });
        const auto take = std::max<std::size_t>(
            1, static_cast<std::size_t>(
                   std::ceil(percentile / 100.0 * static_cast<double>(m.size()))));
        m.resize(std::min(m.size(), take));
        all[static_cast<std::size_t>(c)] = std::move(m);
    }
    return all;
}

std::vector<int> align_clusters(const Eigen::MatrixXd& centroids_a,
                                const Eigen::MatrixXd& centroids_b) {
    const int n = static_cast<int>(centroids_a.rows());
    if (centroids_b.rows() != n || centroids_a.cols() != centroids_b.cols())
        throw Error("align_clusters: centroid sets must have matching shapes");

    // Hungarian algorithm with potentials (rows of `a` assigned to rows of `b`).
    std::vector<std::vector<double>> cost(n, std::vector<double>(n));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            cost[i][j] = (centroids_a.row(i) - centroids_b.row(j)).norm();

    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(n + 1, kInf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            double delta = kInf;
            int j1 = 0;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }

    std::vector<int> match(static_cast<std::size_t>(n), -1);
    for (int j = 1; j <= n; ++j)
        if (p[j] > 0) match[static_cast<std::size_t>(p[j] - 1)] = j - 1;
    return match;
}

}  // namespace chickcall
