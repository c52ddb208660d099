#ifndef SMLSBM_METRICS_HPP
#define SMLSBM_METRICS_HPP

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <vector>

#include "smlsbm/errors.hpp"

namespace smlsbm {

/// Cluster labels; canonicalize() renumbers to contiguous indices from 0
/// in order of first appearance.
struct Partition {
    std::vector<std::size_t> labels;

    std::size_t size() const { return labels.size(); }

    std::size_t n_clusters() const {
        std::map<std::size_t, std::size_t> seen;
        for (auto l : labels) seen.emplace(l, seen.size());
        return seen.size();
    }

    Partition canonicalized() const {
        std::map<std::size_t, std::size_t> remap;
        Partition out;
        out.labels.reserve(labels.size());
        for (auto l : labels) {
            auto it = remap.emplace(l, remap.size()).first;
            out.labels.push_back(it->second);
        }
        return out;
    }
};

inline bool same_partition(const Partition& a, const Partition& b) {
    return a.canonicalized().labels == b.canonicalized().labels;
}

inline Eigen::MatrixXd contingency_table(const Partition& a, const Partition& b) {
    if (a.size() != b.size()) throw ValidationError("partition length mismatch");
    const Partition ca = a.canonicalized(), cb = b.canonicalized();
    Eigen::MatrixXd table = Eigen::MatrixXd::Zero(
        static_cast<Eigen::Index>(ca.n_clusters()), static_cast<Eigen::Index>(cb.n_clusters()));
    for (std::size_t i = 0; i < ca.size(); ++i)
        table(static_cast<Eigen::Index>(ca.labels[i]), static_cast<Eigen::Index>(cb.labels[i])) +=
            1.0;
    return table;
}

/// Normalized mutual information, 2 I(a;b) / (H(a)+H(b)), natural logs.
/// Both partitions trivial -> 1; exactly one trivial -> 0.
inline double nmi(const Partition& a, const Partition& b) {
    const Eigen::MatrixXd t = contingency_table(a, b);
    const double n = t.sum();
    const Eigen::VectorXd ra = t.rowwise().sum();
    const Eigen::VectorXd rb = t.colwise().sum();

    auto entropy = [n](const Eigen::VectorXd& v) {
        double h = 0.0;
        for (Eigen::Index i = 0; i < v.size(); ++i)
            if (v(i) > 0) h -= (v(i) / n) * std::log(v(i) / n);
        return h;
    };
    const double ha = entropy(ra), hb = entropy(rb);
    if (ha + hb == 0.0) return 1.0;
    if (ha == 0.0 || hb == 0.0) return 0.0;

    double mi = 0.0;
    for (Eigen::Index i = 0; i < t.rows(); ++i)
        for (Eigen::Index j = 0; j < t.cols(); ++j)
            if (t(i, j) > 0)
                mi += (t(i, j) / n) * std::log(n * t(i, j) / (ra(i) * rb(j)));
    const double v = 2.0 * mi / (ha + hb);
    return std::clamp(v, 0.0, 1.0);
}

/// Minimum-cost assignment on a square cost matrix (shortest augmenting
/// path, O(n^3)). Returns row -> column.
inline std::vector<std::size_t> hungarian(const Eigen::MatrixXd& cost) {
    if (cost.rows() != cost.cols()) throw ValidationError("cost matrix must be square");
    const int n = static_cast<int>(cost.rows());
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            double delta = inf;
            int j1 = -1;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
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
    std::vector<std::size_t> match(n);
    for (int j = 1; j <= n; ++j) match[p[j] - 1] = static_cast<std::size_t>(j - 1);
    return match;
}

/// Permutation of estimated labels maximizing agreement with the truth,
/// via minimum-cost matching on the negated confusion matrix.
/// Returns sigma with sigma[est_label] = matched true label.
inline std::vector<std::size_t> match_labels(const Partition& truth, const Partition& est,
                                             std::size_t k) {
    if (truth.size() != est.size()) throw ValidationError("partition length mismatch");
    Eigen::MatrixXd confusion = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k),
                                                      static_cast<Eigen::Index>(k));
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth.labels[i] >= k || est.labels[i] >= k)
            throw ValidationError("label out of range for match_labels");
        confusion(static_cast<Eigen::Index>(est.labels[i]),
                  static_cast<Eigen::Index>(truth.labels[i])) += 1.0;
    }
    return hungarian(-confusion);
}

inline Eigen::VectorXd lower_triangle_vec(const Eigen::MatrixXd& m) {
    const Eigen::Index k = m.rows();
    Eigen::VectorXd v(k * (k + 1) / 2);
    Eigen::Index at = 0;
    for (Eigen::Index i = 0; i < k; ++i)
        for (Eigen::Index j = 0; j <= i; ++j) v(at++) = m(i, j);
    return v;
}

/// l2 error between block matrices after aligning estimated community
/// labels to the truth through the node partitions. The matching
/// maximizes z agreement; among equally good matchings (ties are common
/// with small confusion counts) the one with the smallest resulting
/// error is taken, so the result is invariant to relabeling.
inline double pi_error(const Eigen::MatrixXd& pi_true, const Eigen::MatrixXd& pi_est,
                       const Partition& z_true, const Partition& z_est) {
    if (pi_true.rows() != pi_est.rows() || pi_true.cols() != pi_est.cols())
        throw ValidationError("pi_error requires equal community counts");
    const auto k = static_cast<std::size_t>(pi_true.rows());

    Eigen::MatrixXd confusion = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k),
                                                      static_cast<Eigen::Index>(k));
    if (z_true.size() != z_est.size()) throw ValidationError("partition length mismatch");
    for (std::size_t i = 0; i < z_true.size(); ++i) {
        if (z_true.labels[i] >= k || z_est.labels[i] >= k)
            throw ValidationError("label out of range for pi_error");
        confusion(static_cast<Eigen::Index>(z_est.labels[i]),
                  static_cast<Eigen::Index>(z_true.labels[i])) += 1.0;
    }

    auto error_for = [&](const std::vector<std::size_t>& sigma) {
        Eigen::MatrixXd aligned(pi_est.rows(), pi_est.cols());
        for (std::size_t m = 0; m < k; ++m)
            for (std::size_t n = 0; n < k; ++n)
                aligned(static_cast<Eigen::Index>(sigma[m]),
                        static_cast<Eigen::Index>(sigma[n])) =
                    pi_est(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
        return (lower_triangle_vec(pi_true) - lower_triangle_vec(aligned)).norm();
    };
    auto agreement_for = [&](const std::vector<std::size_t>& sigma) {
        double a = 0.0;
        for (std::size_t m = 0; m < k; ++m)
            a += confusion(static_cast<Eigen::Index>(m),
                           static_cast<Eigen::Index>(sigma[m]));
        return a;
    };

    const auto hung = hungarian(-confusion);
    const double best_agreement = agreement_for(hung);
    if (k > 8) return error_for(hung);

    // enumerate all agreement-optimal matchings and keep the best error
    std::vector<std::size_t> perm(k);
    for (std::size_t m = 0; m < k; ++m) perm[m] = m;
    double best_err = error_for(hung);
    do {
        if (agreement_for(perm) >= best_agreement - 1e-9)
            best_err = std::min(best_err, error_for(perm));
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best_err;
}

struct DendrogramMerge {
    // Cluster ids: 0..M-1 are leaves, M+t is the cluster made by merge t.
    std::size_t left = 0;
    std::size_t right = 0;
    double height = 0.0;
};

/// Agglomerative clustering with complete linkage on a precomputed
/// distance matrix. Merge heights are non-decreasing.
inline std::vector<DendrogramMerge> hierarchical_complete(const Eigen::MatrixXd& dist) {
    if (dist.rows() != dist.cols()) throw ValidationError("distance matrix must be square");
    const std::size_t m = static_cast<std::size_t>(dist.rows());
    std::vector<DendrogramMerge> merges;
    if (m < 2) return merges;

    std::vector<std::size_t> active_id;   // current cluster ids
    std::vector<std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < m; ++i) {
        active_id.push_back(i);
        members.push_back({i});
    }
    auto linkage = [&](std::size_t a, std::size_t b) {
        double d = 0.0;
        for (auto x : members[a])
            for (auto y : members[b])
                d = std::max(d, dist(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y)));
        return d;
    };
    std::size_t next_id = m;
    while (members.size() > 1) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t bi = 0, bj = 1;
        for (std::size_t i = 0; i < members.size(); ++i)
            for (std::size_t j = i + 1; j < members.size(); ++j) {
                const double d = linkage(i, j);
                if (d < best) {
                    best = d;
                    bi = i;
                    bj = j;
                }
            }
        merges.push_back({active_id[bi], active_id[bj], best});
        members[bi].insert(members[bi].end(), members[bj].begin(), members[bj].end());
        active_id[bi] = next_id++;
        members.erase(members.begin() + static_cast<std::ptrdiff_t>(bj));
        active_id.erase(active_id.begin() + static_cast<std::ptrdiff_t>(bj));
    }
    return merges;
}

/// Cut a dendrogram: clusters are the components formed by merges with
/// height <= cut_height.
inline Partition dendrogram_cut(const std::vector<DendrogramMerge>& merges,
                                std::size_t n_leaves, double cut_height) {
    std::vector<std::size_t> parent(n_leaves + merges.size());
    for (std::size_t i = 0; i < parent.size(); ++i) parent[i] = i;
    std::function<std::size_t(std::size_t)> find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (std::size_t t = 0; t < merges.size(); ++t) {
        if (merges[t].height > cut_height) continue;
        const std::size_t id = n_leaves + t;
        parent[find(merges[t].left)] = find(id);
        parent[find(merges[t].right)] = find(id);
    }
    Partition out;
    out.labels.resize(n_leaves);
    for (std::size_t i = 0; i < n_leaves; ++i) out.labels[i] = find(i);
    return out.canonicalized();
}

}  // namespace smlsbm

#endif
