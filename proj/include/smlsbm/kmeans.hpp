#ifndef SMLSBM_KMEANS_HPP
#define SMLSBM_KMEANS_HPP

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "smlsbm/errors.hpp"
#include "smlsbm/metrics.hpp"
#include "smlsbm/rng.hpp"

namespace smlsbm {

struct KmeansConfig {
    std::size_t n_restarts = 10;
    std::size_t max_iters = 300;
    std::uint64_t seed = 0;
};

struct KmeansResult {
    Partition assignment;
    Eigen::MatrixXd centers;  // k x dim
    double inertia = 0.0;     // within-cluster sum of squared distances
};

namespace detail {

inline double sq_dist(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return (a - b).squaredNorm();
}

// k-means++ seeding.
inline Eigen::MatrixXd kmeanspp_init(const std::vector<Eigen::VectorXd>& pts, std::size_t k,
                                     std::mt19937_64& g) {
    const std::size_t n = pts.size();
    Eigen::MatrixXd centers(k, pts[0].size());
    std::vector<double> d2(n, std::numeric_limits<double>::infinity());
    std::size_t first = next_index(g, n);
    centers.row(0) = pts[first];
    for (std::size_t c = 1; c < k; ++c) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            d2[i] = std::min(d2[i], sq_dist(pts[i], centers.row(c - 1)));
            total += d2[i];
        }
        std::size_t pick = 0;
        if (total > 0.0) {
            const double r = next_unit(g) * total;
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                acc += d2[i];
                if (acc >= r) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = next_index(g, n);
        }
        centers.row(c) = pts[pick];
    }
    return centers;
}

}  // namespace detail

/// Lloyd's algorithm with k-means++ seeding; best of n_restarts by inertia.
/// An empty cluster is re-seeded at the point farthest from its center.
inline KmeansResult kmeans(const std::vector<Eigen::VectorXd>& points, std::size_t k,
                           const KmeansConfig& cfg = {}) {
    const std::size_t n = points.size();
    if (k == 0 || k > n) throw ValidationError("kmeans: need 1 <= k <= n_points");

    KmeansResult best;
    best.inertia = std::numeric_limits<double>::infinity();
    for (std::size_t restart = 0; restart < cfg.n_restarts; ++restart) {
        std::mt19937_64 g(mix_seed(cfg.seed, restart));
        Eigen::MatrixXd centers = detail::kmeanspp_init(points, k, g);
        std::vector<std::size_t> labels(n, 0);
        double inertia = std::numeric_limits<double>::infinity();
        for (std::size_t iter = 0; iter < cfg.max_iters; ++iter) {
            // assignment step
            double new_inertia = 0.0;
            std::vector<std::size_t> counts(k, 0);
            for (std::size_t i = 0; i < n; ++i) {
                double bd = std::numeric_limits<double>::infinity();
                std::size_t bl = 0;
                for (std::size_t c = 0; c < k; ++c) {
                    const double d = detail::sq_dist(points[i], centers.row(c));
                    if (d < bd) {
                        bd = d;
                        bl = c;
                    }
                }
                labels[i] = bl;
                counts[bl]++;
                new_inertia += bd;
            }
            // empty cluster: re-seed at the overall farthest point
            for (std::size_t c = 0; c < k; ++c) {
                if (counts[c] != 0) continue;
                double far = -1.0;
                std::size_t pick = 0;
                for (std::size_t i = 0; i < n; ++i) {
                    const double d = detail::sq_dist(points[i], centers.row(labels[i]));
                    if (d > far && counts[labels[i]] > 1) {
                        far = d;
                        pick = i;
                    }
                }
                counts[labels[pick]]--;
                labels[pick] = c;
                counts[c] = 1;
            }
            // update step
            Eigen::MatrixXd new_centers = Eigen::MatrixXd::Zero(k, points[0].size());
            for (std::size_t i = 0; i < n; ++i) new_centers.row(labels[i]) += points[i];
            for (std::size_t c = 0; c < k; ++c) new_centers.row(c) /= double(counts[c]);
            centers = new_centers;
            if (new_inertia >= inertia - 1e-12 && iter > 0) {
                inertia = std::min(inertia, new_inertia);
                break;
            }
            inertia = new_inertia;
        }
        // final inertia against final centers
        double final_inertia = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            final_inertia += detail::sq_dist(points[i], centers.row(labels[i]));
        if (final_inertia < best.inertia) {
            best.inertia = final_inertia;
            best.centers = centers;
            best.assignment.labels = labels;
        }
    }
    return best;
}

struct GapConfig {
    std::size_t n_references = 20;
    KmeansConfig kmeans;
    std::uint64_t seed = 0;
};

/// Tibshirani gap statistic with uniform references over the bounding box;
/// smallest k with Gap(k) >= Gap(k+1) - s_{k+1} (1-SE rule).
inline std::size_t gap_statistic(const std::vector<Eigen::VectorXd>& points,
                                 const std::vector<std::size_t>& k_candidates,
                                 const GapConfig& cfg = {}) {
    if (k_candidates.empty()) throw ValidationError("gap_statistic: no candidates");
    const std::size_t n = points.size();
    const Eigen::Index dim = points[0].size();

    Eigen::VectorXd lo = points[0], hi = points[0];
    for (const auto& p : points) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }

    auto log_wk = [&](const std::vector<Eigen::VectorXd>& pts, std::size_t k,
                      std::uint64_t seed) {
        KmeansConfig kc = cfg.kmeans;
        kc.seed = seed;
        const double w = kmeans(pts, k, kc).inertia;
        return std::log(std::max(w, 1e-300));
    };

    std::vector<double> gap(k_candidates.size()), se(k_candidates.size());
    for (std::size_t ci = 0; ci < k_candidates.size(); ++ci) {
        const std::size_t k = k_candidates[ci];
        if (k > n) {
            gap[ci] = -std::numeric_limits<double>::infinity();
            se[ci] = 0.0;
            continue;
        }
        const double obs = log_wk(points, k, mix_seed(cfg.seed, 1000 + ci));
        std::vector<double> ref_logs(cfg.n_references);
        for (std::size_t b = 0; b < cfg.n_references; ++b) {
            std::mt19937_64 g(mix_seed(cfg.seed, ci, b));
            std::vector<Eigen::VectorXd> ref(n, Eigen::VectorXd(dim));
            for (std::size_t i = 0; i < n; ++i)
                for (Eigen::Index d = 0; d < dim; ++d)
                    ref[i](d) = lo(d) + next_unit(g) * (hi(d) - lo(d));
            ref_logs[b] = log_wk(ref, k, mix_seed(cfg.seed, ci, 5000 + b));
        }
        double mean = 0.0;
        for (double v : ref_logs) mean += v;
        mean /= double(cfg.n_references);
        double var = 0.0;
        for (double v : ref_logs) var += (v - mean) * (v - mean);
        var /= double(cfg.n_references);
        gap[ci] = mean - obs;
        se[ci] = std::sqrt(var) * std::sqrt(1.0 + 1.0 / double(cfg.n_references));
    }
    for (std::size_t ci = 0; ci + 1 < k_candidates.size(); ++ci)
        if (gap[ci] >= gap[ci + 1] - se[ci + 1]) return k_candidates[ci];
    return k_candidates.back();
}

}  // namespace smlsbm

#endif
