#ifndef SMLSBM_SBM_HPP
#define SMLSBM_SBM_HPP

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "smlsbm/errors.hpp"
#include "smlsbm/kmeans.hpp"
#include "smlsbm/metrics.hpp"
#include "smlsbm/multilayer.hpp"
#include "smlsbm/rng.hpp"

namespace smlsbm {

constexpr double kPiClamp = 1e-9;

struct FitDiagnostics {
    std::size_t restart_index = 0;
    std::size_t iterations = 0;
    std::size_t empty_block_pairs = 0;  // (m,n) pairs with zero denominator
    std::size_t reseeded_communities = 0;
    std::vector<double> j_trace;             // J after init M-step and each sweep
    std::vector<std::size_t> reseed_sweeps;  // sweeps where a community was reseeded
};

/// Variational SBM state for one layer or one pooled stratum.
struct SbmFit {
    Eigen::MatrixXd tau;    // N x K, rows sum to 1
    Eigen::MatrixXd pi;     // K x K symmetric, entries in [eps, 1-eps]
    Eigen::VectorXd alpha;  // K, sums to 1
    double bound = 0.0;     // variational bound J
    std::size_t n_layers_fitted = 0;
    FitDiagnostics diagnostics;

    std::size_t n_nodes() const { return static_cast<std::size_t>(tau.rows()); }
    std::size_t k() const { return static_cast<std::size_t>(tau.cols()); }
};

struct FitConfig {
    std::size_t k = 2;
    std::size_t max_inner_iters = 200;
    double tol = 1e-6;
    std::size_t n_restarts = 5;
    double epsilon_clamp = kPiClamp;
    std::uint64_t seed = 0;
};

inline Eigen::VectorXd update_alpha(const Eigen::MatrixXd& tau) {
    return tau.colwise().mean();
}

namespace detail {

inline void clamp_pi(Eigen::MatrixXd& pi, double eps) {
    pi = pi.cwiseMax(eps).cwiseMin(1.0 - eps);
}

// Pair-sum matrices for Eq.-(10)-style ratios over i != j: both numerator
// and denominator count ordered pairs, which leaves the ratio equal to the
// i<j form after symmetrization.
struct PiSums {
    Eigen::MatrixXd num;
    Eigen::MatrixXd den;
};

inline PiSums pi_sums(const Eigen::MatrixXd& tau, const std::vector<AdjacencyMatrix>& adjs) {
    const Eigen::Index k = tau.cols();
    PiSums s{Eigen::MatrixXd::Zero(k, k), Eigen::MatrixXd::Zero(k, k)};
    const Eigen::VectorXd col_sums = tau.colwise().sum();
    const Eigen::MatrixXd gram = tau.transpose() * tau;  // sum_i tau_im tau_in
    const Eigen::MatrixXd den_one = col_sums * col_sums.transpose() - gram;
    for (const auto& a : adjs) {
        s.num += tau.transpose() * a * tau;
        s.den += den_one;
    }
    return s;
}

}  // namespace detail

/// Eq.-(10) update: pooled block edge densities under responsibilities tau.
/// Zero-denominator block pairs get the clamp floor; count reported through
/// the optional diagnostics pointer.
inline Eigen::MatrixXd update_pi(const Eigen::MatrixXd& tau,
                                 const std::vector<AdjacencyMatrix>& adjs,
                                 double eps = kPiClamp,
                                 std::size_t* empty_pairs = nullptr) {
    const auto s = detail::pi_sums(tau, adjs);
    const Eigen::Index k = tau.cols();
    Eigen::MatrixXd pi(k, k);
    std::size_t empties = 0;
    for (Eigen::Index m = 0; m < k; ++m)
        for (Eigen::Index n = 0; n < k; ++n) {
            if (s.den(m, n) < 1e-12) {
                pi(m, n) = eps;
                ++empties;
            } else {
                pi(m, n) = s.num(m, n) / s.den(m, n);
            }
        }
    pi = 0.5 * (pi + pi.transpose().eval());
    detail::clamp_pi(pi, eps);
    if (empty_pairs) *empty_pairs = empties;
    return pi;
}

/// Eq.-(11) update, one synchronous sweep in the log domain:
/// log tau_im = log alpha_m + sum_l sum_{j != i} sum_n tau_jn
///              [A_ij log pi_mn + (1 - A_ij) log(1 - pi_mn)],
/// then a row-wise softmax.
inline Eigen::MatrixXd update_tau(const Eigen::MatrixXd& tau_prev, const Eigen::MatrixXd& pi,
                                  const Eigen::VectorXd& alpha,
                                  const std::vector<AdjacencyMatrix>& adjs) {
    const Eigen::Index n = tau_prev.rows();
    const Eigen::Index k = tau_prev.cols();
    const Eigen::MatrixXd log_pi = pi.array().log().matrix();
    const Eigen::MatrixXd log_qi = (1.0 - pi.array()).log().matrix();

    Eigen::MatrixXd logits = Eigen::MatrixXd::Zero(n, k);
    for (Eigen::Index m = 0; m < k; ++m)
        logits.col(m).array() += std::log(std::max(alpha(m), 1e-300));

    const Eigen::MatrixXd t_logpi = tau_prev * log_pi;   // N x K
    const Eigen::MatrixXd t_logqi = tau_prev * log_qi;   // N x K
    const Eigen::RowVectorXd colsum_logqi = t_logqi.colwise().sum();
    for (const auto& a : adjs) {
        // sum_{j != i}: A has zero diagonal; the (1 - A) part over j != i is
        // the full column sum minus the j = i term minus the A-neighbour terms.
        logits += a * (t_logpi - t_logqi);
        logits.rowwise() += colsum_logqi;
        logits -= t_logqi;  // remove j = i
    }
    if (!logits.allFinite()) throw NumericalError("non-finite tau logits");

    Eigen::MatrixXd tau(n, k);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double mx = logits.row(i).maxCoeff();
        Eigen::ArrayXd w = (logits.row(i).array() - mx).exp();
        tau.row(i) = (w / w.sum()).matrix();
    }
    return tau;
}

/// Eq. (8): the variational bound
/// J = sum tau log alpha + sum_l sum_{i<j} sum_mn tau tau [A log pi +
/// (1-A) log(1-pi)] - sum tau log tau, with 0 log 0 = 0.
inline double bound_J(const SbmFit& fit, const std::vector<AdjacencyMatrix>& adjs) {
    const Eigen::MatrixXd& tau = fit.tau;
    const Eigen::MatrixXd log_pi = fit.pi.array().log().matrix();
    const Eigen::MatrixXd log_qi = (1.0 - fit.pi.array()).log().matrix();

    double j = 0.0;
    for (Eigen::Index m = 0; m < tau.cols(); ++m)
        j += tau.col(m).sum() * std::log(std::max(fit.alpha(m), 1e-300));

    // edge terms over i<j = half the i != j double sum (symmetric matrices)
    const auto s = detail::pi_sums(tau, adjs);
    j += 0.5 * (s.num.cwiseProduct(log_pi).sum() +
                (s.den - s.num).cwiseProduct(log_qi).sum());

    for (Eigen::Index i = 0; i < tau.rows(); ++i)
        for (Eigen::Index m = 0; m < tau.cols(); ++m)
            if (tau(i, m) > 0.0) j -= tau(i, m) * std::log(tau(i, m));
    if (!std::isfinite(j)) throw NumericalError("non-finite bound J");
    return j;
}

struct HardPartition {
    std::vector<std::size_t> z;  // community index per node, 0-based

    Partition as_partition() const { return Partition{z}; }
};

/// Per-row argmax of tau; ties break to the lowest community index.
inline HardPartition hard_partition(const SbmFit& fit) {
    HardPartition hp;
    hp.z.resize(fit.n_nodes());
    for (Eigen::Index i = 0; i < fit.tau.rows(); ++i) {
        Eigen::Index best = 0;
        for (Eigen::Index m = 1; m < fit.tau.cols(); ++m)
            if (fit.tau(i, m) > fit.tau(i, best)) best = m;
        hp.z[static_cast<std::size_t>(i)] = static_cast<std::size_t>(best);
    }
    return hp;
}

using ThetaMatrix = Eigen::MatrixXd;

/// theta_ij = pi_{z_i z_j} for z from an explicit hard partition; zero diagonal.
inline ThetaMatrix theta_from(const Eigen::MatrixXd& pi, const HardPartition& z) {
    const auto n = static_cast<Eigen::Index>(z.z.size());
    ThetaMatrix theta(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            theta(i, j) = i == j ? 0.0
                                 : pi(static_cast<Eigen::Index>(z.z[i]),
                                      static_cast<Eigen::Index>(z.z[j]));
    return theta;
}

inline ThetaMatrix theta_from(const SbmFit& fit) {
    return theta_from(fit.pi, hard_partition(fit));
}

/// Posterior-expected edge probabilities, theta = tau pi tau^T with zero
/// diagonal. Equals theta_from when tau is one-hot; for a near-uniform tau
/// it degrades gracefully to the mean density instead of committing to an
/// arbitrary hard partition.
inline ThetaMatrix expected_theta(const Eigen::MatrixXd& tau, const Eigen::MatrixXd& pi) {
    ThetaMatrix theta = tau * pi * tau.transpose();
    theta.diagonal().setZero();
    return theta;
}

/// Upper-triangle feature vector (i<j), length N(N-1)/2.
inline Eigen::VectorXd upper_triangle_vec(const Eigen::MatrixXd& m) {
    const Eigen::Index n = m.rows();
    Eigen::VectorXd v(n * (n - 1) / 2);
    Eigen::Index at = 0;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) v(at++) = m(i, j);
    return v;
}

namespace detail {

inline Eigen::MatrixXd random_tau(Eigen::Index n, Eigen::Index k, std::mt19937_64& g) {
    Eigen::MatrixXd tau(n, k);
    for (Eigen::Index i = 0; i < n; ++i) {
        double row_sum = 0.0;
        for (Eigen::Index m = 0; m < k; ++m) {
            tau(i, m) = -std::log(std::max(next_unit(g), 1e-300));  // ~ Exp(1)
            row_sum += tau(i, m);
        }
        tau.row(i) /= row_sum;
    }
    return tau;
}

inline Eigen::MatrixXd onehot_tau(const std::vector<std::size_t>& labels, std::size_t k) {
    Eigen::MatrixXd tau = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(labels.size()),
                                                static_cast<Eigen::Index>(k));
    for (std::size_t i = 0; i < labels.size(); ++i)
        tau(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(labels[i] % k)) = 1.0;
    return tau;
}

// Structural init: k-means on the rows of the mean adjacency matrix.
inline Eigen::MatrixXd structural_tau(const std::vector<AdjacencyMatrix>& adjs, std::size_t k,
                                      std::uint64_t seed) {
    Eigen::MatrixXd mean = adjs[0];
    for (std::size_t l = 1; l < adjs.size(); ++l) mean += adjs[l];
    mean /= double(adjs.size());
    std::vector<Eigen::VectorXd> rows;
    rows.reserve(static_cast<std::size_t>(mean.rows()));
    for (Eigen::Index i = 0; i < mean.rows(); ++i) rows.push_back(mean.row(i));
    KmeansConfig kc;
    kc.n_restarts = 4;
    kc.seed = seed;
    const auto res = kmeans(rows, std::min<std::size_t>(k, rows.size()), kc);
    auto tau = onehot_tau(res.assignment.labels, k);
    // soften so no row starts exactly degenerate
    tau = (tau.array() * 0.9 + 0.1 / double(k)).matrix();
    for (Eigen::Index i = 0; i < tau.rows(); ++i) tau.row(i) /= tau.row(i).sum();
    return tau;
}

// Spectral init: k-means on the rows of the top-k eigenvector embedding of
// the mean adjacency (largest |eigenvalue|, so disassortative structure is
// kept). Row-space k-means on the raw mean adjacency loses weak planted
// structure in entrywise noise; the eigenvector embedding concentrates it
// and stays informative down to the detectability threshold.
inline Eigen::MatrixXd spectral_tau(const std::vector<AdjacencyMatrix>& adjs, std::size_t k,
                                    std::uint64_t seed) {
    Eigen::MatrixXd mean = adjs[0];
    for (std::size_t l = 1; l < adjs.size(); ++l) mean += adjs[l];
    mean /= double(adjs.size());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(mean);
    const Eigen::Index n = mean.rows();
    const auto kk = static_cast<Eigen::Index>(std::min<std::size_t>(k, std::size_t(n)));
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        return std::abs(es.eigenvalues()(a)) > std::abs(es.eigenvalues()(b));
    });
    Eigen::MatrixXd embed(n, kk);
    for (Eigen::Index j = 0; j < kk; ++j)
        embed.col(j) = es.eigenvectors().col(order[static_cast<std::size_t>(j)]);
    std::vector<Eigen::VectorXd> rows;
    rows.reserve(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) rows.push_back(embed.row(i));
    KmeansConfig kc;
    kc.n_restarts = 4;
    kc.seed = seed;
    const auto res = kmeans(rows, std::min<std::size_t>(k, rows.size()), kc);
    auto tau = onehot_tau(res.assignment.labels, k);
    tau = (tau.array() * 0.9 + 0.1 / double(k)).matrix();
    for (Eigen::Index i = 0; i < tau.rows(); ++i) tau.row(i) /= tau.row(i).sum();
    return tau;
}

// Sequential (Gauss-Seidel) tau sweep: rows updated in index order, each
// from the already-updated rows. Exact coordinate ascent on J for fixed
// (pi, alpha). Maintains per-row products incrementally, O(N^2 K) total.
inline void sequential_tau_sweep(Eigen::MatrixXd& tau, const Eigen::MatrixXd& pi,
                                 const Eigen::VectorXd& alpha,
                                 const std::vector<AdjacencyMatrix>& adjs) {
    const Eigen::Index n = tau.rows();
    const Eigen::Index k = tau.cols();
    const Eigen::MatrixXd log_pi = pi.array().log().matrix();
    const Eigen::MatrixXd log_qi = (1.0 - pi.array()).log().matrix();
    Eigen::MatrixXd tp = tau * log_pi;  // N x K
    Eigen::MatrixXd tq = tau * log_qi;
    Eigen::RowVectorXd tq_colsum = tq.colwise().sum();
    Eigen::RowVectorXd log_alpha(k);
    for (Eigen::Index m = 0; m < k; ++m) log_alpha(m) = std::log(std::max(alpha(m), 1e-300));

    const Eigen::MatrixXd diff = tp - tq;
    Eigen::MatrixXd diff_cur = diff;
    for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::RowVectorXd logits = log_alpha;
        for (const auto& a : adjs)
            logits += a.row(i) * diff_cur + tq_colsum - tq.row(i);
        const double mx = logits.maxCoeff();
        Eigen::ArrayXd w = (logits.array() - mx).exp();
        tau.row(i) = (w / w.sum()).matrix().transpose();
        // refresh cached products for the changed row
        tq_colsum -= tq.row(i);
        tp.row(i) = tau.row(i) * log_pi;
        tq.row(i) = tau.row(i) * log_qi;
        tq_colsum += tq.row(i);
        diff_cur.row(i) = tp.row(i) - tq.row(i);
    }
}

// Reseed tau columns whose total mass fell below 1e-6: give full
// responsibility to the node with the lowest max-responsibility.
inline bool reseed_empty_communities(Eigen::MatrixXd& tau) {
    bool reseeded = false;
    for (Eigen::Index m = 0; m < tau.cols(); ++m) {
        if (tau.col(m).sum() >= 1e-6) continue;
        Eigen::Index weakest = 0;
        double weakest_max = std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 0; i < tau.rows(); ++i) {
            const double mx = tau.row(i).maxCoeff();
            if (mx < weakest_max) {
                weakest_max = mx;
                weakest = i;
            }
        }
        tau.row(weakest).setZero();
        tau(weakest, m) = 1.0;
        reseeded = true;
    }
    return reseeded;
}

}  // namespace detail

/// Variational EM for one SBM over one or more layers sharing the model.
/// Runs n_restarts initializations (the provided init if any, one
/// structural, one spectral, plus random-responsibility restarts) and
/// keeps the highest final J.
inline SbmFit fit_sbm(const std::vector<AdjacencyMatrix>& adjs, const FitConfig& cfg,
                      const std::optional<SbmFit>& init = std::nullopt) {
    if (adjs.empty()) throw ValidationError("fit_sbm: no layers given");
    const Eigen::Index n = adjs[0].rows();
    for (const auto& a : adjs)
        if (a.rows() != n || a.cols() != n)
            throw ValidationError("fit_sbm: layer size mismatch");
    if (cfg.k < 1) throw ValidationError("fit_sbm: k must be >= 1");
    if (static_cast<Eigen::Index>(cfg.k) > n)
        throw ValidationError("fit_sbm: k exceeds node count");

    const auto k = static_cast<Eigen::Index>(cfg.k);
    SbmFit best;
    bool have_best = false;
    for (std::size_t restart = 0; restart < cfg.n_restarts; ++restart) {
        const std::size_t structural_at = init.has_value() ? 1 : 0;
        Eigen::MatrixXd tau;
        if (restart == 0 && init.has_value()) {
            tau = init->tau;
        } else if (restart == structural_at) {
            tau = detail::structural_tau(adjs, cfg.k, mix_seed(cfg.seed, 0xabcd));
        } else if (restart == structural_at + 1) {
            tau = detail::spectral_tau(adjs, cfg.k, mix_seed(cfg.seed, 0xabce));
        } else {
            std::mt19937_64 g(mix_seed(cfg.seed, restart));
            tau = detail::random_tau(n, k, g);
        }

        SbmFit fit;
        fit.n_layers_fitted = adjs.size();
        fit.diagnostics.restart_index = restart;
        fit.tau = tau;
        fit.alpha = update_alpha(fit.tau);
        fit.pi = update_pi(fit.tau, adjs, cfg.epsilon_clamp, &fit.diagnostics.empty_block_pairs);
        double prev_j = bound_J(fit, adjs);
        fit.diagnostics.j_trace.push_back(prev_j);

        std::size_t iters = 0;
        for (; iters < cfg.max_inner_iters; ++iters) {
            const Eigen::VectorXd pre_alpha = fit.alpha;
            const Eigen::MatrixXd pre_pi = fit.pi;
            Eigen::MatrixXd new_tau = update_tau(fit.tau, fit.pi, fit.alpha, adjs);
            bool reseeded = detail::reseed_empty_communities(new_tau);
            if (reseeded) {
                ++fit.diagnostics.reseeded_communities;
                fit.diagnostics.reseed_sweeps.push_back(iters);
            }
            fit.tau = new_tau;
            fit.alpha = update_alpha(fit.tau);
            fit.pi =
                update_pi(fit.tau, adjs, cfg.epsilon_clamp, &fit.diagnostics.empty_block_pairs);
            double j = bound_J(fit, adjs);
            if (!reseeded && j < prev_j - 1e-10) {
                // synchronous sweep overshot; redo it as a sequential
                // (Gauss-Seidel) sweep from the pre-sweep state, which is
                // exact coordinate ascent and cannot decrease J
                fit.tau = tau;
                fit.alpha = pre_alpha;
                fit.pi = pre_pi;
                detail::sequential_tau_sweep(fit.tau, fit.pi, fit.alpha, adjs);
                fit.alpha = update_alpha(fit.tau);
                fit.pi = update_pi(fit.tau, adjs, cfg.epsilon_clamp,
                                   &fit.diagnostics.empty_block_pairs);
                j = bound_J(fit, adjs);
            }
            tau = fit.tau;
            fit.diagnostics.j_trace.push_back(j);
            const bool converged = std::abs(j - prev_j) < cfg.tol * (1.0 + std::abs(prev_j));
            prev_j = j;
            if (converged) break;
        }
        fit.bound = prev_j;
        fit.diagnostics.iterations = iters + 1;
        if (!std::isfinite(fit.bound))
            throw NumericalError("fit_sbm: non-finite J in restart " + std::to_string(restart));
        if (!have_best || fit.bound > best.bound) {
            best = fit;
            have_best = true;
        }
    }
    return best;
}

inline nlohmann::json sbm_fit_to_json(const SbmFit& fit) {
    nlohmann::json j;
    j["k"] = fit.k();
    j["alpha"] = std::vector<double>(fit.alpha.data(), fit.alpha.data() + fit.alpha.size());
    std::vector<double> pi_lower;
    for (Eigen::Index m = 0; m < fit.pi.rows(); ++m)
        for (Eigen::Index n = 0; n <= m; ++n) pi_lower.push_back(fit.pi(m, n));
    j["pi"] = pi_lower;
    auto tau = nlohmann::json::array();
    for (Eigen::Index i = 0; i < fit.tau.rows(); ++i)
        tau.push_back(std::vector<double>(fit.tau.row(i).data(),
                                          fit.tau.row(i).data() + fit.tau.cols()));
    j["tau"] = std::move(tau);
    j["bound"] = fit.bound;
    j["n_layers_fitted"] = fit.n_layers_fitted;
    j["diagnostics"] = {{"restart_index", fit.diagnostics.restart_index},
                        {"iterations", fit.diagnostics.iterations},
                        {"empty_block_pairs", fit.diagnostics.empty_block_pairs},
                        {"reseeded_communities", fit.diagnostics.reseeded_communities}};
    return j;
}

}  // namespace smlsbm

#endif
