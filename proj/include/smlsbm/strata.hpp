#ifndef SMLSBM_STRATA_HPP
#define SMLSBM_STRATA_HPP

#include <Eigen/Core>
#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "smlsbm/errors.hpp"
#include "smlsbm/kmeans.hpp"
#include "smlsbm/metrics.hpp"
#include "smlsbm/multilayer.hpp"
#include "smlsbm/sbm.hpp"

namespace smlsbm {

/// Layer-to-stratum assignment; strata labels are contiguous from 0.
struct StrataAssignment {
    std::vector<std::size_t> y;  // layer -> stratum
    std::size_t n_strata = 0;

    static StrataAssignment from_labels(std::vector<std::size_t> labels) {
        StrataAssignment a;
        a.y = Partition{std::move(labels)}.canonicalized().labels;
        a.n_strata = Partition{a.y}.n_clusters();
        a.validate();
        return a;
    }

    std::vector<std::vector<std::size_t>> members() const {
        std::vector<std::vector<std::size_t>> m(n_strata);
        for (std::size_t l = 0; l < y.size(); ++l) m[y[l]].push_back(l);
        return m;
    }

    void validate() const {
        std::vector<bool> seen(n_strata, false);
        for (auto s : y) {
            if (s >= n_strata) throw ValidationError("stratum index out of range");
            seen[s] = true;
        }
        for (bool b : seen)
            if (!b) throw ValidationError("empty stratum in assignment");
    }

    Partition as_partition() const { return Partition{y}; }
};

struct StrataConfig {
    std::optional<std::size_t> s_init;  // absent: selected by the gap statistic
    std::size_t k_per_stratum = 2;
    std::size_t max_outer_iters = 50;
    // sweep budget for the per-layer tau refits; a short budget keeps a
    // layer that cannot support the consensus near-uniform (its fingerprint
    // stays at the mean density) instead of letting free iteration wander
    // to an arbitrary locally-stable partition
    std::size_t refit_sweeps = 1;
    FitConfig fit;
    KmeansConfig kmeans;
    std::size_t gap_references = 20;
    std::uint64_t seed = 0;
};

struct OuterIterationRecord {
    std::vector<std::size_t> y;
    std::vector<double> stratum_bounds;
};

struct SmlsbmModel {
    StrataAssignment assignment;
    std::vector<SbmFit> stratum_fits;
    std::vector<OuterIterationRecord> history;
    bool converged = false;
    std::size_t iterations = 0;  // Phase II outer iterations (NOI)
};

struct Phase1Result {
    StrataAssignment assignment;
    std::vector<SbmFit> layer_fits;
    std::vector<Eigen::VectorXd> features;  // upper-triangle theta vectors
};

namespace detail {

inline FitConfig layer_fit_config(const StrataConfig& cfg, std::uint64_t salt) {
    FitConfig fc = cfg.fit;
    fc.k = cfg.k_per_stratum;
    fc.seed = mix_seed(cfg.seed, salt);
    return fc;
}

inline std::size_t count_distinct(const std::vector<Eigen::VectorXd>& features) {
    std::size_t distinct = 0;
    for (std::size_t i = 0; i < features.size(); ++i) {
        bool dup = false;
        for (std::size_t j = 0; j < i && !dup; ++j)
            dup = (features[i] - features[j]).lpNorm<Eigen::Infinity>() < 1e-12;
        if (!dup) ++distinct;
    }
    return distinct;
}

}  // namespace detail

/// Phase I: fit an SBM to every layer in isolation, fingerprint each layer
/// by its theta matrix, and k-means the fingerprints into S strata. When S
/// is not configured it is chosen by the gap statistic over 1..min(L,10).
inline Phase1Result phase1_init(const MultilayerNetwork& net, const StrataConfig& cfg) {
    const std::size_t L = net.n_layers();
    Phase1Result out;
    for (std::size_t l = 0; l < L; ++l) {
        out.layer_fits.push_back(
            fit_sbm({net.layers[l]}, detail::layer_fit_config(cfg, 0x11000 + l)));
        out.features.push_back(upper_triangle_vec(theta_from(out.layer_fits.back())));
    }

    std::size_t s = cfg.s_init.value_or(0);
    if (!cfg.s_init.has_value()) {
        std::vector<std::size_t> candidates;
        for (std::size_t c = 1; c <= std::min<std::size_t>(L, 10); ++c) candidates.push_back(c);
        GapConfig gc;
        gc.n_references = cfg.gap_references;
        gc.kmeans = cfg.kmeans;
        gc.seed = mix_seed(cfg.seed, 0x9a9);
        s = gap_statistic(out.features, candidates, gc);
    }
    if (s < 1 || s > L) throw ValidationError("phase1: S must be in [1, L]");

    if (s == 1) {
        out.assignment = StrataAssignment::from_labels(std::vector<std::size_t>(L, 0));
        return out;
    }
    if (detail::count_distinct(out.features) < s)
        throw ValidationError("phase1: fewer distinct layer fingerprints than strata");
    KmeansConfig kc = cfg.kmeans;
    kc.seed = mix_seed(cfg.seed, 0x5111);
    out.assignment = StrataAssignment::from_labels(kmeans(out.features, s, kc).assignment.labels);
    return out;
}

/// Consensus fit for one stratum: a pooled fit_sbm over its member layers.
inline SbmFit fit_stratum_consensus(const MultilayerNetwork& net,
                                    const std::vector<std::size_t>& members,
                                    const StrataConfig& cfg,
                                    const std::optional<SbmFit>& init = std::nullopt) {
    if (members.empty()) throw ValidationError("consensus fit: empty stratum");
    std::vector<AdjacencyMatrix> adjs;
    for (auto l : members) adjs.push_back(net.layers[l]);
    return fit_sbm(adjs, detail::layer_fit_config(cfg, 0x22000 + members.front()), init);
}

/// Maximum-likelihood pi for one layer at the fixed consensus assignments.
inline Eigen::MatrixXd layer_refit_pi(const AdjacencyMatrix& layer,
                                      const Eigen::MatrixXd& tau_bar,
                                      double eps = kPiClamp) {
    return update_pi(tau_bar, {layer}, eps);
}

/// Node-to-community responsibilities for one layer at fixed consensus
/// (pi, alpha); iterated to a fixed point.
inline Eigen::MatrixXd layer_refit_tau(const AdjacencyMatrix& layer,
                                       const Eigen::MatrixXd& pi_bar,
                                       const Eigen::VectorXd& alpha_bar,
                                       const Eigen::MatrixXd& tau_init,
                                       std::size_t max_sweeps = 200, double tol = 1e-6) {
    const std::vector<AdjacencyMatrix> adjs{layer};
    Eigen::MatrixXd tau = tau_init;
    SbmFit probe;
    probe.pi = pi_bar;
    probe.alpha = alpha_bar;
    probe.tau = tau;
    double prev_j = bound_J(probe, adjs);
    for (std::size_t it = 0; it < max_sweeps; ++it) {
        Eigen::MatrixXd next = update_tau(tau, pi_bar, alpha_bar, adjs);
        probe.tau = next;
        double j = bound_J(probe, adjs);
        if (j < prev_j - 1e-10) {
            // synchronous sweep overshot; redo it sequentially so the
            // refit ascends from tau_init instead of oscillating away
            next = tau;
            detail::sequential_tau_sweep(next, pi_bar, alpha_bar, adjs);
            probe.tau = next;
            j = bound_J(probe, adjs);
        }
        const double delta = (next - tau).cwiseAbs().maxCoeff();
        tau = std::move(next);
        prev_j = j;
        if (delta < tol) break;
    }
    return tau;
}

/// The two per-layer fingerprints of Eqs. (12)-(13): consensus assignments
/// with the layer's own pi, and the layer's own assignments with the
/// consensus pi.
inline std::pair<ThetaMatrix, ThetaMatrix> dual_theta(const SbmFit& consensus,
                                                      const Eigen::MatrixXd& pi_tilde,
                                                      const Eigen::MatrixXd& tau_tilde) {
    // posterior-expected form rather than hard-argmax lookup: when a single
    // layer is too sparse to pin down its own assignments, tau_tilde stays
    // near-uniform and the fingerprint collapses toward the stratum's mean
    // density instead of a spurious random block matrix
    return {expected_theta(consensus.tau, pi_tilde), expected_theta(tau_tilde, consensus.pi)};
}

/// Cluster the 2L theta fingerprints with S centers. A layer whose two
/// representations agree joins that cluster's stratum; each distinct
/// disagreeing (cluster(theta1), cluster(theta2)) pair becomes one new
/// stratum, so n_strata may exceed S.
inline StrataAssignment reassign_layers(const std::vector<Eigen::VectorXd>& theta_features,
                                        std::size_t s, const KmeansConfig& kmeans_cfg,
                                        std::size_t* n_disagreeing = nullptr) {
    if (theta_features.size() % 2 != 0)
        throw ValidationError("reassign_layers: expected 2L feature vectors");
    const std::size_t L = theta_features.size() / 2;
    std::vector<std::size_t> labels;
    if (s <= 1) {
        labels.assign(2 * L, 0);
    } else {
        labels = kmeans(theta_features, s, kmeans_cfg).assignment.labels;
    }

    std::vector<std::size_t> y(L);
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> spawned;
    std::size_t next_label = s;
    if (n_disagreeing) *n_disagreeing = 0;
    for (std::size_t l = 0; l < L; ++l) {
        const std::size_t c1 = labels[l];
        const std::size_t c2 = labels[L + l];
        if (c1 == c2) {
            y[l] = c1;
        } else {
            if (n_disagreeing) ++*n_disagreeing;
            auto [it, fresh] = spawned.emplace(std::make_pair(c1, c2), next_label);
            if (fresh) ++next_label;
            y[l] = it->second;
        }
    }
    return StrataAssignment::from_labels(std::move(y));
}

namespace detail {

// Member whose fingerprint is closest to the stratum's mean fingerprint.
inline std::size_t medoid_layer(const std::vector<std::size_t>& members,
                                const std::vector<Eigen::VectorXd>& features) {
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(features[members.front()].size());
    for (auto l : members) mean += features[l];
    mean /= double(members.size());
    std::size_t best = members.front();
    double best_d = std::numeric_limits<double>::infinity();
    for (auto l : members) {
        const double d = (features[l] - mean).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = l;
        }
    }
    return best;
}

}  // namespace detail

/// Full sMLSBM fit: Phase I initialization, then Phase II iterations of
/// {consensus fits, per-layer refits, dual fingerprints, reassignment}
/// until the layer partition stops changing.
inline SmlsbmModel fit_smlsbm(const MultilayerNetwork& net, const StrataConfig& cfg) {
    const std::size_t L = net.n_layers();
    Phase1Result p1 = phase1_init(net, cfg);

    SmlsbmModel model;
    model.assignment = p1.assignment;
    // per-layer responsibilities used to seed consensus fits via the medoid
    std::vector<Eigen::MatrixXd> layer_tau;
    for (const auto& f : p1.layer_fits) layer_tau.push_back(f.tau);
    std::vector<Eigen::VectorXd> layer_features = p1.features;

    auto consensus_for = [&](const StrataAssignment& assignment, std::uint64_t iter_salt) {
        std::vector<SbmFit> fits;
        const auto members = assignment.members();
        for (std::size_t s = 0; s < members.size(); ++s) {
            const std::size_t medoid = detail::medoid_layer(members[s], layer_features);
            SbmFit init;
            init.tau = layer_tau[medoid];
            StrataConfig scfg = cfg;
            scfg.seed = mix_seed(cfg.seed, iter_salt, s);
            fits.push_back(fit_stratum_consensus(net, members[s], scfg, init));
        }
        return fits;
    };

    for (std::size_t iter = 0; iter < cfg.max_outer_iters; ++iter) {
        model.stratum_fits = consensus_for(model.assignment, 0x33000 + iter);

        // per-layer refits and dual fingerprints
        std::vector<Eigen::VectorXd> theta_feats(2 * L);
        for (std::size_t l = 0; l < L; ++l) {
            const SbmFit& cons = model.stratum_fits[model.assignment.y[l]];
            const Eigen::MatrixXd pi_tilde =
                layer_refit_pi(net.layers[l], cons.tau, cfg.fit.epsilon_clamp);
            const Eigen::MatrixXd tau_tilde = layer_refit_tau(
                net.layers[l], cons.pi, cons.alpha, cons.tau, cfg.refit_sweeps);
            auto [theta1, theta2] = dual_theta(cons, pi_tilde, tau_tilde);
            theta_feats[l] = upper_triangle_vec(theta1);
            theta_feats[L + l] = upper_triangle_vec(theta2);
            layer_tau[l] = tau_tilde;
            layer_features[l] = theta_feats[L + l];
        }

        // cluster around the model-order S, not the possibly-spawn-inflated
        // stratum count: letting the center count track n_strata splits
        // the noisy fingerprints further every round and strata fragment
        // instead of re-merging. One extra center is allowed (gap statistic)
        // because layers that cannot support their consensus produce
        // fingerprints near the flat mean-density point, and that cloud
        // otherwise captures a center that should separate true strata.
        // the k-means seed is deliberately constant across outer iterations
        // so reassignment is a deterministic map of the fingerprint
        // geometry and fixed points of that map can actually be reached
        KmeansConfig kc = cfg.kmeans;
        kc.seed = mix_seed(cfg.seed, 0x44000);
        const std::size_t s_base = p1.assignment.n_strata;
        std::size_t disagreeing = 0;
        StrataAssignment next = reassign_layers(theta_feats, s_base, kc, &disagreeing);
        // A collapse below the model order, or a majority of layers landing
        // in spawned strata, means a center was spent splitting the
        // theta_(1) cloud from the flat fingerprints of consensus-
        // disagreeing layers instead of separating strata; extra centers
        // park that cloud and restore resolution. Escalation is bounded and
        // only continues while the result stays under the model order.
        // Outlier layers also trap centers: a near-singleton stratum's
        // consensus is essentially its own fully converged fit, a
        // high-contrast fingerprint far from everything else, so each such
        // layer permanently captures one center and the clustering
        // degenerates to one bulk stratum plus scraps, leaving the bulk
        // layers unseparated. A stratum therefore only counts toward the
        // model order when it holds a nontrivial share of layers (the same
        // threshold the duplicate audit uses); while fewer than S strata
        // are nontrivial the centers are parked on outliers, not structure,
        // and escalation continues. If no attempt resolves S nontrivial
        // strata, the best-resolved one is kept rather than the last.
        const std::size_t big_share = std::max<std::size_t>(2, (L + 4) / 5);
        auto n_big = [&](const StrataAssignment& a) {
            std::size_t n = 0;
            for (const auto& m : a.members()) n += m.size() >= big_share;
            return n;
        };
        const bool tail_check = s_base >= 2 && L >= 2 * s_base + 1;
        auto underresolved = [&](const StrataAssignment& a) {
            return a.n_strata < s_base || (tail_check && n_big(a) < s_base);
        };
        bool degenerate = underresolved(next) || 2 * disagreeing > L;
        StrataAssignment best = next;
        for (std::size_t extra = 1; degenerate && extra <= 3 && s_base + extra <= 2 * L;
             ++extra) {
            KmeansConfig kc2 = cfg.kmeans;
            kc2.seed = mix_seed(cfg.seed, 0x77000 + extra);
            next = reassign_layers(theta_feats, s_base + extra, kc2);
            if (n_big(next) > n_big(best)) best = next;
            degenerate = underresolved(next);
        }
        if (degenerate && n_big(best) > n_big(next)) next = best;

        OuterIterationRecord rec;
        rec.y = next.y;
        for (const auto& f : model.stratum_fits) rec.stratum_bounds.push_back(f.bound);
        model.history.push_back(std::move(rec));
        model.iterations = iter + 1;

        const bool stable =
            same_partition(next.as_partition(), model.assignment.as_partition());
        model.assignment = std::move(next);
        if (stable) {
            model.converged = true;
            break;
        }
    }

    // final consensus fits on the converged (or last) strata
    model.stratum_fits = consensus_for(model.assignment, 0x55000);

    // Duplicate-consensus audit. Two well-populated strata that converge to
    // the same node partition with block matrices much closer than their own
    // contrast are one stratum fitted twice; the boundary between their
    // layers carries no evidence and the S-way split is arbitrary. Merging
    // would silently under-report the configured order, so instead the
    // fingerprints are re-clustered at a finer granularity: the spare
    // centers expose whatever heterogeneity the fingerprints do support
    // rather than an arbitrary binary consensus.
    const std::size_t big = std::max<std::size_t>(2, (L + 4) / 5);
    const auto final_members = model.assignment.members();
    bool duplicated = false;
    for (std::size_t i = 0; i + 1 < model.stratum_fits.size() && !duplicated; ++i)
        for (std::size_t j = i + 1; j < model.stratum_fits.size() && !duplicated; ++j) {
            if (final_members[i].size() < big || final_members[j].size() < big) continue;
            const SbmFit& a = model.stratum_fits[i];
            const SbmFit& b = model.stratum_fits[j];
            if (nmi(hard_partition(a).as_partition(), hard_partition(b).as_partition()) < 0.95)
                continue;
            const Eigen::VectorXd da = upper_triangle_vec(expected_theta(a.tau, a.pi));
            const Eigen::VectorXd db = upper_triangle_vec(expected_theta(b.tau, b.pi));
            const double ca = (da.array() - da.mean()).matrix().norm();
            const double cb = (db.array() - db.mean()).matrix().norm();
            duplicated = (da - db).norm() < 0.3 * std::min(ca, cb);
        }
    const std::size_t s_fine = std::min<std::size_t>(3 * p1.assignment.n_strata, L);
    if (duplicated && s_fine > model.assignment.n_strata) {
        std::vector<Eigen::VectorXd> feats(2 * L);
        for (std::size_t l = 0; l < L; ++l) {
            const SbmFit& cons = model.stratum_fits[model.assignment.y[l]];
            const Eigen::MatrixXd pi_tilde =
                layer_refit_pi(net.layers[l], cons.tau, cfg.fit.epsilon_clamp);
            const Eigen::MatrixXd tau_tilde = layer_refit_tau(
                net.layers[l], cons.pi, cons.alpha, cons.tau, cfg.refit_sweeps);
            auto [theta1, theta2] = dual_theta(cons, pi_tilde, tau_tilde);
            feats[l] = upper_triangle_vec(theta1);
            feats[L + l] = upper_triangle_vec(theta2);
        }
        KmeansConfig kc = cfg.kmeans;
        kc.seed = mix_seed(cfg.seed, 0x99000);
        StrataAssignment fine = reassign_layers(feats, s_fine, kc);
        if (fine.n_strata > model.assignment.n_strata) {
            model.assignment = std::move(fine);
            model.stratum_fits = consensus_for(model.assignment, 0x66000);
        }
    }
    return model;
}

inline nlohmann::json smlsbm_model_to_json(const SmlsbmModel& model) {
    nlohmann::json j;
    j["assignment"] = {{"y", model.assignment.y}, {"n_strata", model.assignment.n_strata}};
    auto fits = nlohmann::json::array();
    for (const auto& f : model.stratum_fits) fits.push_back(sbm_fit_to_json(f));
    j["stratum_fits"] = std::move(fits);
    auto hist = nlohmann::json::array();
    for (const auto& rec : model.history)
        hist.push_back({{"y", rec.y}, {"stratum_bounds", rec.stratum_bounds}});
    j["history"] = std::move(hist);
    j["converged"] = model.converged;
    j["iterations"] = model.iterations;
    return j;
}

}  // namespace smlsbm

#endif
