#ifndef SMLSBM_GENERATE_HPP
#define SMLSBM_GENERATE_HPP

#include <Eigen/Core>
#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "smlsbm/errors.hpp"
#include "smlsbm/multilayer.hpp"
#include "smlsbm/rng.hpp"
#include "smlsbm/sbm.hpp"

namespace smlsbm {

/// Planted-partition parameterization: p_in on the diagonal of pi,
/// p_out elsewhere.
struct PlantedParams {
    std::size_t n = 0;
    std::size_t k = 1;
    double p_in = 0.0;
    double p_out = 0.0;
    std::vector<std::size_t> community_sizes;  // empty = balanced n/k

    void validate() const {
        if (n < 2 || k < 1) throw ValidationError("planted params: need n >= 2, k >= 1");
        if (p_in < 0.0 || p_in > 1.0 || p_out < 0.0 || p_out > 1.0)
            throw ValidationError("planted params: probabilities must be in [0,1]");
        if (!community_sizes.empty()) {
            const auto total = std::accumulate(community_sizes.begin(), community_sizes.end(),
                                               std::size_t{0});
            if (community_sizes.size() != k || total != n)
                throw ValidationError("planted params: community sizes must sum to n");
        }
    }

    Eigen::MatrixXd pi_matrix() const {
        Eigen::MatrixXd pi = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(k),
                                                       static_cast<Eigen::Index>(k), p_out);
        pi.diagonal().setConstant(p_in);
        return pi;
    }
};

/// Invert c = N (p_in + (K-1) p_out) / K for p_out.
inline double derive_p_out(double c, std::size_t n, std::size_t k, double p_in) {
    if (k < 2) throw ValidationError("derive_p_out: needs k >= 2");
    const double p_out = (c * double(k) / double(n) - p_in) / double(k - 1);
    if (p_out < 0.0 || p_out > 1.0)
        throw ValidationError("derive_p_out: infeasible, p_out = " + std::to_string(p_out));
    return p_out;
}

inline double derive_p_in(double c, std::size_t n, std::size_t k, double p_out) {
    const double p_in = c * double(k) / double(n) - double(k - 1) * p_out;
    if (p_in < 0.0 || p_in > 1.0)
        throw ValidationError("derive_p_in: infeasible, p_in = " + std::to_string(p_in));
    return p_in;
}

inline double mean_degree(const PlantedParams& p) {
    return double(p.n) * (p.p_in + double(p.k - 1) * p.p_out) / double(p.k);
}

/// N (p_in - p_out): the community-detectability signal strength.
inline double detectability_gap(const PlantedParams& p) {
    return double(p.n) * (p.p_in - p.p_out);
}

/// Balanced community assignment under a seeded random node permutation.
inline HardPartition planted_assignment(const PlantedParams& p, std::uint64_t seed) {
    std::vector<std::size_t> sizes = p.community_sizes;
    if (sizes.empty()) {
        sizes.assign(p.k, p.n / p.k);
        for (std::size_t m = 0; m < p.n % p.k; ++m) sizes[m]++;
    }
    HardPartition hp;
    for (std::size_t m = 0; m < sizes.size(); ++m)
        hp.z.insert(hp.z.end(), sizes[m], m);
    // Fisher-Yates with explicit index draws for cross-platform determinism
    std::mt19937_64 g(mix_seed(seed, 0x5eedfeedULL));
    for (std::size_t i = hp.z.size() - 1; i > 0; --i)
        std::swap(hp.z[i], hp.z[next_index(g, i + 1)]);
    return hp;
}

/// Bernoulli(pi_{z_i z_j}) per unordered pair, counter-based per (i,j) so
/// the result is independent of sampling order.
inline AdjacencyMatrix sample_sbm(const Eigen::MatrixXd& pi, const HardPartition& z,
                                  std::uint64_t seed) {
    const auto n = static_cast<Eigen::Index>(z.z.size());
    AdjacencyMatrix a = AdjacencyMatrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double p = pi(static_cast<Eigen::Index>(z.z[i]),
                                static_cast<Eigen::Index>(z.z[j]));
            const double u = u64_to_unit(splitmix64(mix_seed(seed, std::uint64_t(i),
                                                             std::uint64_t(j))));
            if (u < p) {
                a(i, j) = 1.0;
                a(j, i) = 1.0;
            }
        }
    return a;
}

struct StratumSpec {
    PlantedParams params;
    std::size_t n_layers = 1;
    // explicit model overrides the planted parameterization when set
    std::optional<Eigen::MatrixXd> explicit_pi;
    std::optional<HardPartition> explicit_z;
    // share the stratum-s assignment instead of drawing a fresh one
    std::optional<std::size_t> share_z_with;
};

struct SmlsbmSpec {
    std::vector<StratumSpec> strata;
    std::uint64_t seed = 0;

    std::size_t n_layers() const {
        std::size_t l = 0;
        for (const auto& s : strata) l += s.n_layers;
        return l;
    }
};

struct GroundTruth {
    std::vector<std::size_t> y;          // layer -> stratum
    std::vector<HardPartition> z;        // per-stratum node communities
    std::vector<Eigen::MatrixXd> pi;     // per-stratum block matrices
};

/// Sample a full multilayer network: one (pi, z) per stratum, then L^s
/// independent layers from each.
inline std::pair<MultilayerNetwork, GroundTruth> sample_smlsbm(const SmlsbmSpec& spec) {
    if (spec.strata.empty()) throw ValidationError("smlsbm spec: no strata");
    const std::size_t n = spec.strata[0].params.n;
    for (const auto& s : spec.strata) {
        s.params.validate();
        if (s.params.n != n) throw ValidationError("smlsbm spec: strata must share N");
    }

    GroundTruth truth;
    for (std::size_t s = 0; s < spec.strata.size(); ++s) {
        const auto& st = spec.strata[s];
        truth.pi.push_back(st.explicit_pi.value_or(st.params.pi_matrix()));
        if (st.explicit_z.has_value()) {
            truth.z.push_back(*st.explicit_z);
        } else if (st.share_z_with.has_value()) {
            if (*st.share_z_with >= s)
                throw ValidationError("smlsbm spec: share_z_with must name an earlier stratum");
            truth.z.push_back(truth.z[*st.share_z_with]);
        } else {
            truth.z.push_back(planted_assignment(st.params, mix_seed(spec.seed, 0x7a00 + s)));
        }
    }

    MultilayerNetwork net;
    net.n_nodes = n;
    std::size_t layer_ix = 0;
    for (std::size_t s = 0; s < spec.strata.size(); ++s) {
        for (std::size_t l = 0; l < spec.strata[s].n_layers; ++l, ++layer_ix) {
            net.layers.push_back(
                sample_sbm(truth.pi[s], truth.z[s], mix_seed(spec.seed, 0x1a7e4, layer_ix)));
            truth.y.push_back(s);
        }
    }
    return {std::move(net), std::move(truth)};
}

}  // namespace smlsbm

#endif
