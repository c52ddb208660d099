#ifndef SMLSBM_BASELINES_HPP
#define SMLSBM_BASELINES_HPP

#include <vector>

#include "smlsbm/kmeans.hpp"
#include "smlsbm/multilayer.hpp"
#include "smlsbm/sbm.hpp"
#include "smlsbm/strata.hpp"

namespace smlsbm {

/// One SBM pooled over every layer.
inline SbmFit baseline_single_sbm(const MultilayerNetwork& net, std::size_t k,
                                  const FitConfig& cfg) {
    FitConfig fc = cfg;
    fc.k = k;
    return fit_sbm(net.layers, fc);
}

/// An independent SBM per layer.
inline std::vector<SbmFit> baseline_single_layer_sbm(const MultilayerNetwork& net,
                                                     std::size_t k, const FitConfig& cfg) {
    std::vector<SbmFit> fits;
    for (std::size_t l = 0; l < net.n_layers(); ++l) {
        FitConfig fc = cfg;
        fc.k = k;
        fc.seed = mix_seed(cfg.seed, l);
        fits.push_back(fit_sbm({net.layers[l]}, fc));
    }
    return fits;
}

/// k-means directly on the raw adjacency matrices (upper-triangle vectors).
inline StrataAssignment baseline_kmeans_adjacency(const MultilayerNetwork& net, std::size_t s,
                                                  const KmeansConfig& cfg) {
    std::vector<Eigen::VectorXd> features;
    for (const auto& a : net.layers) features.push_back(upper_triangle_vec(a));
    if (s == 1)
        return StrataAssignment::from_labels(
            std::vector<std::size_t>(net.n_layers(), 0));
    return StrataAssignment::from_labels(kmeans(features, s, cfg).assignment.labels);
}

}  // namespace smlsbm

#endif
