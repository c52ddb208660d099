#ifndef SMLSBM_EXPERIMENTS_HPP
#define SMLSBM_EXPERIMENTS_HPP

#include <atomic>
#include <cmath>
#include <cstdio>
#include <future>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "smlsbm/baselines.hpp"
#include "smlsbm/generate.hpp"
#include "smlsbm/metrics.hpp"
#include "smlsbm/strata.hpp"

namespace smlsbm {

inline std::string format_value(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

/// The three-strata comparison: sMLSBM vs a pooled SBM vs per-layer SBMs,
/// N=128, K=4, c=20, 10 layers per stratum.
struct Fig3Replicate {
    double pi_err_smlsbm = 0.0;
    double pi_err_single_sbm = 0.0;
    double pi_err_single_layer = 0.0;
    double strata_nmi = 0.0;
    double community_nmi_s1 = 0.0;  // mean over layers of true stratum 1
    double community_nmi_s2 = 0.0;
    double community_nmi_s3 = 0.0;
    std::size_t noi = 0;
    bool converged = false;
};

inline SmlsbmSpec fig3_spec(std::uint64_t seed) {
    SmlsbmSpec spec;
    spec.seed = seed;
    for (double p_in : {0.6, 0.4, 0.125}) {
        StratumSpec st;
        st.params = {.n = 128, .k = 4, .p_in = p_in, .p_out = derive_p_out(20, 128, 4, p_in)};
        st.n_layers = 10;
        spec.strata.push_back(st);
    }
    return spec;
}

inline StrataConfig experiment_strata_config(std::size_t s, std::size_t k,
                                             std::uint64_t seed) {
    StrataConfig cfg;
    cfg.s_init = s;
    cfg.k_per_stratum = k;
    cfg.fit.n_restarts = 3;
    cfg.fit.max_inner_iters = 120;
    cfg.kmeans.n_restarts = 8;
    cfg.seed = seed;
    return cfg;
}

inline Fig3Replicate run_fig3_replicate(std::uint64_t seed) {
    const auto [net, truth] = sample_smlsbm(fig3_spec(seed));
    const std::size_t L = net.n_layers();
    StrataConfig cfg = experiment_strata_config(3, 4, mix_seed(seed, 0xF160));

    Fig3Replicate out;
    auto model = fit_smlsbm(net, cfg);
    out.strata_nmi = nmi(model.assignment.as_partition(), Partition{truth.y});
    out.noi = model.iterations;
    out.converged = model.converged;

    FitConfig fc = cfg.fit;
    fc.k = 4;
    fc.seed = mix_seed(seed, 0xF161);
    auto single = baseline_single_sbm(net, 4, fc);
    auto per_layer = baseline_single_layer_sbm(net, 4, fc);

    auto layer_pi_error = [&](const SbmFit& fit, std::size_t l) {
        return pi_error(truth.pi[truth.y[l]], fit.pi, truth.z[truth.y[l]].as_partition(),
                        hard_partition(fit).as_partition());
    };
    auto layer_comm_nmi = [&](const SbmFit& fit, std::size_t l) {
        return nmi(truth.z[truth.y[l]].as_partition(), hard_partition(fit).as_partition());
    };

    std::vector<double> comm_by_stratum(3, 0.0);
    std::vector<double> count_by_stratum(3, 0.0);
    for (std::size_t l = 0; l < L; ++l) {
        const SbmFit& sf = model.stratum_fits[model.assignment.y[l]];
        out.pi_err_smlsbm += layer_pi_error(sf, l);
        out.pi_err_single_sbm += layer_pi_error(single, l);
        out.pi_err_single_layer += layer_pi_error(per_layer[l], l);
        comm_by_stratum[truth.y[l]] += layer_comm_nmi(sf, l);
        count_by_stratum[truth.y[l]] += 1.0;
    }
    out.pi_err_smlsbm /= double(L);
    out.pi_err_single_sbm /= double(L);
    out.pi_err_single_layer /= double(L);
    out.community_nmi_s1 = comm_by_stratum[0] / count_by_stratum[0];
    out.community_nmi_s2 = comm_by_stratum[1] / count_by_stratum[1];
    out.community_nmi_s3 = comm_by_stratum[2] / count_by_stratum[2];
    return out;
}

/// The two-strata detectability sweep: N=128, K=4, c=16, shared node
/// assignments, stratum 1 pinned at detectability gap 10.
struct Fig4Point {
    double strata_nmi_smlsbm = 0.0;
    double strata_nmi_kmeans = 0.0;
    double community_nmi_s1 = 0.0;
    double community_nmi_s2 = 0.0;
    std::size_t noi = 0;
    bool converged = false;
};

inline SmlsbmSpec fig4_spec(std::size_t n_layers, double gap2, std::uint64_t seed) {
    const std::size_t n = 128, k = 4;
    const double c = 16.0;
    auto params_for_gap = [&](double gap) {
        // c and the gap jointly pin (p_in, p_out)
        const double diff = gap / double(n);
        const double p_out = (c * double(k) / double(n) - diff) / double(k);
        return PlantedParams{.n = n, .k = k, .p_in = p_out + diff, .p_out = p_out};
    };
    SmlsbmSpec spec;
    spec.seed = seed;
    spec.strata.push_back({.params = params_for_gap(10.0), .n_layers = n_layers / 2});
    StratumSpec second{.params = params_for_gap(gap2), .n_layers = n_layers - n_layers / 2};
    second.share_z_with = 0;
    spec.strata.push_back(second);
    return spec;
}

inline Fig4Point run_fig4_replicate(std::size_t n_layers, double gap2, std::uint64_t seed) {
    const auto [net, truth] = sample_smlsbm(fig4_spec(n_layers, gap2, seed));
    StrataConfig cfg = experiment_strata_config(2, 4, mix_seed(seed, 0xF400));

    Fig4Point out;
    auto model = fit_smlsbm(net, cfg);
    out.strata_nmi_smlsbm = nmi(model.assignment.as_partition(), Partition{truth.y});
    out.noi = model.iterations;
    out.converged = model.converged;

    auto km = baseline_kmeans_adjacency(net, 2, {.n_restarts = 8, .seed = mix_seed(seed, 2)});
    out.strata_nmi_kmeans = nmi(km.as_partition(), Partition{truth.y});

    // community NMI per true stratum, against each layer's assigned fit
    std::vector<double> comm(2, 0.0), count(2, 0.0);
    for (std::size_t l = 0; l < net.n_layers(); ++l) {
        const SbmFit& sf = model.stratum_fits[model.assignment.y[l]];
        comm[truth.y[l]] +=
            nmi(truth.z[truth.y[l]].as_partition(), hard_partition(sf).as_partition());
        count[truth.y[l]] += 1.0;
    }
    out.community_nmi_s1 = comm[0] / count[0];
    out.community_nmi_s2 = comm[1] / count[1];
    return out;
}

/// Run `count` jobs indexed 0..count-1 across a fixed-size pool; results
/// land in submission order so the output is independent of scheduling.
template <typename Fn>
auto run_indexed_parallel(std::size_t count, std::size_t jobs, Fn fn)
    -> std::vector<decltype(fn(std::size_t{0}))> {
    using R = decltype(fn(std::size_t{0}));
    std::vector<R> results(count);
    if (jobs <= 1) {
        for (std::size_t i = 0; i < count; ++i) results[i] = fn(i);
        return results;
    }
    std::vector<std::future<void>> futures;
    std::atomic<std::size_t> next{0};
    for (std::size_t w = 0; w < jobs; ++w)
        futures.push_back(std::async(std::launch::async, [&]() {
            for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1))
                results[i] = fn(i);
        }));
    for (auto& f : futures) f.get();
    return results;
}

struct CsvRow {
    std::string experiment;
    std::string grid;   // e.g. gap2 value, or "-"
    std::size_t replicate = 0;
    std::string metric;
    double value = 0.0;
    std::string status = "ok";
};

inline std::string csv_header(const std::string& config_id, std::uint64_t seed) {
    std::ostringstream out;
    out << "# smlsbm-results v1\n";
    out << "# config=" << config_id << " seed=" << seed << "\n";
    out << "experiment,grid,replicate,metric,value,status\n";
    return out.str();
}

inline std::string csv_rows(const std::vector<CsvRow>& rows) {
    std::ostringstream out;
    for (const auto& r : rows)
        out << r.experiment << "," << r.grid << "," << r.replicate << "," << r.metric << ","
            << format_value(r.value) << "," << r.status << "\n";
    return out.str();
}

struct Aggregate {
    double mean = 0.0;
    double stderr_ = 0.0;
};

inline Aggregate aggregate(const std::vector<double>& values) {
    Aggregate a;
    if (values.empty()) return a;
    a.mean = std::accumulate(values.begin(), values.end(), 0.0) / double(values.size());
    double var = 0.0;
    for (double v : values) var += (v - a.mean) * (v - a.mean);
    if (values.size() > 1) var /= double(values.size() - 1);
    a.stderr_ = std::sqrt(var / double(values.size()));
    return a;
}

}  // namespace smlsbm

#endif
