// Command-line driver: generate synthetic multilayer networks, fit
// models, run the experiment sweeps, and run the thresholded-correlation
// pipeline. Exit codes: 0 success, 1 usage, 2 I/O, 3 numerical.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "smlsbm/baselines.hpp"
#include "smlsbm/config.hpp"
#include "smlsbm/experiments.hpp"
#include "smlsbm/generate.hpp"
#include "smlsbm/metrics.hpp"
#include "smlsbm/multilayer.hpp"
#include "smlsbm/strata.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace smlsbm;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

void write_file(const fs::path& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write: " + path.string());
    out << contents;
    if (!out) throw IoError("write failed: " + path.string());
}

ConfigMap load_config(const std::string& name_or_path) {
    if (fs::exists(name_or_path)) return parse_config_text(read_file(name_or_path));
    return config_preset(name_or_path);
}

json meta_header(const ConfigMap& cfg, std::uint64_t seed) {
    return json{{"config", config_hash(cfg)}, {"seed", seed}};
}

MultilayerNetwork load_network(const std::string& path) {
    if (fs::path(path).extension() == ".json")
        return network_from_json(json::parse(read_file(path)));
    return threshold_to_multilayer(parse_edge_list(path, EdgeListFormat::weighted), 0.5);
}

int cmd_generate(const ConfigMap& cfg, std::uint64_t seed, const fs::path& out_dir) {
    const auto spec = spec_from_config(cfg, seed);
    const auto [net, truth] = sample_smlsbm(spec);

    fs::create_directories(out_dir);
    json net_json = network_to_json(net);
    net_json["meta"] = meta_header(cfg, seed);
    write_file(out_dir / "network.json", net_json.dump(2) + "\n");
    write_file(out_dir / "network.edges", network_to_edge_list(net));

    json truth_json;
    truth_json["meta"] = meta_header(cfg, seed);
    truth_json["y"] = truth.y;
    auto z = json::array();
    for (const auto& zp : truth.z) z.push_back(zp.z);
    truth_json["z"] = std::move(z);
    auto pis = json::array();
    for (const auto& pi : truth.pi) {
        auto rows = json::array();
        for (Eigen::Index i = 0; i < pi.rows(); ++i) {
            auto row = json::array();
            for (Eigen::Index j = 0; j < pi.cols(); ++j) row.push_back(pi(i, j));
            rows.push_back(std::move(row));
        }
        pis.push_back(std::move(rows));
    }
    truth_json["pi"] = std::move(pis);
    write_file(out_dir / "truth.json", truth_json.dump(2) + "\n");

    std::cout << "generated N=" << net.n_nodes << " L=" << net.n_layers()
              << " S=" << spec.strata.size() << "\n";
    for (std::size_t l = 0; l < net.n_layers(); ++l)
        std::cout << "layer " << l << " mean degree "
                  << net.layers[l].sum() / double(net.n_nodes) << "\n";
    return 0;
}

int cmd_fit(const std::string& network_path, const std::string& model_name, std::size_t s,
            std::size_t k, std::uint64_t seed, const fs::path& out_dir) {
    const auto net = load_network(network_path);
    if (network_is_empty(net))
        std::cerr << "warning: network has no edges in any layer\n";

    fs::create_directories(out_dir);
    json out;
    out["meta"] = {{"model", model_name}, {"seed", seed}};

    if (model_name == "smlsbm") {
        StrataConfig cfg;
        if (s > 0) cfg.s_init = s;
        cfg.k_per_stratum = k;
        cfg.seed = seed;
        auto model = fit_smlsbm(net, cfg);
        out["smlsbm"] = smlsbm_model_to_json(model);
        std::cout << "smlsbm: S=" << model.assignment.n_strata << " iterations="
                  << model.iterations << (model.converged ? "" : " (not converged)") << "\n";
        for (std::size_t st = 0; st < model.stratum_fits.size(); ++st) {
            std::size_t sz = 0;
            for (auto y : model.assignment.y) sz += (y == st);
            std::cout << "stratum " << st << ": " << sz
                      << " layers, J=" << model.stratum_fits[st].bound << "\n";
        }
    } else if (model_name == "single-sbm") {
        FitConfig fc;
        fc.k = k;
        fc.seed = seed;
        auto fit = baseline_single_sbm(net, k, fc);
        out["fit"] = sbm_fit_to_json(fit);
        std::cout << "single-sbm: J=" << fit.bound << " iterations="
                  << fit.diagnostics.iterations << "\n";
    } else if (model_name == "single-layer-sbm") {
        FitConfig fc;
        fc.k = k;
        fc.seed = seed;
        auto fits = baseline_single_layer_sbm(net, k, fc);
        auto arr = json::array();
        for (const auto& f : fits) arr.push_back(sbm_fit_to_json(f));
        out["fits"] = std::move(arr);
        std::cout << "single-layer-sbm: " << fits.size() << " layer fits\n";
    } else {
        throw ValidationError("unknown model: " + model_name);
    }
    write_file(out_dir / "model.json", out.dump(2) + "\n");
    return 0;
}

int cmd_experiment(const ConfigMap& cfg, std::uint64_t seed, const fs::path& out_dir,
                   std::size_t jobs) {
    const std::string name = config_str(cfg, "experiment.name", "");
    const std::size_t replicates =
        static_cast<std::size_t>(config_u64(cfg, "experiment.replicates", 10));
    const std::string id = config_hash(cfg);

    std::vector<CsvRow> rows;
    std::vector<double> agg_keys;  // unused marker
    std::ostringstream agg;
    agg << csv_header(id, seed);

    if (name == "fig3") {
        auto results = run_indexed_parallel(replicates, jobs, [&](std::size_t r) {
            std::vector<CsvRow> out;
            try {
                const auto rep = run_fig3_replicate(mix_seed(seed, r));
                auto push = [&](const std::string& m, double v) {
                    out.push_back({"fig3", "-", r, m, v, "ok"});
                };
                push("pi_err_smlsbm", rep.pi_err_smlsbm);
                push("pi_err_single_sbm", rep.pi_err_single_sbm);
                push("pi_err_single_layer", rep.pi_err_single_layer);
                push("strata_nmi", rep.strata_nmi);
                push("community_nmi_s1", rep.community_nmi_s1);
                push("community_nmi_s2", rep.community_nmi_s2);
                push("community_nmi_s3", rep.community_nmi_s3);
                push("noi", double(rep.noi));
            } catch (const std::exception& e) {
                out.push_back({"fig3", "-", r, "error", 0.0, std::string("error:") + e.what()});
            }
            return out;
        });
        for (auto& rr : results) rows.insert(rows.end(), rr.begin(), rr.end());
    } else if (name == "fig4") {
        const std::size_t layers =
            static_cast<std::size_t>(config_u64(cfg, "experiment.layers", 10));
        auto grid = config_grid(cfg, "experiment.grid");
        if (grid.empty()) throw ValidationError("config: experiment.grid is empty");
        const std::size_t total = grid.size() * replicates;
        auto results = run_indexed_parallel(total, jobs, [&](std::size_t ix) {
            const std::size_t g = ix / replicates, r = ix % replicates;
            std::vector<CsvRow> out;
            const std::string gs = format_value(grid[g]);
            try {
                const auto rep = run_fig4_replicate(layers, grid[g], mix_seed(seed, g, r));
                auto push = [&](const std::string& m, double v) {
                    out.push_back({"fig4", gs, r, m, v, "ok"});
                };
                push("strata_nmi_smlsbm", rep.strata_nmi_smlsbm);
                push("strata_nmi_kmeans", rep.strata_nmi_kmeans);
                push("community_nmi_s1", rep.community_nmi_s1);
                push("community_nmi_s2", rep.community_nmi_s2);
                push("noi", double(rep.noi));
            } catch (const std::exception& e) {
                out.push_back({"fig4", gs, r, "error", 0.0, std::string("error:") + e.what()});
            }
            return out;
        });
        for (auto& rr : results) rows.insert(rows.end(), rr.begin(), rr.end());
    } else {
        throw ValidationError("config: experiment.name must be fig3 or fig4");
    }

    fs::create_directories(out_dir);
    write_file(out_dir / "results.csv", csv_header(id, seed) + csv_rows(rows));

    // aggregate means and standard errors per (grid, metric)
    std::map<std::pair<std::string, std::string>, std::vector<double>> groups;
    for (const auto& r : rows)
        if (r.status == "ok") groups[{r.grid, r.metric}].push_back(r.value);
    std::ostringstream agg_out;
    agg_out << csv_header(id, seed);
    agg_out << "experiment,grid,metric,mean,stderr,n\n";
    for (const auto& [key, vals] : groups) {
        const auto a = aggregate(vals);
        agg_out << name << "," << key.first << "," << key.second << ","
                << format_value(a.mean) << "," << format_value(a.stderr_) << ","
                << vals.size() << "\n";
    }
    write_file(out_dir / "aggregate.csv", agg_out.str());
    std::cout << "wrote " << rows.size() << " result rows to " << (out_dir / "results.csv")
              << "\n";
    return 0;
}

int cmd_microbiome(const std::string& edges_path, double threshold, std::size_t min_layers,
                   std::size_t s, std::size_t k, std::uint64_t seed, const fs::path& out_dir) {
    auto edges = parse_edge_list(edges_path, EdgeListFormat::weighted);
    auto net = threshold_to_multilayer(edges, threshold);
    if (network_is_empty(net)) {
        std::cerr << "warning: no edges survive threshold " << threshold << "; stopping\n";
        return 0;
    }
    net = filter_nodes_by_layer_count(net, min_layers);
    std::cout << "after filtering: N=" << net.n_nodes << " L=" << net.n_layers() << "\n";

    StrataConfig cfg;
    if (s > 0) cfg.s_init = s;
    cfg.k_per_stratum = k;
    cfg.seed = seed;
    auto model = fit_smlsbm(net, cfg);

    fs::create_directories(out_dir);
    json model_json;
    model_json["meta"] = {{"threshold", threshold}, {"min_layers", min_layers}, {"seed", seed}};
    model_json["smlsbm"] = smlsbm_model_to_json(model);
    write_file(out_dir / "model.json", model_json.dump(2) + "\n");

    std::ostringstream table;
    table << "layer\tstratum\n";
    for (std::size_t l = 0; l < net.n_layers(); ++l)
        table << net.layer_labels[l] << "\t" << model.assignment.y[l] << "\n";
    write_file(out_dir / "strata.tsv", table.str());

    // hierarchical baseline on upper-triangle adjacency features
    const std::size_t L = net.n_layers();
    Eigen::MatrixXd dist = Eigen::MatrixXd::Zero(L, L);
    std::vector<Eigen::VectorXd> feats;
    for (const auto& a : net.layers) feats.push_back(upper_triangle_vec(a));
    for (std::size_t i = 0; i < L; ++i)
        for (std::size_t j = 0; j < L; ++j) dist(i, j) = (feats[i] - feats[j]).norm();
    auto merges = hierarchical_complete(dist);
    json dend;
    dend["leaves"] = net.layer_labels;
    auto marr = json::array();
    for (const auto& m : merges)
        marr.push_back({{"left", m.left}, {"right", m.right}, {"height", m.height}});
    dend["merges"] = std::move(marr);
    write_file(out_dir / "dendrogram.json", dend.dump(2) + "\n");

    // one sampled adjacency per stratum from its fitted consensus model
    for (std::size_t st = 0; st < model.stratum_fits.size(); ++st) {
        const auto& fit = model.stratum_fits[st];
        auto sample = sample_sbm(fit.pi, hard_partition(fit), mix_seed(seed, 0xface, st));
        json sj = network_to_json(MultilayerNetwork{net.n_nodes, {sample}, net.node_labels,
                                                    {"stratum_" + std::to_string(st)}});
        write_file(out_dir / ("stratum_sample_" + std::to_string(st) + ".json"),
                   sj.dump(2) + "\n");
    }

    std::cout << "smlsbm: S=" << model.assignment.n_strata << " iterations="
              << model.iterations << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"strata multilayer stochastic block model toolkit"};
    app.require_subcommand(1);

    std::string config_name, network_path, model_name = "smlsbm";
    std::string out_dir = ".";
    std::uint64_t seed = 0;
    double threshold = 0.2;
    std::size_t min_layers = 2, s_opt = 0, k_opt = 4, jobs = 1;

    auto* gen = app.add_subcommand("generate", "sample a synthetic multilayer network");
    gen->add_option("--config", config_name, "preset name or config file")->required();
    gen->add_option("--seed", seed, "global seed");
    gen->add_option("--out-dir", out_dir, "output directory");

    auto* fit = app.add_subcommand("fit", "fit a model to a network file");
    fit->add_option("network", network_path, "network file (.json or edge list)")->required();
    fit->add_option("--model", model_name, "smlsbm | single-sbm | single-layer-sbm");
    fit->add_option("--s", s_opt, "number of strata (0 = gap-selected)");
    fit->add_option("--k", k_opt, "communities per stratum");
    fit->add_option("--seed", seed, "global seed");
    fit->add_option("--out-dir", out_dir, "output directory");

    auto* exp = app.add_subcommand("experiment", "run a replicated experiment sweep");
    exp->add_option("--config", config_name, "preset name or config file")->required();
    exp->add_option("--seed", seed, "global seed");
    exp->add_option("--out-dir", out_dir, "output directory");
    exp->add_option("--jobs", jobs, "parallel workers");

    auto* mic = app.add_subcommand("microbiome", "thresholded correlation-network pipeline");
    mic->add_option("network", network_path, "weighted edge-list file")->required();
    mic->add_option("--config", config_name, "preset name or config file");
    mic->add_option("--threshold", threshold, "edge-weight threshold");
    mic->add_option("--min-layers", min_layers, "minimum layers per node");
    mic->add_option("--s", s_opt, "number of strata (0 = gap-selected)");
    mic->add_option("--k", k_opt, "communities per stratum");
    mic->add_option("--seed", seed, "global seed");
    mic->add_option("--out-dir", out_dir, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (gen->parsed()) return cmd_generate(load_config(config_name), seed, out_dir);
        if (fit->parsed())
            return cmd_fit(network_path, model_name, s_opt, k_opt, seed, out_dir);
        if (exp->parsed())
            return cmd_experiment(load_config(config_name), seed, out_dir, jobs);
        if (mic->parsed()) {
            if (!config_name.empty()) {
                const auto cfg = load_config(config_name);
                threshold = config_double(cfg, "microbiome.threshold", threshold);
                min_layers =
                    static_cast<std::size_t>(config_u64(cfg, "microbiome.min_layers", min_layers));
                s_opt = static_cast<std::size_t>(config_u64(cfg, "microbiome.s", s_opt));
                k_opt = static_cast<std::size_t>(config_u64(cfg, "microbiome.k", k_opt));
            }
            return cmd_microbiome(network_path, threshold, min_layers, s_opt, k_opt, seed,
                                  out_dir);
        }
    } catch (const IoError& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return 2;
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return 2;
    } catch (const ValidationError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 3;
    }
    return 1;
}
