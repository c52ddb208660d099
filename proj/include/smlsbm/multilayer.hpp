#ifndef SMLSBM_MULTILAYER_HPP
#define SMLSBM_MULTILAYER_HPP

#include <Eigen/Core>
#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "smlsbm/errors.hpp"

namespace smlsbm {

/// Symmetric binary adjacency matrix with zero diagonal, stored dense.
using AdjacencyMatrix = Eigen::MatrixXd;

inline void validate_adjacency(const AdjacencyMatrix& a) {
    if (a.rows() != a.cols())
        throw ValidationError("adjacency matrix must be square");
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        if (a(i, i) != 0.0)
            throw ValidationError("adjacency matrix must have zero diagonal");
        for (Eigen::Index j = i + 1; j < a.cols(); ++j) {
            const double v = a(i, j);
            if (v != 0.0 && v != 1.0)
                throw ValidationError("adjacency entries must be 0 or 1");
            if (v != a(j, i))
                throw ValidationError("adjacency matrix must be symmetric");
        }
    }
}

/// Multiplex network: L layers over one shared node set of size N.
struct MultilayerNetwork {
    std::size_t n_nodes = 0;
    std::vector<AdjacencyMatrix> layers;
    std::vector<std::string> node_labels;   // empty or size N, unique
    std::vector<std::string> layer_labels;  // empty or size L, unique

    std::size_t n_layers() const { return layers.size(); }

    void validate() const {
        if (n_nodes < 2) throw ValidationError("network needs at least 2 nodes");
        if (layers.empty()) throw ValidationError("network needs at least 1 layer");
        for (const auto& a : layers) {
            if (static_cast<std::size_t>(a.rows()) != n_nodes)
                throw ValidationError("layer size does not match n_nodes");
            validate_adjacency(a);
        }
        auto check_labels = [](const std::vector<std::string>& labels, std::size_t n,
                               const char* what) {
            if (labels.empty()) return;
            if (labels.size() != n)
                throw ValidationError(std::string(what) + " label count mismatch");
            std::set<std::string> uniq(labels.begin(), labels.end());
            if (uniq.size() != labels.size())
                throw ValidationError(std::string(what) + " labels must be unique");
        };
        check_labels(node_labels, n_nodes, "node");
        check_labels(layer_labels, n_layers(), "layer");
    }
};

struct WeightedEdge {
    std::string layer;
    std::string node_i;
    std::string node_j;
    double weight = 1.0;
};

struct WeightedEdgeList {
    std::vector<WeightedEdge> records;
    std::vector<std::string> node_labels;   // sorted, unique
    std::vector<std::string> layer_labels;  // sorted, unique
};

enum class EdgeListFormat { binary, weighted };

namespace detail {

inline std::vector<std::string> split_fields(const std::string& line) {
    const char sep = line.find('\t') != std::string::npos ? '\t' : ',';
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, sep)) {
        // trim surrounding whitespace
        const auto b = field.find_first_not_of(" \r\n");
        const auto e = field.find_last_not_of(" \r\n");
        out.push_back(b == std::string::npos ? std::string() : field.substr(b, e - b + 1));
    }
    return out;
}

}  // namespace detail

/// Parse a multilayer edge-list file: one record per line,
/// `layer,node_i,node_j[,weight]`, comma or tab separated, `#` comments.
inline WeightedEdgeList parse_edge_list(const std::string& path, EdgeListFormat format) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open edge list: " + path);

    WeightedEdgeList out;
    std::set<std::string> nodes, layers;
    // canonical undirected key: (layer, min(i,j), max(i,j))
    std::set<std::tuple<std::string, std::string, std::string>> seen;

    std::string line;
    std::size_t lineno = 0;
    const std::size_t want = format == EdgeListFormat::binary ? 3 : 4;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        auto fields = detail::split_fields(line);
        if (fields.size() != want)
            throw ParseError("line " + std::to_string(lineno) + ": expected " +
                             std::to_string(want) + " columns, got " +
                             std::to_string(fields.size()));
        WeightedEdge rec;
        rec.layer = fields[0];
        rec.node_i = fields[1];
        rec.node_j = fields[2];
        if (format == EdgeListFormat::weighted) {
            try {
                std::size_t pos = 0;
                rec.weight = std::stod(fields[3], &pos);
                if (pos != fields[3].size()) throw std::invalid_argument("trailing");
            } catch (const std::exception&) {
                throw ParseError("line " + std::to_string(lineno) +
                                 ": non-numeric weight '" + fields[3] + "'");
            }
        }
        if (rec.node_i == rec.node_j)
            throw ValidationError("line " + std::to_string(lineno) + ": self-loop on '" +
                                  rec.node_i + "'");
        auto key = std::make_tuple(rec.layer, std::min(rec.node_i, rec.node_j),
                                   std::max(rec.node_i, rec.node_j));
        if (!seen.insert(key).second)
            throw ValidationError("line " + std::to_string(lineno) + ": duplicate edge (" +
                                  rec.layer + "," + rec.node_i + "," + rec.node_j + ")");
        nodes.insert(rec.node_i);
        nodes.insert(rec.node_j);
        layers.insert(rec.layer);
        out.records.push_back(std::move(rec));
    }
    out.node_labels.assign(nodes.begin(), nodes.end());
    out.layer_labels.assign(layers.begin(), layers.end());
    return out;
}

/// Build a binary multilayer network keeping edges with weight >= threshold.
/// Node/layer indices follow sorted label order.
inline MultilayerNetwork threshold_to_multilayer(const WeightedEdgeList& edges,
                                                 double threshold) {
    if (threshold < 0.0) throw ValidationError("threshold must be nonnegative");
    MultilayerNetwork net;
    net.node_labels = edges.node_labels;
    net.layer_labels = edges.layer_labels;
    net.n_nodes = net.node_labels.size();

    std::map<std::string, std::size_t> node_ix, layer_ix;
    for (std::size_t i = 0; i < net.node_labels.size(); ++i) node_ix[net.node_labels[i]] = i;
    for (std::size_t l = 0; l < net.layer_labels.size(); ++l) layer_ix[net.layer_labels[l]] = l;

    const auto n = static_cast<Eigen::Index>(net.n_nodes);
    net.layers.assign(net.layer_labels.size(), AdjacencyMatrix::Zero(n, n));
    for (const auto& rec : edges.records) {
        if (rec.weight < threshold) continue;
        const auto i = static_cast<Eigen::Index>(node_ix.at(rec.node_i));
        const auto j = static_cast<Eigen::Index>(node_ix.at(rec.node_j));
        auto& a = net.layers[layer_ix.at(rec.layer)];
        a(i, j) = 1.0;
        a(j, i) = 1.0;
    }
    return net;
}

inline bool network_is_empty(const MultilayerNetwork& net) {
    for (const auto& a : net.layers)
        if (a.sum() > 0) return false;
    return true;
}

/// Restrict to nodes that have nonzero degree in at least min_layers layers.
inline MultilayerNetwork filter_nodes_by_layer_count(const MultilayerNetwork& net,
                                                     std::size_t min_layers) {
    if (min_layers < 1) throw ValidationError("min_layers must be >= 1");
    const auto n = static_cast<Eigen::Index>(net.n_nodes);
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < n; ++i) {
        std::size_t occ = 0;
        for (const auto& a : net.layers)
            if (a.row(i).sum() > 0) ++occ;
        if (occ >= min_layers) keep.push_back(i);
    }
    if (keep.size() < 2)
        throw ValidationError("filtering left fewer than 2 nodes");

    MultilayerNetwork out;
    out.n_nodes = keep.size();
    out.layer_labels = net.layer_labels;
    if (!net.node_labels.empty())
        for (auto i : keep) out.node_labels.push_back(net.node_labels[i]);
    const auto m = static_cast<Eigen::Index>(keep.size());
    for (const auto& a : net.layers) {
        AdjacencyMatrix b = AdjacencyMatrix::Zero(m, m);
        for (Eigen::Index p = 0; p < m; ++p)
            for (Eigen::Index q = 0; q < m; ++q) b(p, q) = a(keep[p], keep[q]);
        out.layers.push_back(std::move(b));
    }
    return out;
}

inline nlohmann::json network_to_json(const MultilayerNetwork& net) {
    nlohmann::json j;
    j["n_nodes"] = net.n_nodes;
    j["node_labels"] = net.node_labels;
    j["layer_labels"] = net.layer_labels;
    auto edges = nlohmann::json::array();
    for (const auto& a : net.layers) {
        auto layer_edges = nlohmann::json::array();
        for (Eigen::Index i = 0; i < a.rows(); ++i)
            for (Eigen::Index j2 = i + 1; j2 < a.cols(); ++j2)
                if (a(i, j2) != 0.0) layer_edges.push_back({i, j2});
        edges.push_back(std::move(layer_edges));
    }
    j["edges"] = std::move(edges);
    return j;
}

inline MultilayerNetwork network_from_json(const nlohmann::json& j) {
    MultilayerNetwork net;
    net.n_nodes = j.at("n_nodes").get<std::size_t>();
    net.node_labels = j.value("node_labels", std::vector<std::string>{});
    net.layer_labels = j.value("layer_labels", std::vector<std::string>{});
    const auto n = static_cast<Eigen::Index>(net.n_nodes);
    for (const auto& layer_edges : j.at("edges")) {
        AdjacencyMatrix a = AdjacencyMatrix::Zero(n, n);
        for (const auto& e : layer_edges) {
            const auto i = e.at(0).get<Eigen::Index>();
            const auto j2 = e.at(1).get<Eigen::Index>();
            a(i, j2) = 1.0;
            a(j2, i) = 1.0;
        }
        net.layers.push_back(std::move(a));
    }
    net.validate();
    return net;
}

/// Emit the edge-list text format (weighted columns, weight 1 for kept edges).
inline std::string network_to_edge_list(const MultilayerNetwork& net) {
    std::ostringstream out;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        const std::string layer =
            net.layer_labels.empty() ? "L" + std::to_string(l + 1) : net.layer_labels[l];
        const auto& a = net.layers[l];
        for (Eigen::Index i = 0; i < a.rows(); ++i)
            for (Eigen::Index j = i + 1; j < a.cols(); ++j)
                if (a(i, j) != 0.0) {
                    const std::string ni = net.node_labels.empty() ? "n" + std::to_string(i)
                                                                   : net.node_labels[i];
                    const std::string nj = net.node_labels.empty() ? "n" + std::to_string(j)
                                                                   : net.node_labels[j];
                    out << layer << "," << ni << "," << nj << ",1\n";
                }
    }
    return out.str();
}

}  // namespace smlsbm

#endif
