#ifndef SMLSBM_CONFIG_HPP
#define SMLSBM_CONFIG_HPP

#include <cstdint>
#include <cstdio>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "smlsbm/errors.hpp"
#include "smlsbm/generate.hpp"
#include "smlsbm/strata.hpp"

namespace smlsbm {

/// Flat key/value config with [section] headers; stored as "section.key".
using ConfigMap = std::map<std::string, std::string>;

namespace detail {

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

}  // namespace detail

/// Schema: `[section]` lines open a section, `key = value` lines assign,
/// `#` starts a comment. Keys land in the map as "section.key".
inline ConfigMap parse_config_text(const std::string& text) {
    ConfigMap out;
    std::istringstream in(text);
    std::string line, section;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ParseError("config line " + std::to_string(line_no) +
                                 ": unterminated section header");
            section = detail::trim(line.substr(1, line.size() - 2));
            if (section.empty())
                throw ParseError("config line " + std::to_string(line_no) + ": empty section");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ParseError("config line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (key.empty())
            throw ParseError("config line " + std::to_string(line_no) + ": empty key");
        out[section.empty() ? key : section + "." + key] = value;
    }
    return out;
}

inline bool config_has(const ConfigMap& cfg, const std::string& key) {
    return cfg.find(key) != cfg.end();
}

inline std::string config_str(const ConfigMap& cfg, const std::string& key,
                              const std::string& fallback) {
    auto it = cfg.find(key);
    return it == cfg.end() ? fallback : it->second;
}

inline double config_double(const ConfigMap& cfg, const std::string& key, double fallback) {
    auto it = cfg.find(key);
    if (it == cfg.end()) return fallback;
    try {
        std::size_t used = 0;
        const double v = std::stod(it->second, &used);
        if (used != it->second.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ParseError("config key " + key + ": not a number: " + it->second);
    }
}

inline std::uint64_t config_u64(const ConfigMap& cfg, const std::string& key,
                                std::uint64_t fallback) {
    auto it = cfg.find(key);
    if (it == cfg.end()) return fallback;
    try {
        std::size_t used = 0;
        const std::uint64_t v = std::stoull(it->second, &used);
        if (used != it->second.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ParseError("config key " + key + ": not an integer: " + it->second);
    }
}

inline std::vector<double> config_grid(const ConfigMap& cfg, const std::string& key) {
    auto it = cfg.find(key);
    std::vector<double> out;
    if (it == cfg.end()) return out;
    std::istringstream in(it->second);
    std::string tok;
    while (std::getline(in, tok, ',')) {
        tok = detail::trim(tok);
        if (tok.empty()) continue;
        try {
            out.push_back(std::stod(tok));
        } catch (const std::exception&) {
            throw ParseError("config key " + key + ": bad grid entry: " + tok);
        }
    }
    return out;
}

/// Stable FNV-1a hash over the canonical (sorted) serialization; used in
/// output metadata headers so results identify their configuration.
inline std::string config_hash(const ConfigMap& cfg) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    auto mix = [&](const std::string& s) {
        for (unsigned char c : s) {
            h ^= c;
            h *= 0x100000001b3ull;
        }
    };
    for (const auto& [k, v] : cfg) {
        mix(k);
        mix("=");
        mix(v);
        mix("\n");
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

/// Named presets carrying the published experiment defaults.
inline ConfigMap config_preset(const std::string& name) {
    if (name == "fig3")
        return parse_config_text(
            "[experiment]\n"
            "name = fig3\n"
            "replicates = 10\n"
            "[generator]\n"
            "n = 128\nk = 4\nc = 20\nn_strata = 3\n"
            "[stratum.1]\np_in = 0.6\nn_layers = 10\n"
            "[stratum.2]\np_in = 0.4\nn_layers = 10\n"
            "[stratum.3]\np_in = 0.125\nn_layers = 10\n"
            "[fit]\ns = 3\nk = 4\n");
    if (name == "fig4-L10" || name == "fig4-L100") {
        const std::string layers = name == "fig4-L10" ? "10" : "100";
        return parse_config_text(
            "[experiment]\n"
            "name = fig4\n"
            "replicates = 10\n"
            "layers = " + layers + "\n"
            "grid = 2,4,6,8,10,12,14,16,18\n"
            "[generator]\n"
            "n = 128\nk = 4\nc = 16\nn_strata = 2\n"
            "[stratum.1]\ngap = 10\nn_layers = " + layers + "\n"
            "[stratum.2]\ngap = 4\nn_layers = " + layers + "\nshare_z_with = 1\n"
            "[fit]\ns = 2\nk = 4\n");
    }
    if (name == "microbiome")
        return parse_config_text(
            "[microbiome]\n"
            "threshold = 0.2\n"
            "min_layers = 2\n"
            "s = 6\n"
            "k = 4\n");
    throw ValidationError("unknown preset: " + name);
}

/// Build a generator spec from [generator]/[stratum.i] sections. Each
/// stratum needs p_in plus either p_out, a stratum-level c, the shared
/// [generator] c, or a detectability gap combined with c.
inline SmlsbmSpec spec_from_config(const ConfigMap& cfg, std::uint64_t seed) {
    SmlsbmSpec spec;
    spec.seed = seed;
    const std::size_t n = config_u64(cfg, "generator.n", 128);
    const std::size_t k = config_u64(cfg, "generator.k", 4);
    const std::size_t s = config_u64(cfg, "generator.n_strata", 0);
    if (s == 0) throw ValidationError("config: generator.n_strata missing or zero");
    for (std::size_t i = 1; i <= s; ++i) {
        const std::string sec = "stratum." + std::to_string(i) + ".";
        StratumSpec st;
        st.params.n = n;
        st.params.k = k;
        const double c = config_double(cfg, sec + "c", config_double(cfg, "generator.c", -1.0));
        if (config_has(cfg, sec + "gap")) {
            if (c < 0) throw ValidationError("config: gap needs a mean degree c");
            const double diff = config_double(cfg, sec + "gap", 0.0) / double(n);
            st.params.p_out = (c * double(k) / double(n) - diff) / double(k);
            st.params.p_in = st.params.p_out + diff;
        } else {
            st.params.p_in = config_double(cfg, sec + "p_in", -1.0);
            if (st.params.p_in < 0)
                throw ValidationError("config: " + sec + "p_in missing");
            if (config_has(cfg, sec + "p_out"))
                st.params.p_out = config_double(cfg, sec + "p_out", 0.0);
            else if (c >= 0)
                st.params.p_out = derive_p_out(c, n, k, st.params.p_in);
            else
                throw ValidationError("config: " + sec + "p_out or a mean degree c required");
        }
        st.n_layers = config_u64(cfg, sec + "n_layers", 1);
        if (config_has(cfg, sec + "share_z_with")) {
            const std::uint64_t other = config_u64(cfg, sec + "share_z_with", 0);
            if (other < 1 || other >= i)
                throw ValidationError("config: " + sec + "share_z_with must name an earlier stratum");
            st.share_z_with = other - 1;
        }
        st.params.validate();
        spec.strata.push_back(st);
    }
    return spec;
}

inline std::string config_to_text(const ConfigMap& cfg) {
    std::ostringstream out;
    for (const auto& [k, v] : cfg) out << k << " = " << v << "\n";
    return out.str();
}

}  // namespace smlsbm

#endif
