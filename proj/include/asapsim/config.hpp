#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "asapsim/types.hpp"

namespace asapsim {

// Timing and capacity knobs of the simulated machine. Every value is
// overridable from a config file or CLI flags; defaults are round numbers.
struct MachineConfig {
    Cycle pm_write_latency = 150;
    Cycle pm_read_latency = 150;
    std::uint32_t pm_banks = 4;
    std::uint32_t cache_capacity_lines = 1024;
    Cycle store_cost = 1;
    Cycle load_hit_cost = 1;
    Cycle nop_cost = 1;  // per NOP unit
    std::uint32_t log_capacity_entries_per_thread = 4096;

    // Traffic optimizations (used by the asap scheme only).
    bool opt_lpo_drop = true;
    bool opt_dpo_coalesce = true;
    bool opt_dpo_drop = true;

    void check() const {
        auto need = [](std::uint64_t v, const char* name) {
            if (v < 1) throw std::invalid_argument(std::string(name) + " must be >= 1");
        };
        need(pm_write_latency, "pm_write_latency");
        need(pm_read_latency, "pm_read_latency");
        need(pm_banks, "pm_banks");
        need(cache_capacity_lines, "cache_capacity_lines");
        need(store_cost, "store_cost");
        need(load_hit_cost, "load_hit_cost");
        need(nop_cost, "nop_cost");
        need(log_capacity_entries_per_thread, "log_capacity_entries_per_thread");
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "1" || v == "true" || v == "on" || v == "yes") return true;
    if (v == "0" || v == "false" || v == "off" || v == "no") return false;
    throw std::invalid_argument("bad boolean for " + key + ": " + v);
}

inline std::uint64_t parse_u64(const std::string& v, const std::string& key) {
    try {
        size_t pos = 0;
        unsigned long long x = std::stoull(v, &pos, 0);
        if (pos != v.size()) throw std::invalid_argument("");
        return x;
    } catch (...) {
        throw std::invalid_argument("bad integer for " + key + ": " + v);
    }
}

}  // namespace detail

// Applies one key=value setting. Unknown keys are an error.
inline void apply_config_kv(MachineConfig& cfg, const std::string& key, const std::string& value) {
    using detail::parse_bool;
    using detail::parse_u64;
    if (key == "pm_write_latency") cfg.pm_write_latency = parse_u64(value, key);
    else if (key == "pm_read_latency") cfg.pm_read_latency = parse_u64(value, key);
    else if (key == "pm_banks") cfg.pm_banks = static_cast<std::uint32_t>(parse_u64(value, key));
    else if (key == "cache_capacity_lines") cfg.cache_capacity_lines = static_cast<std::uint32_t>(parse_u64(value, key));
    else if (key == "store_cost") cfg.store_cost = parse_u64(value, key);
    else if (key == "load_hit_cost") cfg.load_hit_cost = parse_u64(value, key);
    else if (key == "nop_cost") cfg.nop_cost = parse_u64(value, key);
    else if (key == "log_capacity_entries_per_thread") cfg.log_capacity_entries_per_thread = static_cast<std::uint32_t>(parse_u64(value, key));
    else if (key == "opt_lpo_drop") cfg.opt_lpo_drop = parse_bool(value, key);
    else if (key == "opt_dpo_coalesce") cfg.opt_dpo_coalesce = parse_bool(value, key);
    else if (key == "opt_dpo_drop") cfg.opt_dpo_drop = parse_bool(value, key);
    else throw std::invalid_argument("unknown config key: " + key);
}

// Flat key=value config text. '#' starts a comment, blank lines ignored.
inline void load_config_text(MachineConfig& cfg, const std::string& text) {
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key=value");
        apply_config_kv(cfg, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
    }
}

inline void load_config_file(MachineConfig& cfg, const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::invalid_argument("cannot open config file: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    load_config_text(cfg, ss.str());
}

inline MachineConfig load_config_text(const std::string& text) {
    MachineConfig cfg;
    load_config_text(cfg, text);
    cfg.check();
    return cfg;
}

inline MachineConfig load_config_file(const std::string& path) {
    MachineConfig cfg;
    load_config_file(cfg, path);
    cfg.check();
    return cfg;
}

}  // namespace asapsim
