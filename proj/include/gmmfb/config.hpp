// SPDX-License-Identifier: Apache-2.0
//
// gmmfb - GMM-based limited feedback for FDD MIMO systems
// Copyright (C) 2026 The gmmfb Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#ifndef GMMFB_CONFIG_HPP
#define GMMFB_CONFIG_HPP

// INI experiment configuration. Every key is optional; missing keys keep the
// defaults of ExperimentConfig. Unknown sections or keys are rejected.
//
//   [scenario]   ntx_h ntx_v nrx paths_min paths_max angle_spread_deg
//                carrier_offset redraw_phases seed
//   [data]       train_size eval_size
//   [experiment] mode(p2p|mu) snr_db(list) n_p bits users methods(list)
//                num_constellations seed allow_geometry_override
//   [gmm]        structure(kronecker|full) k_tx k_rx max_iter tol zero_mean
//   [codebook]   design_snr_db lloyd_max_outer pga_max_iter
//   [estimator]  omp_oversampling
//   [precoder]   kind(rbd|rci|wmmse|swmmse) d wmmse_iterations
//                swmmse_iterations trace_count
//   [run]        threads

#include "gmmfb/harness.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace gmmfb {

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

template <class T>
T parse_value(const std::string& key, const std::string& raw) {
    const std::string v = trim(raw);
    try {
        if constexpr (std::is_same_v<T, bool>) {
            if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
            if (v == "false" || v == "0" || v == "no" || v == "off") return false;
            throw std::invalid_argument(v);
        } else if constexpr (std::is_same_v<T, double>) {
            std::size_t pos = 0;
            const double d = std::stod(v, &pos);
            if (pos != v.size()) throw std::invalid_argument(v);
            return d;
        } else if constexpr (std::is_signed_v<T>) {
            std::size_t pos = 0;
            const long long i = std::stoll(v, &pos);
            if (pos != v.size()) throw std::invalid_argument(v);
            return static_cast<T>(i);
        } else {
            std::size_t pos = 0;
            if (!v.empty() && v[0] == '-') throw std::invalid_argument(v);
            const unsigned long long i = std::stoull(v, &pos);
            if (pos != v.size()) throw std::invalid_argument(v);
            return static_cast<T>(i);
        }
    } catch (const std::logic_error&) {
        throw ConfigError(key + ": cannot parse '" + v + "'");
    }
}

}  // namespace detail

inline void apply_config(const boost::property_tree::ptree& tree, ExperimentConfig& cfg) {
    using Setter = std::function<void(const std::string&, const std::string&)>;
    auto num = [](auto& target) {
        return Setter([&target](const std::string& key, const std::string& v) {
            target = detail::parse_value<std::decay_t<decltype(target)>>(key, v);
        });
    };
    const std::map<std::string, std::map<std::string, Setter>> table = {
        {"scenario",
         {{"ntx_h", num(cfg.scenario.ntx_h)},
          {"ntx_v", num(cfg.scenario.ntx_v)},
          {"nrx", num(cfg.scenario.nrx)},
          {"paths_min", num(cfg.scenario.paths_min)},
          {"paths_max", num(cfg.scenario.paths_max)},
          {"angle_spread_deg", num(cfg.scenario.angle_spread_deg)},
          {"carrier_offset", num(cfg.scenario.carrier_offset)},
          {"redraw_phases", num(cfg.scenario.redraw_phases)},
          {"seed", num(cfg.scenario.rng_seed)}}},
        {"data", {{"train_size", num(cfg.train_size)}, {"eval_size", num(cfg.eval_size)}}},
        {"experiment",
         {{"mode",
           [&](const std::string& key, const std::string& v) {
               const auto t = detail::trim(v);
               if (t == "p2p") cfg.mode = Mode::P2P;
               else if (t == "mu") cfg.mode = Mode::MU;
               else throw ConfigError(key + ": expected p2p or mu");
           }},
          {"snr_db",
           [&](const std::string& key, const std::string& v) {
               cfg.snr_db_list.clear();
               for (const auto& item : detail::split_list(v))
                   cfg.snr_db_list.push_back(detail::parse_value<double>(key, item));
           }},
          {"n_p", num(cfg.n_p)},
          {"bits", num(cfg.bits)},
          {"users", num(cfg.users)},
          {"methods", [&](const std::string&, const std::string& v) { cfg.methods = detail::split_list(v); }},
          {"num_constellations", num(cfg.num_constellations)},
          {"seed", num(cfg.seed)},
          {"allow_geometry_override", num(cfg.allow_geometry_override)}}},
        {"gmm",
         {{"structure",
           [&](const std::string& key, const std::string& v) {
               const auto t = detail::trim(v);
               if (t == "kronecker") cfg.gmm_structure = CovarianceStructure::Kronecker;
               else if (t == "full") cfg.gmm_structure = CovarianceStructure::Full;
               else throw ConfigError(key + ": expected kronecker or full");
           }},
          {"k_tx", num(cfg.k_tx)},
          {"k_rx", num(cfg.k_rx)},
          {"max_iter", num(cfg.em_max_iter)},
          {"tol", num(cfg.em_tol)},
          {"zero_mean", num(cfg.zero_mean)}}},
        {"codebook",
         {{"design_snr_db",
           [&](const std::string& key, const std::string& v) {
               const auto t = detail::trim(v);
               if (t.empty() || t == "auto") cfg.codebook_design_snr_db.reset();
               else cfg.codebook_design_snr_db = detail::parse_value<double>(key, t);
           }},
          {"lloyd_max_outer", num(cfg.lloyd_max_outer)},
          {"pga_max_iter", num(cfg.pga_max_iter)}}},
        {"estimator", {{"omp_oversampling", num(cfg.omp_oversampling)}}},
        {"precoder",
         {{"kind",
           [&](const std::string& key, const std::string& v) {
               const auto t = detail::trim(v);
               if (t == "rbd") cfg.precoder = PrecoderKind::RBD;
               else if (t == "rci") cfg.precoder = PrecoderKind::RCI;
               else if (t == "wmmse") cfg.precoder = PrecoderKind::WMMSE;
               else if (t == "swmmse") cfg.precoder = PrecoderKind::SWMMSE;
               else throw ConfigError(key + ": expected rbd, rci, wmmse or swmmse");
           }},
          {"d", num(cfg.d)},
          {"wmmse_iterations", num(cfg.wmmse_iterations)},
          {"swmmse_iterations", num(cfg.swmmse_iterations)},
          {"trace_count", num(cfg.trace_count)}}},
        {"run", {{"threads", num(cfg.threads)}}}};

    for (const auto& [section, body] : tree) {
        const auto s = table.find(section);
        if (s == table.end()) throw ConfigError("unknown config section [" + section + "]");
        if (!body.data().empty()) throw ConfigError("key '" + section + "' outside a section");
        for (const auto& [key, value] : body) {
            const auto k = s->second.find(key);
            if (k == s->second.end()) throw ConfigError("unknown config key " + section + "." + key);
            k->second(section + "." + key, value.data());
        }
    }
}

inline ExperimentConfig parse_config_string(const std::string& text) {
    boost::property_tree::ptree tree;
    std::istringstream in(text);
    try {
        boost::property_tree::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    ExperimentConfig cfg;
    apply_config(tree, cfg);
    return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_string(ss.str());
}

}  // namespace gmmfb

#endif  // GMMFB_CONFIG_HPP
