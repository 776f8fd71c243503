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

#ifndef GMMFB_HARNESS_HPP
#define GMMFB_HARNESS_HPP

// End-to-end experiments.
//
// Training data are the normalized uplink channels, transposed into the
// downlink orientation. Evaluation channels are downlink channels of
// different samples, scaled with the training normalization factor.
//
// Randomness: every evaluation sample (P2P) or constellation (MU) draws from
// its own stream derived from (seed, snr index, task index), so results do
// not depend on the number of worker threads.

#include "gmmfb/channel_model.hpp"
#include "gmmfb/codebooks.hpp"
#include "gmmfb/estimators.hpp"
#include "gmmfb/feedback.hpp"
#include "gmmfb/gmm.hpp"
#include "gmmfb/pilot_system.hpp"
#include "gmmfb/precoding.hpp"

#include <atomic>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

namespace gmmfb {

enum class Mode { P2P, MU };
enum class PrecoderKind { RBD, RCI, WMMSE, SWMMSE };

inline const char* to_string(Mode m) {
    return m == Mode::P2P ? "p2p" : "mu";
}

inline const char* to_string(PrecoderKind p) {
    switch (p) {
        case PrecoderKind::RBD: return "rbd";
        case PrecoderKind::RCI: return "rci";
        case PrecoderKind::WMMSE: return "wmmse";
        case PrecoderKind::SWMMSE: return "swmmse";
    }
    return "unknown";
}

/// Method labels understood by the point-to-point experiment.
inline const std::vector<std::string>& p2p_methods() {
    static const std::vector<std::string> m = {"optimal",   "uni_pow_cov", "uni_pow_eigsp", "lloyd_h", "lloyd_gmm",
                                               "lloyd_lmmse", "lloyd_omp",  "gmm_h",         "gmm_y"};
    return m;
}

/// Method labels understood by the multi-user experiment.
inline const std::vector<std::string>& mu_methods() {
    static const std::vector<std::string> m = {"perfect",      "gmm_y",      "gmm_h",           "lloyd_h",
                                               "lloyd_gmm",    "lloyd_lmmse", "lloyd_omp",      "random_h",
                                               "random_gmm",   "random_lmmse", "random_omp",    "gmm_samples_y",
                                               "gmm_samples_h"};
    return m;
}

struct ExperimentConfig {
    ScenarioConfig scenario{};
    std::size_t train_size = 20000;
    std::size_t eval_size = 2000;
    std::vector<double> snr_db_list{10.0};
    int n_p = 16;
    int bits = 6;
    int users = 4;
    Mode mode = Mode::P2P;
    std::vector<std::string> methods;  // empty: all methods of the mode
    PrecoderKind precoder = PrecoderKind::RBD;
    int d = 1;                         // WMMSE streams per user for directional feedback
    std::size_t num_constellations = 2500;
    std::uint64_t seed = 1;
    std::optional<double> codebook_design_snr_db;  // unset: P2P uses each SNR, MU uses 25 dB
    bool allow_geometry_override = false;          // MU: permit users * nrx != ntx

    CovarianceStructure gmm_structure = CovarianceStructure::Kronecker;
    std::size_t k_tx = 0;  // 0: default split of 2^bits
    std::size_t k_rx = 0;
    int em_max_iter = 100;
    double em_tol = 1e-6;
    bool zero_mean = false;

    int lloyd_max_outer = 30;
    int pga_max_iter = 200;
    int omp_oversampling = 2;
    int wmmse_iterations = 300;
    int swmmse_iterations = 300;
    std::size_t trace_count = 0;  // constellations whose iteration traces are kept
    int threads = 1;

    std::size_t codebook_size() const { return std::size_t{1} << bits; }

    std::pair<std::size_t, std::size_t> kronecker_split() const {
        if (k_tx > 0 && k_rx > 0) return {k_tx, k_rx};
        const int rx_bits = std::max(0, bits / 2 - 1);
        return {std::size_t{1} << (bits - rx_bits), std::size_t{1} << rx_bits};
    }

    double design_snr_db(double snr_db) const {
        if (codebook_design_snr_db) return *codebook_design_snr_db;
        return mode == Mode::MU ? 25.0 : snr_db;
    }

    std::vector<std::string> active_methods() const {
        return methods.empty() ? (mode == Mode::P2P ? p2p_methods() : mu_methods()) : methods;
    }

    /// Throws ConfigError naming the offending field.
    void validate() const {
        scenario.validate();
        const int ntx = scenario.ntx();
        if (train_size < 2) throw ConfigError("data.train_size must be >= 2");
        if (eval_size < 1) throw ConfigError("data.eval_size must be >= 1");
        if (snr_db_list.empty()) throw ConfigError("experiment.snr_db must list at least one value");
        for (double s : snr_db_list)
            if (!std::isfinite(s)) throw ConfigError("experiment.snr_db must be finite");
        if (n_p < 1 || n_p > ntx) throw ConfigError("experiment.n_p must satisfy 1 <= n_p <= ntx");
        if (bits < 0 || bits > 16) throw ConfigError("experiment.bits must be in [0, 16]");
        if (codebook_size() > train_size) throw ConfigError("experiment.bits: 2^bits exceeds data.train_size");
        if (gmm_structure == CovarianceStructure::Kronecker) {
            const auto [a, b] = kronecker_split();
            if (a * b != codebook_size()) throw ConfigError("gmm.k_tx * gmm.k_rx must equal 2^bits");
        }
        if (em_max_iter < 1) throw ConfigError("gmm.max_iter must be >= 1");
        if (lloyd_max_outer < 1) throw ConfigError("codebook.lloyd_max_outer must be >= 1");
        if (pga_max_iter < 1) throw ConfigError("codebook.pga_max_iter must be >= 1");
        if (omp_oversampling < 1) throw ConfigError("estimator.omp_oversampling must be >= 1");
        if (threads < 1) throw ConfigError("run.threads must be >= 1");
        const auto& known = mode == Mode::P2P ? p2p_methods() : mu_methods();
        for (const auto& m : methods)
            if (std::find(known.begin(), known.end(), m) == known.end())
                throw ConfigError("experiment.methods: unknown method '" + m + "' for mode " + to_string(mode));
        if (mode == Mode::MU) {
            if (users < 1) throw ConfigError("experiment.users must be >= 1");
            if (static_cast<std::size_t>(users) > eval_size) throw ConfigError("experiment.users exceeds data.eval_size");
            if (num_constellations < 1) throw ConfigError("experiment.num_constellations must be >= 1");
            if (!allow_geometry_override && users * scenario.nrx != ntx)
                throw ConfigError("experiment.users: users * nrx must equal ntx (set allow_geometry_override)");
            if ((precoder == PrecoderKind::RBD || precoder == PrecoderKind::RCI) && users < 2)
                throw ConfigError("precoder.kind: rbd and rci need users >= 2");
            if (d < 1 || d > scenario.nrx) throw ConfigError("precoder.d must satisfy 1 <= d <= nrx");
            if (wmmse_iterations < 1 || swmmse_iterations < 1) throw ConfigError("precoder iterations must be >= 1");
        }
    }
};

struct Record {
    std::string method;
    double snr_db = 0.0;
    std::size_t id = 0;
    double value = 0.0;
};

struct TraceRow {
    std::string method;
    double snr_db = 0.0;
    std::size_t id = 0;
    int iteration = 0;
    double sum_rate = 0.0;
    double running_mean = 0.0;
    double true_rate = 0.0;
};

struct ExperimentResult {
    std::string metric;  // "nse" or "sumrate"
    std::vector<Record> records;
    std::vector<TraceRow> traces;

    std::vector<double> values(const std::string& method, double snr_db) const {
        std::vector<double> out;
        for (const auto& r : records)
            if (r.method == method && r.snr_db == snr_db) out.push_back(r.value);
        return out;
    }
};

// ---- statistics ------------------------------------------------------------------

/// Points (s, P(metric > s)) at the sorted unique sample values.
inline std::vector<std::pair<double, double>> eccdf(std::vector<double> values) {
    if (values.empty()) throw ArgumentError("eccdf: no values");
    std::sort(values.begin(), values.end());
    const double n = static_cast<double>(values.size());
    std::vector<std::pair<double, double>> out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i + 1 < values.size() && values[i + 1] == values[i]) continue;
        out.emplace_back(values[i], static_cast<double>(values.size() - i - 1) / n);
    }
    return out;
}

/// P(metric > s) for an arbitrary threshold.
inline double eccdf_at(const std::vector<double>& values, double s) {
    if (values.empty()) throw ArgumentError("eccdf: no values");
    const auto above = std::count_if(values.begin(), values.end(), [s](double v) { return v > s; });
    return static_cast<double>(above) / static_cast<double>(values.size());
}

// ---- threading ---------------------------------------------------------------------

/// Runs fn(i) for i in [0, n) on `threads` workers. Rethrows the first error.
template <class Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
    const auto workers = static_cast<std::size_t>(std::max(1, threads));
    if (workers == 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < std::min(workers, n); ++w)
        pool.emplace_back([&]() {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                    next = n;
                }
            }
        });
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

// ---- data and models -----------------------------------------------------------------

namespace detail {

inline constexpr std::uint64_t kTaskStream = 0x7461736b;      // "task"
inline constexpr std::uint64_t kGmmStream = 0x676d6d;         // "gmm"
inline constexpr std::uint64_t kLloydStream = 0x6c6c6f;       // "llo"
inline constexpr std::uint64_t kRandomCbStream = 0x72636200;  // "rcb"
inline constexpr std::uint64_t kSwmmseStream = 0x73776d;      // "swm"

// Entries of components that received no training sample are only
// reachable through their model weight; a rank-deficient entry there is
// completed rather than rejected.
inline DirCodebook gmm_directions(const GmmModel& model, const ChannelDataset& train, double rho, double sigma2,
                                  const PgaOptions& pga, int nrx) {
    GmmCodebookReport rep;
    const CovCodebook cb = gmm_codebook(model, train, rho, sigma2, pga, &rep);
    DirCodebook out;
    for (std::size_t k = 0; k < cb.size(); ++k) {
        CovCodebook one;
        one.entries = {cb.entries[k]};
        try {
            out.entries.push_back(extract_directions(one, nrx, rep.cluster_sizes[k] == 0).entries[0]);
        } catch (const RankError&) {
            throw RankError("extract_directions: codebook entry " + std::to_string(k) + " has rank < " +
                            std::to_string(nrx) + "; build the codebook at a higher SNR");
        }
    }
    return out;
}

inline bool wants(const std::vector<std::string>& methods, const std::string& prefix) {
    return std::any_of(methods.begin(), methods.end(),
                       [&](const std::string& m) { return m.rfind(prefix, 0) == 0; });
}

inline bool has(const std::vector<std::string>& methods, const std::string& name) {
    return std::find(methods.begin(), methods.end(), name) != methods.end();
}

}  // namespace detail

struct ExperimentData {
    ChannelDataset train;  // normalized, downlink orientation
    ChannelDataset eval;   // downlink, scaled by the training factor
};

inline ExperimentData prepare_data(const ExperimentConfig& cfg) {
    auto [ul, dl] = generate_scenario(cfg.scenario, cfg.train_size + cfg.eval_size);
    auto [ul_train, ul_rest] = split_dataset(ul, cfg.train_size);
    auto [dl_rest, dl_eval] = split_dataset(dl, cfg.train_size);
    (void)ul_rest;
    (void)dl_rest;
    ExperimentData data;
    data.train = normalize_dataset(transpose_dataset(ul_train));
    data.eval = dl_eval;
    const double scale = data.train.normalization_factor;
    for (auto& h : data.eval.channels) h *= scale;
    data.eval.normalization_factor = scale;
    return data;
}

inline GmmModel fit_model(const ExperimentConfig& cfg, const ChannelDataset& train) {
    EmOptions opts;
    opts.max_iter = cfg.em_max_iter;
    opts.tol = cfg.em_tol;
    opts.zero_mean = cfg.zero_mean;
    opts.init_seed = derive_seed(cfg.seed, detail::kGmmStream);
    if (cfg.gmm_structure == CovarianceStructure::Kronecker) {
        const auto [k_tx, k_rx] = cfg.kronecker_split();
        return fit_kronecker(train, k_tx, k_rx, opts);
    }
    return fit_em(train, cfg.codebook_size(), opts);
}

// ---- point-to-point -----------------------------------------------------------------

namespace detail {

struct EstimatorBank {
    std::optional<AdaptedGmm> adapted;
    CMatrix lmmse;
    std::optional<OmpEstimator> omp;
    int omp_max_sparsity = 1;

    EstimatorBank(const ExperimentConfig& cfg, const std::vector<std::string>& methods, const GmmModel* model,
                  const CMatrix& sample_cov, const ObservationModel& obs) {
        const bool need_gmm = wants(methods, "gmm_y") || wants(methods, "gmm_samples_y") ||
                              std::any_of(methods.begin(), methods.end(),
                                          [](const std::string& m) { return m.size() > 4 && m.substr(m.size() - 4) == "_gmm"; });
        if (need_gmm && model) adapted = adapt_to_observation(*model, obs.A(), obs.sigma2);
        if (std::any_of(methods.begin(), methods.end(),
                        [](const std::string& m) { return m.size() > 6 && m.substr(m.size() - 6) == "_lmmse"; }))
            lmmse = lmmse_filter(sample_cov, obs.A(), obs.sigma2);
        if (std::any_of(methods.begin(), methods.end(),
                        [](const std::string& m) { return m.size() > 4 && m.substr(m.size() - 4) == "_omp"; })) {
            const auto& s = cfg.scenario;
            omp.emplace(build_dictionary(s.nrx, s.ntx_h, s.ntx_v, cfg.omp_oversampling, cfg.omp_oversampling,
                                         cfg.omp_oversampling),
                        obs.A());
            omp_max_sparsity = static_cast<int>(obs.observation_dim());
        }
    }

    /// Channel estimate by estimator suffix ("h" is the true channel).
    CMatrix estimate(const std::string& kind, const CMatrix& h, const CVector& y) const {
        const auto rows = h.rows();
        const auto cols = h.cols();
        if (kind == "h") return h;
        if (kind == "gmm") return unvec(estimate_gmm(*adapted, y), rows, cols);
        if (kind == "lmmse") return unvec(lmmse * y, rows, cols);
        if (kind == "omp") return unvec(omp->estimate(y, vec(h), omp_max_sparsity).h_hat, rows, cols);
        throw ConfigError("unknown estimator '" + kind + "'");
    }
};

inline std::string suffix_after(const std::string& method, const std::string& prefix) {
    return method.substr(prefix.size());
}

}  // namespace detail

/// Normalized spectral efficiency of every configured method on every
/// evaluation channel.
inline ExperimentResult run_p2p_experiment(const ExperimentConfig& cfg, const ExperimentData& data,
                                           const GmmModel* model) {
    cfg.validate();
    if (cfg.mode != Mode::P2P) throw ConfigError("experiment.mode must be p2p");
    const auto methods = cfg.active_methods();
    const bool need_model = detail::wants(methods, "gmm");
    if (need_model && !model) throw ArgumentError("run_p2p_experiment: GMM methods need a model");
    const CMatrix sample_cov = sample_covariance(data.train);
    const double rho = 1.0;
    const auto& s = cfg.scenario;

    ExperimentResult result{"nse", {}, {}};
    for (std::size_t si = 0; si < cfg.snr_db_list.size(); ++si) {
        const double snr_db = cfg.snr_db_list[si];
        const double sigma2 = noise_variance_from_snr_db(snr_db);
        const double design_sigma2 = noise_variance_from_snr_db(cfg.design_snr_db(snr_db));
        PgaOptions pga;
        pga.max_iter = cfg.pga_max_iter;

        CovCodebook lloyd_cb, gmm_cb;
        if (detail::wants(methods, "lloyd")) {
            LloydOptions lo;
            lo.max_outer = cfg.lloyd_max_outer;
            lo.seed = derive_seed(cfg.seed, detail::kLloydStream, si);
            lo.pga = pga;
            lloyd_cb = lloyd_codebook(data.train, cfg.codebook_size(), rho, design_sigma2, lo);
        }
        if (need_model) gmm_cb = gmm_codebook(*model, data.train, rho, design_sigma2, pga);
        std::optional<GmmDensity> density;
        if (detail::has(methods, "gmm_h")) density.emplace(*model);

        const auto obs = make_observation_model(s.ntx_h, s.ntx_v, s.nrx, cfg.n_p, rho, sigma2);
        const detail::EstimatorBank est(cfg, methods, model, sample_cov, obs);

        std::vector<std::vector<double>> values(data.eval.size(), std::vector<double>(methods.size()));
        parallel_for(data.eval.size(), cfg.threads, [&](std::size_t m) {
            Rng rng = make_rng(cfg.seed, detail::kTaskStream + si, m);
            const CMatrix& h = data.eval.channels[m];
            const CVector y = observe(h, obs, rng);
            const double c = waterfilling_capacity(h, rho, sigma2).capacity;
            for (std::size_t i = 0; i < methods.size(); ++i) {
                const std::string& name = methods[i];
                double r = 0.0;
                if (name == "optimal") {
                    r = c;
                } else if (name == "uni_pow_cov") {
                    r = detail::rate(h, baseline_tx_strategy(BaselineKind::UniformCov, nullptr, s.ntx(), s.nrx, rho),
                                     sigma2);
                } else if (name == "uni_pow_eigsp") {
                    r = detail::rate(h, baseline_tx_strategy(BaselineKind::UniformEigsp, &h, s.ntx(), s.nrx, rho),
                                     sigma2);
                } else if (name.rfind("lloyd_", 0) == 0) {
                    const CMatrix h_hat = est.estimate(detail::suffix_after(name, "lloyd_"), h, y);
                    r = detail::rate(h, lloyd_cb.entries[select_by_rate_cov(h_hat, lloyd_cb, sigma2).index], sigma2);
                } else if (name == "gmm_h") {
                    r = detail::rate(h, gmm_cb.entries[select_by_responsibility_perfect(*density, vec(h)).index],
                                     sigma2);
                } else if (name == "gmm_y") {
                    r = detail::rate(h, gmm_cb.entries[select_by_responsibility(*est.adapted, y).index], sigma2);
                }
                values[m][i] = c > 0.0 ? std::max(0.0, r) / c : 0.0;
            }
        });
        for (std::size_t i = 0; i < methods.size(); ++i)
            for (std::size_t m = 0; m < data.eval.size(); ++m)
                result.records.push_back({methods[i], snr_db, m, values[m][i]});
    }
    return result;
}

// ---- multi-user --------------------------------------------------------------------------

/// Sum-rate on the true channels of random user constellations.
inline ExperimentResult run_mu_experiment(const ExperimentConfig& cfg, const ExperimentData& data,
                                          const GmmModel* model) {
    cfg.validate();
    if (cfg.mode != Mode::MU) throw ConfigError("experiment.mode must be mu");
    const auto methods = cfg.active_methods();
    const bool need_model = detail::wants(methods, "gmm") || detail::wants(methods, "lloyd_gmm") ||
                            detail::wants(methods, "random_gmm");
    if (need_model && !model) throw ArgumentError("run_mu_experiment: GMM methods need a model");
    const CMatrix sample_cov = sample_covariance(data.train);
    const double rho = 1.0;
    const auto& s = cfg.scenario;
    const auto users = static_cast<std::size_t>(cfg.users);

    std::vector<DirCodebook> random_cbs;
    if (detail::wants(methods, "random"))
        for (std::size_t j = 0; j < users; ++j) {
            Rng rng = make_rng(cfg.seed, detail::kRandomCbStream, j);
            random_cbs.push_back(random_grassmann_codebook(cfg.codebook_size(), s.ntx(), s.nrx, rng));
        }

    ExperimentResult result{"sumrate", {}, {}};
    for (std::size_t si = 0; si < cfg.snr_db_list.size(); ++si) {
        const double snr_db = cfg.snr_db_list[si];
        const double sigma2 = noise_variance_from_snr_db(snr_db);
        const double design_sigma2 = noise_variance_from_snr_db(cfg.design_snr_db(snr_db));
        PgaOptions pga;
        pga.max_iter = cfg.pga_max_iter;

        DirCodebook lloyd_dir, gmm_dir;
        if (detail::wants(methods, "lloyd")) {
            LloydOptions lo;
            lo.max_outer = cfg.lloyd_max_outer;
            lo.seed = derive_seed(cfg.seed, detail::kLloydStream, si);
            lo.pga = pga;
            lloyd_dir = extract_directions(lloyd_codebook(data.train, cfg.codebook_size(), rho, design_sigma2, lo),
                                           s.nrx);
        }
        if (detail::has(methods, "gmm_y") || detail::has(methods, "gmm_h"))
            gmm_dir = detail::gmm_directions(*model, data.train, rho, design_sigma2, pga, s.nrx);
        std::optional<GmmDensity> density;
        if (detail::has(methods, "gmm_h") || detail::has(methods, "gmm_samples_h")) density.emplace(*model);

        const auto obs = make_observation_model(s.ntx_h, s.ntx_v, s.nrx, cfg.n_p, rho, sigma2);
        const detail::EstimatorBank est(cfg, methods, model, sample_cov, obs);

        auto design = [&](const std::vector<CMatrix>& h_tilde) {
            switch (cfg.precoder) {
                case PrecoderKind::RBD: return rbd(h_tilde, rho, sigma2);
                case PrecoderKind::RCI: return rci(h_tilde, rho, sigma2);
                default: break;
            }
            WmmseOptions wo;
            wo.d = cfg.d;
            wo.max_iter = cfg.wmmse_iterations;
            return wmmse(h_tilde, rho, sigma2, wo);
        };

        const std::size_t count = cfg.num_constellations;
        std::vector<std::vector<double>> values(count, std::vector<double>(methods.size()));
        std::vector<std::vector<TraceRow>> traces(count);
        parallel_for(count, cfg.threads, [&](std::size_t c) {
            Rng rng = make_rng(cfg.seed, detail::kTaskStream + si, c);
            // draw distinct users
            std::vector<std::size_t> pick;
            std::uniform_int_distribution<std::size_t> uni(0, data.eval.size() - 1);
            while (pick.size() < users) {
                const std::size_t u = uni(rng);
                if (std::find(pick.begin(), pick.end(), u) == pick.end()) pick.push_back(u);
            }
            std::vector<CMatrix> h(users);
            std::vector<CVector> y(users);
            for (std::size_t j = 0; j < users; ++j) {
                h[j] = data.eval.channels[pick[j]];
                y[j] = observe(h[j], obs, rng);
            }
            const bool keep_trace = c < cfg.trace_count;
            for (std::size_t i = 0; i < methods.size(); ++i) {
                const std::string& name = methods[i];
                std::vector<CMatrix> h_tilde(users);
                if (name == "perfect") {
                    h_tilde = h;
                } else if (name == "gmm_y" || name == "gmm_h") {
                    for (std::size_t j = 0; j < users; ++j) {
                        const auto k = name == "gmm_y" ? select_by_responsibility(*est.adapted, y[j]).index
                                                       : select_by_responsibility_perfect(*density, vec(h[j])).index;
                        h_tilde[j] = gmm_dir.entries[k].adjoint();
                    }
                } else if (name.rfind("lloyd_", 0) == 0 || name.rfind("random_", 0) == 0) {
                    const bool lloyd = name.rfind("lloyd_", 0) == 0;
                    const std::string kind = detail::suffix_after(name, lloyd ? "lloyd_" : "random_");
                    for (std::size_t j = 0; j < users; ++j) {
                        const DirCodebook& cb = lloyd ? lloyd_dir : random_cbs[j];
                        const CMatrix h_hat = est.estimate(kind, h[j], y[j]);
                        h_tilde[j] = cb.entries[select_by_rate_subspace(h_hat, cb, rho, sigma2).index].adjoint();
                    }
                } else if (name == "gmm_samples_y" || name == "gmm_samples_h") {
                    std::vector<std::size_t> ks(users);
                    for (std::size_t j = 0; j < users; ++j)
                        ks[j] = name == "gmm_samples_y" ? select_by_responsibility(*est.adapted, y[j]).index
                                                        : select_by_responsibility_perfect(*density, vec(h[j])).index;
                    Rng srng = make_rng(cfg.seed, detail::kSwmmseStream + si, c);
                    SwmmseOptions so;
                    so.max_iter = cfg.swmmse_iterations;
                    SwmmseTrace tr;
                    const auto p = swmmse(*model, ks, rho, sigma2, srng, so, keep_trace ? &tr : nullptr,
                                          keep_trace ? &h : nullptr);
                    values[c][i] = sum_rate(h, p, sigma2);
                    for (std::size_t it = 0; it < tr.sample_rate.size(); ++it)
                        traces[c].push_back({name, snr_db, c, static_cast<int>(it + 1), tr.sample_rate[it],
                                             tr.running_mean[it], tr.true_rate[it]});
                    continue;
                }
                PrecoderSet p;
                if (keep_trace && cfg.precoder == PrecoderKind::WMMSE) {
                    WmmseOptions wo;
                    wo.d = cfg.d;
                    wo.max_iter = cfg.wmmse_iterations;
                    std::vector<double> tr;
                    p = wmmse(h_tilde, rho, sigma2, wo, &tr);
                    // the trace tracks the rate on the channels the precoder was designed for
                    for (std::size_t it = 0; it < tr.size(); ++it)
                        traces[c].push_back({name, snr_db, c, static_cast<int>(it), tr[it], tr[it], 0.0});
                } else {
                    p = design(h_tilde);
                }
                values[c][i] = sum_rate(h, p, sigma2);
            }
        });
        for (std::size_t i = 0; i < methods.size(); ++i)
            for (std::size_t c = 0; c < count; ++c) result.records.push_back({methods[i], snr_db, c, values[c][i]});
        for (auto& t : traces)
            for (auto& row : t) result.traces.push_back(std::move(row));
    }
    return result;
}

// ---- CSV output ------------------------------------------------------------------------------

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Long format: method,snr_db,id,value.
inline void write_results_csv(const ExperimentResult& r, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw FormatError("cannot open " + path.string());
    out << "method,snr_db,id,value\n";
    for (const auto& rec : r.records)
        out << rec.method << ',' << format_double(rec.snr_db) << ',' << rec.id << ',' << format_double(rec.value)
            << '\n';
    if (!out) throw FormatError("write failed: " + path.string());
}

/// Wide format for plotting: snr_db,p,<method>... Row i of an SNR block holds
/// the i-th smallest value of every method and p = P(metric > value) for a
/// sample without ties, (n - i) / n.
inline void write_eccdf_csv(const ExperimentResult& r, const std::filesystem::path& path) {
    std::vector<std::string> methods;
    std::vector<double> snrs;
    for (const auto& rec : r.records) {
        if (std::find(methods.begin(), methods.end(), rec.method) == methods.end()) methods.push_back(rec.method);
        if (std::find(snrs.begin(), snrs.end(), rec.snr_db) == snrs.end()) snrs.push_back(rec.snr_db);
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw FormatError("cannot open " + path.string());
    out << "snr_db,p";
    for (const auto& m : methods) out << ',' << m;
    out << '\n';
    for (double snr : snrs) {
        std::vector<std::vector<double>> cols;
        std::size_t n = 0;
        for (const auto& m : methods) {
            cols.push_back(r.values(m, snr));
            std::sort(cols.back().begin(), cols.back().end());
            n = std::max(n, cols.back().size());
        }
        for (std::size_t i = 0; i < n; ++i) {
            out << format_double(snr) << ',' << format_double(static_cast<double>(n - i - 1) / static_cast<double>(n));
            for (const auto& col : cols) {
                out << ',';
                if (i < col.size()) out << format_double(col[i]);
            }
            out << '\n';
        }
    }
    if (!out) throw FormatError("write failed: " + path.string());
}

/// method,snr_db,id,iteration,sum_rate,running_mean,true_rate
inline void write_trace_csv(const ExperimentResult& r, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw FormatError("cannot open " + path.string());
    out << "method,snr_db,id,iteration,sum_rate,running_mean,true_rate\n";
    for (const auto& t : r.traces)
        out << t.method << ',' << format_double(t.snr_db) << ',' << t.id << ',' << t.iteration << ','
            << format_double(t.sum_rate) << ',' << format_double(t.running_mean) << ','
            << format_double(t.true_rate) << '\n';
    if (!out) throw FormatError("write failed: " + path.string());
}

/// Writes results_<metric>.csv, eccdf_<metric>.csv and, when traces exist,
/// trace_<precoder>.csv into `dir`.
inline void write_outputs(const ExperimentConfig& cfg, const ExperimentResult& r, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_results_csv(r, dir / ("results_" + r.metric + ".csv"));
    write_eccdf_csv(r, dir / ("eccdf_" + r.metric + ".csv"));
    if (!r.traces.empty()) {
        const bool stochastic = std::any_of(r.traces.begin(), r.traces.end(),
                                            [](const TraceRow& t) { return t.method.rfind("gmm_samples", 0) == 0; });
        write_trace_csv(r, dir / (std::string("trace_") + (stochastic ? "swmmse" : to_string(cfg.precoder)) + ".csv"));
    }
}

/// Mean value per (method, snr) in record order.
inline std::vector<std::tuple<std::string, double, double, std::size_t>> summarize(const ExperimentResult& r) {
    std::vector<std::tuple<std::string, double, double, std::size_t>> out;
    std::map<std::pair<std::string, double>, std::size_t> where;
    for (const auto& rec : r.records) {
        const auto key = std::make_pair(rec.method, rec.snr_db);
        auto it = where.find(key);
        if (it == where.end()) {
            where[key] = out.size();
            out.emplace_back(rec.method, rec.snr_db, 0.0, 0);
            it = where.find(key);
        }
        auto& row = out[it->second];
        std::get<2>(row) += rec.value;
        ++std::get<3>(row);
    }
    for (auto& row : out) std::get<2>(row) /= static_cast<double>(std::get<3>(row));
    return out;
}

}  // namespace gmmfb

#endif  // GMMFB_HARNESS_HPP
