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

// gmmfb: experiment driver.
//
//   gmmfb generate --config c.ini --out dir     datasets -> dir/train, dir/eval
//   gmmfb fit      --config c.ini --out dir     GMM      -> dir/model
//   gmmfb codebook --config c.ini --out dir     codebooks at the first SNR -> dir/cb_lloyd, dir/cb_gmm
//   gmmfb run      --config c.ini --out dir     results_*.csv, eccdf_*.csv, trace_*.csv
//   gmmfb report   --out dir                    mean per method and SNR
//
// Datasets and the model found in --out are reused when their metadata
// matches the configuration.

#include "gmmfb/gmmfb.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>

namespace {

using namespace gmmfb;

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out = "out";
    std::optional<int> threads;
    std::vector<std::string> methods;
};

ExperimentConfig resolve(const Options& o) {
    ExperimentConfig cfg = o.config.empty() ? ExperimentConfig{} : load_config(o.config);
    if (o.seed) cfg.seed = *o.seed;
    if (o.threads) cfg.threads = *o.threads;
    if (!o.methods.empty()) cfg.methods = o.methods;
    cfg.validate();
    return cfg;
}

std::filesystem::path out_dir(const Options& o) {
    std::filesystem::create_directories(o.out);
    return o.out;
}

bool stored(const std::filesystem::path& base) {
    return std::filesystem::exists(base.string() + ".json") && std::filesystem::exists(base.string() + ".bin");
}

ExperimentData data_for(const ExperimentConfig& cfg, const std::filesystem::path& dir) {
    if (stored(dir / "train") && stored(dir / "eval")) {
        ExperimentData d{load_dataset(dir / "train"), load_dataset(dir / "eval")};
        if (d.train.scenario == cfg.scenario && d.train.size() == cfg.train_size && d.eval.size() == cfg.eval_size) {
            std::cerr << "using datasets in " << dir << "\n";
            return d;
        }
        std::cerr << "datasets in " << dir << " do not match the configuration, regenerating\n";
    }
    return prepare_data(cfg);
}

std::optional<GmmModel> model_for(const ExperimentConfig& cfg, const ExperimentData& data,
                                  const std::filesystem::path& dir) {
    const auto methods = cfg.active_methods();
    const bool need = std::any_of(methods.begin(), methods.end(),
                                  [](const std::string& m) { return m.find("gmm") != std::string::npos; });
    if (!need) return std::nullopt;
    if (stored(dir / "model")) {
        GmmModel m = load_model(dir / "model");
        const bool shape_ok = m.structure == cfg.gmm_structure && m.size() == cfg.codebook_size() &&
                              m.ntx == cfg.scenario.ntx() && m.nrx == cfg.scenario.nrx;
        if (shape_ok) {
            std::cerr << "using model in " << dir << "\n";
            return m;
        }
        std::cerr << "model in " << dir << " does not match the configuration, refitting\n";
    }
    return fit_model(cfg, data.train);
}

int cmd_generate(const Options& o) {
    const auto cfg = resolve(o);
    const auto dir = out_dir(o);
    const auto data = prepare_data(cfg);
    save_dataset(data.train, dir / "train");
    save_dataset(data.eval, dir / "eval");
    std::cout << "train " << data.train.size() << " eval " << data.eval.size() << " normalization "
              << format_double(data.train.normalization_factor) << "\n";
    return 0;
}

int cmd_fit(const Options& o) {
    const auto cfg = resolve(o);
    const auto dir = out_dir(o);
    const auto data = data_for(cfg, dir);
    const GmmModel m = fit_model(cfg, data.train);
    save_model(m, dir / "model");
    std::cout << "K " << m.size() << " structure " << to_string(m.structure) << " parameters " << parameter_count(m)
              << " mean log-likelihood "
              << format_double(log_likelihood(m, data.train) / static_cast<double>(data.train.size())) << "\n";
    return 0;
}

int cmd_codebook(const Options& o) {
    const auto cfg = resolve(o);
    const auto dir = out_dir(o);
    const auto data = data_for(cfg, dir);
    const double snr = cfg.design_snr_db(cfg.snr_db_list.front());
    const double sigma2 = noise_variance_from_snr_db(snr);
    PgaOptions pga;
    pga.max_iter = cfg.pga_max_iter;
    LloydOptions lo;
    lo.max_outer = cfg.lloyd_max_outer;
    lo.seed = derive_seed(cfg.seed, detail::kLloydStream, 0);
    lo.pga = pga;
    LloydReport report;
    CovCodebook lloyd = lloyd_codebook(data.train, cfg.codebook_size(), 1.0, sigma2, lo, &report);
    lloyd.design_snr_db = snr;
    save_codebook(lloyd, dir / "cb_lloyd");
    std::cout << "lloyd: " << lloyd.size() << " entries, " << report.outer_iterations
              << " outer iterations, mean rate " << format_double(report.mean_selected_rate.back()) << "\n";
    const auto model = model_for(cfg, data, dir);
    if (model) {
        CovCodebook gmm = gmm_codebook(*model, data.train, 1.0, sigma2, pga);
        gmm.design_snr_db = snr;
        save_codebook(gmm, dir / "cb_gmm");
        std::cout << "gmm: " << gmm.size() << " entries\n";
    }
    return 0;
}

int cmd_run(const Options& o) {
    const auto cfg = resolve(o);
    const auto dir = out_dir(o);
    const auto data = data_for(cfg, dir);
    const auto model = model_for(cfg, data, dir);
    const GmmModel* mp = model ? &*model : nullptr;
    const auto result = cfg.mode == Mode::P2P ? run_p2p_experiment(cfg, data, mp) : run_mu_experiment(cfg, data, mp);
    write_outputs(cfg, result, dir);
    for (const auto& [method, snr, mean, n] : summarize(result))
        std::cout << std::left << std::setw(20) << method << " snr " << std::setw(6) << snr << " mean "
                  << format_double(mean) << " (n=" << n << ")\n";
    return 0;
}

int cmd_report(const Options& o) {
    int found = 0;
    for (const char* metric : {"nse", "sumrate"}) {
        const auto path = std::filesystem::path(o.out) / (std::string("results_") + metric + ".csv");
        std::ifstream in(path);
        if (!in) continue;
        ++found;
        ExperimentResult r{metric, {}, {}};
        std::string line;
        std::getline(in, line);
        if (line != "method,snr_db,id,value") throw FormatError(path.string() + ": unexpected header");
        while (std::getline(in, line)) {
            std::stringstream ss(line);
            std::string method, snr, id, value;
            if (!std::getline(ss, method, ',') || !std::getline(ss, snr, ',') || !std::getline(ss, id, ',') ||
                !std::getline(ss, value))
                throw FormatError(path.string() + ": malformed row: " + line);
            r.records.push_back({method, std::stod(snr), std::stoul(id), std::stod(value)});
        }
        std::cout << metric << " (" << path.string() << ")\n";
        for (const auto& [method, snr, mean, n] : summarize(r)) {
            double var = 0.0;
            const auto v = r.values(method, snr);
            for (double x : v) var += (x - mean) * (x - mean);
            const double se = v.size() > 1 ? std::sqrt(var / static_cast<double>(v.size() - 1) / v.size()) : 0.0;
            std::cout << "  " << std::left << std::setw(20) << method << " snr " << std::setw(6) << snr << " mean "
                      << std::setw(12) << mean << " se " << std::setw(12) << se << " n " << n << "\n";
        }
    }
    if (found == 0) {
        std::cerr << "no results_*.csv in " << o.out << "\n";
        return 1;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"GMM-based limited feedback experiments"};
    app.require_subcommand(1);
    Options o;
    auto add_common = [&](CLI::App* sub, bool config) {
        if (config) {
            sub->add_option("--config", o.config, "INI configuration file")->check(CLI::ExistingFile);
            sub->add_option("--seed", o.seed, "master seed (overrides experiment.seed)");
            sub->add_option("--threads", o.threads, "worker threads (overrides run.threads)");
            sub->add_option("--method", o.methods, "comma-separated methods (overrides experiment.methods)")
                ->delimiter(',');
        }
        sub->add_option("--out", o.out, "output directory")->capture_default_str();
    };
    int (*handler)(const Options&) = nullptr;
    auto sub = [&](const char* name, const char* help, int (*fn)(const Options&), bool config) {
        CLI::App* s = app.add_subcommand(name, help);
        add_common(s, config);
        s->callback([&handler, fn] { handler = fn; });
    };
    sub("generate", "generate and store the training and evaluation datasets", cmd_generate, true);
    sub("fit", "fit the GMM on the training set", cmd_fit, true);
    sub("codebook", "build the Lloyd and GMM codebooks", cmd_codebook, true);
    sub("run", "run the configured experiment and write CSVs", cmd_run, true);
    sub("report", "summarize the CSVs in --out", cmd_report, false);
    CLI11_PARSE(app, argc, argv);
    try {
        return handler(o);
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
