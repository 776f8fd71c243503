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

#ifndef GMMFB_CHANNEL_MODEL_HPP
#define GMMFB_CHANNEL_MODEL_HPP

// Synthetic geometric multipath channels between a URA at the base station
// and a ULA at the mobile terminal.
//
// A downlink channel is H = sum_l g_l * a_rx(theta_l) * a_tx(phi_l, psi_l)^H * exp(-2 pi j f tau_l),
// shape nrx x ntx. The uplink channel of the same geometry is the transpose of
// that expression evaluated at the uplink carrier (ntx x nrx). Element spacing
// is half a wavelength at the uplink carrier, so the downlink steering phases
// are stretched by f_dl / f_ul.

#include "gmmfb/core.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace gmmfb {

inline constexpr double kUplinkCarrierHz = 2.53e9;
inline constexpr double kMaxDelaySeconds = 1e-6;
inline constexpr double kDelayDecaySeconds = 0.3e-6;
inline constexpr double kSectorHalfWidthDeg = 60.0;

struct ScenarioConfig {
    int ntx_h = 4;
    int ntx_v = 4;
    int nrx = 4;
    int paths_min = 4;  // num_paths_range, inclusive
    int paths_max = 8;
    double angle_spread_deg = 10.0;
    double carrier_offset = 200e6 / kUplinkCarrierHz;  // (f_dl - f_ul) / f_ul
    bool redraw_phases = true;  // independent per-path phases in UL and DL
    std::uint64_t rng_seed = 1;

    int ntx() const { return ntx_h * ntx_v; }
    int dim() const { return ntx() * nrx; }

    void validate() const {
        if (ntx_h < 1 || ntx_v < 1) throw ConfigError("scenario: ntx_h and ntx_v must be >= 1");
        if (nrx < 1) throw ConfigError("scenario: nrx must be >= 1");
        if (paths_min < 1 || paths_max < paths_min) throw ConfigError("scenario: invalid num_paths_range");
        if (!(angle_spread_deg > 0.0)) throw ConfigError("scenario: angle_spread_deg must be > 0");
        if (!(carrier_offset > -1.0)) throw ConfigError("scenario: carrier_offset must be > -1");
    }

    bool operator==(const ScenarioConfig&) const = default;
};

enum class Domain { UL, DL };

inline const char* to_string(Domain d) {
    return d == Domain::UL ? "UL" : "DL";
}

struct ChannelDataset {
    std::vector<CMatrix> channels;
    Domain domain = Domain::DL;
    double normalization_factor = 1.0;
    ScenarioConfig scenario{};

    std::size_t size() const { return channels.size(); }
    bool empty() const { return channels.empty(); }
    Eigen::Index rows() const { return channels.empty() ? 0 : channels.front().rows(); }
    Eigen::Index cols() const { return channels.empty() ? 0 : channels.front().cols(); }
};

// ---- geometry ----------------------------------------------------------------

struct PathParams {
    Complex gain;
    double rx_angle = 0.0;     // radians, ULA broadside = 0
    double tx_azimuth = 0.0;   // radians
    double tx_elevation = 0.0; // radians
    double delay = 0.0;        // seconds
};

/// Path parameters of one sample in both link directions. Angles, delays and
/// path powers are shared; phases differ when `redraw_phases` is set.
struct SampleGeometry {
    std::vector<PathParams> uplink;
    std::vector<PathParams> downlink;
};

/// ULA response with unit-modulus entries exp(j pi n sin(angle) * stretch).
inline CVector ula_response(int n, double angle, double stretch = 1.0) {
    CVector a(n);
    const double u = std::sin(angle) * stretch;
    for (int i = 0; i < n; ++i) a[i] = std::polar(1.0, kPi * i * u);
    return a;
}

/// URA response as the Kronecker product of horizontal and vertical ULA
/// responses (index = h * ntx_v + v).
inline CVector ura_response(int ntx_h, int ntx_v, double azimuth, double elevation, double stretch = 1.0) {
    CVector a(ntx_h * ntx_v);
    const double uh = std::sin(azimuth) * std::cos(elevation) * stretch;
    const double uv = std::sin(elevation) * stretch;
    for (int h = 0; h < ntx_h; ++h)
        for (int v = 0; v < ntx_v; ++v) a[h * ntx_v + v] = std::polar(1.0, kPi * (h * uh + v * uv));
    return a;
}

/// Downlink-oriented channel (nrx x ntx) of a set of paths at carrier `carrier_hz`.
inline CMatrix channel_from_paths(const std::vector<PathParams>& paths, int ntx_h, int ntx_v, int nrx,
                                  double carrier_hz) {
    const double stretch = carrier_hz / kUplinkCarrierHz;
    CMatrix h = CMatrix::Zero(nrx, ntx_h * ntx_v);
    for (const auto& p : paths) {
        const Complex phase = std::polar(1.0, -2.0 * kPi * std::fmod(carrier_hz * p.delay, 1.0));
        h.noalias() += (p.gain * phase) * ula_response(nrx, p.rx_angle, stretch) *
                       ura_response(ntx_h, ntx_v, p.tx_azimuth, p.tx_elevation, stretch).adjoint();
    }
    return h;
}

namespace detail {

inline double wrap_angle(double a) {
    a = std::fmod(a + kPi, 2.0 * kPi);
    if (a < 0.0) a += 2.0 * kPi;
    return a - kPi;
}

inline double deg2rad(double d) {
    return d * kPi / 180.0;
}

inline constexpr std::uint64_t kGeometryStream = 0x67656f6d;  // "geom"

}  // namespace detail

/// Draws the path geometry of sample `index`. Pure function of (config, index, stream).
inline SampleGeometry sample_geometry(const ScenarioConfig& config, std::uint64_t index, std::uint64_t stream = 0) {
    Rng rng = make_rng(config.rng_seed, detail::kGeometryStream + stream, index);
    std::uniform_int_distribution<int> num_paths(config.paths_min, config.paths_max);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> spread(0.0, detail::deg2rad(config.angle_spread_deg));

    const int paths = num_paths(rng);
    const double sector = detail::deg2rad(kSectorHalfWidthDeg);
    const double mean_az = (2.0 * unit(rng) - 1.0) * sector;
    const double mean_el = detail::deg2rad(-20.0 + 25.0 * unit(rng));
    const double mean_rx = (2.0 * unit(rng) - 1.0) * kPi / 2.0;

    SampleGeometry g;
    g.uplink.resize(static_cast<std::size_t>(paths));
    std::vector<double> power(static_cast<std::size_t>(paths));
    double total = 0.0;
    for (int l = 0; l < paths; ++l) {
        auto& p = g.uplink[static_cast<std::size_t>(l)];
        p.tx_azimuth = detail::wrap_angle(mean_az + spread(rng));
        p.tx_elevation = detail::wrap_angle(mean_el + spread(rng));
        p.rx_angle = detail::wrap_angle(mean_rx + spread(rng));
        p.delay = kMaxDelaySeconds * unit(rng);
        power[static_cast<std::size_t>(l)] = std::exp(-p.delay / kDelayDecaySeconds);
        total += power[static_cast<std::size_t>(l)];
    }
    g.downlink = g.uplink;
    for (int l = 0; l < paths; ++l) {
        const auto i = static_cast<std::size_t>(l);
        const Complex z = complex_normal(rng);
        g.uplink[i].gain = std::sqrt(power[i] / total) * z;
        if (config.redraw_phases) {
            const double phase = 2.0 * kPi * unit(rng);
            g.downlink[i].gain = std::polar(std::abs(g.uplink[i].gain), phase);
        } else {
            g.downlink[i].gain = g.uplink[i].gain;
        }
    }
    return g;
}

/// Generates `count` uplink/downlink channel pairs. Uplink matrices are
/// ntx x nrx (base station receives), downlink matrices nrx x ntx. With
/// `correlated_pair` unset the downlink geometry is drawn independently.
inline std::pair<ChannelDataset, ChannelDataset> generate_scenario(const ScenarioConfig& config, std::size_t count,
                                                                   bool correlated_pair = true) {
    config.validate();
    if (count < 1) throw ArgumentError("generate_scenario: count must be >= 1");
    const double f_ul = kUplinkCarrierHz;
    const double f_dl = kUplinkCarrierHz * (1.0 + config.carrier_offset);

    ChannelDataset ul{std::vector<CMatrix>(count), Domain::UL, 1.0, config};
    ChannelDataset dl{std::vector<CMatrix>(count), Domain::DL, 1.0, config};
    for (std::size_t i = 0; i < count; ++i) {
        const auto g = sample_geometry(config, i);
        ul.channels[i] = channel_from_paths(g.uplink, config.ntx_h, config.ntx_v, config.nrx, f_ul).transpose();
        const auto& dl_paths = correlated_pair ? g.downlink : sample_geometry(config, i, 1).downlink;
        dl.channels[i] = channel_from_paths(dl_paths, config.ntx_h, config.ntx_v, config.nrx, f_dl);
    }
    return {std::move(ul), std::move(dl)};
}

inline double mean_energy(const ChannelDataset& ds) {
    double acc = 0.0;
    for (const auto& h : ds.channels) acc += h.squaredNorm();
    return acc / static_cast<double>(ds.size());
}

/// Scales the set so that the mean of ||vec(H)||^2 equals the number of
/// matrix entries. The applied scale is folded into normalization_factor.
inline ChannelDataset normalize_dataset(const ChannelDataset& ds) {
    if (ds.empty()) throw ArgumentError("normalize_dataset: empty dataset");
    const double energy = mean_energy(ds);
    if (!(energy > 0.0) || !std::isfinite(energy)) throw DegenerateDataError("normalize_dataset: dataset has no energy");
    const double target = static_cast<double>(ds.rows() * ds.cols());
    const double scale = std::sqrt(target / energy);
    ChannelDataset out = ds;
    if (std::abs(scale - 1.0) > 1e-15)
        for (auto& h : out.channels) h *= scale;
    else
        return out;
    out.normalization_factor = ds.normalization_factor * scale;
    return out;
}

/// Order-preserving split into the first `train_count` samples and the rest.
inline std::pair<ChannelDataset, ChannelDataset> split_dataset(const ChannelDataset& ds, std::size_t train_count) {
    if (train_count == 0 || train_count >= ds.size())
        throw ArgumentError("split_dataset: train_count must satisfy 0 < train_count < size");
    ChannelDataset train = ds;
    ChannelDataset eval = ds;
    train.channels.assign(ds.channels.begin(), ds.channels.begin() + static_cast<std::ptrdiff_t>(train_count));
    eval.channels.assign(ds.channels.begin() + static_cast<std::ptrdiff_t>(train_count), ds.channels.end());
    return {std::move(train), std::move(eval)};
}

/// Transposes every matrix (uplink orientation <-> downlink orientation).
inline ChannelDataset transpose_dataset(const ChannelDataset& ds) {
    ChannelDataset out = ds;
    for (auto& h : out.channels) h = h.transpose().eval();
    return out;
}

/// Vectorized channels as columns of a N x M matrix.
inline CMatrix stack_vectorized(const ChannelDataset& ds) {
    CMatrix x(ds.rows() * ds.cols(), static_cast<Eigen::Index>(ds.size()));
    for (std::size_t m = 0; m < ds.size(); ++m) x.col(static_cast<Eigen::Index>(m)) = vec(ds.channels[m]);
    return x;
}

}  // namespace gmmfb

#endif  // GMMFB_CHANNEL_MODEL_HPP
