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

#ifndef GMMFB_IO_HPP
#define GMMFB_IO_HPP

// On-disk formats. Every object is stored as two files sharing a base path:
//   <base>.bin   packed complex values, (re, im) as little-endian float64,
//                each matrix row-major, arrays back to back
//   <base>.json  header with dimensions and metadata
// Real arrays (mixture weights) are stored as complex values with zero
// imaginary part.

#include "gmmfb/channel_model.hpp"
#include "gmmfb/codebooks.hpp"
#include "gmmfb/gmm.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace gmmfb {

namespace io {

using nlohmann::json;

inline constexpr int kFormatVersion = 1;

class BinaryWriter {
public:
    explicit BinaryWriter(const std::filesystem::path& path) : out_(path, std::ios::binary | std::ios::trunc) {
        if (!out_) throw FormatError("cannot open " + path.string() + " for writing");
    }

    void put(double v) {
        std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
        if constexpr (std::endian::native == std::endian::big) bits = byteswap(bits);
        char buf[8];
        std::memcpy(buf, &bits, 8);
        out_.write(buf, 8);
    }

    void put(const Complex& z) {
        put(z.real());
        put(z.imag());
    }

    void put(const CMatrix& m) {
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c) put(m(r, c));
    }

    void finish() {
        out_.flush();
        if (!out_) throw FormatError("write failed");
    }

    static std::uint64_t byteswap(std::uint64_t v) {
        std::uint64_t r = 0;
        for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xffu) << (8 * (7 - i));
        return r;
    }

private:
    std::ofstream out_;
};

class BinaryReader {
public:
    BinaryReader(const std::filesystem::path& path, std::uint64_t expected_values) : path_(path.string()) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw FormatError("cannot open " + path_);
        in.seekg(0, std::ios::end);
        const auto size = static_cast<std::uint64_t>(in.tellg());
        if (size != expected_values * 16)
            throw FormatError(path_ + ": expected " + std::to_string(expected_values * 16) + " bytes, found " +
                              std::to_string(size));
        in.seekg(0);
        data_.resize(static_cast<std::size_t>(size));
        in.read(data_.data(), static_cast<std::streamsize>(size));
        if (!in) throw FormatError(path_ + ": read failed");
    }

    double real() {
        if (pos_ + 8 > data_.size()) throw FormatError(path_ + ": truncated");
        std::uint64_t bits;
        std::memcpy(&bits, data_.data() + pos_, 8);
        pos_ += 8;
        if constexpr (std::endian::native == std::endian::big) bits = BinaryWriter::byteswap(bits);
        return std::bit_cast<double>(bits);
    }

    Complex complex() {
        const double re = real();
        return {re, real()};
    }

    CMatrix matrix(Eigen::Index rows, Eigen::Index cols) {
        CMatrix m(rows, cols);
        for (Eigen::Index r = 0; r < rows; ++r)
            for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = complex();
        return m;
    }

private:
    std::string path_;
    std::vector<char> data_;
    std::size_t pos_ = 0;
};

inline std::filesystem::path bin_path(const std::filesystem::path& base) {
    return std::filesystem::path(base.string() + ".bin");
}

inline std::filesystem::path header_path(const std::filesystem::path& base) {
    return std::filesystem::path(base.string() + ".json");
}

inline void write_header(const std::filesystem::path& base, const json& j) {
    std::ofstream out(header_path(base), std::ios::trunc);
    if (!out) throw FormatError("cannot open " + header_path(base).string() + " for writing");
    out << j.dump(2) << '\n';
    if (!out) throw FormatError("write failed: " + header_path(base).string());
}

inline json read_header(const std::filesystem::path& base, const std::string& kind) {
    std::ifstream in(header_path(base));
    if (!in) throw FormatError("cannot open " + header_path(base).string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw FormatError(header_path(base).string() + ": " + e.what());
    }
    if (j.value("format", std::string{}) != kind)
        throw FormatError(header_path(base).string() + ": not a " + kind + " header");
    if (j.value("version", 0) != kFormatVersion) throw FormatError(header_path(base).string() + ": unsupported version");
    return j;
}

template <class T>
T field(const json& j, const char* key) {
    if (!j.contains(key)) throw FormatError(std::string("header field missing: ") + key);
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw FormatError(std::string("header field ") + key + ": " + e.what());
    }
}

inline json scenario_to_json(const ScenarioConfig& s) {
    return {{"ntx_h", s.ntx_h},
            {"ntx_v", s.ntx_v},
            {"nrx", s.nrx},
            {"paths_min", s.paths_min},
            {"paths_max", s.paths_max},
            {"angle_spread_deg", s.angle_spread_deg},
            {"carrier_offset", s.carrier_offset},
            {"redraw_phases", s.redraw_phases},
            {"rng_seed", s.rng_seed}};
}

inline ScenarioConfig scenario_from_json(const json& j) {
    ScenarioConfig s;
    s.ntx_h = field<int>(j, "ntx_h");
    s.ntx_v = field<int>(j, "ntx_v");
    s.nrx = field<int>(j, "nrx");
    s.paths_min = field<int>(j, "paths_min");
    s.paths_max = field<int>(j, "paths_max");
    s.angle_spread_deg = field<double>(j, "angle_spread_deg");
    s.carrier_offset = field<double>(j, "carrier_offset");
    s.redraw_phases = field<bool>(j, "redraw_phases");
    s.rng_seed = field<std::uint64_t>(j, "rng_seed");
    return s;
}

}  // namespace io

// ---- datasets -------------------------------------------------------------------

inline void save_dataset(const ChannelDataset& ds, const std::filesystem::path& base) {
    for (const auto& h : ds.channels)
        if (h.rows() != ds.rows() || h.cols() != ds.cols()) throw ArgumentError("save_dataset: ragged dataset");
    io::json j = {{"format", "gmmfb-dataset"},
                  {"version", io::kFormatVersion},
                  {"count", ds.size()},
                  {"rows", ds.rows()},
                  {"cols", ds.cols()},
                  {"domain", to_string(ds.domain)},
                  {"normalization_factor", ds.normalization_factor},
                  {"scenario", io::scenario_to_json(ds.scenario)},
                  {"seed", ds.scenario.rng_seed}};
    io::BinaryWriter w(io::bin_path(base));
    for (const auto& h : ds.channels) w.put(h);
    w.finish();
    io::write_header(base, j);
}

inline ChannelDataset load_dataset(const std::filesystem::path& base) {
    const auto j = io::read_header(base, "gmmfb-dataset");
    const auto count = io::field<std::uint64_t>(j, "count");
    const auto rows = io::field<Eigen::Index>(j, "rows");
    const auto cols = io::field<Eigen::Index>(j, "cols");
    const auto domain = io::field<std::string>(j, "domain");
    if (domain != "UL" && domain != "DL") throw FormatError("dataset header: unknown domain " + domain);
    ChannelDataset ds;
    ds.domain = domain == "UL" ? Domain::UL : Domain::DL;
    ds.normalization_factor = io::field<double>(j, "normalization_factor");
    ds.scenario = io::scenario_from_json(io::field<io::json>(j, "scenario"));
    io::BinaryReader r(io::bin_path(base), count * static_cast<std::uint64_t>(rows * cols));
    ds.channels.reserve(static_cast<std::size_t>(count));
    for (std::uint64_t m = 0; m < count; ++m) ds.channels.push_back(r.matrix(rows, cols));
    return ds;
}

// ---- models ----------------------------------------------------------------------

inline void save_model(const GmmModel& model, const std::filesystem::path& base) {
    model.validate();
    io::json j = {{"format", "gmmfb-model"},
                  {"version", io::kFormatVersion},
                  {"K", model.size()},
                  {"N", model.dim()},
                  {"structure", to_string(model.structure)},
                  {"nrx", model.nrx},
                  {"ntx", model.ntx},
                  {"k_tx", model.k_tx()},
                  {"k_rx", model.k_rx()}};
    io::BinaryWriter w(io::bin_path(base));
    for (double p : model.weights) w.put(Complex(p, 0.0));
    for (const auto& m : model.means) w.put(CMatrix(m.transpose()));
    if (model.structure == CovarianceStructure::Full) {
        for (const auto& c : model.covariances) w.put(c);
    } else {
        for (const auto& c : model.tx_factors) w.put(c);
        for (const auto& c : model.rx_factors) w.put(c);
    }
    w.finish();
    io::write_header(base, j);
}

inline GmmModel load_model(const std::filesystem::path& base) {
    const auto j = io::read_header(base, "gmmfb-model");
    GmmModel model;
    const auto k = io::field<std::uint64_t>(j, "K");
    const auto n = io::field<Eigen::Index>(j, "N");
    const auto structure = io::field<std::string>(j, "structure");
    model.nrx = io::field<int>(j, "nrx");
    model.ntx = io::field<int>(j, "ntx");
    const auto k_tx = io::field<std::uint64_t>(j, "k_tx");
    const auto k_rx = io::field<std::uint64_t>(j, "k_rx");
    std::uint64_t values = k + k * static_cast<std::uint64_t>(n);
    if (structure == "full") {
        model.structure = CovarianceStructure::Full;
        values += k * static_cast<std::uint64_t>(n * n);
    } else if (structure == "kronecker") {
        model.structure = CovarianceStructure::Kronecker;
        if (k_tx * k_rx != k) throw FormatError("model header: K != k_tx * k_rx");
        values += k_tx * static_cast<std::uint64_t>(model.ntx) * static_cast<std::uint64_t>(model.ntx) +
                  k_rx * static_cast<std::uint64_t>(model.nrx) * static_cast<std::uint64_t>(model.nrx);
    } else {
        throw FormatError("model header: unknown structure " + structure);
    }
    io::BinaryReader r(io::bin_path(base), values);
    for (std::uint64_t i = 0; i < k; ++i) model.weights.push_back(r.complex().real());
    for (std::uint64_t i = 0; i < k; ++i) model.means.push_back(r.matrix(1, n).transpose());
    if (model.structure == CovarianceStructure::Full) {
        for (std::uint64_t i = 0; i < k; ++i) model.covariances.push_back(r.matrix(n, n));
    } else {
        for (std::uint64_t i = 0; i < k_tx; ++i) model.tx_factors.push_back(r.matrix(model.ntx, model.ntx));
        for (std::uint64_t i = 0; i < k_rx; ++i) model.rx_factors.push_back(r.matrix(model.nrx, model.nrx));
    }
    try {
        model.validate();
    } catch (const ModelIntegrityError& e) {
        throw FormatError(std::string("model file fails validation: ") + e.what());
    }
    return model;
}

// ---- codebooks --------------------------------------------------------------------

namespace io {

inline void save_matrices(const std::vector<CMatrix>& entries, const std::filesystem::path& base, json j) {
    const Eigen::Index rows = entries.empty() ? 0 : entries.front().rows();
    const Eigen::Index cols = entries.empty() ? 0 : entries.front().cols();
    for (const auto& e : entries)
        if (e.rows() != rows || e.cols() != cols) throw ArgumentError("codebook entries differ in shape");
    j["version"] = kFormatVersion;
    j["K"] = entries.size();
    j["rows"] = rows;
    j["cols"] = cols;
    BinaryWriter w(bin_path(base));
    for (const auto& e : entries) w.put(e);
    w.finish();
    write_header(base, j);
}

inline std::vector<CMatrix> load_matrices(const std::filesystem::path& base, const json& j) {
    const auto k = field<std::uint64_t>(j, "K");
    const auto rows = field<Eigen::Index>(j, "rows");
    const auto cols = field<Eigen::Index>(j, "cols");
    BinaryReader r(bin_path(base), k * static_cast<std::uint64_t>(rows * cols));
    std::vector<CMatrix> out;
    for (std::uint64_t i = 0; i < k; ++i) out.push_back(r.matrix(rows, cols));
    return out;
}

}  // namespace io

inline void save_codebook(const CovCodebook& cb, const std::filesystem::path& base) {
    io::save_matrices(cb.entries, base,
                      {{"format", "gmmfb-cov-codebook"}, {"rho", cb.rho}, {"design_snr_db", cb.design_snr_db}});
}

inline CovCodebook load_codebook(const std::filesystem::path& base) {
    const auto j = io::read_header(base, "gmmfb-cov-codebook");
    CovCodebook cb;
    cb.entries = io::load_matrices(base, j);
    cb.rho = io::field<double>(j, "rho");
    cb.design_snr_db = io::field<double>(j, "design_snr_db");
    return cb;
}

inline void save_codebook(const DirCodebook& cb, const std::filesystem::path& base) {
    io::save_matrices(cb.entries, base, {{"format", "gmmfb-dir-codebook"}});
}

inline DirCodebook load_dir_codebook(const std::filesystem::path& base) {
    const auto j = io::read_header(base, "gmmfb-dir-codebook");
    return {io::load_matrices(base, j)};
}

}  // namespace gmmfb

#endif  // GMMFB_IO_HPP
