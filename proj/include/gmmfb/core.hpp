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

#ifndef GMMFB_CORE_HPP
#define GMMFB_CORE_HPP

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace gmmfb {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;
using RMatrix = Eigen::MatrixXd;
using Rng = std::mt19937_64;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kLn2 = std::numbers::ln2;

// ---- error types -----------------------------------------------------------

/// Base class of all errors raised by the library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
/// Invalid scenario / experiment / dictionary configuration.
struct ConfigError : Error {
    using Error::Error;
};
/// Argument outside the operation's domain (dimensions, ranges, non-finite input).
struct ArgumentError : Error {
    using Error::Error;
};
/// Input data carries no usable energy (all-zero dataset, zero channel, zero precoders).
struct DegenerateDataError : Error {
    using Error::Error;
};
/// A factorization or solve failed on a matrix that should have been positive definite.
struct NumericalError : Error {
    using Error::Error;
};
/// A stored model violates its invariants (e.g. a covariance that is not PSD).
struct ModelIntegrityError : Error {
    using Error::Error;
};
/// A codebook entry has lower rank than the requested number of directions.
struct RankError : Error {
    using Error::Error;
};
/// Malformed or inconsistent file on disk.
struct FormatError : Error {
    using Error::Error;
};

// ---- random numbers ----------------------------------------------------------

/// SplitMix64 finalizer; used to derive independent streams from a master seed.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Seed of stream (tag, index) under `master`. Depends only on its arguments,
/// so per-task streams are identical for any thread count or scheduling.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag, std::uint64_t index = 0) {
    return splitmix64(splitmix64(splitmix64(master) ^ tag) ^ index);
}

inline Rng make_rng(std::uint64_t master, std::uint64_t tag, std::uint64_t index = 0) {
    return Rng(derive_seed(master, tag, index));
}

/// Circularly-symmetric complex Gaussian with variance `variance`
/// (real and imaginary parts i.i.d. N(0, variance/2)).
inline Complex complex_normal(Rng& rng, double variance = 1.0) {
    std::normal_distribution<double> n(0.0, std::sqrt(variance / 2.0));
    const double re = n(rng);
    const double im = n(rng);
    return {re, im};
}

inline CVector complex_normal_vector(Rng& rng, Eigen::Index n, double variance = 1.0) {
    CVector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = complex_normal(rng, variance);
    return v;
}

inline CMatrix complex_normal_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double variance = 1.0) {
    CMatrix m(rows, cols);
    // column-major fill order is part of the reproducibility contract
    for (Eigen::Index c = 0; c < cols; ++c)
        for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = complex_normal(rng, variance);
    return m;
}

// ---- linear algebra helpers --------------------------------------------------

inline CMatrix kron(const CMatrix& a, const CMatrix& b) {
    CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

/// Column-stacking vectorization.
inline CVector vec(const CMatrix& m) {
    return Eigen::Map<const CVector>(m.data(), m.size());
}

inline CMatrix unvec(const CVector& v, Eigen::Index rows, Eigen::Index cols) {
    if (v.size() != rows * cols) throw ArgumentError("unvec: size mismatch");
    return Eigen::Map<const CMatrix>(v.data(), rows, cols);
}

inline CMatrix hermitian_part(const CMatrix& m) {
    return 0.5 * (m + m.adjoint());
}

inline bool all_finite(const CVector& v) {
    return v.allFinite();
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues in descending order.
struct HermitianEig {
    RVector values;
    CMatrix vectors;
};

inline HermitianEig eig_descending(const CMatrix& m) {
    Eigen::SelfAdjointEigenSolver<CMatrix> es(hermitian_part(m));
    if (es.info() != Eigen::Success) throw NumericalError("Hermitian eigendecomposition failed");
    const Eigen::Index n = m.rows();
    HermitianEig out{RVector(n), CMatrix(n, n)};
    for (Eigen::Index i = 0; i < n; ++i) {
        out.values[i] = es.eigenvalues()[n - 1 - i];
        out.vectors.col(i) = es.eigenvectors().col(n - 1 - i);
    }
    return out;
}

/// Tolerance below which a negative eigenvalue is treated as round-off.
inline double psd_tolerance(const CMatrix& m) {
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    return 1e-10 * scale;
}

inline bool is_psd(const CMatrix& m) {
    if (m.rows() != m.cols()) return false;
    if ((m - m.adjoint()).cwiseAbs().maxCoeff() > 1e-8 * std::max(1.0, m.cwiseAbs().maxCoeff())) return false;
    if (m.size() == 0) return true;
    return eig_descending(m).values.minCoeff() >= -psd_tolerance(m);
}

/// log det of a Hermitian positive definite matrix (natural log).
inline double logdet_hpd(const CMatrix& m) {
    Eigen::LLT<CMatrix> llt(m);
    if (llt.info() != Eigen::Success) throw NumericalError("matrix is not positive definite");
    double acc = 0.0;
    for (Eigen::Index i = 0; i < m.rows(); ++i) acc += std::log(llt.matrixLLT()(i, i).real());
    return 2.0 * acc;
}

/// Square-root factor F with F F^H = C for a Hermitian PSD matrix. Uses the
/// Cholesky factor when C is positive definite, otherwise the clipped
/// eigen-decomposition. Throws ModelIntegrityError when C is indefinite.
inline CMatrix psd_factor(const CMatrix& c) {
    if (c.size() == 0) return c;
    Eigen::LLT<CMatrix> llt(c);
    if (llt.info() == Eigen::Success) {
        const CMatrix l = llt.matrixL();
        if (l.diagonal().real().minCoeff() > 0.0 && l.allFinite()) return l;
    }
    const auto e = eig_descending(c);
    if (e.values.minCoeff() < -psd_tolerance(c)) throw ModelIntegrityError("covariance is not positive semidefinite");
    return e.vectors * e.values.cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

/// Water-filling power levels over parallel channels with gains `gains`
/// (squared singular values) under total power `rho` and noise `sigma2`.
/// Returned powers are aligned with the input order and sum to rho.
inline RVector waterfill(const RVector& gains, double rho, double sigma2) {
    const Eigen::Index n = gains.size();
    RVector p = RVector::Zero(n);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return gains[a] > gains[b]; });
    Eigen::Index active = 0;
    for (auto i : order)
        if (gains[i] > 0.0) ++active;
    if (active == 0 || rho <= 0.0) return p;
    if (sigma2 <= 0.0) {
        // noiseless limit: uniform over the active modes
        for (Eigen::Index m = 0; m < active; ++m) p[order[m]] = rho / static_cast<double>(active);
        return p;
    }
    for (Eigen::Index m = active; m >= 1; --m) {
        double inv_sum = 0.0;
        for (Eigen::Index i = 0; i < m; ++i) inv_sum += sigma2 / gains[order[i]];
        const double level = (rho + inv_sum) / static_cast<double>(m);
        if (level - sigma2 / gains[order[m - 1]] > 0.0) {
            for (Eigen::Index i = 0; i < m; ++i) p[order[i]] = level - sigma2 / gains[order[i]];
            return p;
        }
    }
    p[order[0]] = rho;
    return p;
}

/// Index of the largest entry; ties resolve to the lowest index.
template <class Range>
std::size_t argmax_first(const Range& values) {
    std::size_t best = 0;
    std::size_t i = 0;
    for (auto it = std::begin(values); it != std::end(values); ++it, ++i)
        if (*it > *(std::begin(values) + static_cast<std::ptrdiff_t>(best))) best = i;
    return best;
}

inline double db_to_linear(double db) {
    return std::pow(10.0, db / 10.0);
}

/// Noise variance for an SNR in dB under unit transmit power.
inline double noise_variance_from_snr_db(double snr_db) {
    return std::pow(10.0, -snr_db / 10.0);
}

}  // namespace gmmfb

#endif  // GMMFB_CORE_HPP
