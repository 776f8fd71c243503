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

#ifndef GMMFB_GMM_HPP
#define GMMFB_GMM_HPP

// Complex-valued Gaussian mixture models over vectorized channels.
//
// Density of one component: CN(x; mu, C) = exp(-(x-mu)^H C^-1 (x-mu)) / (pi^N det C).
// Component indices are zero-based throughout the library. For the
// Kronecker structure, component k = a * K_rx + b has covariance
// C_tx[a] kron C_rx[b], which is the covariance of vec(H) for H of shape
// nrx x ntx.

#include "gmmfb/channel_model.hpp"
#include "gmmfb/core.hpp"

#include <limits>
#include <optional>

namespace gmmfb {

enum class CovarianceStructure { Full, Kronecker };

inline const char* to_string(CovarianceStructure s) {
    return s == CovarianceStructure::Full ? "full" : "kronecker";
}

/// Dimensions and structure of a mixture; enough to count its parameters.
struct GmmShape {
    CovarianceStructure structure = CovarianceStructure::Full;
    std::size_t components = 0;
    Eigen::Index dim = 0;
    int ntx = 0;
    int nrx = 0;
    std::size_t k_tx = 0;
    std::size_t k_rx = 0;
};

/// Number of covariance parameters, counting a Hermitian n x n matrix as
/// n(n+1)/2 complex parameters.
inline std::uint64_t parameter_count(const GmmShape& s) {
    auto tri = [](std::uint64_t n) { return n * (n + 1) / 2; };
    if (s.structure == CovarianceStructure::Full)
        return static_cast<std::uint64_t>(s.components) * tri(static_cast<std::uint64_t>(s.dim));
    return static_cast<std::uint64_t>(s.k_rx) * tri(static_cast<std::uint64_t>(s.nrx)) +
           static_cast<std::uint64_t>(s.k_tx) * tri(static_cast<std::uint64_t>(s.ntx));
}

struct GmmModel {
    std::vector<double> weights;
    std::vector<CVector> means;
    CovarianceStructure structure = CovarianceStructure::Full;
    std::vector<CMatrix> covariances;  // Full only
    std::vector<CMatrix> tx_factors;   // Kronecker only, ntx x ntx
    std::vector<CMatrix> rx_factors;   // Kronecker only, nrx x nrx
    int nrx = 0;  // channel matrix shape used by unvec
    int ntx = 0;

    std::size_t size() const { return weights.size(); }
    Eigen::Index dim() const { return means.empty() ? 0 : means.front().size(); }
    std::size_t k_tx() const { return tx_factors.size(); }
    std::size_t k_rx() const { return rx_factors.size(); }
    std::size_t tx_index(std::size_t k) const { return k / rx_factors.size(); }
    std::size_t rx_index(std::size_t k) const { return k % rx_factors.size(); }

    CMatrix covariance(std::size_t k) const {
        if (structure == CovarianceStructure::Full) return covariances.at(k);
        return kron(tx_factors.at(tx_index(k)), rx_factors.at(rx_index(k)));
    }

    GmmShape shape() const {
        return {structure, size(), dim(), ntx, nrx, k_tx(), k_rx()};
    }

    /// Checks the model invariants; throws ModelIntegrityError on violation.
    void validate() const {
        const std::size_t k = size();
        if (k == 0) throw ModelIntegrityError("gmm: no components");
        if (means.size() != k) throw ModelIntegrityError("gmm: weights/means size mismatch");
        double sum = 0.0;
        for (double w : weights) {
            if (!(w >= 0.0)) throw ModelIntegrityError("gmm: negative weight");
            sum += w;
        }
        if (std::abs(sum - 1.0) > 1e-12) throw ModelIntegrityError("gmm: weights do not sum to one");
        const Eigen::Index n = dim();
        if (static_cast<Eigen::Index>(nrx) * ntx != n) throw ModelIntegrityError("gmm: nrx*ntx != dimension");
        for (const auto& m : means)
            if (m.size() != n) throw ModelIntegrityError("gmm: inconsistent mean dimension");
        auto check_cov = [](const CMatrix& c, Eigen::Index d) {
            if (c.rows() != d || c.cols() != d) throw ModelIntegrityError("gmm: covariance dimension mismatch");
            if ((c - c.adjoint()).cwiseAbs().maxCoeff() > 1e-10 * std::max(1.0, c.cwiseAbs().maxCoeff()))
                throw ModelIntegrityError("gmm: covariance not Hermitian");
            if (eig_descending(c).values.minCoeff() < -1e-10 * std::max(1.0, c.cwiseAbs().maxCoeff()))
                throw ModelIntegrityError("gmm: covariance not PSD");
        };
        if (structure == CovarianceStructure::Full) {
            if (covariances.size() != k) throw ModelIntegrityError("gmm: covariance count mismatch");
            for (const auto& c : covariances) check_cov(c, n);
        } else {
            if (k_tx() * k_rx() != k) throw ModelIntegrityError("gmm: K != K_tx * K_rx");
            for (const auto& c : tx_factors) check_cov(c, ntx);
            for (const auto& c : rx_factors) check_cov(c, nrx);
        }
    }
};

// ---- density evaluation ------------------------------------------------------

namespace detail {

inline double log_sum_exp(const double* v, std::size_t n) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) m = std::max(m, v[i]);
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += std::exp(v[i] - m);
    return m + std::log(s);
}

inline std::vector<double> normalize_log(const std::vector<double>& logp) {
    const double lse = log_sum_exp(logp.data(), logp.size());
    std::vector<double> r(logp.size());
    double sum = 0.0;
    for (std::size_t k = 0; k < logp.size(); ++k) {
        r[k] = std::exp(logp[k] - lse);
        sum += r[k];
    }
    for (auto& v : r) v /= sum;
    return r;
}

inline double safe_log(double w) {
    return w > 0.0 ? std::log(w) : -std::numeric_limits<double>::infinity();
}

}  // namespace detail

/// Cached Gaussian components (Cholesky factors and log-determinants) for
/// repeated log-density evaluation. Immutable after construction.
class GaussianBank {
public:
    GaussianBank() = default;

    GaussianBank(const std::vector<double>& weights, std::vector<CVector> means, const std::vector<CMatrix>& covs)
        : means_(std::move(means)) {
        if (weights.size() != means_.size() || covs.size() != means_.size())
            throw ArgumentError("GaussianBank: inconsistent component counts");
        dim_ = means_.empty() ? 0 : means_.front().size();
        for (std::size_t k = 0; k < weights.size(); ++k) {
            log_weights_.push_back(detail::safe_log(weights[k]));
            Eigen::LLT<CMatrix> llt(covs[k]);
            if (llt.info() != Eigen::Success)
                throw NumericalError("GaussianBank: covariance of component " + std::to_string(k) +
                                     " is not positive definite");
            CMatrix l = llt.matrixL();
            double ld = 0.0;
            for (Eigen::Index i = 0; i < dim_; ++i) ld += std::log(l(i, i).real());
            log_dets_.push_back(2.0 * ld);
            chol_.push_back(std::move(l));
        }
    }

    /// Channel-domain bank of a model. Kronecker models use the factored
    /// form (never materializing N x N covariances).
    static GaussianBank from_model(const GmmModel& model) {
        if (model.structure == CovarianceStructure::Full)
            return GaussianBank(model.weights, model.means, model.covariances);
        GaussianBank b;
        b.kron_ = true;
        b.means_ = model.means;
        b.dim_ = model.dim();
        b.ntx_ = model.ntx;
        b.nrx_ = model.nrx;
        b.k_rx_ = model.k_rx();
        for (double w : model.weights) b.log_weights_.push_back(detail::safe_log(w));
        auto factor = [](const CMatrix& c, std::vector<CMatrix>& inv, std::vector<double>& ld) {
            Eigen::LLT<CMatrix> llt(c);
            if (llt.info() != Eigen::Success) throw NumericalError("GaussianBank: Kronecker factor not positive definite");
            const CMatrix l = llt.matrixL();
            double acc = 0.0;
            for (Eigen::Index i = 0; i < l.rows(); ++i) acc += std::log(l(i, i).real());
            ld.push_back(2.0 * acc);
            inv.push_back(l.triangularView<Eigen::Lower>().solve(CMatrix::Identity(l.rows(), l.cols())));
        };
        for (const auto& c : model.tx_factors) factor(c, b.inv_tx_, b.logdet_tx_);
        for (const auto& c : model.rx_factors) factor(c, b.inv_rx_, b.logdet_rx_);
        for (std::size_t k = 0; k < model.size(); ++k)
            b.log_dets_.push_back(b.nrx_ * b.logdet_tx_[k / b.k_rx_] + b.ntx_ * b.logdet_rx_[k % b.k_rx_]);
        return b;
    }

    std::size_t size() const { return log_weights_.size(); }
    Eigen::Index dim() const { return dim_; }
    const std::vector<double>& log_weights() const { return log_weights_; }
    const std::vector<double>& log_dets() const { return log_dets_; }

    /// log p(k) + log CN(x; mu_k, C_k) for every component.
    std::vector<double> log_joint(const CVector& x) const {
        if (x.size() != dim_) throw ArgumentError("log density: dimension mismatch");
        if (!all_finite(x)) throw ArgumentError("log density: non-finite input");
        std::vector<double> out(size());
        const double c0 = static_cast<double>(dim_) * std::log(kPi);
        for (std::size_t k = 0; k < size(); ++k) {
            const CVector d = x - means_[k];
            double quad;
            if (kron_) {
                const auto dm = Eigen::Map<const CMatrix>(d.data(), nrx_, ntx_);
                quad = (inv_rx_[k % k_rx_] * dm * inv_tx_[k / k_rx_].transpose()).squaredNorm();
            } else {
                quad = chol_[k].triangularView<Eigen::Lower>().solve(d).squaredNorm();
            }
            out[k] = log_weights_[k] - c0 - log_dets_[k] - quad;
        }
        return out;
    }

    /// Log-densities (without weights) of all columns of `x`, K x M.
    RMatrix log_density_batch(const CMatrix& x) const {
        if (x.rows() != dim_) throw ArgumentError("log density: dimension mismatch");
        const Eigen::Index m = x.cols();
        RMatrix out(static_cast<Eigen::Index>(size()), m);
        const double c0 = static_cast<double>(dim_) * std::log(kPi);
        for (std::size_t k = 0; k < size(); ++k) {
            const CMatrix d = x.colwise() - means_[k];
            RVector quad(m);
            if (kron_) {
                // rx side on the stacked [D_1 ... D_M] (nrx x ntx*M), then tx side
                const auto dm = Eigen::Map<const CMatrix>(d.data(), nrx_, ntx_ * m);
                const CMatrix z1 = inv_rx_[k % k_rx_] * dm;
                CMatrix t(ntx_, nrx_ * m);
                for (Eigen::Index s = 0; s < m; ++s)
                    t.block(0, s * nrx_, ntx_, nrx_) = z1.block(0, s * ntx_, nrx_, ntx_).transpose();
                const CMatrix z = inv_tx_[k / k_rx_] * t;
                for (Eigen::Index s = 0; s < m; ++s) quad[s] = z.block(0, s * nrx_, ntx_, nrx_).squaredNorm();
            } else {
                const CMatrix linv =
                    chol_[k].triangularView<Eigen::Lower>().solve(CMatrix::Identity(dim_, dim_));
                const CMatrix z = linv * d;
                quad = z.colwise().squaredNorm().transpose();
            }
            out.row(static_cast<Eigen::Index>(k)) = (-c0 - log_dets_[k] - quad.array()).matrix().transpose();
        }
        return out;
    }

private:
    std::vector<double> log_weights_;
    std::vector<CVector> means_;
    std::vector<CMatrix> chol_;
    std::vector<double> log_dets_;
    Eigen::Index dim_ = 0;
    bool kron_ = false;
    int ntx_ = 0;
    int nrx_ = 0;
    std::size_t k_rx_ = 1;
    std::vector<CMatrix> inv_tx_, inv_rx_;
    std::vector<double> logdet_tx_, logdet_rx_;
};

/// Mixture in the observation domain y = A h + n:
/// components CN(y; A mu_k, A C_k A^H + sigma2 I). Also caches the
/// per-component LMMSE gains C_k A^H (A C_k A^H + sigma2 I)^-1 used by the
/// GMM channel estimator.
struct AdaptedGmm {
    std::vector<double> weights;
    std::vector<CVector> means_y;
    std::vector<CMatrix> covs_y;
    std::vector<CVector> channel_means;
    std::vector<CMatrix> lmmse_gains;  // N x (nrx n_p)
    CMatrix observation_operator;
    double sigma2 = 0.0;
    GaussianBank bank;

    std::size_t size() const { return weights.size(); }
    Eigen::Index observation_dim() const { return observation_operator.rows(); }
};

inline AdaptedGmm adapt_to_observation(const GmmModel& model, const CMatrix& a, double sigma2) {
    if (!(sigma2 >= 0.0)) throw ArgumentError("adapt_to_observation: sigma2 must be >= 0");
    if (a.cols() != model.dim()) throw ArgumentError("adapt_to_observation: operator does not match model dimension");
    AdaptedGmm out;
    out.weights = model.weights;
    out.observation_operator = a;
    out.sigma2 = sigma2;
    out.channel_means = model.means;
    for (std::size_t k = 0; k < model.size(); ++k) {
        const CMatrix c = model.covariance(k);
        const CMatrix cah = c * a.adjoint();
        CMatrix cy = a * cah;
        cy.diagonal().array() += sigma2;
        cy = hermitian_part(cy);
        out.means_y.push_back(a * model.means[k]);
        Eigen::LLT<CMatrix> llt(cy);
        if (llt.info() != Eigen::Success) throw NumericalError("adapt_to_observation: singular observation covariance");
        // gain = C A^H Cy^-1 = (Cy^-1 A C)^H
        out.lmmse_gains.push_back(llt.solve(cah.adjoint()).adjoint());
        out.covs_y.push_back(std::move(cy));
    }
    out.bank = GaussianBank(out.weights, out.means_y, out.covs_y);
    return out;
}

/// Channel-domain evaluator for a model (cached factors).
struct GmmDensity {
    explicit GmmDensity(const GmmModel& model) : bank(GaussianBank::from_model(model)) {}
    GaussianBank bank;
};

/// p(k | x) for every component, computed in the log domain.
inline std::vector<double> responsibilities(const GaussianBank& bank, const CVector& x) {
    return detail::normalize_log(bank.log_joint(x));
}

inline std::vector<double> responsibilities(const GmmDensity& density, const CVector& h) {
    return responsibilities(density.bank, h);
}

inline std::vector<double> responsibilities(const AdaptedGmm& adapted, const CVector& y) {
    return responsibilities(adapted.bank, y);
}

inline std::vector<double> responsibilities(const GmmModel& model, const CVector& h) {
    return responsibilities(GaussianBank::from_model(model), h);
}

/// Sum over the dataset of log f(h) (plain mixture log-likelihood).
inline double log_likelihood(const GmmModel& model, const CMatrix& x) {
    const auto bank = GaussianBank::from_model(model);
    const RMatrix ld = bank.log_density_batch(x);
    double total = 0.0;
    std::vector<double> col(model.size());
    for (Eigen::Index m = 0; m < x.cols(); ++m) {
        for (std::size_t k = 0; k < model.size(); ++k)
            col[k] = bank.log_weights()[k] + ld(static_cast<Eigen::Index>(k), m);
        total += detail::log_sum_exp(col.data(), col.size());
    }
    return total;
}

inline double log_likelihood(const GmmModel& model, const ChannelDataset& ds) {
    return log_likelihood(model, stack_vectorized(ds));
}

// ---- sampling ----------------------------------------------------------------

/// Draws from one component via a precomputed square-root factor.
class ComponentSampler {
public:
    ComponentSampler(const GmmModel& model, std::size_t k) {
        if (k >= model.size()) throw ArgumentError("sample_component: component index out of range");
        mean_ = model.means[k];
        if (model.structure == CovarianceStructure::Kronecker)
            factor_ = kron(psd_factor(model.tx_factors[model.tx_index(k)]),
                           psd_factor(model.rx_factors[model.rx_index(k)]));
        else
            factor_ = psd_factor(model.covariances[k]);
    }

    CVector draw(Rng& rng) const {
        return mean_ + factor_ * complex_normal_vector(rng, mean_.size());
    }

    const CVector& mean() const { return mean_; }

private:
    CVector mean_;
    CMatrix factor_;
};

inline CVector sample_component(const GmmModel& model, std::size_t k, Rng& rng) {
    return ComponentSampler(model, k).draw(rng);
}

inline std::uint64_t parameter_count(const GmmModel& model) {
    return parameter_count(model.shape());
}

// ---- fitting -----------------------------------------------------------------

struct EmOptions {
    int max_iter = 100;
    double tol = 1e-6;                 // relative change of the EM objective
    double reg_eps = -1.0;             // < 0: 1e-6 times the average per-entry power
    std::uint64_t init_seed = 0;
    bool zero_mean = false;
    int kmeans_iter = 10;
    int weight_refine_steps = 10;      // Kronecker fit only
};

struct EmReport {
    int iterations = 0;
    bool converged = false;
    int reseeds = 0;
    double reg_eps = 0.0;
    /// Regularized objective per iteration; entry 0 is the initial model.
    std::vector<double> objective;
};

struct KroneckerReport {
    EmReport tx;
    EmReport rx;
    std::vector<double> refine_log_likelihood;  // entry 0 before refinement
};

namespace detail {

inline std::vector<std::size_t> kmeans_pp(const CMatrix& x, std::size_t k, Rng& rng, int iterations,
                                          std::vector<CVector>& centers) {
    const Eigen::Index m = x.cols();
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<Eigen::Index> pick(0, m - 1);
    centers.clear();
    centers.push_back(x.col(pick(rng)));
    RVector d2 = (x.colwise() - centers[0]).colwise().squaredNorm().transpose();
    while (centers.size() < k) {
        const double total = d2.sum();
        Eigen::Index chosen = 0;
        if (total > 0.0) {
            const double u = unit(rng) * total;
            double acc = 0.0;
            chosen = m - 1;
            for (Eigen::Index i = 0; i < m; ++i) {
                acc += d2[i];
                if (acc > u) {
                    chosen = i;
                    break;
                }
            }
        } else {
            chosen = pick(rng);
        }
        centers.push_back(x.col(chosen));
        d2 = d2.cwiseMin((x.colwise() - centers.back()).colwise().squaredNorm().transpose());
    }
    std::vector<std::size_t> label(static_cast<std::size_t>(m), 0);
    for (int it = 0; it <= iterations; ++it) {
        bool changed = false;
        for (Eigen::Index i = 0; i < m; ++i) {
            std::size_t best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < k; ++c) {
                const double d = (x.col(i) - centers[c]).squaredNorm();
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            changed = changed || label[static_cast<std::size_t>(i)] != best;
            label[static_cast<std::size_t>(i)] = best;
        }
        if (it == iterations || (it > 0 && !changed)) break;
        std::vector<CVector> sum(k, CVector::Zero(x.rows()));
        std::vector<std::size_t> count(k, 0);
        for (Eigen::Index i = 0; i < m; ++i) {
            sum[label[static_cast<std::size_t>(i)]] += x.col(i);
            ++count[label[static_cast<std::size_t>(i)]];
        }
        for (std::size_t c = 0; c < k; ++c)
            if (count[c] > 0) centers[c] = sum[c] / static_cast<double>(count[c]);
    }
    return label;
}

inline double trace_of_inverse(const CMatrix& c) {
    Eigen::LLT<CMatrix> llt(c);
    if (llt.info() != Eigen::Success) throw NumericalError("EM: covariance lost positive definiteness");
    const CMatrix linv = llt.matrixL().solve(CMatrix::Identity(c.rows(), c.cols()));
    return linv.squaredNorm();
}

}  // namespace detail

/// EM fit of a full-covariance complex GMM to the columns of `x` (N x M).
///
/// Every M-step adds reg_eps * I to the covariances. This is the exact
/// maximizer of the EM auxiliary function for component functions
/// CN(x; mu_k, C_k) * exp(-reg_eps * tr(C_k^-1)), so the objective recorded in
/// the report (the log-likelihood under those component functions) is
/// nondecreasing. Without regularization it reduces to the plain log-likelihood.
inline GmmModel fit_em(const CMatrix& x, std::size_t k, const EmOptions& opts, EmReport* report = nullptr) {
    const Eigen::Index n = x.rows();
    const Eigen::Index m = x.cols();
    if (k < 1) throw ArgumentError("fit_em: K must be >= 1");
    if (static_cast<Eigen::Index>(k) > m) throw ArgumentError("fit_em: K exceeds the number of samples");
    if (!x.allFinite()) throw ArgumentError("fit_em: non-finite training data");

    const double avg_power = x.squaredNorm() / static_cast<double>(n * m);
    const double eps = opts.reg_eps >= 0.0 ? opts.reg_eps : std::max(1e-6 * avg_power, 1e-300);
    EmReport rep;
    rep.reg_eps = eps;

    // init: k-means++ clusters
    Rng rng(derive_seed(opts.init_seed, 0x656d));
    std::vector<CVector> centers;
    const auto label = detail::kmeans_pp(x, k, rng, opts.kmeans_iter, centers);
    std::vector<double> weights(k, 0.0);
    std::vector<CVector> means(k, CVector::Zero(n));
    std::vector<CMatrix> covs(k, CMatrix::Zero(n, n));
    CMatrix global_cov = (x * x.adjoint()) / static_cast<double>(m);
    if (!opts.zero_mean) {
        const CVector gm = x.rowwise().mean();
        global_cov -= gm * gm.adjoint();
    }
    global_cov = hermitian_part(global_cov);
    global_cov.diagonal().array() += eps;
    {
        std::vector<std::size_t> count(k, 0);
        for (auto l : label) ++count[l];
        for (std::size_t c = 0; c < k; ++c) {
            if (count[c] == 0) {
                weights[c] = 1.0 / static_cast<double>(m);
                means[c] = opts.zero_mean ? CVector::Zero(n) : centers[c];
                covs[c] = global_cov;
                continue;
            }
            weights[c] = static_cast<double>(count[c]);
            CMatrix members(n, static_cast<Eigen::Index>(count[c]));
            Eigen::Index j = 0;
            for (Eigen::Index i = 0; i < m; ++i)
                if (label[static_cast<std::size_t>(i)] == c) members.col(j++) = x.col(i);
            if (!opts.zero_mean) means[c] = members.rowwise().mean();
            const CMatrix d = members.colwise() - means[c];
            covs[c] = hermitian_part(d * d.adjoint() / static_cast<double>(count[c]));
            covs[c].diagonal().array() += eps;
        }
        const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
        for (auto& w : weights) w /= total;
    }

    RMatrix resp(static_cast<Eigen::Index>(k), m);
    RVector point_ll(m);
    // E-step: responsibilities and regularized objective of the current parameters
    auto e_step = [&]() {
        const GaussianBank bank(weights, means, covs);
        RMatrix lj = bank.log_density_batch(x);
        for (std::size_t c = 0; c < k; ++c) {
            const double penalty = eps > 0.0 ? eps * detail::trace_of_inverse(covs[c]) : 0.0;
            lj.row(static_cast<Eigen::Index>(c)).array() += bank.log_weights()[c] - penalty;
        }
        double total = 0.0;
        for (Eigen::Index i = 0; i < m; ++i) {
            const double lse = detail::log_sum_exp(lj.col(i).data(), k);
            point_ll[i] = lse;
            // flush negligible weights; subnormals make the M-step products very slow
            resp.col(i) = (lj.col(i).array() - lse).exp().matrix();
            resp.col(i) = (resp.col(i).array() < 1e-150).select(0.0, resp.col(i));
            total += lse;
        }
        return total;
    };

    double prev = e_step();
    rep.objective.push_back(prev);
    for (int it = 1; it <= opts.max_iter; ++it) {
        // M-step
        for (std::size_t c = 0; c < k; ++c) {
            const auto row = resp.row(static_cast<Eigen::Index>(c));
            const double nk = row.sum();
            if (nk / static_cast<double>(m) < 1e-12) {
                if (rep.reseeds > 0) throw NumericalError("fit_em: component collapse recurred");
                ++rep.reseeds;
                Eigen::Index worst = 0;
                point_ll.minCoeff(&worst);
                weights[c] = 1.0 / static_cast<double>(m);
                means[c] = opts.zero_mean ? CVector::Zero(n) : CVector(x.col(worst));
                covs[c] = global_cov;
                continue;
            }
            weights[c] = nk / static_cast<double>(m);
            if (!opts.zero_mean) means[c] = (x * row.transpose().cast<Complex>()) / nk;
            CMatrix dw = x.colwise() - means[c];
            dw.array().rowwise() *= row.array().sqrt().cast<Complex>();
            covs[c] = hermitian_part(dw * dw.adjoint() / nk);
            covs[c].diagonal().array() += eps;
        }
        const double wsum = std::accumulate(weights.begin(), weights.end(), 0.0);
        for (auto& w : weights) w /= wsum;

        const double cur = e_step();
        rep.objective.push_back(cur);
        rep.iterations = it;
        if (std::abs(cur - prev) <= opts.tol * std::abs(cur)) {
            rep.converged = true;
            break;
        }
        prev = cur;
    }

    GmmModel model;
    model.weights = std::move(weights);
    model.means = std::move(means);
    model.covariances = std::move(covs);
    model.structure = CovarianceStructure::Full;
    model.nrx = static_cast<int>(n);
    model.ntx = 1;
    if (report) *report = std::move(rep);
    return model;
}

/// EM fit on a dataset; the model keeps the channel matrix shape for unvec.
inline GmmModel fit_em(const ChannelDataset& ds, std::size_t k, const EmOptions& opts, EmReport* report = nullptr) {
    if (ds.empty()) throw ArgumentError("fit_em: empty dataset");
    if (k > ds.size()) throw ArgumentError("fit_em: K exceeds the number of samples");
    GmmModel model = fit_em(stack_vectorized(ds), k, opts, report);
    model.nrx = static_cast<int>(ds.rows());
    model.ntx = static_cast<int>(ds.cols());
    return model;
}

/// Kronecker-structured GMM with K = K_tx * K_rx components.
///
/// The transmit-side mixture is fitted on the transposed rows of all channel
/// matrices (length ntx), the receive-side mixture on all columns (length nrx).
/// Component (a, b) gets covariance C_tx[a] kron C_rx[b], mean
/// vec(mu_rx[b] mu_tx[a]^T) and initial weight w_tx[a] w_rx[b]; then the
/// weights alone are refined by EM on the full vectorized training set.
inline GmmModel fit_kronecker(const ChannelDataset& ds, std::size_t k_tx, std::size_t k_rx, const EmOptions& opts,
                              KroneckerReport* report = nullptr) {
    if (ds.empty()) throw ArgumentError("fit_kronecker: empty dataset");
    if (k_tx < 1 || k_rx < 1) throw ArgumentError("fit_kronecker: K_tx and K_rx must be >= 1");
    if (ds.size() < std::max(k_tx, k_rx)) throw ArgumentError("fit_kronecker: too few samples");
    const Eigen::Index nrx = ds.rows();
    const Eigen::Index ntx = ds.cols();
    const auto count = static_cast<Eigen::Index>(ds.size());

    CMatrix tx_samples(ntx, count * nrx);
    CMatrix rx_samples(nrx, count * ntx);
    for (Eigen::Index m = 0; m < count; ++m) {
        const CMatrix& h = ds.channels[static_cast<std::size_t>(m)];
        tx_samples.middleCols(m * nrx, nrx) = h.transpose();
        rx_samples.middleCols(m * ntx, ntx) = h;
    }

    KroneckerReport rep;
    EmOptions tx_opts = opts;
    tx_opts.init_seed = derive_seed(opts.init_seed, 0x7478);
    EmOptions rx_opts = opts;
    rx_opts.init_seed = derive_seed(opts.init_seed, 0x7278);
    const GmmModel tx = fit_em(tx_samples, k_tx, tx_opts, &rep.tx);
    const GmmModel rx = fit_em(rx_samples, k_rx, rx_opts, &rep.rx);

    GmmModel model;
    model.structure = CovarianceStructure::Kronecker;
    model.nrx = static_cast<int>(nrx);
    model.ntx = static_cast<int>(ntx);
    model.tx_factors = tx.covariances;
    model.rx_factors = rx.covariances;
    for (std::size_t a = 0; a < k_tx; ++a) {
        for (std::size_t b = 0; b < k_rx; ++b) {
            model.weights.push_back(tx.weights[a] * rx.weights[b]);
            model.means.push_back(vec(rx.means[b] * tx.means[a].transpose()));
        }
    }
    const double wsum = std::accumulate(model.weights.begin(), model.weights.end(), 0.0);
    for (auto& w : model.weights) w /= wsum;

    if (opts.weight_refine_steps > 0 && model.size() > 1) {
        const CMatrix x = stack_vectorized(ds);
        const RMatrix ld = GaussianBank::from_model(model).log_density_batch(x);
        const std::size_t k = model.size();
        std::vector<double> col(k);
        auto step = [&](bool update) {
            std::vector<double> acc(k, 0.0);
            double total = 0.0;
            for (Eigen::Index m = 0; m < x.cols(); ++m) {
                for (std::size_t c = 0; c < k; ++c)
                    col[c] = detail::safe_log(model.weights[c]) + ld(static_cast<Eigen::Index>(c), m);
                const double lse = detail::log_sum_exp(col.data(), k);
                total += lse;
                for (std::size_t c = 0; c < k; ++c) acc[c] += std::exp(col[c] - lse);
            }
            if (update) {
                for (std::size_t c = 0; c < k; ++c) model.weights[c] = acc[c] / static_cast<double>(x.cols());
                const double s = std::accumulate(model.weights.begin(), model.weights.end(), 0.0);
                for (auto& w : model.weights) w /= s;
            }
            return total;
        };
        for (int it = 0; it < opts.weight_refine_steps; ++it) rep.refine_log_likelihood.push_back(step(true));
        rep.refine_log_likelihood.push_back(step(false));
    }
    if (report) *report = std::move(rep);
    return model;
}

}  // namespace gmmfb

#endif  // GMMFB_GMM_HPP
