/*
 * Copyright 2026 The mmpc Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Shared fixtures and reference implementations for the test suites.
//
// The oracles below are written straight from the model's defining sums with
// plain nested loops and no shared helpers from the library, so they can
// catch mistakes in the optimized kernels.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

#include "mmpc/network_model.hpp"
#include "mmpc/se_kernel.hpp"
#include "mmpc/system.hpp"
#include "mmpc/wmmse_solver.hpp"

namespace mmpc::testing {

inline NetworkConfig small_config(int cells, int slots, double activity, std::uint64_t seed) {
    NetworkConfig cfg;
    cfg.num_cells = cells;
    cfg.max_users_per_cell = slots;
    cfg.activity.prob = activity;
    cfg.seed = seed;
    return cfg;
}

inline SystemParams params_for(const NetworkConfig& cfg) { return cfg.system_params(); }

/// Hand-sized system with one shared budget for every slot.
inline SystemParams flat_params(int cells, int slots, int antennas, double noise, double budget,
                                int tau = 200) {
    SystemParams p;
    p.num_antennas = antennas;
    p.coherence_symbols = tau;
    p.noise_power_mw = noise;
    p.max_power_mw = SlotMatrix(cells, slots, budget);
    return p;
}

/// Zeroes a user's column and clears its activity bit.
inline void deactivate(Realization& r, int cell, int slot) {
    for (int l = 0; l < r.cells(); ++l) r.beta.at(l, cell, slot) = 0.0;
    r.active(cell, slot) = 0;
}

/// Uniform random feasible powers on the active slots.
inline PowerAllocation random_powers(const Realization& r, const SlotMatrix& cap,
                                     std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    PowerAllocation pa = PowerAllocation::zeros(r.cells(), r.slots());
    for (int l = 0; l < r.cells(); ++l)
        for (int k = 0; k < r.slots(); ++k)
            if (r.is_active(l, k)) {
                pa.pilot_mw(l, k) = u(rng) * cap(l, k);
                pa.data_mw(l, k) = u(rng) * cap(l, k);
            }
    return pa;
}

inline double rel_diff(double a, double b) {
    const double scale = std::max({std::abs(a), std::abs(b), 1e-300});
    return std::abs(a - b) / scale;
}

// ---------------------------------------------------------------- SINR oracle

/// SINR of user (l, k), evaluated term by term from its definition.
inline double oracle_sinr(const Realization& r, const PowerAllocation& pa, int M, double noise,
                          int l, int k) {
    if (!r.is_active(l, k)) return 0.0;
    const int L = r.cells();
    const int K = r.slots();
    const auto& b = r.beta;
    const double num = double(M) * K * pa.data_mw(l, k) * pa.pilot_mw(l, k) * b.at(l, l, k) *
                       b.at(l, l, k);
    double contamination = 0.0;
    double estimation = noise;
    for (int i = 0; i < L; ++i) {
        if (!r.is_active(i, k)) continue;
        estimation += K * pa.pilot_mw(i, k) * b.at(l, i, k);
        if (i != l)
            contamination += double(M) * K * pa.data_mw(i, k) * pa.pilot_mw(i, k) * b.at(l, i, k) *
                             b.at(l, i, k);
    }
    double interference = noise;
    for (int i = 0; i < L; ++i)
        for (int t = 0; t < K; ++t)
            if (r.is_active(i, t)) interference += pa.data_mw(i, t) * b.at(l, i, t);
    const double denom = contamination + estimation * interference;
    return num / denom;
}

inline double oracle_sum_se(const Realization& r, const PowerAllocation& pa, const SystemParams& p) {
    const double prelog = 1.0 - double(r.slots()) / p.coherence_symbols;
    double s = 0.0;
    for (int l = 0; l < r.cells(); ++l)
        for (int k = 0; k < r.slots(); ++k)
            s += prelog * std::log2(1.0 + oracle_sinr(r, pa, p.num_antennas, p.noise_power_mw, l, k));
    return s;
}

/// MMSE estimate variance of user (i, t) at BS l.
inline double oracle_est_var(const Realization& r, const PowerAllocation& pa, double noise, int l,
                             int i, int t) {
    if (!r.is_active(i, t)) return 0.0;
    const int K = r.slots();
    double denom = noise;
    for (int j = 0; j < r.cells(); ++j)
        if (r.is_active(j, t)) denom += K * pa.pilot_mw(j, t) * r.beta.at(l, j, t);
    const double b = r.beta.at(l, i, t);
    return K * b * b * pa.pilot_mw(i, t) / denom;
}

/// Estimation error variance, written as beta times the share of the
/// observation that is not the user's own pilot.
inline double oracle_err_var(const Realization& r, const PowerAllocation& pa, double noise, int l,
                             int i, int t) {
    if (!r.is_active(i, t)) return 0.0;
    const int K = r.slots();
    double others = noise;
    double denom = noise;
    for (int j = 0; j < r.cells(); ++j) {
        if (!r.is_active(j, t)) continue;
        denom += K * pa.pilot_mw(j, t) * r.beta.at(l, j, t);
        if (j != i) others += K * pa.pilot_mw(j, t) * r.beta.at(l, j, t);
    }
    return r.beta.at(l, i, t) * others / denom;
}

// ------------------------------------------------------- weighted-MSE oracle

/// u~ of user (l, k) from the amplitudes, summed term by term.
inline double oracle_u_tilde(const Realization& r, const SolverState& s, int M, double noise,
                             int l, int k) {
    const int L = r.cells();
    const int K = r.slots();
    const auto& b = r.beta;
    double signal = 0.0;
    double estimation = noise;
    for (int i = 0; i < L; ++i) {
        if (!r.is_active(i, k)) continue;
        const double rho2 = s.rho(i, k) * s.rho(i, k);
        const double rhat2 = s.rho_hat(i, k) * s.rho_hat(i, k);
        signal += double(M) * K * rho2 * rhat2 * b.at(l, i, k) * b.at(l, i, k);
        estimation += K * rhat2 * b.at(l, i, k);
    }
    double interference = noise;
    for (int i = 0; i < L; ++i)
        for (int t = 0; t < K; ++t)
            if (r.is_active(i, t)) interference += s.rho(i, t) * s.rho(i, t) * b.at(l, i, t);
    return signal + estimation * interference;
}

inline double oracle_mse(const Realization& r, const SolverState& s, int M, double noise, int l,
                         int k) {
    const double ut = oracle_u_tilde(r, s, M, noise, l, k);
    const double u = s.u(l, k);
    const double g = std::sqrt(double(M) * r.slots()) * s.rho(l, k) * s.rho_hat(l, k) *
                     r.beta.at(l, l, k);
    return u * u * ut - 2.0 * g * u + 1.0;
}

/// sum over active users of w e - ln w.
inline double oracle_wmse_objective(const Realization& r, const SolverState& s, int M,
                                    double noise) {
    double f = 0.0;
    for (int l = 0; l < r.cells(); ++l)
        for (int k = 0; k < r.slots(); ++k)
            if (r.is_active(l, k)) {
                const double w = s.w(l, k);
                f += w * oracle_mse(r, s, M, noise, l, k) - std::log(w);
            }
    return f;
}

/// Minimizer of a unimodal function on [lo, hi].
inline double golden_section_min(const std::function<double(double)>& f, double lo, double hi,
                                 int iters = 300) {
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double c = b - g * (b - a), d = a + g * (b - a);
    double fc = f(c), fd = f(d);
    for (int it = 0; it < iters && b - a > 1e-15 * std::max(1.0, hi); ++it) {
        if (fc <= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    // The endpoints are admissible too; a clamped optimum sits exactly there.
    double best = 0.5 * (a + b);
    double fbest = f(best);
    for (double x : {lo, hi}) {
        const double fx = f(x);
        if (fx < fbest) {
            best = x;
            fbest = fx;
        }
    }
    return best;
}

// ----------------------------------------------------- sparse reference solver

/// A user of the reduced problem: only active users exist here.
struct SparseUser {
    int cell;
    int pilot;
    std::vector<double> beta;  ///< gain to every BS
    double cap;
};

struct SparseState {
    std::vector<double> u, w, rho_hat, rho;
};

/// Reference block-coordinate sweep on an explicit list of users. Pilot length
/// K is passed separately because it does not depend on how many users exist.
class SparseReference {
public:
    SparseReference(std::vector<SparseUser> users, int num_cells, int pilot_length, int antennas,
                    double noise)
        : users_(std::move(users)), L_(num_cells), K_(pilot_length), M_(antennas), noise_(noise) {}

    static SparseReference from(const Realization& r, const SystemParams& p) {
        std::vector<SparseUser> users;
        for (int i = 0; i < r.cells(); ++i)
            for (int t = 0; t < r.slots(); ++t)
                if (r.is_active(i, t)) {
                    SparseUser su{i, t, {}, p.max_power_mw(i, t)};
                    for (int l = 0; l < r.cells(); ++l) su.beta.push_back(r.beta.at(l, i, t));
                    users.push_back(std::move(su));
                }
        return SparseReference(std::move(users), r.cells(), r.slots(), p.num_antennas,
                               p.noise_power_mw);
    }

    const std::vector<SparseUser>& users() const { return users_; }

    SparseState full_power() const {
        SparseState s;
        for (const auto& su : users_) {
            s.u.push_back(0.0);
            s.w.push_back(0.0);
            s.rho_hat.push_back(std::sqrt(su.cap));
            s.rho.push_back(std::sqrt(su.cap));
        }
        return s;
    }

    /// receive power, at BS l, of everything but the pilot-stage factor
    double interference(const SparseState& s, int l) const {
        double v = noise_;
        for (std::size_t n = 0; n < users_.size(); ++n) v += s.rho[n] * s.rho[n] * users_[n].beta[l];
        return v;
    }

    double estimation(const SparseState& s, int l, int pilot) const {
        double v = noise_;
        for (std::size_t n = 0; n < users_.size(); ++n)
            if (users_[n].pilot == pilot) v += K_ * s.rho_hat[n] * s.rho_hat[n] * users_[n].beta[l];
        return v;
    }

    double u_tilde(const SparseState& s, std::size_t a) const {
        const int l = users_[a].cell;
        double v = estimation(s, l, users_[a].pilot) * interference(s, l);
        for (std::size_t n = 0; n < users_.size(); ++n)
            if (users_[n].pilot == users_[a].pilot) {
                const double b = users_[n].beta[l];
                v += double(M_) * K_ * s.rho[n] * s.rho[n] * s.rho_hat[n] * s.rho_hat[n] * b * b;
            }
        return v;
    }

    void sweep(SparseState& s, bool update_pilots = true) const {
        const double c = std::sqrt(double(M_) * K_);
        const std::size_t n_users = users_.size();
        std::vector<double> ut(n_users);
        for (std::size_t a = 0; a < n_users; ++a) {
            ut[a] = u_tilde(s, a);
            const double g = users_[a].beta[users_[a].cell];
            s.u[a] = c * s.rho[a] * s.rho_hat[a] * g / ut[a];
        }
        for (std::size_t a = 0; a < n_users; ++a) {
            const double g = users_[a].beta[users_[a].cell];
            const double e = s.u[a] * s.u[a] * ut[a] - 2.0 * c * s.rho[a] * s.rho_hat[a] * s.u[a] * g + 1.0;
            s.w[a] = 1.0 / e;
        }
        if (update_pilots) {
            std::vector<double> next(n_users);
            for (std::size_t a = 0; a < n_users; ++a) {
                // every user b on the same pilot hears a's pilot at its own BS
                double eta = 0.0;
                for (std::size_t b = 0; b < n_users; ++b) {
                    if (users_[b].pilot != users_[a].pilot) continue;
                    const int j = users_[b].cell;
                    const double wu2 = s.w[b] * s.u[b] * s.u[b];
                    const double beta = users_[a].beta[j];
                    eta += wu2 * (double(M_) * K_ * s.rho[a] * s.rho[a] * beta * beta +
                                  K_ * beta * interference(s, j));
                }
                const double num = c * s.rho[a] * s.u[a] * s.w[a] * users_[a].beta[users_[a].cell];
                next[a] = clamp(num, eta, users_[a].cap);
            }
            s.rho_hat = next;
        }
        std::vector<double> next(n_users);
        for (std::size_t a = 0; a < n_users; ++a) {
            double eta = 0.0;
            for (std::size_t b = 0; b < n_users; ++b) {
                const int i = users_[b].cell;
                const double wu2 = s.w[b] * s.u[b] * s.u[b];
                const double beta = users_[a].beta[i];
                eta += wu2 * beta * estimation(s, i, users_[b].pilot);
                if (users_[b].pilot == users_[a].pilot)
                    eta += wu2 * double(M_) * K_ * s.rho_hat[a] * s.rho_hat[a] * beta * beta;
            }
            const double num = c * s.rho_hat[a] * s.u[a] * s.w[a] * users_[a].beta[users_[a].cell];
            next[a] = clamp(num, eta, users_[a].cap);
        }
        s.rho = next;
    }

private:
    static double clamp(double num, double den, double cap) {
        if (num == 0.0) return 0.0;
        return std::min(num / den, std::sqrt(cap));
    }

    std::vector<SparseUser> users_;
    int L_;
    int K_;
    int M_;
    double noise_;
};

}  // namespace mmpc::testing
