#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ratekit/models.hpp"
#include "ratekit/tape.hpp"

namespace ratekit::hgr {

/// The two interconnected adversary networks: phi maps the commercial price
/// to a real score, psi maps the sensitive value(s) to a real score. Raw
/// inputs are passed through a frozen affine normalization (set once from
/// the data scale) so tanh units start in their responsive range; the
/// estimator itself standardizes the network OUTPUTS per batch, which is
/// what makes the mean product a correlation.
struct AdversaryPair {
    models::MlpModel phi;   // input dim 1
    models::MlpModel psi;   // input dim k (1 for a scalar sensitive attribute)
    double phi_in_mean = 0.0;
    double phi_in_scale = 1.0;
    std::vector<double> psi_in_mean;
    std::vector<double> psi_in_scale;

    static AdversaryPair init(std::size_t sensitive_dim, std::size_t hidden, std::uint64_t seed);

    /// Freeze input normalizations from representative samples.
    void set_input_scale(std::span<const double> prices,
                         std::span<const std::vector<double>> sensitive);

    double phi_raw(double price) const;
    double psi_raw(std::span<const double> s) const;
};

inline constexpr double kStdFloor = 1e-8;   // std floor for degenerate batches

/// Standardize to batch mean 0 / variance 1, dividing by sqrt(var + floor^2).
/// A (near-)constant batch maps to zeros and sets *degenerate.
std::vector<double> standardize_batch(std::span<const double> outputs, bool* degenerate = nullptr);

/// Same computation on a tape (same operation order, so values match the
/// plain version bit for bit); gradients flow through the mean and std.
std::vector<ad::Var> standardize_batch(ad::Tape& tape, std::span<const ad::Var> outputs,
                                       bool* degenerate = nullptr);

/// One joint gradient-ascent step on mean(phi_hat * psi_hat) for both
/// networks; prices and sensitive values are data. Returns the objective
/// value before the update.
double ascent_step(AdversaryPair& pair, std::span<const double> prices,
                   std::span<const std::vector<double>> sensitive, double lr_phi, double lr_psi);

/// Training-time fairness penalty mean(phi_hat * psi_hat) built on the
/// caller's tape. Gradients reach only whatever produced the price vars:
/// the adversary parameters are baked in as constants, and psi's side is
/// computed outside the tape entirely.
ad::Var fairness_penalty(ad::Tape& tape, const AdversaryPair& pair,
                         std::span<const ad::Var> prices,
                         std::span<const std::vector<double>> sensitive);

struct HgrConfig {
    std::size_t hidden = 16;
    double learning_rate = 0.05;
    std::size_t max_steps = 2000;
    std::size_t plateau_window = 100;
    double plateau_tol = 1e-4;
    std::uint64_t seed = 0;
};

struct HgrEstimate {
    double value = 0.0;    // |E[phi_hat * psi_hat]| in [0, 1]
    std::size_t n_used = 0;
    bool converged = false;
};

/// Metric mode: train a fresh pair to convergence (plateau stop under a
/// fixed step budget) and report the absolute mean product. Deterministic
/// given the seed.
HgrEstimate hgr_metric(std::span<const double> u, std::span<const double> v,
                       const HgrConfig& config);

} // namespace ratekit::hgr
