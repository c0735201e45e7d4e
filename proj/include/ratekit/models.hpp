#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ratekit/data.hpp"
#include "ratekit/tape.hpp"

namespace ratekit::models {

/// Fully-connected net with tanh hidden layers and a linear scalar output.
/// `layer_sizes` runs input..output; no hidden layers makes it a plain
/// linear model. Parameters live in one flat vector (per layer: weight
/// matrix row-major, then biases) so snapshots and tape leaves are trivial.
struct MlpModel {
    std::vector<std::size_t> layer_sizes;
    std::vector<double> params;

    static MlpModel init(std::vector<std::size_t> sizes, std::uint64_t seed);
    static std::size_t param_count(std::span<const std::size_t> sizes);

    double forward(std::span<const double> x) const;

    /// Graph with parameters as differentiable leaves and x as data
    /// (training the net itself).
    ad::Var forward_var(ad::Tape& tape, std::span<const double> x,
                        std::span<const ad::Var> param_vars) const;

    /// Graph with parameters baked in as constants and a differentiable
    /// input (gradients flow to whatever produced `input`).
    ad::Var forward_input_var(ad::Tape& tape, std::span<const ad::Var> input) const;
};

/// Logistic demand model: P(sale) = sigmoid(w_x . x + w_p * ln(price) + bias).
/// A trained model is expected to have w_p < 0 (demand falls with price);
/// that is asserted post-fit with a warning, not a constraint.
struct ConversionModel {
    std::vector<double> w_x;
    double w_p = 0.0;
    double bias = 0.0;
    double train_logloss = 0.0;
    double dev_logloss = 0.0;
    bool price_slope_negative = true;

    /// w_x . x + bias; per-record constant when only the price moves.
    double feature_logit(std::span<const double> x) const;
    double predict(std::span<const double> x, double price) const;
    double predict_logit(double feature_logit_value, double price) const;

    /// Differentiable in the price argument: sigmoid(A + w_p * ln p).
    ad::Var predict_var(ad::Tape& tape, double feature_logit_value, ad::Var price) const;
};

struct ConversionFitConfig {
    double learning_rate = 0.05;
    std::size_t epochs = 200;
    std::size_t batch = 256;
    double momentum = 0.9;
    /// Early-stop patience, in epochs: trips on a train-loss plateau or on
    /// dev log-loss sitting clearly above its best (overfit guard).
    std::size_t patience = 10;
    std::uint64_t seed = 1;
};

ConversionModel fit_conversion(std::span<const data::PortfolioRecord> records,
                               std::span<const std::size_t> train_idx,
                               std::span<const std::size_t> dev_idx,
                               const ConversionFitConfig& config);

/// Pure premium h(x): either read from the data column or a log-link linear
/// fit exp(w . x + bias), so it is strictly positive either way.
struct PremiumModel {
    bool column_backed = true;
    std::vector<double> w;
    double bias = 0.0;

    double premium(const data::PortfolioRecord& rec) const;
    double premium_from_features(std::span<const double> x) const;
};

PremiumModel premium_from_column();
PremiumModel fit_premium(std::span<const data::PortfolioRecord> records,
                         std::span<const std::size_t> train_idx, double ridge = 1e-8);

/// Bounded multiplicative loading: c_hat(x) = sigmoid(raw(x)) * (b - a) + a,
/// strictly inside (a, b) for a < b. a == b is the degenerate bypass that
/// pins the coefficient (used to turn the margin term off in tests).
struct CoefficientModel {
    MlpModel inner;
    double lower = 1.2;
    double upper = 1.6;

    static CoefficientModel make_linear(std::size_t dim, double a, double b, std::uint64_t seed);
    static CoefficientModel make_mlp(std::size_t dim, std::span<const std::size_t> hidden,
                                     double a, double b, std::uint64_t seed);

    double raw(std::span<const double> x) const;
    double coefficient(std::span<const double> x) const;
    double price(const data::PortfolioRecord& rec, const PremiumModel& hmodel) const;

    ad::Var coefficient_var(ad::Tape& tape, std::span<const double> x,
                            std::span<const ad::Var> param_vars) const;
};

// JSON save/load for all model kinds. Parameter arrays round-trip bit-exact.
std::string to_json(const ConversionModel& m, const std::string& mapping_fingerprint);
std::string to_json(const PremiumModel& m, const std::string& mapping_fingerprint);
std::string to_json(const CoefficientModel& m, const std::string& mapping_fingerprint);
ConversionModel conversion_from_json(const std::string& text);
PremiumModel premium_from_json(const std::string& text);
CoefficientModel coefficient_from_json(const std::string& text);
std::string fingerprint_of_model_json(const std::string& text);

/// Spearman rank correlation (used to sanity-check fitted premium models).
double rank_correlation(std::span<const double> u, std::span<const double> v);

} // namespace ratekit::models
