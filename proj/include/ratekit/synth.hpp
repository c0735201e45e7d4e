#pragma once

#include <cstdint>
#include <string>

#include "ratekit/data.hpp"

namespace ratekit::synth {

/// Synthetic quote portfolio for CI and offline runs. Features are standard
/// normals (plus one categorical region column); the pure premium is a
/// log-linear function of a few features; historical prices carry a random
/// loading; sales are drawn from a logistic demand curve with the planted
/// price elasticity. The sensitive "age" column is coupled to the first
/// feature with the given strength, which plants a price-sensitive
/// dependence for the fairness trainers to remove.
struct SynthConfig {
    std::size_t n = 10000;
    std::size_t dim = 8;               // numeric feature count, >= 5
    double elasticity = -5.0;          // planted slope on ln(price)
    double dependence = 0.8;           // age-feature coupling in [0, 1)
    double premium_base = 600.0;
    double target_conversion = 0.22;   // portfolio mean at historical prices
    std::uint64_t seed = 11;
};

std::string generate_csv(const SynthConfig& config);
data::ColumnMapping mapping(const SynthConfig& config);

/// generate_csv + the standard loader, so tests and the CLI share one path.
data::Portfolio make_portfolio(const SynthConfig& config, const data::SplitSpec& split);

} // namespace ratekit::synth
