#include "ratekit/synth.hpp"

#include <cmath>
#include <cstdio>
#include <string>

#include "ratekit/errors.hpp"
#include "ratekit/rng.hpp"

namespace ratekit::synth {

namespace {

void append_num(std::string& out, double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out += buf;
}

} // namespace

std::string generate_csv(const SynthConfig& config) {
    if (config.dim < 5) throw ConfigError("synth: dim must be >= 5");
    if (!(config.dependence >= 0.0 && config.dependence < 1.0))
        throw ConfigError("synth: dependence must be in [0, 1)");
    if (!(config.premium_base > 0.0)) throw ConfigError("synth: premium_base must be positive");
    if (!(config.target_conversion > 0.0 && config.target_conversion < 1.0))
        throw ConfigError("synth: target_conversion must be in (0, 1)");

    static const char* kRegions[4] = {"north", "east", "south", "west"};
    static const double kRegionEffect[4] = {0.0, 0.015, -0.015, 0.0075};
    // planted weights: log-premium on z0..z3, conversion logit on z0,z1,z3,z4
    static const double kPremiumW[4] = {0.03, 0.04, -0.04, 0.025};
    static const double kLogitW[5] = {0.25, 0.15, 0.0, 0.1, -0.15};

    // Calibrate the conversion intercept so the portfolio mean at historical
    // prices lands near the target. E[sigmoid(L)] for L ~ N(m, s^2) is
    // approximately sigmoid(m / sqrt(1 + pi^2 s^2 / 8)), so the target logit
    // is scaled up by that factor before subtracting the price term.
    auto primitive = [](double c) { return c * std::log(c) - c; };
    auto primitive2 = [](double c) {
        double l = std::log(c);
        return c * (l * l - 2.0 * l + 2.0);
    };
    const double lo = 1.2, hi = 1.6;
    const double mean_ln_loading = (primitive(hi) - primitive(lo)) / (hi - lo);
    const double var_ln_loading =
        (primitive2(hi) - primitive2(lo)) / (hi - lo) - mean_ln_loading * mean_ln_loading;
    double region_mean = 0.0, region_var = 0.0;
    for (double e : kRegionEffect) region_mean += e / 4.0;
    for (double e : kRegionEffect) region_var += (e - region_mean) * (e - region_mean) / 4.0;
    double var_feat = 0.0, cov_feat_lnh = 0.0, var_lnh = region_var;
    for (int j = 0; j < 5; ++j) var_feat += kLogitW[j] * kLogitW[j];
    for (int j = 0; j < 4; ++j) {
        var_lnh += kPremiumW[j] * kPremiumW[j];
        cov_feat_lnh += kLogitW[j] * kPremiumW[j];
    }
    const double logit_var = var_feat +
                             config.elasticity * config.elasticity * (var_lnh + var_ln_loading) +
                             2.0 * config.elasticity * cov_feat_lnh;
    const double jensen = std::sqrt(1.0 + 9.8696044010893586 * logit_var / 8.0);
    const double mean_ln_price = std::log(config.premium_base) + region_mean + mean_ln_loading;
    const double kappa0 =
        std::log(config.target_conversion / (1.0 - config.target_conversion)) * jensen -
        config.elasticity * mean_ln_price;

    Rng rng(config.seed);
    std::string out;
    out.reserve(config.n * 160);
    out += "cust_id";
    for (std::size_t j = 1; j <= config.dim; ++j) out += ",f" + std::to_string(j);
    out += ",region,age,premium,price,sale\n";

    std::vector<double> z(config.dim);
    for (std::size_t i = 0; i < config.n; ++i) {
        for (auto& v : z) v = rng.normal();
        double s_std = config.dependence * z[0] +
                       std::sqrt(1.0 - config.dependence * config.dependence) * rng.normal();
        double age = 40.0 + 12.0 * s_std;
        std::size_t region = static_cast<std::size_t>(rng.below(4));
        double ln_h = std::log(config.premium_base) + kPremiumW[0] * z[0] + kPremiumW[1] * z[1] +
                      kPremiumW[2] * z[2] + kPremiumW[3] * z[3] + kRegionEffect[region];
        double premium = std::exp(ln_h);
        double loading = rng.uniform(lo, hi);
        double price = loading * premium;
        double logit = kappa0 + kLogitW[0] * z[0] + kLogitW[1] * z[1] + kLogitW[3] * z[3] +
                       kLogitW[4] * z[4] + config.elasticity * std::log(price);
        double p = logit >= 0.0 ? 1.0 / (1.0 + std::exp(-logit))
                                : std::exp(logit) / (1.0 + std::exp(logit));
        int sale = rng.uniform() < p ? 1 : 0;

        out += std::to_string(i + 1);
        for (double v : z) {
            out += ',';
            append_num(out, v);
        }
        out += ',';
        out += kRegions[region];
        out += ',';
        append_num(out, age);
        out += ',';
        append_num(out, premium);
        out += ',';
        append_num(out, price);
        out += ',';
        out += std::to_string(sale);
        out += '\n';
    }
    return out;
}

data::ColumnMapping mapping(const SynthConfig& config) {
    data::ColumnMapping m;
    for (std::size_t j = 1; j <= config.dim; ++j) m.feature_columns.push_back("f" + std::to_string(j));
    m.feature_columns.push_back("region");
    m.sale_column = "sale";
    m.price_column = "price";
    m.premium_column = "premium";
    m.sensitive_columns = {{"age", data::SensitiveKind::Continuous}};
    m.id_column = "cust_id";
    return m;
}

data::Portfolio make_portfolio(const SynthConfig& config, const data::SplitSpec& split) {
    return data::load_portfolio_text(generate_csv(config), mapping(config), split);
}

} // namespace ratekit::synth
