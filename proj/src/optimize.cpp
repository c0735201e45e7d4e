#include "ratekit/optimize.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include "ratekit/rng.hpp"

namespace ratekit::opt {

void TrainConfig::validate() const {
    if (!(lower < upper)) throw ConfigError("train: bounds must satisfy a < b");
    if (lambda_f < 0.0 || lambda_s < 0.0) throw ConfigError("train: lambda weights must be >= 0");
    if (!(lr_c > 0.0 && lr_phi > 0.0 && lr_psi > 0.0))
        throw ConfigError("train: learning rates must be positive");
    if (epochs == 0 || batch == 0) throw ConfigError("train: epochs and batch must be positive");
}

std::string TrainTrace::to_csv() const {
    std::ostringstream out;
    out.precision(17);
    out << "epoch,objective,gwm,conversion,fairness,hgr,seconds\n";
    for (std::size_t e = 0; e < epochs.size(); ++e) {
        const auto& s = epochs[e];
        out << e << ',' << s.objective << ',' << s.gwm_term << ',' << s.conversion_term << ','
            << s.fairness_term << ',' << s.hgr_estimate << ',' << s.seconds << '\n';
    }
    return out.str();
}

ObjectiveParts optigrad_objective(ad::Tape& tape, const models::CoefficientModel& cmodel,
                                  std::span<const ad::Var> cparam_vars,
                                  std::span<const data::PortfolioRecord> records,
                                  std::span<const std::size_t> batch_idx,
                                  std::span<const double> premiums,
                                  std::span<const double> feature_logits,
                                  const models::ConversionModel& fmodel, double lambda_f) {
    if (batch_idx.empty()) throw ValidationError("objective: empty batch");

    std::vector<ad::Var> margins, conversions;
    margins.reserve(batch_idx.size());
    conversions.reserve(batch_idx.size());
    ObjectiveParts parts;
    parts.prices.reserve(batch_idx.size());

    for (std::size_t i : batch_idx) {
        const auto& rec = records[i];
        double h = premiums[i];
        ad::Var c = cmodel.coefficient_var(tape, rec.x, cparam_vars);
        ad::Var price = c * h;
        ad::Var f = fmodel.predict_var(tape, feature_logits[i], price);
        margins.push_back((price - h) * f);
        conversions.push_back(f);
        parts.prices.push_back(price);
    }
    parts.gwm_term = tape.mean(margins);
    parts.conversion_term = tape.mean(conversions);
    parts.objective = -parts.gwm_term - parts.conversion_term * lambda_f;
    return parts;
}

namespace {

struct SplitContext {
    std::vector<std::size_t> idx;
    // premiums/feature_logits are indexed by absolute record index.
};

/// Plain (tape-free) epoch statistics over one index set.
EpochStats measure(const data::Portfolio& portfolio, const models::CoefficientModel& cmodel,
                   const models::ConversionModel& fmodel, std::span<const double> premiums,
                   std::span<const double> feature_logits, std::span<const std::size_t> idx,
                   const std::optional<hgr::AdversaryPair>& adversary, const TrainConfig& config) {
    EpochStats s;
    if (idx.empty()) return s;
    std::vector<double> prices(idx.size());
    double margin_sum = 0.0, conv_sum = 0.0;
    for (std::size_t k = 0; k < idx.size(); ++k) {
        const auto& rec = portfolio.records[idx[k]];
        double h = premiums[idx[k]];
        double c = cmodel.coefficient(rec.x);
        double price = c * h;
        double logit = feature_logits[idx[k]] + fmodel.w_p * std::log(price);
        double f = logit >= 0.0 ? 1.0 / (1.0 + std::exp(-logit))
                                : std::exp(logit) / (1.0 + std::exp(logit));
        prices[k] = price;
        margin_sum += (price - h) * f;
        conv_sum += f;
    }
    double inv = 1.0 / static_cast<double>(idx.size());
    s.gwm_term = margin_sum * inv;
    s.conversion_term = conv_sum * inv;
    if (adversary && idx.size() >= 2) {
        std::vector<double> phi_out(idx.size()), psi_out(idx.size());
        for (std::size_t k = 0; k < idx.size(); ++k) {
            phi_out[k] = adversary->phi_raw(prices[k]);
            psi_out[k] = adversary->psi_raw(portfolio.records[idx[k]].s);
        }
        std::vector<double> phi_hat = hgr::standardize_batch(phi_out);
        std::vector<double> psi_hat = hgr::standardize_batch(psi_out);
        double dot = 0.0;
        for (std::size_t k = 0; k < idx.size(); ++k) dot += phi_hat[k] * psi_hat[k];
        // the trainer penalizes the absolute estimate, so that is the term
        // that decomposes into the logged objective
        s.fairness_term = std::abs(dot * inv);
        s.hgr_estimate = s.fairness_term;
    }
    s.objective = -s.gwm_term - config.lambda_f * s.conversion_term +
                  config.lambda_s * s.fairness_term;
    return s;
}

TrainResult train_core(const data::Portfolio& portfolio, const models::ConversionModel& fmodel,
                       const models::PremiumModel& hmodel, models::CoefficientModel cmodel,
                       std::optional<hgr::AdversaryPair> adversary, const TrainConfig& config) {
    config.validate();
    const auto& records = portfolio.records;
    if (records.empty()) throw ValidationError("train: empty portfolio");

    std::vector<std::size_t> train_idx = portfolio.idx(data::Split::Train);
    std::vector<std::size_t> dev_idx = portfolio.idx(data::Split::Dev);
    if (train_idx.empty()) throw ValidationError("train: empty training split");
    if (adversary) {
        for (std::size_t i : train_idx)
            if (records[i].s.empty())
                throw ValidationError("train: fair mode needs sensitive values on every record");
    }

    // Per-record constants: pure premium and the conversion model's
    // feature-only logit (only the price moves during this training).
    std::vector<double> premiums(records.size(), 0.0);
    std::vector<double> feature_logits(records.size(), 0.0);
    for (std::size_t i = 0; i < records.size(); ++i) {
        premiums[i] = hmodel.premium(records[i]);
        feature_logits[i] = fmodel.feature_logit(records[i].x);
    }

    TrainResult result;
    result.best = cmodel;
    result.best_dev_objective = std::numeric_limits<double>::infinity();

    Rng shuffle_rng = Rng(config.seed).fork(1);
    std::vector<std::size_t> order(train_idx);
    std::vector<std::size_t> batch_idx;
    std::vector<std::vector<double>> batch_s;
    std::vector<double> batch_prices;
    ad::Tape tape;

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        auto t0 = std::chrono::steady_clock::now();
        shuffle_rng.shuffle(order);

        for (std::size_t start = 0; start < order.size(); start += config.batch) {
            std::size_t stop = std::min(order.size(), start + config.batch);
            batch_idx.assign(order.begin() + static_cast<std::ptrdiff_t>(start),
                             order.begin() + static_cast<std::ptrdiff_t>(stop));
            const bool fair_batch = adversary && batch_idx.size() >= 2;

            if (fair_batch) {
                batch_prices.resize(batch_idx.size());
                batch_s.resize(batch_idx.size());
                for (std::size_t k = 0; k < batch_idx.size(); ++k) {
                    const auto& rec = records[batch_idx[k]];
                    batch_prices[k] = cmodel.coefficient(rec.x) * premiums[batch_idx[k]];
                    batch_s[k] = rec.s;
                }
                try {
                    for (std::size_t j = 0; j < config.ascent_steps; ++j)
                        hgr::ascent_step(*adversary, batch_prices, batch_s, config.lr_phi,
                                         config.lr_psi);
                } catch (const TrainingError& e) {
                    throw AbortedTraining(std::string("fair training aborted in adversary: ") +
                                              e.what(),
                                          "adversary", result.trace);
                } catch (const EvalError& e) {
                    throw AbortedTraining(std::string("fair training aborted in adversary: ") +
                                              e.what(),
                                          "adversary", result.trace);
                }
            }

            try {
                tape.clear();
                std::vector<ad::Var> cparams = tape.leaves(cmodel.inner.params);
                ObjectiveParts parts =
                    optigrad_objective(tape, cmodel, cparams, records, batch_idx, premiums,
                                       feature_logits, fmodel, config.lambda_f);
                ad::Var objective = parts.objective;
                if (fair_batch) {
                    ad::Var penalty = hgr::fairness_penalty(tape, *adversary, parts.prices,
                                                            batch_s);
                    // Penalize the absolute estimate. A converged adversary
                    // keeps the estimate nonnegative, where this is exactly
                    // the plain composition; when the adversary lags a sign
                    // flip, the signed term would reward anti-correlating
                    // the prices instead of decorrelating them.
                    double sign = penalty.value() >= 0.0 ? 1.0 : -1.0;
                    objective = objective + penalty * (sign * config.lambda_s);
                }
                ad::Gradients grads = tape.backward(objective);
                for (std::size_t pi = 0; pi < cmodel.inner.params.size(); ++pi) {
                    double g = grads.at(cparams[pi]);
                    if (!std::isfinite(g))
                        throw EvalError("non-finite coefficient gradient");
                    cmodel.inner.params[pi] -= config.lr_c * g;
                }
            } catch (const EvalError& e) {
                throw AbortedTraining(std::string("training aborted in coefficient step: ") +
                                          e.what(),
                                      "coefficient", result.trace);
            }
        }

        EpochStats stats = measure(portfolio, cmodel, fmodel, premiums, feature_logits, train_idx,
                                   adversary, config);
        std::optional<hgr::AdversaryPair> selection_critic;
        if (adversary && config.lambda_s > 0.0 && config.selection_refresh > 0 &&
            dev_idx.size() >= 2) {
            selection_critic = *adversary;
            std::vector<double> dev_prices(dev_idx.size());
            std::vector<std::vector<double>> dev_s(dev_idx.size());
            for (std::size_t k = 0; k < dev_idx.size(); ++k) {
                const auto& rec = records[dev_idx[k]];
                dev_prices[k] = cmodel.coefficient(rec.x) * premiums[dev_idx[k]];
                dev_s[k] = rec.s;
            }
            for (std::size_t j = 0; j < config.selection_refresh; ++j)
                hgr::ascent_step(*selection_critic, dev_prices, dev_s, config.lr_phi,
                                 config.lr_psi);
        }
        EpochStats dev_stats = dev_idx.empty()
                                   ? stats
                                   : measure(portfolio, cmodel, fmodel, premiums, feature_logits,
                                             dev_idx,
                                             selection_critic ? selection_critic : adversary,
                                             config);
        if (dev_stats.objective < result.best_dev_objective) {
            result.best_dev_objective = dev_stats.objective;
            result.best = cmodel;
            result.best_epoch = epoch;
        }
        stats.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.trace.epochs.push_back(stats);
    }

    result.last = std::move(cmodel);
    result.adversary = std::move(adversary);
    return result;
}

} // namespace

TrainResult train_optigrad(const data::Portfolio& portfolio,
                           const models::ConversionModel& fmodel,
                           const models::PremiumModel& hmodel, models::CoefficientModel cmodel,
                           const TrainConfig& config) {
    return train_core(portfolio, fmodel, hmodel, std::move(cmodel), std::nullopt, config);
}

TrainResult train_fair_optigrad(const data::Portfolio& portfolio,
                                const models::ConversionModel& fmodel,
                                const models::PremiumModel& hmodel,
                                models::CoefficientModel cmodel, hgr::AdversaryPair adversary,
                                const TrainConfig& config) {
    return train_core(portfolio, fmodel, hmodel, std::move(cmodel), std::move(adversary), config);
}

void warm_start_adversary(const data::Portfolio& portfolio, const models::PremiumModel& hmodel,
                          const models::CoefficientModel& cmodel, hgr::AdversaryPair& pair,
                          std::size_t steps, double learning_rate) {
    auto train_idx = portfolio.idx(data::Split::Train);
    if (train_idx.size() < 2 || steps == 0) return;
    std::vector<double> prices;
    std::vector<std::vector<double>> sens;
    prices.reserve(train_idx.size());
    sens.reserve(train_idx.size());
    for (std::size_t i : train_idx) {
        const auto& rec = portfolio.records[i];
        if (rec.s.empty()) return;
        prices.push_back(cmodel.coefficient(rec.x) * hmodel.premium(rec));
        sens.push_back(rec.s);
    }
    for (std::size_t k = 0; k < steps; ++k)
        hgr::ascent_step(pair, prices, sens, learning_rate, learning_rate);
}

hgr::AdversaryPair make_adversary(const data::Portfolio& portfolio,
                                  const models::PremiumModel& hmodel, double lower, double upper,
                                  std::size_t hidden, std::uint64_t seed) {
    std::size_t sdim = portfolio.records.empty() ? 1 : portfolio.records.front().s.size();
    hgr::AdversaryPair pair = hgr::AdversaryPair::init(std::max<std::size_t>(sdim, 1), hidden, seed);
    std::vector<double> prices;
    std::vector<std::vector<double>> sens;
    double mid = 0.5 * (lower + upper);
    for (std::size_t i : portfolio.idx(data::Split::Train)) {
        prices.push_back(mid * hmodel.premium(portfolio.records[i]));
        sens.push_back(portfolio.records[i].s);
    }
    pair.set_input_scale(prices, sens);
    return pair;
}

} // namespace ratekit::opt
