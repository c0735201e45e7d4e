#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ratekit/data.hpp"
#include "ratekit/hgr.hpp"
#include "ratekit/models.hpp"
#include "ratekit/tape.hpp"

namespace ratekit::opt {

struct TrainConfig {
    double lambda_f = 0.0;       // conversion weight
    double lambda_s = 0.0;       // fairness weight
    double lower = 1.2;
    double upper = 1.6;
    std::size_t epochs = 100;
    std::size_t batch = 256;
    double lr_c = 0.01;          // coefficient-model descent rate
    double lr_phi = 0.05;        // adversary ascent rates
    double lr_psi = 0.05;
    std::size_t ascent_steps = 5;
    /// Extra ascent steps applied to a copy of the adversary before the
    /// dev-objective measurement that drives best-model selection. The
    /// training critic lags the coefficient player by design; snapshots
    /// must not be chosen by a confused critic.
    std::size_t selection_refresh = 30;
    std::uint64_t seed = 0;

    void validate() const;
};

struct EpochStats {
    double objective = 0.0;
    double gwm_term = 0.0;         // mean margin
    double conversion_term = 0.0;  // mean predicted conversion
    double fairness_term = 0.0;    // mean(phi_hat * psi_hat), 0 without adversary
    double hgr_estimate = 0.0;     // |fairness_term| spot estimate
    double seconds = 0.0;
};

/// Per-epoch log, one row per epoch. Deterministic for a given config and
/// seed except for the wall-time column.
struct TrainTrace {
    std::vector<EpochStats> epochs;
    std::string to_csv() const;
};

struct TrainResult {
    models::CoefficientModel best;   // best dev-objective snapshot
    models::CoefficientModel last;
    std::size_t best_epoch = 0;
    double best_dev_objective = 0.0;
    std::optional<hgr::AdversaryPair> adversary;
    TrainTrace trace;
};

/// Training abort (non-finite objective or gradient); carries the partial
/// trace and which player went non-finite.
class AbortedTraining : public TrainingError {
public:
    AbortedTraining(const std::string& msg, std::string player_name, TrainTrace partial)
        : TrainingError(msg), player(std::move(player_name)), trace(std::move(partial)) {}

    std::string player;   // "coefficient" or "adversary"
    TrainTrace trace;
};

/// Batch objective pieces. `objective` = -gwm_term - lambda_f *
/// conversion_term; prices are exposed so the fairness penalty can share
/// the same price nodes.
struct ObjectiveParts {
    ad::Var objective;
    ad::Var gwm_term;
    ad::Var conversion_term;
    std::vector<ad::Var> prices;
};

/// Builds the relaxed margin/conversion objective for one batch on the
/// caller's tape. Gradients flow to the coefficient parameters through the
/// coefficient itself and through the price argument of the conversion
/// model.
ObjectiveParts optigrad_objective(ad::Tape& tape, const models::CoefficientModel& cmodel,
                                  std::span<const ad::Var> cparam_vars,
                                  std::span<const data::PortfolioRecord> records,
                                  std::span<const std::size_t> batch_idx,
                                  std::span<const double> premiums,
                                  std::span<const double> feature_logits,
                                  const models::ConversionModel& fmodel, double lambda_f);

/// Mini-batch gradient descent on the coefficient parameters.
TrainResult train_optigrad(const data::Portfolio& portfolio,
                           const models::ConversionModel& fmodel,
                           const models::PremiumModel& hmodel,
                           models::CoefficientModel cmodel, const TrainConfig& config);

/// Min-max training: per batch, n_a adversary ascent steps on the HGR
/// estimate of (price, sensitive), then one descent step on the coefficient
/// parameters against the full objective. With lambda_s = 0 the coefficient
/// trajectory is bit-identical to train_optigrad under the same seed.
TrainResult train_fair_optigrad(const data::Portfolio& portfolio,
                                const models::ConversionModel& fmodel,
                                const models::PremiumModel& hmodel,
                                models::CoefficientModel cmodel,
                                hgr::AdversaryPair adversary, const TrainConfig& config);

/// Adversary wired to the portfolio scale: input normalizations frozen from
/// the train-split prices at the midpoint coefficient and the train-split
/// sensitive values.
hgr::AdversaryPair make_adversary(const data::Portfolio& portfolio,
                                  const models::PremiumModel& hmodel, double lower, double upper,
                                  std::size_t hidden, std::uint64_t seed);

/// Pre-converge the adversary on the initial model's prices (full-train
/// ascent steps) so the first descent epochs see meaningful penalty
/// gradients instead of a random critic.
void warm_start_adversary(const data::Portfolio& portfolio, const models::PremiumModel& hmodel,
                          const models::CoefficientModel& cmodel, hgr::AdversaryPair& pair,
                          std::size_t steps, double learning_rate);

} // namespace ratekit::opt
