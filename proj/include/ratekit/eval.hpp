#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ratekit/baselines.hpp"
#include "ratekit/data.hpp"
#include "ratekit/hgr.hpp"
#include "ratekit/models.hpp"
#include "ratekit/optimize.hpp"
#include "ratekit/rdc.hpp"

namespace ratekit::eval {

/// Global written margin over the given records: sum of (c*h - h) * f(x, c*h).
/// Coefficients are validated against [lower, upper].
double gwm(std::span<const data::PortfolioRecord> records, std::span<const std::size_t> idx,
           std::span<const double> coefficients, const models::ConversionModel& fmodel,
           const models::PremiumModel& hmodel, double lower, double upper);
double gwm(std::span<const data::PortfolioRecord> records, std::span<const std::size_t> idx,
           const models::CoefficientModel& cmodel, const models::ConversionModel& fmodel,
           const models::PremiumModel& hmodel);

/// Mean predicted conversion at the commercial prices.
double conversion_rate(std::span<const data::PortfolioRecord> records,
                       std::span<const std::size_t> idx, std::span<const double> coefficients,
                       const models::ConversionModel& fmodel, const models::PremiumModel& hmodel,
                       double lower, double upper);
double conversion_rate(std::span<const data::PortfolioRecord> records,
                       std::span<const std::size_t> idx, const models::CoefficientModel& cmodel,
                       const models::ConversionModel& fmodel, const models::PremiumModel& hmodel);

struct FairnessConfig {
    rdc::RdcConfig rdc_config;
    hgr::HgrConfig hgr_config;
    std::size_t rdc_seeds = 5;        // median over this many seeds
    std::size_t max_samples = 2000;   // deterministic subsample cap for the HGR fit
    std::uint64_t subsample_seed = 99;
};

struct FairnessScores {
    double rdc = 0.0;
    double hgr = 0.0;
    double pearson = 0.0;
    bool degenerate = false;      // constant price vector
    bool hgr_converged = true;
};

/// Dependence of offered prices on a sensitive value: RDC (median over
/// seeds), the neural HGR metric, and absolute Pearson.
FairnessScores fairness_report(std::span<const double> prices, std::span<const double> sensitive,
                               const FairnessConfig& config);

// -- efficiency frontier ----------------------------------------------------

struct FrontierPoint {
    std::string method;
    double lambda_f = 0.0;
    double lambda_s = 0.0;
    std::string split;   // "train" | "dev" | "test"
    std::uint64_t seed = 0;
    double gwm = 0.0;
    double conversion_rate = 0.0;
    double rdc = 0.0;
    double hgr = 0.0;
    double pearson = 0.0;

    std::string key() const;
};

struct FrontierTable {
    std::vector<FrontierPoint> points;
    std::string config_hash;
    std::string dataset_fingerprint;
    std::string timestamp;
    std::vector<std::string> failures;   // per-point error notes, not persisted to CSV

    bool has(const std::string& key) const;
    /// Throws ValidationError on a duplicate (method, lambda_f, lambda_s,
    /// split, seed) key.
    void add(FrontierPoint p);
    void sort_canonical();

    std::string to_csv() const;
    std::string to_json() const;
    static FrontierTable from_csv(const std::string& text);
    /// Hash of the canonical CSV serialization.
    std::string content_hash() const;
};

struct SweepJob {
    std::string method;   // optigrad | fair-optigrad | individual | indirect
    double lambda_f = 0.0;
    double lambda_s = 0.0;
    std::uint64_t seed = 0;
};

struct SweepContext {
    const data::Portfolio* portfolio = nullptr;
    const models::ConversionModel* fmodel = nullptr;
    const models::PremiumModel* hmodel = nullptr;
    std::vector<std::size_t> coefficient_hidden;   // empty = linear model
    opt::TrainConfig train;                        // lambda/seed overridden per job
    std::size_t adversary_hidden = 16;
    std::size_t adversary_warm_start = 200;
    baselines::BoostConfig boost;
    double grid_step = 1e-3;
    FairnessConfig fairness;
    bool score_fairness = true;
    std::size_t sensitive_index = 0;
    std::size_t jobs = 1;
};

/// Runs every job not already present in `existing` and returns the merged,
/// canonically sorted table. Each job is a pure function of (context, job);
/// jobs fan out over a worker pool; per-job failures are recorded and the
/// sweep continues. `on_point` fires under a lock as points complete.
FrontierTable sweep(const SweepContext& context, std::span<const SweepJob> jobs,
                    FrontierTable existing,
                    const std::function<void(const FrontierPoint&)>& on_point = nullptr);

struct DominanceReport {
    std::string method_a;
    std::string method_b;
    std::string split;
    double window = 0.005;
    std::size_t b_total = 0;
    std::size_t b_compared = 0;    // B points with >= 1 A point in the window
    std::size_t b_dominated = 0;   // compared B points with max A gwm >= B gwm
    double fraction = 0.0;         // dominated / compared (0 when none compared)

    std::string to_string() const;
};

/// For each B point on the split, look for A points whose conversion rate is
/// within +-window and check whether the best of them reaches B's GWM.
/// B points with an empty window are reported but excluded from the
/// fraction.
DominanceReport dominance_check(const FrontierTable& table, const std::string& method_a,
                                const std::string& method_b, const std::string& split,
                                double window = 0.005);

/// Self-contained SVG charts: GWM vs conversion per method on a split, and
/// fairness scores vs lambda_s.
std::string frontier_svg(const FrontierTable& table, const std::string& split);
std::string fairness_svg(const FrontierTable& table, const std::string& split);

} // namespace ratekit::eval
