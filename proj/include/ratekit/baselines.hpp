#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ratekit/data.hpp"
#include "ratekit/models.hpp"

namespace ratekit::baselines {

/// Per-customer solution of the relaxed margin/conversion program: for each
/// record, the argmax over c in [a, b] of
///   g(c) = (c - 1) * h * f(x, c*h) + lambda * f(x, c*h).
struct IndividualSolution {
    std::vector<std::size_t> record_idx;
    std::vector<double> coefficients;   // parallel to record_idx
    double lambda = 0.0;
    std::string method;                 // "grid", "grid+refine", or "discrete"
    double objective = 0.0;             // sum of per-record maxima

    std::string to_csv(std::span<const data::PortfolioRecord> records,
                       const models::ConversionModel& fmodel,
                       const models::PremiumModel& hmodel) const;
};

/// Dense grid search (default step 1e-3) with optional golden-section
/// refinement around the grid argmax. Ties keep the smallest coefficient,
/// which makes the per-record argmax non-increasing in lambda.
IndividualSolution individual_optimize(std::span<const data::PortfolioRecord> records,
                                       std::span<const std::size_t> idx,
                                       const models::ConversionModel& fmodel,
                                       const models::PremiumModel& hmodel, double lambda,
                                       double lower, double upper, double grid_step = 1e-3,
                                       bool refine = true);

/// Same program restricted to an explicit rate set (the fixed-increment
/// ratebook practice); never beats the continuous solution.
IndividualSolution discrete_individual_optimize(std::span<const data::PortfolioRecord> records,
                                                std::span<const std::size_t> idx,
                                                const models::ConversionModel& fmodel,
                                                const models::PremiumModel& hmodel, double lambda,
                                                std::span<const double> rate_set);

struct TreeNode {
    int feature = -1;      // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
};

struct BoostConfig {
    std::size_t n_trees = 300;
    std::size_t max_depth = 5;
    double shrinkage = 0.1;
    std::size_t min_leaf = 1;
};

/// Least-squares gradient boosting over depth-limited regression trees,
/// greedy variance-reduction splits, no subsampling. Predictions are
/// clipped to the coefficient bounds.
struct BoostedTreeModel {
    double base = 0.0;   // mean target
    double shrinkage = 0.1;
    std::size_t max_depth = 5;
    double lower = 1.2;
    double upper = 1.6;
    std::vector<std::vector<TreeNode>> trees;

    double predict(std::span<const double> x) const;   // clipped
    double predict_raw(std::span<const double> x) const;
};

BoostedTreeModel fit_indirect_ratebook(std::span<const data::PortfolioRecord> records,
                                       std::span<const std::size_t> idx,
                                       std::span<const double> targets, double lower, double upper,
                                       const BoostConfig& config = {});

double predict_indirect(const BoostedTreeModel& model, std::span<const double> x);

std::string to_json(const BoostedTreeModel& m, const std::string& mapping_fingerprint);
BoostedTreeModel boosted_from_json(const std::string& text);

} // namespace ratekit::baselines
