#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ratekit/baselines.hpp"
#include "ratekit/data.hpp"
#include "ratekit/eval.hpp"
#include "ratekit/models.hpp"
#include "ratekit/optimize.hpp"
#include "ratekit/synth.hpp"

namespace ratekit::cfg {

/// Whole-run configuration, loadable from a TOML-style key/value file
/// ([section] headers, `key = value` lines, # comments; strings, numbers,
/// booleans and flat arrays). Unknown keys are rejected so typos cannot
/// silently fall back to defaults. Hyperparameters keep their usual symbol
/// names (lambda_f, lambda_s, a, b, n_a, ...).
struct RunConfig {
    // [data]
    std::string csv_path;
    data::ColumnMapping mapping;
    // [split]
    data::SplitSpec split;
    // [conversion]
    models::ConversionFitConfig conversion;
    // [premium]
    std::string premium_mode = "column";   // "column" | "fit"
    double premium_ridge = 1e-8;
    // [coefficient]
    std::string coefficient_kind = "linear";   // "linear" | "mlp"
    std::vector<std::size_t> coefficient_hidden = {32, 32};
    std::uint64_t coefficient_seed = 3;
    // [train] (+ bounds a, b)
    opt::TrainConfig train;
    // [adversary]
    std::size_t adversary_hidden = 16;
    std::uint64_t adversary_seed = 7;
    std::size_t adversary_warm_start = 200;
    // [individual]
    double grid_step = 1e-3;
    bool grid_refine = true;
    std::vector<double> rate_set;   // discrete variant, optional
    // [indirect]
    baselines::BoostConfig boost;
    // [fairness] (+ [hgr_metric], [rdc])
    eval::FairnessConfig fairness;
    std::string fairness_sensitive;   // column name; empty = first sensitive column
    // [sweep]
    std::vector<std::string> sweep_methods = {"optigrad", "individual", "indirect"};
    std::vector<double> sweep_lambda_f = {0.0, 1.0, 5.0, 25.0};
    std::vector<double> sweep_lambda_s = {0.0};
    std::vector<std::uint64_t> sweep_seeds = {5};
    // [synth]
    synth::SynthConfig synth;
    // [output]
    std::string out_dir = "out";
    std::size_t jobs = 1;

    /// Canonical serialization of every setting; hashed into manifests.
    std::string canonical() const;
    std::string hash() const;
};

RunConfig load_config(const std::string& path);
RunConfig parse_config(const std::string& text);

} // namespace ratekit::cfg
