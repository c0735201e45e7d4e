// Acceptance suite: one check per criterion, one [PASS]/[FAIL] line each,
// nonzero exit if any selected criterion fails. `--only N` runs a single
// criterion (the ctest registration runs them individually).
//
// Everything runs on the built-in synthetic portfolio so the suite works
// offline; criterion 10 needs the external quote CSV and reports [SKIP]
// when it is not present.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "ratekit/baselines.hpp"
#include "ratekit/config.hpp"
#include "ratekit/eval.hpp"
#include "ratekit/hgr.hpp"
#include "ratekit/models.hpp"
#include "ratekit/optimize.hpp"
#include "ratekit/rdc.hpp"
#include "ratekit/rng.hpp"
#include "ratekit/synth.hpp"

using namespace ratekit;

namespace {

struct Outcome {
    bool pass = true;
    bool skipped = false;
    std::string detail;
};

void report(int n, const char* name, const Outcome& o) {
    const char* tag = o.skipped ? "[SKIP]" : (o.pass ? "[PASS]" : "[FAIL]");
    std::printf("%s criterion %d: %s%s%s\n", tag, n, name, o.detail.empty() ? "" : " -- ",
                o.detail.c_str());
    std::fflush(stdout);
}

// Shared fixture: the standard acceptance portfolio and fitted models.
struct Pipeline {
    data::Portfolio portfolio;
    models::ConversionModel fmodel;
    models::PremiumModel hmodel;

    explicit Pipeline(const synth::SynthConfig& cfg, std::uint64_t split_seed = 42) {
        data::SplitSpec split;
        split.seed = split_seed;
        portfolio = synth::make_portfolio(cfg, split);
        models::ConversionFitConfig fc;
        fmodel = models::fit_conversion(portfolio.records, portfolio.idx(data::Split::Train),
                                        portfolio.idx(data::Split::Dev), fc);
        hmodel = models::premium_from_column();
    }
};

synth::SynthConfig standard_config() {
    synth::SynthConfig cfg;
    cfg.n = 10000;
    cfg.dim = 8;
    cfg.seed = 11;
    return cfg;
}

opt::TrainConfig standard_train(double lambda_f, std::uint64_t seed) {
    opt::TrainConfig tc;
    tc.lambda_f = lambda_f;
    tc.epochs = 60;
    tc.batch = 256;
    tc.lr_c = 0.05;
    tc.seed = seed;
    return tc;
}

// -- criterion 1: gradient correctness ---------------------------------------

Outcome criterion_gradients() {
    Outcome o;
    Pipeline pipe(synth::SynthConfig{.n = 400, .dim = 5, .seed = 7});
    std::vector<double> premiums(pipe.portfolio.records.size());
    std::vector<double> logits(pipe.portfolio.records.size());
    for (std::size_t i = 0; i < premiums.size(); ++i) {
        premiums[i] = pipe.hmodel.premium(pipe.portfolio.records[i]);
        logits[i] = pipe.fmodel.feature_logit(pipe.portfolio.records[i].x);
    }

    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        Rng rng(seed + 500);
        std::vector<std::size_t> batch(8);
        for (auto& b : batch) b = rng.below(pipe.portfolio.records.size());

        const bool use_mlp = seed % 2 == 1;
        const std::size_t dim = pipe.portfolio.dim();
        std::vector<std::size_t> hidden = {6};
        auto cmodel = use_mlp ? models::CoefficientModel::make_mlp(dim, hidden, 1.2, 1.6, seed)
                              : models::CoefficientModel::make_linear(dim, 1.2, 1.6, seed);
        double lambda_f = seed % 3 == 0 ? 0.0 : 4.0;

        // margin/conversion objective
        auto plain_fn = [&](ad::Tape& t, std::span<const ad::Var> params) {
            return opt::optigrad_objective(t, cmodel, params, pipe.portfolio.records, batch,
                                           premiums, logits, pipe.fmodel, lambda_f)
                .objective;
        };
        auto rep = ad::grad_check(plain_fn, cmodel.inner.params, 1e-5, 1e-4);
        worst = std::max(worst, rep.max_rel_error);

        // full objective with a frozen adversary
        auto pair = opt::make_adversary(pipe.portfolio, pipe.hmodel, 1.2, 1.6, 8, seed + 3);
        std::vector<std::vector<double>> batch_s;
        std::vector<double> batch_prices;
        for (std::size_t i : batch) {
            batch_s.push_back(pipe.portfolio.records[i].s);
            batch_prices.push_back(cmodel.coefficient(pipe.portfolio.records[i].x) * premiums[i]);
        }
        for (int k = 0; k < 10; ++k) hgr::ascent_step(pair, batch_prices, batch_s, 0.05, 0.05);
        auto fair_fn = [&](ad::Tape& t, std::span<const ad::Var> params) {
            auto parts = opt::optigrad_objective(t, cmodel, params, pipe.portfolio.records, batch,
                                                 premiums, logits, pipe.fmodel, lambda_f);
            return parts.objective + hgr::fairness_penalty(t, pair, parts.prices, batch_s) * 50.0;
        };
        auto rep2 = ad::grad_check(fair_fn, cmodel.inner.params, 1e-5, 1e-4);
        worst = std::max(worst, rep2.max_rel_error);
        if (!rep.pass || !rep2.pass) o.pass = false;
    }
    o.detail = "max relative error " + std::to_string(worst) + " over 100 seeds (tolerance 1e-4)";
    return o;
}

// -- criterion 2: oracle equivalence ------------------------------------------

Outcome criterion_oracle_grid() {
    Outcome o;
    Pipeline pipe(synth::SynthConfig{.n = 400, .dim = 5, .seed = 19});
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < 200; ++i) idx.push_back(i);

    double worst_dc = 0.0, worst_rel = 0.0;
    for (double lambda : {0.0, 5.0, 25.0}) {
        auto fast = baselines::individual_optimize(pipe.portfolio.records, idx, pipe.fmodel,
                                                   pipe.hmodel, lambda, 1.2, 1.6, 1e-3);
        auto brute = baselines::individual_optimize(pipe.portfolio.records, idx, pipe.fmodel,
                                                    pipe.hmodel, lambda, 1.2, 1.6, 1e-5, false);
        for (std::size_t k = 0; k < idx.size(); ++k)
            worst_dc = std::max(worst_dc, std::abs(fast.coefficients[k] - brute.coefficients[k]));
        double rel = std::abs(fast.objective - brute.objective) /
                     std::max(1.0, std::abs(brute.objective));
        worst_rel = std::max(worst_rel, rel);
    }
    o.pass = worst_dc <= 2e-3 && worst_rel <= 1e-5;
    o.detail = "max coefficient gap " + std::to_string(worst_dc) + " (<= 2e-3), max objective rel gap " +
               std::to_string(worst_rel) + " (<= 1e-5)";
    return o;
}

// -- criterion 3: bound safety --------------------------------------------------

Outcome criterion_bound_safety() {
    Outcome o;
    Pipeline pipe(standard_config());
    const auto& records = pipe.portfolio.records;
    auto train_idx = pipe.portfolio.idx(data::Split::Train);
    std::size_t checked = 0;
    auto check_inside = [&](double c) {
        ++checked;
        if (!(c > 1.2 && c < 1.6)) {
            o.pass = false;
            o.detail = "coefficient " + std::to_string(c) + " not strictly inside (1.2, 1.6)";
        }
    };

    // trainers (plain and fair)
    auto init = models::CoefficientModel::make_linear(pipe.portfolio.dim(), 1.2, 1.6, 4);
    auto tc = standard_train(1.0, 5);
    tc.epochs = 25;
    auto trained = opt::train_optigrad(pipe.portfolio, pipe.fmodel, pipe.hmodel, init, tc);
    tc.lambda_s = 250.0;
    tc.lr_c = 0.01;
    tc.epochs = 60;
    auto pair = opt::make_adversary(pipe.portfolio, pipe.hmodel, 1.2, 1.6, 16, 7);
    opt::warm_start_adversary(pipe.portfolio, pipe.hmodel, init, pair, 200, tc.lr_phi);
    auto fair = opt::train_fair_optigrad(pipe.portfolio, pipe.fmodel, pipe.hmodel, init, pair, tc);
    for (const auto& rec : records) {
        check_inside(trained.best.coefficient(rec.x));
        check_inside(trained.last.coefficient(rec.x));
        check_inside(fair.best.coefficient(rec.x));
    }

    // baselines across the lambda grid
    for (double lambda : {0.0, 1.0, 5.0, 25.0}) {
        auto sol = baselines::individual_optimize(records, train_idx, pipe.fmodel, pipe.hmodel,
                                                  lambda, 1.2, 1.6);
        for (double c : sol.coefficients) check_inside(c);
        if (lambda == 1.0) {
            auto boost = baselines::fit_indirect_ratebook(records, train_idx, sol.coefficients,
                                                          1.2, 1.6);
            for (const auto& rec : records) check_inside(boost.predict(rec.x));
        }
    }
    if (o.pass) o.detail = std::to_string(checked) + " coefficients, all strictly inside (1.2, 1.6)";
    return o;
}

// -- criterion 4: reduction -------------------------------------------------------

Outcome criterion_reduction() {
    Outcome o;
    Pipeline pipe(synth::SynthConfig{.n = 3000, .dim = 6, .seed = 13});
    auto init = models::CoefficientModel::make_linear(pipe.portfolio.dim(), 1.2, 1.6, 4);
    auto tc = standard_train(2.0, 17);
    tc.epochs = 20;

    auto plain = opt::train_optigrad(pipe.portfolio, pipe.fmodel, pipe.hmodel, init, tc);
    tc.lambda_s = 0.0;
    auto pair = opt::make_adversary(pipe.portfolio, pipe.hmodel, 1.2, 1.6, 16, 23);
    auto fair = opt::train_fair_optigrad(pipe.portfolio, pipe.fmodel, pipe.hmodel, init, pair, tc);

    std::string a = models::to_json(plain.best, "fp");
    std::string b = models::to_json(fair.best, "fp");
    std::string al = models::to_json(plain.last, "fp");
    std::string bl = models::to_json(fair.last, "fp");
    o.pass = a == b && al == bl;
    o.detail = o.pass ? "parameter files bit-identical (best and final snapshots)"
                      : "parameter files differ";
    return o;
}

// -- criteria 5/6/7: frontier properties ------------------------------------------

Outcome criterion_frontier_monotonicity() {
    Outcome o;
    Pipeline pipe(standard_config());
    auto dev_idx = pipe.portfolio.idx(data::Split::Dev);

    std::string detail;
    double prev = -1.0;
    bool optigrad_ok = true;
    for (double lf : {0.0, 1.0, 5.0, 25.0}) {
        auto init = models::CoefficientModel::make_linear(pipe.portfolio.dim(), 1.2, 1.6, 4);
        auto res = opt::train_optigrad(pipe.portfolio, pipe.fmodel, pipe.hmodel, init,
                                       standard_train(lf, 5));
        double conv = eval::conversion_rate(pipe.portfolio.records, dev_idx, res.best, pipe.fmodel,
                                            pipe.hmodel);
        detail += "optigrad(" + std::to_string(lf) + ")=" + std::to_string(conv) + " ";
        if (conv < prev - 1e-9) optigrad_ok = false;
        prev = conv;
    }

    prev = -1.0;
    bool individual_ok = true;
    for (double lf : {0.0, 1.0, 5.0, 25.0}) {
        auto sol = baselines::individual_optimize(pipe.portfolio.records, dev_idx, pipe.fmodel,
                                                  pipe.hmodel, lf, 1.2, 1.6);
        double conv = eval::conversion_rate(pipe.portfolio.records, dev_idx, sol.coefficients,
                                            pipe.fmodel, pipe.hmodel, 1.2, 1.6);
        detail += "individual(" + std::to_string(lf) + ")=" + std::to_string(conv) + " ";
        if (conv < prev - 1e-12) individual_ok = false;
        prev = conv;
    }
    o.pass = optigrad_ok && individual_ok;
    o.detail = detail + (o.pass ? "(non-decreasing)" : "(violation)");
    return o;
}

Outcome criterion_near_oracle() {
    Outcome o;
    Pipeline pipe(standard_config());
    auto train_idx = pipe.portfolio.idx(data::Split::Train);

    double worst_ratio = 1e9;
    for (double lf : {0.0, 5.0}) {
        auto init = models::CoefficientModel::make_linear(pipe.portfolio.dim(), 1.2, 1.6, 4);
        auto res = opt::train_optigrad(pipe.portfolio, pipe.fmodel, pipe.hmodel, init,
                                       standard_train(lf, 5));
        auto oracle = baselines::individual_optimize(pipe.portfolio.records, train_idx,
                                                     pipe.fmodel, pipe.hmodel, lf, 1.2, 1.6);
        double trained = eval::gwm(pipe.portfolio.records, train_idx, res.best, pipe.fmodel,
                                   pipe.hmodel);
        double best = eval::gwm(pipe.portfolio.records, train_idx, oracle.coefficients,
                                pipe.fmodel, pipe.hmodel, 1.2, 1.6);
        worst_ratio = std::min(worst_ratio, trained / best);
        // per-record oracle dominance: no deployable model beats it at lf=0,
        // and the combined objective bounds it at matched lambda otherwise
        if (lf == 0.0 && trained > best * (1.0 + 1e-9)) {
            o.pass = false;
            o.detail = "trained GWM exceeds the per-record oracle at lambda_f=0; ";
        }
    }
    o.pass = o.pass && worst_ratio >= 0.95;
    o.detail += "min trained/oracle GWM ratio " + std::to_string(worst_ratio) + " (>= 0.95)";
    return o;
}

Outcome criterion_method_ordering() {
    Outcome o;
    Pipeline pipe(standard_config());

    eval::SweepContext ctx;
    ctx.portfolio = &pipe.portfolio;
    ctx.fmodel = &pipe.fmodel;
    ctx.hmodel = &pipe.hmodel;
    ctx.train = standard_train(0.0, 5);
    ctx.jobs = 2;
    ctx.score_fairness = false;   // frontier ordering needs no fairness scores

    std::vector<eval::SweepJob> jobs;
    for (double lf : {0.0, 0.5, 1.0, 2.0, 5.0, 10.0, 25.0, 50.0}) {
        jobs.push_back({"optigrad", lf, 0.0, 5});
        jobs.push_back({"individual", lf, 0.0, 5});
    }
    for (double lf : {0.0, 1.0, 5.0, 25.0}) jobs.push_back({"indirect", lf, 0.0, 5});

    auto table = eval::sweep(ctx, jobs, {});
    for (const auto& f : table.failures) std::fprintf(stderr, "sweep failure: %s\n", f.c_str());
    auto rep = eval::dominance_check(table, "optigrad", "indirect", "dev", 0.005);
    auto oracle_rep = eval::dominance_check(table, "individual", "indirect", "train", 0.005);
    o.pass = rep.b_compared >= 1 && rep.fraction >= 0.8 && oracle_rep.b_compared >= 1 &&
             oracle_rep.fraction >= 0.9;
    o.detail = rep.to_string() + "; " + oracle_rep.to_string();
    return o;
}

// -- criterion 8: fairness reduction ------------------------------------------------

Outcome criterion_fairness_reduction() {
    Outcome o;
    synth::SynthConfig cfg = standard_config();
    cfg.dependence = 0.85;
    Pipeline pipe(cfg);
    auto dev_idx = pipe.portfolio.idx(data::Split::Dev);

    eval::FairnessConfig fairness;

    std::vector<double> hgr_scores, rdc_scores;
    for (double ls : {0.0, 50.0, 250.0, 1250.0}) {
        auto init = models::CoefficientModel::make_linear(pipe.portfolio.dim(), 1.2, 1.6, 4);
        opt::TrainConfig tc;
        tc.lambda_f = 1.0;
        tc.lambda_s = ls;
        tc.epochs = 150;
        tc.lr_c = 0.01;
        tc.seed = 5;
        auto pair = opt::make_adversary(pipe.portfolio, pipe.hmodel, 1.2, 1.6, 16, 7);
        opt::warm_start_adversary(pipe.portfolio, pipe.hmodel, init, pair, 200, tc.lr_phi);
        auto res = opt::train_fair_optigrad(pipe.portfolio, pipe.fmodel, pipe.hmodel, init, pair,
                                            tc);
        std::vector<double> prices(dev_idx.size()), sens(dev_idx.size());
        for (std::size_t k = 0; k < dev_idx.size(); ++k) {
            const auto& rec = pipe.portfolio.records[dev_idx[k]];
            prices[k] = res.best.coefficient(rec.x) * pipe.hmodel.premium(rec);
            sens[k] = rec.s[0];
        }
        auto scores = eval::fairness_report(prices, sens, fairness);
        hgr_scores.push_back(scores.hgr);
        rdc_scores.push_back(scores.rdc);
        o.detail += "ls=" + std::to_string(ls) + ": hgr=" + std::to_string(scores.hgr) +
                    " rdc=" + std::to_string(scores.rdc) + "  ";
    }

    bool reduction = hgr_scores.back() <= 0.6 * hgr_scores.front() &&
                     rdc_scores.back() <= 0.6 * rdc_scores.front();
    bool trend = true;
    for (std::size_t i = 1; i < hgr_scores.size(); ++i) {
        if (hgr_scores[i] > hgr_scores[i - 1] + 0.02) trend = false;
        if (rdc_scores[i] > rdc_scores[i - 1] + 0.02) trend = false;
    }
    o.pass = reduction && trend;
    if (!reduction) o.detail += "(reduction to <= 0.6x failed)";
    if (!trend) o.detail += "(trend not non-increasing within 0.02)";
    return o;
}

// -- criterion 9: estimator calibration ----------------------------------------------

Outcome criterion_estimators() {
    Outcome o;
    hgr::HgrConfig hcfg;
    hcfg.seed = 3;
    rdc::RdcConfig rcfg;
    rcfg.seed = 3;

    for (std::size_t n : {std::size_t{500}, std::size_t{2000}}) {
        Rng rng(n);
        std::vector<double> u(n), v_ind(n), uq(n), q(n);
        for (std::size_t i = 0; i < n; ++i) {
            u[i] = rng.normal();
            v_ind[i] = rng.normal();
            uq[i] = rng.uniform(-1.0, 1.0);
            q[i] = uq[i] * uq[i];
        }
        double h_id = hgr::hgr_metric(u, u, hcfg).value;
        double r_id = rdc::rdc(u, u, rcfg);
        double h_ind = hgr::hgr_metric(u, v_ind, hcfg).value;
        double r_ind = rdc::rdc(u, v_ind, rcfg);
        double h_q = hgr::hgr_metric(uq, q, hcfg).value;
        double r_q = rdc::rdc(uq, q, rcfg);
        double pearson_q = rdc::abs_pearson(uq, q);

        char buf[256];
        std::snprintf(buf, sizeof(buf),
                      "n=%zu: id %.3f/%.3f indep %.3f/%.3f quad %.3f/%.3f |pearson| %.3f; ", n,
                      h_id, r_id, h_ind, r_ind, h_q, r_q, pearson_q);
        o.detail += buf;
        if (!(h_id >= 0.95 && r_id >= 0.99)) o.pass = false;
        if (!(h_ind <= 0.15 && r_ind <= 0.2)) o.pass = false;
        if (!(h_q >= 0.8 && r_q >= 0.8 && pearson_q <= 0.1)) o.pass = false;
    }
    return o;
}

// -- criterion 10: external dataset reproduction -------------------------------------

Outcome criterion_dataset() {
    Outcome o;
    const char* csv = std::getenv("RATEKIT_QUOTES_CSV");
    const char* config_path = std::getenv("RATEKIT_QUOTES_CONFIG");
    if (csv == nullptr || config_path == nullptr || !std::filesystem::exists(csv)) {
        o.skipped = true;
        o.detail = "external quote dataset not available offline "
                   "(set RATEKIT_QUOTES_CSV and RATEKIT_QUOTES_CONFIG to run)";
        return o;
    }
    auto run_cfg = cfg::load_config(config_path);
    auto portfolio = data::load_portfolio(csv, run_cfg.mapping, run_cfg.split);
    bool count_ok = portfolio.report.rows_loaded == 46129;
    o.detail = "records " + std::to_string(portfolio.report.rows_loaded) + " (expect 46129); ";

    auto fmodel = models::fit_conversion(portfolio.records, portfolio.idx(data::Split::Train),
                                         portfolio.idx(data::Split::Dev), run_cfg.conversion);
    // uniform uplift curve: conversion at historical prices scaled by 1+k%
    auto conv_at = [&](double uplift) {
        double acc = 0.0;
        for (const auto& rec : portfolio.records)
            acc += fmodel.predict(rec.x, rec.price_hist * uplift);
        return acc / static_cast<double>(portfolio.records.size());
    };
    double base = conv_at(1.0);
    double high = conv_at(1.5);
    char buf[128];
    std::snprintf(buf, sizeof(buf), "conversion %.3f -> %.3f under +50%% uplift", base, high);
    o.detail += buf;
    bool curve_ok = std::abs(base - 0.30) <= 0.03 && std::abs(high - 0.18) <= 0.03;
    o.pass = count_ok && curve_ok;
    return o;
}

struct Criterion {
    const char* name;
    Outcome (*run)();
};

const Criterion kCriteria[] = {
    {"gradient correctness vs central finite differences", criterion_gradients},
    {"individual grid search vs brute-force oracle", criterion_oracle_grid},
    {"bound safety across trainers and baselines", criterion_bound_safety},
    {"fair trainer with lambda_s=0 reduces to the plain trainer", criterion_reduction},
    {"dev conversion non-decreasing in lambda_f", criterion_frontier_monotonicity},
    {"trained GWM within 5% of the per-record oracle", criterion_near_oracle},
    {"optigrad dominates the indirect ratebook on dev", criterion_method_ordering},
    {"fairness scores fall with lambda_s", criterion_fairness_reduction},
    {"dependence estimators calibrated on known structures", criterion_estimators},
    {"external dataset reproduction", criterion_dataset},
};

} // namespace

int main(int argc, char** argv) {
    int only = 0;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) only = std::atoi(argv[i + 1]);
    }
    bool all_pass = true;
    for (int n = 1; n <= 10; ++n) {
        if (only != 0 && n != only) continue;
        Outcome o;
        try {
            o = kCriteria[n - 1].run();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        report(n, kCriteria[n - 1].name, o);
        if (!o.pass && !o.skipped) all_pass = false;
    }
    return all_pass ? 0 : 1;
}
