#include <doctest.h>

#include <cmath>
#include <vector>

#include "ratekit/baselines.hpp"
#include "ratekit/eval.hpp"
#include "ratekit/models.hpp"
#include "ratekit/rng.hpp"
#include "ratekit/synth.hpp"

using namespace ratekit;

namespace {

struct Fixture {
    data::Portfolio portfolio;
    models::ConversionModel fmodel;
    models::PremiumModel hmodel;

    explicit Fixture(std::size_t n = 3000, std::uint64_t seed = 61) {
        synth::SynthConfig cfg;
        cfg.n = n;
        cfg.dim = 5;
        cfg.seed = seed;
        portfolio = synth::make_portfolio(cfg, {.seed = 19});
        models::ConversionFitConfig fc;
        fc.epochs = 80;
        fmodel = models::fit_conversion(portfolio.records, portfolio.idx(data::Split::Train),
                                        portfolio.idx(data::Split::Dev), fc);
        hmodel = models::premium_from_column();
    }
};

std::vector<std::size_t> first_n(std::size_t n) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    return idx;
}

} // namespace

TEST_CASE("price-insensitive demand pushes every coefficient to the upper bound") {
    Fixture fx(200);
    auto f = fx.fmodel;
    f.w_p = 0.0;   // conversion constant in price: margin strictly increasing in c
    auto idx = first_n(50);
    auto sol = baselines::individual_optimize(fx.portfolio.records, idx, f, fx.hmodel, 0.0, 1.2,
                                              1.6);
    for (double c : sol.coefficients) CHECK(c == doctest::Approx(1.6).epsilon(1e-12));
}

TEST_CASE("huge lambda pushes every coefficient to the lower bound") {
    Fixture fx(200);
    auto f = fx.fmodel;
    f.w_p = -5.0;   // demand strictly decreasing in price
    auto idx = first_n(50);
    auto sol = baselines::individual_optimize(fx.portfolio.records, idx, f, fx.hmodel,
                                              1e6, 1.2, 1.6);
    for (double c : sol.coefficients) CHECK(c == doctest::Approx(1.2).epsilon(1e-12));
}

TEST_CASE("grid-with-refinement agrees with a much finer brute-force grid") {
    Fixture fx(250);
    auto idx = first_n(200);
    for (double lambda : {0.0, 5.0, 25.0}) {
        auto fast = baselines::individual_optimize(fx.portfolio.records, idx, fx.fmodel, fx.hmodel,
                                                   lambda, 1.2, 1.6, 1e-3);
        auto fine = baselines::individual_optimize(fx.portfolio.records, idx, fx.fmodel, fx.hmodel,
                                                   lambda, 1.2, 1.6, 1e-5, false);
        REQUIRE(fast.coefficients.size() == fine.coefficients.size());
        for (std::size_t k = 0; k < fast.coefficients.size(); ++k)
            CHECK(std::abs(fast.coefficients[k] - fine.coefficients[k]) <= 2e-3);
        CHECK(fast.objective ==
              doctest::Approx(fine.objective).epsilon(1e-5));
    }
}

TEST_CASE("discrete search on the full grid equals the continuous grid search") {
    Fixture fx(200);
    auto idx = first_n(60);
    std::vector<double> grid;
    for (int j = 0; j <= 400; ++j) grid.push_back(std::min(1.2 + 1e-3 * j, 1.6));
    auto cont = baselines::individual_optimize(fx.portfolio.records, idx, fx.fmodel, fx.hmodel,
                                               2.0, 1.2, 1.6, 1e-3, false);
    auto disc = baselines::discrete_individual_optimize(fx.portfolio.records, idx, fx.fmodel,
                                                        fx.hmodel, 2.0, grid);
    CHECK(disc.coefficients == cont.coefficients);
    CHECK(disc.objective == doctest::Approx(cont.objective).epsilon(1e-12));
}

TEST_CASE("coarse rate set never beats the continuous solution") {
    Fixture fx(400);
    auto idx = first_n(300);
    std::vector<double> rates = {1.2, 1.4, 1.6};
    auto cont = baselines::individual_optimize(fx.portfolio.records, idx, fx.fmodel, fx.hmodel,
                                               2.0, 1.2, 1.6);
    auto disc = baselines::discrete_individual_optimize(fx.portfolio.records, idx, fx.fmodel,
                                                        fx.hmodel, 2.0, rates);
    CHECK(disc.objective <= cont.objective + 1e-9);

    // and per record, since the program is separable
    for (std::size_t k = 0; k < idx.size(); ++k) {
        const auto& rec = fx.portfolio.records[idx[k]];
        double h = fx.hmodel.premium(rec);
        auto g = [&](double c) {
            double f = fx.fmodel.predict(rec.x, c * h);
            return (c - 1.0) * h * f + 2.0 * f;
        };
        CHECK(g(disc.coefficients[k]) <= g(cont.coefficients[k]) + 1e-9);
    }
}

TEST_CASE("continuous beats a 21-point ratebook on the train split") {
    Fixture fx(3000);
    auto train = fx.portfolio.idx(data::Split::Train);
    std::vector<double> rates;
    for (int j = 0; j <= 20; ++j) rates.push_back(1.2 + 0.02 * j);
    double lambda = 2.0;
    auto cont = baselines::individual_optimize(fx.portfolio.records, train, fx.fmodel, fx.hmodel,
                                               lambda, 1.2, 1.6);
    auto disc = baselines::discrete_individual_optimize(fx.portfolio.records, train, fx.fmodel,
                                                        fx.hmodel, lambda, rates);
    double gwm_cont = eval::gwm(fx.portfolio.records, train, cont.coefficients, fx.fmodel,
                                fx.hmodel, 1.2, 1.6);
    double gwm_disc = eval::gwm(fx.portfolio.records, train, disc.coefficients, fx.fmodel,
                                fx.hmodel, 1.2, 1.6);
    CHECK(cont.objective > disc.objective);
    CHECK(gwm_cont > gwm_disc * 0.999);   // margin dominates at modest lambda
}

TEST_CASE("separability: joint objective equals the sum of per-record maxima") {
    Fixture fx(300);
    auto idx = first_n(120);
    double lambda = 3.0;
    auto sol = baselines::individual_optimize(fx.portfolio.records, idx, fx.fmodel, fx.hmodel,
                                              lambda, 1.2, 1.6);
    double total = 0.0;
    for (std::size_t k = 0; k < idx.size(); ++k) {
        const auto& rec = fx.portfolio.records[idx[k]];
        double h = fx.hmodel.premium(rec);
        double f = fx.fmodel.predict(rec.x, sol.coefficients[k] * h);
        total += (sol.coefficients[k] - 1.0) * h * f + lambda * f;
    }
    CHECK(sol.objective == doctest::Approx(total).epsilon(1e-9));
}

TEST_CASE("per-record argmax is non-increasing in lambda") {
    Fixture fx(250);
    auto idx = first_n(200);
    std::vector<std::vector<double>> solutions;
    for (double lambda : {0.0, 1.0, 5.0, 25.0, 125.0}) {
        solutions.push_back(baselines::individual_optimize(fx.portfolio.records, idx, fx.fmodel,
                                                           fx.hmodel, lambda, 1.2, 1.6)
                                .coefficients);
    }
    for (std::size_t s = 1; s < solutions.size(); ++s)
        for (std::size_t k = 0; k < idx.size(); ++k)
            CHECK(solutions[s][k] <= solutions[s - 1][k] + 1e-9);
}

TEST_CASE("boosting constant targets yields a constant model with no trees") {
    Fixture fx(300);
    auto idx = first_n(100);
    std::vector<double> targets(idx.size(), 1.4);
    auto model = baselines::fit_indirect_ratebook(fx.portfolio.records, idx, targets, 1.2, 1.6);
    CHECK(model.trees.empty());
    for (std::size_t i = 0; i < 20; ++i)
        CHECK(model.predict(fx.portfolio.records[i].x) == doctest::Approx(1.4).epsilon(1e-12));
}

TEST_CASE("boosting learns a piecewise-constant target") {
    synth::SynthConfig cfg;
    cfg.n = 5000;
    cfg.dim = 5;
    cfg.seed = 99;
    auto portfolio = synth::make_portfolio(cfg, {.seed = 23});
    auto idx = portfolio.idx(data::Split::Train);
    std::vector<double> targets(idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k)
        targets[k] = portfolio.records[idx[k]].x[0] < 0.0 ? 1.2 : 1.6;
    auto model = baselines::fit_indirect_ratebook(portfolio.records, idx, targets, 1.2, 1.6);

    auto test_idx = portfolio.idx(data::Split::Test);
    double mse = 0.0;
    for (std::size_t i : test_idx) {
        double want = portfolio.records[i].x[0] < 0.0 ? 1.2 : 1.6;
        double got = model.predict(portfolio.records[i].x);
        mse += (want - got) * (want - got);
    }
    mse /= static_cast<double>(test_idx.size());
    CHECK(mse < 1e-3);
}

TEST_CASE("train MSE is non-increasing in tree count") {
    Fixture fx(1200);
    auto idx = fx.portfolio.idx(data::Split::Train);
    auto oracle = baselines::individual_optimize(fx.portfolio.records, idx, fx.fmodel, fx.hmodel,
                                                 2.0, 1.2, 1.6);
    baselines::BoostConfig cfg;
    cfg.n_trees = 250;
    auto model = baselines::fit_indirect_ratebook(fx.portfolio.records, idx, oracle.coefficients,
                                                  1.2, 1.6, cfg);

    auto mse_at = [&](std::size_t n_trees) {
        double acc = 0.0;
        for (std::size_t k = 0; k < idx.size(); ++k) {
            double pred = model.base;
            for (std::size_t t = 0; t < n_trees && t < model.trees.size(); ++t) {
                // replay boosting prefix
                const auto& tree = model.trees[t];
                int node = 0;
                while (tree[static_cast<std::size_t>(node)].feature >= 0) {
                    const auto& nd = tree[static_cast<std::size_t>(node)];
                    node = fx.portfolio.records[idx[k]].x[static_cast<std::size_t>(nd.feature)] <=
                                   nd.threshold
                               ? nd.left
                               : nd.right;
                }
                pred += model.shrinkage * tree[static_cast<std::size_t>(node)].value;
            }
            double err = oracle.coefficients[k] - pred;
            acc += err * err;
        }
        return acc / static_cast<double>(idx.size());
    };

    double prev = mse_at(0);
    for (std::size_t n = 50; n <= 250; n += 50) {
        double cur = mse_at(n);
        CHECK(cur <= prev + 1e-12);
        prev = cur;
    }
}

TEST_CASE("indirect predictions are clipped into the bounds") {
    Fixture fx(600);
    auto idx = fx.portfolio.idx(data::Split::Train);
    auto oracle = baselines::individual_optimize(fx.portfolio.records, idx, fx.fmodel, fx.hmodel,
                                                 1.0, 1.2, 1.6);
    auto model = baselines::fit_indirect_ratebook(fx.portfolio.records, idx, oracle.coefficients,
                                                  1.2, 1.6);
    for (const auto& rec : fx.portfolio.records) {
        double c = baselines::predict_indirect(model, rec.x);
        CHECK(c >= 1.2);
        CHECK(c <= 1.6);
    }
}

TEST_CASE("boosted model JSON round-trip preserves predictions") {
    Fixture fx(500);
    auto idx = first_n(300);
    auto oracle = baselines::individual_optimize(fx.portfolio.records, idx, fx.fmodel, fx.hmodel,
                                                 2.0, 1.2, 1.6);
    baselines::BoostConfig cfg;
    cfg.n_trees = 40;
    auto model = baselines::fit_indirect_ratebook(fx.portfolio.records, idx, oracle.coefficients,
                                                  1.2, 1.6, cfg);
    auto model2 = baselines::boosted_from_json(baselines::to_json(model, "fp"));
    for (std::size_t i = 0; i < 50; ++i)
        CHECK(model2.predict(fx.portfolio.records[i].x) ==
              model.predict(fx.portfolio.records[i].x));
}

TEST_CASE("individual solution CSV has a row per record with bounded coefficients") {
    Fixture fx(200);
    auto idx = first_n(40);
    auto sol = baselines::individual_optimize(fx.portfolio.records, idx, fx.fmodel, fx.hmodel, 1.0,
                                              1.2, 1.6);
    auto csv = sol.to_csv(fx.portfolio.records, fx.fmodel, fx.hmodel);
    auto rows = data::parse_csv(csv);
    REQUIRE(rows.size() == idx.size() + 1);
    for (std::size_t r = 1; r < rows.size(); ++r) {
        double c = std::stod(rows[r][1]);
        CHECK(c >= 1.2);
        CHECK(c <= 1.6);
    }
}
