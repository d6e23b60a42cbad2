#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "aodfill/validation.hpp"
#include "doctest.h"
#include "support/oracles.hpp"

using namespace aodfill;

namespace {

SampleTable make_table(int n_sites, int n_dates, int rows_per_pair,
                       std::uint64_t seed) {
    SampleTable table;
    table.schema = FeatureSchema({"f0", "f1"});
    Rng rng(seed);
    for (int s = 0; s < n_sites; ++s) {
        for (int d = 0; d < n_dates; ++d) {
            for (int r = 0; r < rows_per_pair; ++r) {
                SampleRow row;
                row.site_id = "site_" + std::to_string(s);
                row.date = DateStamp::from_serial(16000 + d);
                row.x = static_cast<double>(s);
                row.y = static_cast<double>(s) * 2.0;
                row.features = {rng.uniform_real(-1, 1), rng.uniform_real(-1, 1)};
                row.target_047 = 5.0 * row.features[0] + rng.normal() * 0.1;
                row.target_055 = row.target_047 - 30.0;
                row.feature_validity = {1, 1};
                table.rows.push_back(std::move(row));
            }
        }
    }
    return table;
}

} // namespace

TEST_CASE("random folds are balanced and deterministic") {
    const SampleTable table = make_table(5, 2, 1, 1); // 10 rows
    const FoldPlan plan = make_folds(table, FoldKind::Random, 5, 42);
    REQUIRE(plan.assignment.size() == 10);
    std::map<int, int> sizes;
    for (const int f : plan.assignment) {
        REQUIRE(f >= 0);
        REQUIRE(f < 5);
        ++sizes[f];
    }
    REQUIRE(sizes.size() == 5);
    for (const auto& [fold, size] : sizes) CHECK(size == 2);

    const FoldPlan again = make_folds(table, FoldKind::Random, 5, 42);
    CHECK(again.assignment == plan.assignment);
    const FoldPlan other = make_folds(table, FoldKind::Random, 5, 43);
    CHECK(other.assignment != plan.assignment);
}

TEST_CASE("blocked folds never split a group") {
    const SampleTable table = make_table(11, 7, 2, 2);

    const FoldPlan spatial = make_folds(table, FoldKind::Spatial, 5, 9);
    std::map<std::string, std::set<int>> site_folds;
    for (std::size_t i = 0; i < table.rows.size(); ++i)
        site_folds[table.rows[i].site_id].insert(spatial.assignment[i]);
    std::map<int, int> sites_per_fold;
    for (const auto& [site, folds] : site_folds) {
        CHECK(folds.size() == 1);
        ++sites_per_fold[*folds.begin()];
    }
    // 11 sites over 5 folds: sizes differ by at most one site
    int lo = 1 << 30, hi = 0;
    for (const auto& [fold, count] : sites_per_fold) {
        lo = std::min(lo, count);
        hi = std::max(hi, count);
    }
    CHECK(hi - lo <= 1);

    const FoldPlan temporal = make_folds(table, FoldKind::Temporal, 5, 9);
    std::map<std::int64_t, std::set<int>> date_folds;
    for (std::size_t i = 0; i < table.rows.size(); ++i)
        date_folds[table.rows[i].date.serial()].insert(temporal.assignment[i]);
    for (const auto& [date, folds] : date_folds) CHECK(folds.size() == 1);

    // leakage check: per fold, train/test group sets are disjoint by
    // construction of the single-fold-per-group property
    for (int f = 0; f < 5; ++f) {
        std::set<std::string> train_sites, test_sites;
        for (std::size_t i = 0; i < table.rows.size(); ++i) {
            if (spatial.assignment[i] == f)
                test_sites.insert(table.rows[i].site_id);
            else
                train_sites.insert(table.rows[i].site_id);
        }
        for (const auto& site : test_sites) CHECK(!train_sites.count(site));
    }
}

TEST_CASE("blocked plans depend on the rows, not their order") {
    const SampleTable table = make_table(9, 6, 2, 5);
    SampleTable shuffled = table;
    Rng rng(3);
    rng.shuffle(shuffled.rows);

    for (const FoldKind kind : {FoldKind::Spatial, FoldKind::Temporal}) {
        const FoldPlan a = make_folds(table, kind, 4, 21);
        const FoldPlan b = make_folds(shuffled, kind, 4, 21);
        std::map<std::string, int> site_fold_a, site_fold_b;
        std::map<std::int64_t, int> date_fold_a, date_fold_b;
        for (std::size_t i = 0; i < table.rows.size(); ++i) {
            site_fold_a[table.rows[i].site_id] = a.assignment[i];
            date_fold_a[table.rows[i].date.serial()] = a.assignment[i];
        }
        for (std::size_t i = 0; i < shuffled.rows.size(); ++i) {
            site_fold_b[shuffled.rows[i].site_id] = b.assignment[i];
            date_fold_b[shuffled.rows[i].date.serial()] = b.assignment[i];
        }
        if (kind == FoldKind::Spatial) CHECK(site_fold_a == site_fold_b);
        if (kind == FoldKind::Temporal) CHECK(date_fold_a == date_fold_b);
    }
}

TEST_CASE("fold construction rejects unsatisfiable requests") {
    const SampleTable two_sites = make_table(2, 6, 1, 3);
    CHECK_THROWS_AS(make_folds(two_sites, FoldKind::Spatial, 5, 1),
                    std::invalid_argument);
    const SampleTable two_dates = make_table(6, 2, 1, 3);
    CHECK_THROWS_AS(make_folds(two_dates, FoldKind::Temporal, 5, 1),
                    std::invalid_argument);
    const SampleTable tiny = make_table(3, 1, 1, 3);
    CHECK_THROWS_AS(make_folds(tiny, FoldKind::Random, 5, 1),
                    std::invalid_argument);
    CHECK_THROWS_AS(make_folds(tiny, FoldKind::Random, 1, 1),
                    std::invalid_argument);
}

TEST_CASE("metrics formulas") {
    const std::vector<double> obs = {0.0, 1.0, 2.0, 3.0};

    const Metrics perfect = compute_metrics(obs, obs);
    CHECK(perfect.r2 == 1.0);
    CHECK(perfect.rmse == 0.0);
    CHECK(perfect.mbe == 0.0);
    CHECK(perfect.n == 4);

    std::vector<double> shifted = obs;
    for (double& v : shifted) v += 2.0;
    const Metrics shift = compute_metrics(shifted, obs);
    CHECK(shift.mbe == 2.0);
    CHECK(shift.rmse == 2.0);
    // r2 = 1 - 4n/SST with SST = 5
    CHECK(*shift.r2 == doctest::Approx(1.0 - 16.0 / 5.0));

    const std::vector<double> pred = {0.0, 1.0, 2.0, 7.0};
    const Metrics hand = compute_metrics(pred, obs);
    CHECK(hand.mbe == 1.0);
    CHECK(hand.rmse == 2.0);
    CHECK(*hand.r2 == -2.2);

    CHECK_THROWS_AS(compute_metrics(pred, std::vector<double>{1.0}),
                    std::invalid_argument);
    CHECK_THROWS_AS(compute_metrics({}, {}), std::invalid_argument);

    const Metrics degenerate =
        compute_metrics(std::vector<double>{1.0, 2.0}, std::vector<double>{5.0, 5.0});
    CHECK(!degenerate.r2.has_value()); // zero-variance observations
    CHECK(degenerate.rmse > 0.0);
}

TEST_CASE("metric identities on random vectors") {
    Rng rng(0x5eed7a11);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t n = 2 + rng.uniform_index(40);
        std::vector<double> pred(n), obs(n);
        for (std::size_t i = 0; i < n; ++i) {
            pred[i] = rng.uniform_real(-50, 50);
            obs[i] = rng.uniform_real(-50, 50);
        }
        const Metrics m = compute_metrics(pred, obs);
        CHECK(m.rmse >= std::abs(m.mbe));

        // rmse^2 = mbe^2 + variance(pred - obs)
        double var = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = pred[i] - obs[i];
            var += (d - m.mbe) * (d - m.mbe);
        }
        var /= static_cast<double>(n);
        CHECK(m.rmse * m.rmse ==
              doctest::Approx(m.mbe * m.mbe + var).epsilon(1e-9));

        // all three metrics survive a common constant shift
        const double c = rng.uniform_real(-100, 100);
        std::vector<double> pred_c = pred, obs_c = obs;
        for (double& v : pred_c) v += c;
        for (double& v : obs_c) v += c;
        const Metrics shifted = compute_metrics(pred_c, obs_c);
        CHECK(shifted.mbe == doctest::Approx(m.mbe).epsilon(1e-9));
        CHECK(shifted.rmse == doctest::Approx(m.rmse).epsilon(1e-9));
        if (m.r2)
            CHECK(*shifted.r2 == doctest::Approx(*m.r2).epsilon(1e-9));
        if (m.r2) CHECK(*m.r2 <= 1.0);
    }
}

TEST_CASE("cross_validate partitions rows and pools in fold order") {
    const SampleTable table = make_table(10, 5, 2, 4); // 100 rows
    const Matrix X = table_features(table);
    const std::vector<double> y = table_targets(table, "AOD047");
    const FoldPlan plan = make_folds(table, FoldKind::Random, 5, 11);

    // oracle trainer: returns the true targets by matching feature rows
    std::map<std::pair<double, double>, double> lookup;
    for (std::size_t i = 0; i < X.n_rows(); ++i)
        lookup[{X(i, 0), X(i, 1)}] = y[i];
    const TrainerFn oracle = [&](const Matrix&, std::span<const double>,
                                 int) -> PredictFn {
        return [&lookup](const Matrix& Xte) {
            std::vector<double> out;
            for (std::size_t r = 0; r < Xte.n_rows(); ++r)
                out.push_back(lookup.at({Xte(r, 0), Xte(r, 1)}));
            return out;
        };
    };
    const CvReport perfect = cross_validate(oracle, X, y, plan);
    REQUIRE(perfect.per_fold.size() == 5);
    std::size_t held_out_total = 0;
    for (const Metrics& m : perfect.per_fold) {
        CHECK(m.n == 20);
        CHECK(*m.r2 == 1.0);
        CHECK(m.rmse == 0.0);
        held_out_total += m.n;
    }
    CHECK(held_out_total == 100); // every row held out exactly once
    CHECK(*perfect.pooled.r2 == 1.0);

    // training-mean trainer: pooled r2 stays at or below ~0
    const TrainerFn mean_trainer = [](const Matrix&, std::span<const double> ytr,
                                      int) -> PredictFn {
        double mean = 0.0;
        for (const double v : ytr) mean += v;
        mean /= static_cast<double>(ytr.size());
        return [mean](const Matrix& Xte) {
            return std::vector<double>(Xte.n_rows(), mean);
        };
    };
    const CvReport baseline = cross_validate(mean_trainer, X, y, plan);
    CHECK(*baseline.pooled.r2 < 0.05);

    FoldPlan wrong = plan;
    wrong.assignment.pop_back();
    CHECK_THROWS_AS(cross_validate(mean_trainer, X, y, wrong),
                    std::invalid_argument);
}

TEST_CASE("report serialization carries every cell") {
    const SampleTable table = make_table(6, 3, 1, 8);
    const Matrix X = table_features(table);
    const std::vector<double> y = table_targets(table, "AOD055");
    const FoldPlan plan = make_folds(table, FoldKind::Spatial, 3, 2);
    const TrainerFn mean_trainer = [](const Matrix&, std::span<const double> ytr,
                                      int) -> PredictFn {
        double mean = 0.0;
        for (const double v : ytr) mean += v;
        mean /= static_cast<double>(ytr.size());
        return [mean](const Matrix& Xte) {
            return std::vector<double>(Xte.n_rows(), mean);
        };
    };
    const CvReport report = cross_validate(mean_trainer, X, y, plan);

    const std::string json = cv_report_to_json(report);
    CHECK(json.find("\"kind\": \"Spatial\"") != std::string::npos);
    CHECK(json.find("\"per_fold\"") != std::string::npos);
    CHECK(json.find("\"pooled\"") != std::string::npos);

    const std::string csv = cv_report_to_csv(report);
    CHECK(csv.rfind("kind,k,seed,fold,n,r2,rmse,mbe\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 3 + 1); // header+folds+pooled
    CHECK(csv.find("pooled") != std::string::npos);
}

TEST_CASE("table target selection") {
    const SampleTable table = make_table(3, 2, 1, 5);
    const auto y47 = table_targets(table, "AOD047");
    const auto y55 = table_targets(table, "AOD055");
    REQUIRE(y47.size() == table.rows.size());
    for (std::size_t i = 0; i < y47.size(); ++i)
        CHECK(y55[i] == y47[i] - 30.0);
    CHECK_THROWS_AS(table_targets(table, "AOD099"), std::invalid_argument);
}
