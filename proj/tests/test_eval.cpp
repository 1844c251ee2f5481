#include <doctest.h>

#include <cmath>

#include "kern/eval.hpp"
#include "kern/rng.hpp"
#include "micro_corpus.hpp"

using namespace kern;

TEST_CASE("mae examples and symmetry") {
    const std::vector<double> a = {0.1, 0.3}, b = {0.2, 0.2};
    CHECK(mae(a, b) == doctest::Approx(0.1));
    CHECK(mae(b, a) == mae(a, b));
    CHECK(mae(a, a) == 0.0);
    CHECK_THROWS_AS(mae(a, std::vector<double>{0.1}), Error);

    Rng rng(4);
    for (int round = 0; round < 20; ++round) {
        std::vector<double> x, y;
        for (int i = 0; i < 7; ++i) {
            x.push_back(rng.uniform(0.0, 1.0));
            y.push_back(rng.uniform(0.0, 1.0));
        }
        CHECK(mae(x, y) == doctest::Approx(mae(y, x)));
    }
}

TEST_CASE("mape is a percentage and not symmetric") {
    const std::vector<double> pred = {0.09}, truth = {0.1};
    const auto r = mape(pred, truth);
    REQUIRE(r.value.has_value());
    CHECK(*r.value == doctest::Approx(10.0));

    const auto reversed = mape(truth, pred);
    REQUIRE(reversed.value.has_value());
    CHECK(*reversed.value != doctest::Approx(*r.value));
}

TEST_CASE("mape excludes zero-truth points and counts them") {
    const std::vector<double> pred = {0.5, 0.2}, truth = {0.0, 0.1};
    const auto r = mape(pred, truth);
    CHECK(r.excluded == 1);
    CHECK(r.used == 1);
    REQUIRE(r.value.has_value());
    CHECK(*r.value == doctest::Approx(100.0));

    const std::vector<double> all_zero = {0.0, 0.0};
    const auto none = mape(pred, all_zero);
    CHECK(!none.value.has_value());
    CHECK(none.excluded == 2);
}

TEST_CASE("odd/even split over the horizon") {
    const auto s4 = odd_even_split(4);
    CHECK(s4.validation == std::vector<int>{1, 3});
    CHECK(s4.test == std::vector<int>{2, 4});

    const auto s12 = odd_even_split(12);
    CHECK(s12.validation.size() == 6);
    CHECK(s12.test.size() == 6);

    const auto s2 = odd_even_split(2);
    CHECK(s2.validation == std::vector<int>{1});
    CHECK(s2.test == std::vector<int>{2});

    CHECK_THROWS_AS(odd_even_split(1), Error);

    for (int horizon = 2; horizon <= 60; ++horizon) {
        const auto s = odd_even_split(horizon);
        std::vector<bool> seen(static_cast<std::size_t>(horizon) + 1, false);
        for (const int p : s.validation) seen[static_cast<std::size_t>(p)] = true;
        for (const int p : s.test) {
            CHECK(!seen[static_cast<std::size_t>(p)]);
            seen[static_cast<std::size_t>(p)] = true;
        }
        for (int p = 1; p <= horizon; ++p) CHECK(seen[static_cast<std::size_t>(p)]);
    }
}

TEST_CASE("method names round trip and keep the benchmark order") {
    CHECK(all_methods().size() == 9);
    CHECK(std::string(to_string(all_methods()[0])) == "Mean");
    CHECK(std::string(to_string(all_methods()[8])) == "KERN");
    CHECK(method_from_string("geostyle") == Method::GeoStyle);
    CHECK(method_from_string("KERN") == Method::Kern);
    CHECK(!method_from_string("nope").has_value());
}

namespace {

Corpus constant_corpus(double value, int series_len = 16) {
    Corpus c;
    c.grid_period = 24;
    c.groups = {{0, 0, 0}};
    c.elements = {{0, "plain", ElementKind::Category}, {1, "solid", ElementKind::Category}};
    for (int e = 0; e < 2; ++e) {
        TimeSeries s;
        s.group_id = 0;
        s.element_id = e;
        s.grid_period = 24;
        s.values.assign(static_cast<std::size_t>(series_len), value);
        c.series.push_back(std::move(s));
    }
    return c;
}

const ExperimentSetting kMicroSetting{"micro", 8, 4, 24};

} // namespace

TEST_CASE("mean and last score identically on a constant corpus") {
    const Corpus c = constant_corpus(0.5); // representable: the mean is exact
    BenchmarkOptions options;
    options.methods = {Method::Mean, Method::Last};
    const EvalReport report = run_benchmark(c, kMicroSetting, options);
    REQUIRE(report.methods.size() == 2);
    CHECK(report.methods[0].label == "Mean");
    CHECK(report.methods[1].label == "Last");
    CHECK(report.methods[0].test_mae == report.methods[1].test_mae);
    CHECK(report.methods[0].validation_mae == report.methods[1].validation_mae);
    CHECK(report.methods[0].test_mae == 0.0);
}

TEST_CASE("rows come back in the paper's method order regardless of request order") {
    const Corpus c = micro::corpus();
    BenchmarkOptions options;
    options.methods = {Method::GeoStyle, Method::Mean, Method::Es, Method::Last};
    const EvalReport report = run_benchmark(c, kMicroSetting, options);
    REQUIRE(report.methods.size() == 4);
    CHECK(report.methods[0].label == "Mean");
    CHECK(report.methods[1].label == "Last");
    CHECK(report.methods[2].label == "ES");
    CHECK(report.methods[3].label == "GeoStyle");
}

TEST_CASE("an empty method list is a usage error") {
    const Corpus c = micro::corpus();
    BenchmarkOptions options;
    CHECK_THROWS_AS(run_benchmark(c, kMicroSetting, options), Error);
}

TEST_CASE("kern rows require a checkpoint and a matching setting") {
    const Corpus c = micro::corpus();
    BenchmarkOptions options;
    options.methods = {Method::Kern};
    CHECK_THROWS_AS(run_benchmark(c, kMicroSetting, options), Error);

    TrainConfig cfg = micro::config();
    cfg.iterations = 2;
    const Checkpoint ckpt = train_kern(c, micro::taxonomy(c), cfg, micro::setting());
    options.checkpoint = &ckpt;
    CHECK_NOTHROW(run_benchmark(c, kMicroSetting, options));

    const ExperimentSetting other{"micro-wide", 10, 4, 24};
    CHECK_THROWS_WITH_AS(run_benchmark(c, other, options), doctest::Contains("checkpoint"),
                         Error);
}

TEST_CASE("a series failing one method is skipped for every method") {
    // second group has a single series, so VAR cannot run there
    Corpus c = constant_corpus(0.4);
    for (auto& s : c.series) {
        for (std::size_t t = 0; t < s.values.size(); ++t)
            s.values[t] = 0.3 + 0.02 * static_cast<double>(t % 5);
    }
    c.groups.push_back({1, 0, 0});
    TimeSeries lone;
    lone.group_id = 1;
    lone.element_id = 0;
    lone.grid_period = 24;
    lone.values.assign(16, 0.6);
    c.series.push_back(lone);

    BenchmarkOptions options;
    options.methods = {Method::Mean, Method::Var};
    const EvalReport report = run_benchmark(c, kMicroSetting, options);
    CHECK(report.evaluated_series == std::vector<int>{0, 1});
    REQUIRE(report.skipped.size() == 1);
    CHECK(report.skipped[0].first == 2);
    for (const auto& m : report.methods) CHECK(m.forecasts.size() == 2);
}

TEST_CASE("series too short or too sparse are skipped with reasons") {
    Corpus c = constant_corpus(0.4);
    c.series[1].values.assign(8, 0.4); // shorter than 8+4
    BenchmarkOptions options;
    options.methods = {Method::Mean};
    const EvalReport report = run_benchmark(c, kMicroSetting, options);
    CHECK(report.evaluated_series == std::vector<int>{0});
    REQUIRE(report.skipped.size() == 1);
    CHECK(report.skipped[0].second.find("shorter") != std::string::npos);
}

TEST_CASE("benchmark reports an improvement row against the best baseline") {
    const Corpus c = micro::corpus();
    TrainConfig cfg = micro::config();
    cfg.iterations = 30;
    const Checkpoint ckpt = train_kern(c, micro::taxonomy(c), cfg, micro::setting());

    BenchmarkOptions options;
    options.methods = {Method::Mean, Method::Last, Method::Kern};
    options.checkpoint = &ckpt;
    const EvalReport report = run_benchmark(c, kMicroSetting, options);
    REQUIRE(report.methods.size() == 3);
    REQUIRE(report.improvement_test_mae.has_value());

    double best = std::min(report.methods[0].test_mae, report.methods[1].test_mae);
    const double kern_mae = report.methods[2].test_mae;
    CHECK(*report.improvement_test_mae == doctest::Approx(100.0 * (best - kern_mae) / best));
}

TEST_CASE("benchmark rendering is deterministic") {
    const Corpus c = micro::corpus();
    BenchmarkOptions options;
    options.methods = {Method::Mean, Method::Last, Method::Ar, Method::Es, Method::Linear,
                       Method::Cyclic, Method::GeoStyle, Method::Var};
    const EvalReport a = run_benchmark(c, kMicroSetting, options);
    const EvalReport b = run_benchmark(c, kMicroSetting, options);
    CHECK(render_report_csv(a) == render_report_csv(b));
    CHECK(render_report_table(a) == render_report_table(b));
    CHECK(render_forecast_dump(a, c) == render_forecast_dump(b, c));

    // forecasts are clamped into the popularity range
    for (const auto& m : a.methods)
        for (const auto& f : m.forecasts)
            for (const double v : f.values) {
                CHECK(v >= 0.0);
                CHECK(v <= 1.0);
            }
}

TEST_CASE("forecast dump rows carry the corpus line shape plus a marker") {
    const Corpus c = constant_corpus(0.5);
    BenchmarkOptions options;
    options.methods = {Method::Last};
    const EvalReport report = run_benchmark(c, kMicroSetting, options);
    const std::string dump = render_forecast_dump(report, c);
    CHECK(dump.find("forecast:Last") != std::string::npos);
    // 8 commas per row: 7 corpus fields + marker + values
    const std::string first_line = dump.substr(0, dump.find('\n'));
    CHECK(std::count(first_line.begin(), first_line.end(), ',') == 8);
}

TEST_CASE("ablation trains exactly the four knowledge variants in order") {
    const Corpus c = micro::corpus();
    TrainConfig cfg = micro::config();
    cfg.iterations = 3;
    const EvalReport report = run_ablation(c, micro::taxonomy(c), micro::setting(), cfg);
    REQUIRE(report.methods.size() == 4);
    CHECK(report.methods[0].label == "KERN-IE");
    CHECK(report.methods[1].label == "KERN-E");
    CHECK(report.methods[2].label == "KERN-I");
    CHECK(report.methods[3].label == "KERN");
    CHECK(!report.improvement_test_mae.has_value());
    for (const auto& m : report.methods) CHECK(m.test_mae >= 0.0);
}
