#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kern/baselines.hpp"
#include "kern/corpus.hpp"
#include "kern/model.hpp"

namespace kern {

double mae(std::span<const double> predictions, std::span<const double> truth);

/// Percent error over points whose truth exceeds eps; the rest are excluded
/// and counted. With no usable points the value is absent.
struct MapeResult {
    std::optional<double> value;
    int used = 0;
    int excluded = 0;
};
MapeResult mape(std::span<const double> predictions, std::span<const double> truth,
                double eps = 1e-6);

/// 1-based positions within the forecast horizon: odd -> validation,
/// even -> test. Requires a horizon of at least 2.
struct OddEvenSplit {
    std::vector<int> validation;
    std::vector<int> test;
};
OddEvenSplit odd_even_split(int horizon);

enum class Method { Mean, Last, Ar, Var, Es, Linear, Cyclic, GeoStyle, Kern };

/// Benchmark row order (KERN last).
std::span<const Method> all_methods();
const char* to_string(Method method);
std::optional<Method> method_from_string(std::string_view text);

struct SeriesForecast {
    int series_index = -1;        // into Corpus::series
    long forecast_start = 0;      // absolute grid index of the first forecast point
    std::vector<double> values;   // clamped to [0,1], length = horizon
};

struct MethodResult {
    std::string label;
    double validation_mae = 0.0;
    double test_mae = 0.0;
    double test_mae_by_series = 0.0; // mean over series of per-series MAE
    MapeResult validation_mape;
    MapeResult test_mape;
    std::vector<SeriesForecast> forecasts;
};

struct EvalReport {
    ExperimentSetting setting;
    std::string variant = "benchmark"; // or "ablation"
    std::vector<MethodResult> methods;
    std::vector<int> evaluated_series;
    std::vector<std::pair<int, std::string>> skipped; // (series index, reason)
    std::optional<double> improvement_test_mae;       // percent vs best baseline
    std::optional<double> improvement_test_mape;
    std::optional<double> improvement_validation_mae;
    std::optional<double> improvement_validation_mape;
};

struct BenchmarkOptions {
    std::vector<Method> methods;              // deduplicated, reported in table order
    const Checkpoint* checkpoint = nullptr;   // required when Kern is requested
};

/// Fits and scores every requested method on the last window of every series.
/// A series failing under any method is skipped for all of them, so every row
/// aggregates over the same series set. All forecasts are clamped to [0,1]
/// before the metrics.
EvalReport run_benchmark(const Corpus& corpus, const ExperimentSetting& setting,
                         const BenchmarkOptions& options);

/// Trains the four knowledge variants (KERN-IE, KERN-E, KERN-I, KERN) with
/// identical configs apart from the two flags and scores each like
/// run_benchmark does.
EvalReport run_ablation(const Corpus& corpus, const Taxonomy& taxonomy,
                        const ExperimentSetting& setting, const TrainConfig& base_config);

std::string render_report_csv(const EvalReport& report);
std::string render_report_table(const EvalReport& report);
/// Corpus-line-format rows with an extra marker column `forecast:<method>`.
std::string render_forecast_dump(const EvalReport& report, const Corpus& corpus);

} // namespace kern
