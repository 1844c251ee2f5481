#include "kern/eval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "kern/numio.hpp"

namespace kern {

double mae(std::span<const double> predictions, std::span<const double> truth) {
    if (predictions.size() != truth.size()) throw Error("data", "mae: length mismatch");
    if (predictions.empty()) throw Error("data", "mae: empty input");
    double total = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i)
        total += std::abs(predictions[i] - truth[i]);
    return total / static_cast<double>(predictions.size());
}

MapeResult mape(std::span<const double> predictions, std::span<const double> truth, double eps) {
    if (predictions.size() != truth.size()) throw Error("data", "mape: length mismatch");
    MapeResult out;
    double total = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        if (truth[i] <= eps) {
            ++out.excluded;
            continue;
        }
        total += std::abs(predictions[i] - truth[i]) / truth[i];
        ++out.used;
    }
    if (out.used > 0) out.value = 100.0 * total / static_cast<double>(out.used);
    return out;
}

OddEvenSplit odd_even_split(int horizon) {
    if (horizon < 2) throw Error("data", "odd_even_split: horizon must be >= 2");
    OddEvenSplit split;
    for (int pos = 1; pos <= horizon; ++pos)
        (pos % 2 == 1 ? split.validation : split.test).push_back(pos);
    return split;
}

std::span<const Method> all_methods() {
    static const Method order[] = {Method::Mean, Method::Last,   Method::Ar,
                                   Method::Var,  Method::Es,     Method::Linear,
                                   Method::Cyclic, Method::GeoStyle, Method::Kern};
    return order;
}

const char* to_string(Method method) {
    switch (method) {
        case Method::Mean: return "Mean";
        case Method::Last: return "Last";
        case Method::Ar: return "AR";
        case Method::Var: return "VAR";
        case Method::Es: return "ES";
        case Method::Linear: return "Linear";
        case Method::Cyclic: return "Cyclic";
        case Method::GeoStyle: return "GeoStyle";
        case Method::Kern: return "KERN";
    }
    return "?";
}

std::optional<Method> method_from_string(std::string_view text) {
    std::string lower(text);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    for (const Method m : all_methods()) {
        std::string name = to_string(m);
        std::transform(name.begin(), name.end(), name.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        if (name == lower) return m;
    }
    return std::nullopt;
}

namespace {

struct Candidate {
    int series_index = -1;
    Sample test_sample;
    long window_start = 0; // absolute grid index of the input window start
};

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

/// order selection by one-step-style holdout on the tail of the fit window
int pick_ar_order(std::span<const double> window, int horizon) {
    const int n = static_cast<int>(window.size());
    const int holdout = std::min(horizon, std::max(1, n / 3));
    const int fit_len = n - holdout;
    int best_order = -1;
    double best_mae = std::numeric_limits<double>::infinity();
    for (int p = 1; p <= 8; ++p) {
        if (fit_len <= p + 1) break;
        const auto fit = ar_fit(window.subspan(0, static_cast<std::size_t>(fit_len)), p);
        const auto pred =
            ar_forecast(fit, window.subspan(0, static_cast<std::size_t>(fit_len)), holdout);
        const double err = mae(pred, window.subspan(static_cast<std::size_t>(fit_len)));
        if (err < best_mae) {
            best_mae = err;
            best_order = p;
        }
    }
    if (best_order < 0) throw Error("data", "ar: window too short for any order");
    return best_order;
}

int pick_var_order(const std::vector<std::vector<double>>& windows, int horizon) {
    const int n = static_cast<int>(windows.front().size());
    const int holdout = std::min(horizon, std::max(1, n / 3));
    const int fit_len = n - holdout;
    int best_order = -1;
    double best_mae = std::numeric_limits<double>::infinity();
    for (int p = 1; p <= 8; ++p) {
        if (fit_len <= p + 1) break;
        std::vector<std::vector<double>> head(windows.size());
        for (std::size_t s = 0; s < windows.size(); ++s)
            head[s].assign(windows[s].begin(), windows[s].begin() + fit_len);
        const auto fit = var_fit(head, p);
        const auto pred = var_forecast(fit, head, holdout);
        double err = 0.0;
        for (std::size_t s = 0; s < windows.size(); ++s)
            err += mae(pred[s], std::span<const double>(windows[s]).subspan(
                                    static_cast<std::size_t>(fit_len)));
        err /= static_cast<double>(windows.size());
        if (err < best_mae) {
            best_mae = err;
            best_order = p;
        }
    }
    if (best_order < 0) throw Error("data", "var: window too short for any order");
    return best_order;
}

using ForecastMap = std::map<int, std::vector<double>>; // series index -> horizon values

ForecastMap forecast_with_method(Method method, const std::vector<Candidate>& candidates,
                                 const Corpus& corpus, const ExperimentSetting& setting,
                                 const Checkpoint* checkpoint,
                                 std::map<int, std::string>& failures) {
    ForecastMap out;
    const int horizon = setting.horizon;

    auto attempt = [&](const Candidate& c, auto&& fn) {
        try {
            out[c.series_index] = fn();
        } catch (const Error& e) {
            failures.emplace(c.series_index, std::string(to_string(method)) + ": " + e.what());
        }
    };

    if (method == Method::Var) {
        std::map<int, std::vector<const Candidate*>> by_group;
        for (const auto& c : candidates)
            by_group[corpus.series[static_cast<std::size_t>(c.series_index)].group_id].push_back(&c);
        for (auto& [group_id, members] : by_group) {
            (void)group_id;
            std::vector<const Candidate*> aligned;
            for (const Candidate* c : members) {
                if (c->window_start == members.front()->window_start) {
                    aligned.push_back(c);
                } else {
                    failures.emplace(c->series_index, "VAR: window not aligned with its group");
                }
            }
            if (aligned.size() < 2) {
                for (const Candidate* c : aligned)
                    failures.emplace(c->series_index, "VAR: group has fewer than two usable series");
                continue;
            }
            try {
                std::vector<std::vector<double>> windows;
                windows.reserve(aligned.size());
                for (const Candidate* c : aligned) windows.push_back(c->test_sample.input);
                const int order = pick_var_order(windows, horizon);
                const auto fit = var_fit(windows, order);
                const auto preds = var_forecast(fit, windows, horizon);
                for (std::size_t s = 0; s < aligned.size(); ++s)
                    out[aligned[s]->series_index] = preds[s];
            } catch (const Error& e) {
                for (const Candidate* c : aligned)
                    failures.emplace(c->series_index, std::string("VAR: ") + e.what());
            }
        }
        return out;
    }

    for (const auto& c : candidates) {
        const auto& input = c.test_sample.input;
        switch (method) {
            case Method::Mean:
                attempt(c, [&] { return mean_forecast(input, horizon); });
                break;
            case Method::Last:
                attempt(c, [&] { return last_forecast(input, horizon); });
                break;
            case Method::Ar:
                attempt(c, [&] {
                    const int order = pick_ar_order(input, horizon);
                    return ar_forecast(ar_fit(input, order), input, horizon);
                });
                break;
            case Method::Es:
                attempt(c, [&] { return es_forecast(es_fit(input), horizon); });
                break;
            case Method::Linear:
            case Method::Cyclic:
            case Method::GeoStyle: {
                const BasisKind kind = method == Method::Linear   ? BasisKind::Linear
                                       : method == Method::Cyclic ? BasisKind::Cyclic
                                                                  : BasisKind::GeoStyle;
                attempt(c, [&] {
                    const auto fit = basis_fit(input, c.window_start, kind, setting.grid_period);
                    return basis_forecast(fit, c.window_start + static_cast<long>(input.size()),
                                          horizon);
                });
                break;
            }
            case Method::Kern:
                attempt(c, [&] {
                    const KernModel& model = checkpoint->model;
                    const auto& s = corpus.series[static_cast<std::size_t>(c.series_index)];
                    const auto& group = corpus.groups[static_cast<std::size_t>(s.group_id)];
                    const auto& element = corpus.elements[static_cast<std::size_t>(s.element_id)];
                    const int gid = model.find_group(group);
                    const int eid = model.find_element(element.name);
                    if (gid < 0 || eid < 0)
                        throw Error("data", "series not covered by the checkpoint catalogs");
                    return model.forecast(gid, eid, c.test_sample.input, c.window_start);
                });
                break;
            case Method::Var:
                break; // handled above
        }
    }
    return out;
}

MethodResult aggregate(const std::string& label, const std::vector<Candidate>& candidates,
                       const std::set<int>& skip, const ForecastMap& forecasts,
                       const ExperimentSetting& setting) {
    const auto split = odd_even_split(setting.horizon);
    MethodResult result;
    result.label = label;

    std::vector<double> val_pred, val_truth, test_pred, test_truth;
    std::vector<double> per_series_test_mae;
    for (const auto& c : candidates) {
        if (skip.count(c.series_index)) continue;
        const auto it = forecasts.find(c.series_index);
        if (it == forecasts.end()) continue;
        SeriesForecast sf;
        sf.series_index = c.series_index;
        sf.forecast_start = c.window_start + static_cast<long>(c.test_sample.input.size());
        sf.values.reserve(it->second.size());
        for (const double v : it->second) sf.values.push_back(clamp01(v));

        std::vector<double> series_test_pred, series_test_truth;
        for (const int pos : split.validation) {
            val_pred.push_back(sf.values[static_cast<std::size_t>(pos - 1)]);
            val_truth.push_back(c.test_sample.target[static_cast<std::size_t>(pos - 1)]);
        }
        for (const int pos : split.test) {
            test_pred.push_back(sf.values[static_cast<std::size_t>(pos - 1)]);
            test_truth.push_back(c.test_sample.target[static_cast<std::size_t>(pos - 1)]);
            series_test_pred.push_back(sf.values[static_cast<std::size_t>(pos - 1)]);
            series_test_truth.push_back(c.test_sample.target[static_cast<std::size_t>(pos - 1)]);
        }
        per_series_test_mae.push_back(mae(series_test_pred, series_test_truth));
        result.forecasts.push_back(std::move(sf));
    }
    if (val_pred.empty()) throw Error("data", "benchmark: no series survived the skip rules");

    result.validation_mae = mae(val_pred, val_truth);
    result.test_mae = mae(test_pred, test_truth);
    result.validation_mape = mape(val_pred, val_truth);
    result.test_mape = mape(test_pred, test_truth);
    result.test_mae_by_series =
        std::accumulate(per_series_test_mae.begin(), per_series_test_mae.end(), 0.0) /
        static_cast<double>(per_series_test_mae.size());
    return result;
}

std::vector<Candidate> collect_candidates(const Corpus& corpus, const ExperimentSetting& setting,
                                          std::vector<std::pair<int, std::string>>& skipped) {
    std::vector<Candidate> candidates;
    for (std::size_t si = 0; si < corpus.series.size(); ++si) {
        const auto& raw = corpus.series[si];
        const long window = setting.input_len + setting.horizon;
        if (static_cast<long>(raw.values.size()) < window) {
            skipped.emplace_back(static_cast<int>(si), "series shorter than the window");
            continue;
        }
        if (raw.missing_fraction() > 0.5) {
            skipped.emplace_back(static_cast<int>(si), "more than half the points missing");
            continue;
        }
        const TimeSeries series = impute_missing(raw);
        auto samples = make_samples(series, setting.input_len, setting.horizon, 1);
        Candidate c;
        c.series_index = static_cast<int>(si);
        c.test_sample = std::move(samples.back());
        c.window_start = series.start_index + static_cast<long>(series.values.size()) - window;
        candidates.push_back(std::move(c));
    }
    return candidates;
}

void compute_improvements(EvalReport& report) {
    const MethodResult* kern = nullptr;
    for (const auto& m : report.methods)
        if (m.label == "KERN") kern = &m;
    if (!kern || report.methods.size() < 2) return;

    auto best_of = [&](auto&& get) {
        std::optional<double> best;
        for (const auto& m : report.methods) {
            if (m.label == "KERN") continue;
            const std::optional<double> v = get(m);
            if (!v) continue;
            if (!best || *v < *best) best = v;
        }
        return best;
    };
    auto improv = [](std::optional<double> best, std::optional<double> ours) -> std::optional<double> {
        if (!best || !ours || *best <= 0.0) return std::nullopt;
        return 100.0 * (*best - *ours) / *best;
    };
    report.improvement_test_mae =
        improv(best_of([](const MethodResult& m) { return std::optional<double>(m.test_mae); }),
               kern->test_mae);
    report.improvement_validation_mae = improv(
        best_of([](const MethodResult& m) { return std::optional<double>(m.validation_mae); }),
        kern->validation_mae);
    report.improvement_test_mape =
        improv(best_of([](const MethodResult& m) { return m.test_mape.value; }),
               kern->test_mape.value);
    report.improvement_validation_mape =
        improv(best_of([](const MethodResult& m) { return m.validation_mape.value; }),
               kern->validation_mape.value);
}

} // namespace

EvalReport run_benchmark(const Corpus& corpus, const ExperimentSetting& setting,
                         const BenchmarkOptions& options) {
    if (options.methods.empty()) throw Error("usage", "benchmark: empty method list");
    std::set<Method> requested(options.methods.begin(), options.methods.end());
    if (requested.count(Method::Kern)) {
        if (!options.checkpoint)
            throw Error("config", "method KERN requires a trained checkpoint");
        const KernModel& m = options.checkpoint->model;
        if (m.input_len != setting.input_len || m.horizon != setting.horizon ||
            m.grid_period != setting.grid_period)
            throw Error("config", "checkpoint was trained for input/horizon/grid " +
                                      std::to_string(m.input_len) + "/" + std::to_string(m.horizon) +
                                      "/" + std::to_string(m.grid_period) + " but the setting '" +
                                      setting.name + "' needs " + std::to_string(setting.input_len) +
                                      "/" + std::to_string(setting.horizon) + "/" +
                                      std::to_string(setting.grid_period));
    }

    EvalReport report;
    report.setting = setting;
    report.variant = "benchmark";

    const auto candidates = collect_candidates(corpus, setting, report.skipped);
    if (candidates.empty()) throw Error("data", "benchmark: no series long enough to evaluate");

    std::map<int, std::string> failures;
    std::map<Method, ForecastMap> forecasts;
    for (const Method m : all_methods()) {
        if (!requested.count(m)) continue;
        forecasts[m] =
            forecast_with_method(m, candidates, corpus, setting, options.checkpoint, failures);
    }

    std::set<int> skip;
    for (const auto& [series_index, reason] : failures) {
        skip.insert(series_index);
        report.skipped.emplace_back(series_index, reason);
    }
    std::sort(report.skipped.begin(), report.skipped.end());

    for (const Method m : all_methods()) {
        if (!requested.count(m)) continue;
        report.methods.push_back(aggregate(to_string(m), candidates, skip, forecasts[m], setting));
    }
    for (const auto& c : candidates)
        if (!skip.count(c.series_index)) report.evaluated_series.push_back(c.series_index);

    compute_improvements(report);
    return report;
}

EvalReport run_ablation(const Corpus& corpus, const Taxonomy& taxonomy,
                        const ExperimentSetting& setting, const TrainConfig& base_config) {
    struct Variant {
        const char* label;
        bool internal;
        bool external;
    };
    static const Variant variants[] = {{"KERN-IE", false, false},
                                       {"KERN-E", true, false},
                                       {"KERN-I", false, true},
                                       {"KERN", true, true}};

    EvalReport report;
    report.setting = setting;
    report.variant = "ablation";

    const auto candidates = collect_candidates(corpus, setting, report.skipped);
    if (candidates.empty()) throw Error("data", "ablation: no series long enough to evaluate");

    std::map<int, std::string> failures;
    std::vector<ForecastMap> per_variant;
    for (const auto& v : variants) {
        TrainConfig config = base_config;
        config.use_internal_knowledge = v.internal;
        config.use_external_knowledge = v.external;
        const Checkpoint ckpt = train_kern(corpus, taxonomy, config, setting);
        per_variant.push_back(forecast_with_method(Method::Kern, candidates, corpus, setting, &ckpt,
                                                   failures));
    }

    std::set<int> skip;
    for (const auto& [series_index, reason] : failures) {
        skip.insert(series_index);
        report.skipped.emplace_back(series_index, reason);
    }
    std::sort(report.skipped.begin(), report.skipped.end());

    for (std::size_t i = 0; i < std::size(variants); ++i)
        report.methods.push_back(
            aggregate(variants[i].label, candidates, skip, per_variant[i], setting));
    for (const auto& c : candidates)
        if (!skip.count(c.series_index)) report.evaluated_series.push_back(c.series_index);
    return report;
}

namespace {

std::string fixed(double v, int digits) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

std::string opt_fixed(const std::optional<double>& v, int digits) {
    return v ? fixed(*v, digits) : std::string("-");
}

} // namespace

std::string render_report_csv(const EvalReport& report) {
    std::ostringstream out;
    out << "table," << report.variant << "\n";
    out << "setting," << report.setting.name << "\n";
    out << "input_len," << report.setting.input_len << "\n";
    out << "horizon," << report.setting.horizon << "\n";
    out << "grid_period," << report.setting.grid_period << "\n";
    out << "evaluated_series," << report.evaluated_series.size() << "\n";
    out << "skipped_series," << report.skipped.size() << "\n";
    out << "method,validation_mae,validation_mape,test_mae,test_mape,test_mae_by_series,"
           "mape_excluded_validation,mape_excluded_test\n";
    for (const auto& m : report.methods) {
        out << m.label << ',' << format_double(m.validation_mae) << ','
            << (m.validation_mape.value ? format_double(*m.validation_mape.value) : "") << ','
            << format_double(m.test_mae) << ','
            << (m.test_mape.value ? format_double(*m.test_mape.value) : "") << ','
            << format_double(m.test_mae_by_series) << ',' << m.validation_mape.excluded << ','
            << m.test_mape.excluded << "\n";
    }
    if (report.improvement_test_mae) {
        out << "improv(%)," << (report.improvement_validation_mae
                                    ? format_double(*report.improvement_validation_mae)
                                    : "")
            << ','
            << (report.improvement_validation_mape
                    ? format_double(*report.improvement_validation_mape)
                    : "")
            << ',' << format_double(*report.improvement_test_mae) << ','
            << (report.improvement_test_mape ? format_double(*report.improvement_test_mape) : "")
            << ",,,\n";
    }
    return out.str();
}

std::string render_report_table(const EvalReport& report) {
    std::ostringstream out;
    out << (report.variant == "ablation" ? "Knowledge ablation" : "Benchmark") << " ("
        << report.setting.name << ": " << report.setting.input_len << " in / "
        << report.setting.horizon << " out, grid " << report.setting.grid_period << ")\n";
    char line[160];
    std::snprintf(line, sizeof(line), "%-10s %12s %12s %12s %12s %18s\n", "method", "val MAE",
                  "val MAPE", "test MAE", "test MAPE", "test MAE (series)");
    out << line;
    for (const auto& m : report.methods) {
        std::snprintf(line, sizeof(line), "%-10s %12s %12s %12s %12s %18s\n", m.label.c_str(),
                      fixed(m.validation_mae, 4).c_str(), opt_fixed(m.validation_mape.value, 2).c_str(),
                      fixed(m.test_mae, 4).c_str(), opt_fixed(m.test_mape.value, 2).c_str(),
                      fixed(m.test_mae_by_series, 4).c_str());
        out << line;
    }
    if (report.improvement_test_mae) {
        std::snprintf(line, sizeof(line), "%-10s %12s %12s %12s %12s %18s\n", "improv(%)",
                      opt_fixed(report.improvement_validation_mae, 2).c_str(),
                      opt_fixed(report.improvement_validation_mape, 2).c_str(),
                      opt_fixed(report.improvement_test_mae, 2).c_str(),
                      opt_fixed(report.improvement_test_mape, 2).c_str(), "");
        out << line;
    }
    out << report.evaluated_series.size() << " series evaluated, " << report.skipped.size()
        << " skipped";
    int excluded_val = 0, excluded_test = 0;
    if (!report.methods.empty()) {
        excluded_val = report.methods.front().validation_mape.excluded;
        excluded_test = report.methods.front().test_mape.excluded;
    }
    out << "; MAPE excluded " << excluded_val << " validation / " << excluded_test
        << " test points with truth <= 1e-6\n";
    return out.str();
}

std::string render_forecast_dump(const EvalReport& report, const Corpus& corpus) {
    std::ostringstream out;
    for (const auto& m : report.methods) {
        for (const auto& f : m.forecasts) {
            const auto& s = corpus.series[static_cast<std::size_t>(f.series_index)];
            const auto& g = corpus.groups[static_cast<std::size_t>(s.group_id)];
            const auto& e = corpus.elements[static_cast<std::size_t>(s.element_id)];
            out << g.city << ',' << g.age_band << ',' << g.gender << ',' << e.name << ','
                << to_string(e.kind) << ',' << s.grid_period << ',' << f.forecast_start
                << ",forecast:" << m.label << ',';
            for (std::size_t i = 0; i < f.values.size(); ++i) {
                if (i) out << ';';
                out << format_double(f.values[i]);
            }
            out << '\n';
        }
    }
    return out.str();
}

} // namespace kern
