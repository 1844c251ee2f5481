#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kern/checkpoint.hpp"
#include "kern/corpus.hpp"
#include "kern/eval.hpp"
#include "kern/model.hpp"
#include "kern/numio.hpp"
#include "kern/report.hpp"
#include "kern/taxonomy.hpp"

namespace fs = std::filesystem;
using namespace kern;

namespace {

/// Flat key=value config file; CLI flags override whatever it sets.
std::map<std::string, std::string> load_config_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("io", "cannot open config file: " + path.string());
    std::map<std::string, std::string> kv;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const auto pos = line.find('=');
        if (pos == std::string::npos)
            throw Error("format", "config row " + std::to_string(row) + ": expected key=value");
        kv[line.substr(0, pos)] = line.substr(pos + 1);
    }
    return kv;
}

struct ConfigView {
    std::map<std::string, std::string> kv;

    std::string str(const std::string& key, const std::string& fallback) const {
        const auto it = kv.find(key);
        return it == kv.end() ? fallback : it->second;
    }
    long integer(const std::string& key, long fallback) const {
        const auto it = kv.find(key);
        if (it == kv.end()) return fallback;
        const auto v = parse_long(it->second);
        if (!v) throw Error("config", "config key '" + key + "' is not an integer");
        return *v;
    }
    double number(const std::string& key, double fallback) const {
        const auto it = kv.find(key);
        if (it == kv.end()) return fallback;
        const auto v = parse_double(it->second);
        if (!v) throw Error("config", "config key '" + key + "' is not a number");
        return *v;
    }
    bool flag(const std::string& key, bool fallback) const {
        const auto it = kv.find(key);
        if (it == kv.end()) return fallback;
        if (it->second == "true" || it->second == "1" || it->second == "on") return true;
        if (it->second == "false" || it->second == "0" || it->second == "off") return false;
        throw Error("config", "config key '" + key + "' is not a boolean");
    }
};

void write_text_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw Error("io", "cannot write: " + path.string());
    out << text;
    if (!out) throw Error("io", "failed writing: " + path.string());
}

std::size_t edit_distance(const std::string& a, const std::string& b) {
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

[[noreturn]] void unknown_element(const Corpus& corpus, const std::string& name) {
    std::vector<std::pair<std::size_t, std::string>> scored;
    for (const auto& e : corpus.elements) scored.emplace_back(edit_distance(name, e.name), e.name);
    std::sort(scored.begin(), scored.end());
    std::string hint;
    for (std::size_t i = 0; i < scored.size() && i < 3; ++i) {
        if (i) hint += ", ";
        hint += scored[i].second;
    }
    throw Error("not-found", "unknown element '" + name + "' (nearest: " + hint + ")");
}

struct SettingFlags {
    std::string name = "half-year";
    int input_len = -1;
    int horizon = -1;
    int grid_period = -1;

    ExperimentSetting resolve() const {
        ExperimentSetting s = setting_by_name(name);
        if (input_len > 0) s.input_len = input_len;
        if (horizon > 0) s.horizon = horizon;
        if (grid_period > 0) s.grid_period = grid_period;
        return s;
    }
};

TrainConfig train_config_from(const ConfigView& cfg) {
    TrainConfig t;
    t.embed_dim = static_cast<int>(cfg.integer("train.embed_dim", t.embed_dim));
    t.hidden_dim = static_cast<int>(cfg.integer("train.hidden_dim", t.hidden_dim));
    t.triplet_weight = cfg.number("train.lambda", t.triplet_weight);
    t.batch_size = static_cast<int>(cfg.integer("train.batch", t.batch_size));
    t.iterations = static_cast<int>(cfg.integer("train.iterations", t.iterations));
    t.optimizer.learning_rate = cfg.number("train.lr", t.optimizer.learning_rate);
    t.optimizer.kind = optimizer_kind_from_string(cfg.str("train.optimizer", "adam"));
    t.use_internal_knowledge = cfg.flag("train.internal", true);
    t.use_external_knowledge = cfg.flag("train.external", true);
    return t;
}

SynthConfig synth_config_from(const ConfigView& cfg) {
    SynthConfig s;
    s.cities = static_cast<int>(cfg.integer("synth.cities", s.cities));
    s.age_bands = static_cast<int>(cfg.integer("synth.age_bands", s.age_bands));
    s.genders = static_cast<int>(cfg.integer("synth.genders", s.genders));
    s.num_groups = static_cast<int>(cfg.integer("synth.groups", s.num_groups));
    s.categories = static_cast<int>(cfg.integer("synth.categories", s.categories));
    s.attributes_per_category = static_cast<int>(cfg.integer("synth.attributes", s.attributes_per_category));
    s.values_per_attribute = static_cast<int>(cfg.integer("synth.values", s.values_per_attribute));
    s.series_length = static_cast<int>(cfg.integer("synth.length", s.series_length));
    s.grid_period = static_cast<int>(cfg.integer("synth.grid", s.grid_period));
    s.noise = cfg.number("synth.noise", s.noise);
    s.base_min = cfg.number("synth.base_min", s.base_min);
    s.base_max = cfg.number("synth.base_max", s.base_max);
    s.slope_max = cfg.number("synth.slope", s.slope_max);
    s.amp_min = cfg.number("synth.amp_min", s.amp_min);
    s.amp_max = cfg.number("synth.amp_max", s.amp_max);
    s.second_harmonic = cfg.flag("synth.second_harmonic", s.second_harmonic);
    s.mirror_jitter = cfg.number("synth.mirror_jitter", s.mirror_jitter);
    return s;
}

Taxonomy load_taxonomy_for(const Corpus& corpus, const std::string& path) {
    if (path.empty()) return build_taxonomy({}, corpus.elements);
    return build_taxonomy(load_taxonomy_edges(path), corpus.elements);
}

int run(int argc, char** argv) {
    CLI::App app{"fashion-trend forecasting: synthetic corpora, the KERN model, "
                 "eight baselines and a benchmark harness"};
    app.require_subcommand(1);

    // pre-scan for --config so flag defaults can come from the file
    ConfigView cfg;
    for (int i = 1; i + 1 < argc; ++i)
        if (std::string(argv[i]) == "--config") cfg.kv = load_config_file(argv[i + 1]);
    std::string config_path_unused;
    app.add_option("--config", config_path_unused, "flat key=value config file");

    std::string corpus_path = cfg.str("corpus", "");
    std::string taxonomy_path = cfg.str("taxonomy", "");
    std::string checkpoint_path = cfg.str("checkpoint", "");
    std::string out_path = cfg.str("out", "");
    std::uint64_t seed = static_cast<std::uint64_t>(cfg.integer("seed", 1));

    SettingFlags setting;
    setting.name = cfg.str("setting", "half-year");
    setting.input_len = static_cast<int>(cfg.integer("setting.input_len", -1));
    setting.horizon = static_cast<int>(cfg.integer("setting.horizon", -1));
    setting.grid_period = static_cast<int>(cfg.integer("setting.grid_period", -1));

    TrainConfig train_cfg = train_config_from(cfg);
    SynthConfig synth_cfg = synth_config_from(cfg);

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path_unused, "flat key=value config file");
        cmd->add_option("--seed", seed, "deterministic seed");
        cmd->add_option("--out", out_path, "output path");
    };
    auto add_setting = [&](CLI::App* cmd) {
        cmd->add_option("--setting", setting.name, "half-year | one-year | geostyle");
        cmd->add_option("--input-len", setting.input_len, "override the setting's input length");
        cmd->add_option("--horizon", setting.horizon, "override the setting's horizon");
        cmd->add_option("--grid-period", setting.grid_period, "override the setting's grid period");
    };
    auto add_train_flags = [&](CLI::App* cmd) {
        cmd->add_option("--iterations", train_cfg.iterations, "training iterations");
        cmd->add_option("--batch", train_cfg.batch_size, "series windows per iteration");
        cmd->add_option("--embed-dim", train_cfg.embed_dim, "embedding width D");
        cmd->add_option("--hidden-dim", train_cfg.hidden_dim, "LSTM width H");
        cmd->add_option("--lambda", train_cfg.triplet_weight, "triplet regularization weight");
        cmd->add_option("--lr", train_cfg.optimizer.learning_rate, "learning rate");
        cmd->add_option_function<std::string>(
            "--optimizer",
            [&](const std::string& v) { train_cfg.optimizer.kind = optimizer_kind_from_string(v); },
            "sgd | adam");
        cmd->add_flag_function(
            "--no-internal",
            [&](std::int64_t) { train_cfg.use_internal_knowledge = false; },
            "drop the triplet regularizer");
        cmd->add_flag_function(
            "--no-external",
            [&](std::int64_t) { train_cfg.use_external_knowledge = false; },
            "drop the taxonomy message passing");
    };

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic corpus + taxonomy");
    add_common(synth);
    synth->add_option("--corpus", corpus_path, "corpus file to write");
    synth->add_option("--taxonomy", taxonomy_path, "taxonomy file to write");
    synth->add_option("--cities", synth_cfg.cities);
    synth->add_option("--age-bands", synth_cfg.age_bands);
    synth->add_option("--genders", synth_cfg.genders);
    synth->add_option("--groups", synth_cfg.num_groups);
    synth->add_option("--categories", synth_cfg.categories);
    synth->add_option("--attributes", synth_cfg.attributes_per_category);
    synth->add_option("--values", synth_cfg.values_per_attribute);
    synth->add_option("--length", synth_cfg.series_length);
    synth->add_option("--grid", synth_cfg.grid_period);
    synth->add_option("--noise", synth_cfg.noise);

    // ingest
    auto* ingest = app.add_subcommand("ingest", "validate + impute an existing corpus file");
    add_common(ingest);
    std::string ingest_in;
    ingest->add_option("--in", ingest_in, "corpus file to read")->required();
    ingest->add_option("--taxonomy", taxonomy_path, "taxonomy to validate against");

    // train
    auto* train = app.add_subcommand("train", "train a KERN checkpoint");
    add_common(train);
    add_setting(train);
    add_train_flags(train);
    train->add_option("--corpus", corpus_path, "corpus file");
    train->add_option("--taxonomy", taxonomy_path, "taxonomy file");
    std::string log_path = cfg.str("log", "");
    train->add_option("--log", log_path, "training log (default: <out>.log)");

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "run the benchmark or the knowledge ablation");
    add_common(evaluate);
    add_setting(evaluate);
    add_train_flags(evaluate);
    evaluate->add_option("--corpus", corpus_path, "corpus file");
    evaluate->add_option("--taxonomy", taxonomy_path, "taxonomy file (ablation)");
    evaluate->add_option("--checkpoint", checkpoint_path, "trained checkpoint (KERN rows)");
    std::string methods_arg = cfg.str("methods", "");
    evaluate->add_option("--methods", methods_arg, "comma list, e.g. mean,last,ar,kern");
    bool ablation = false;
    evaluate->add_flag("--ablation", ablation, "train + score KERN-IE/-E/-I/KERN instead");
    bool dump_forecasts = false;
    evaluate->add_flag("--dump-forecasts", dump_forecasts, "also write per-series forecasts");

    // forecast
    auto* forecast = app.add_subcommand("forecast", "forecast one (group, element) series");
    add_common(forecast);
    forecast->add_option("--corpus", corpus_path, "corpus file");
    forecast->add_option("--checkpoint", checkpoint_path, "trained checkpoint")->required();
    int f_city = 0, f_age = 0, f_gender = 0;
    std::string f_element;
    forecast->add_option("--city", f_city, "group city id");
    forecast->add_option("--age", f_age, "group age band (default 0)");
    forecast->add_option("--gender", f_gender, "group gender id (default 0)");
    forecast->add_option("--element", f_element, "fashion element name")->required();

    // report
    auto* report = app.add_subcommand("report", "rank trend risers/fallers for one group");
    add_common(report);
    report->add_option("--corpus", corpus_path, "corpus file");
    report->add_option("--checkpoint", checkpoint_path, "trained checkpoint")->required();
    int r_city = 0, r_age = 0, r_gender = 0;
    int r_top = static_cast<int>(cfg.integer("report.top", 5));
    report->add_option("--city", r_city, "group city id");
    report->add_option("--age", r_age, "group age band (default 0)");
    report->add_option("--gender", r_gender, "group gender id (default 0)");
    report->add_option("--top", r_top, "entries per section");

    CLI11_PARSE(app, argc, argv);

    if (synth->parsed()) {
        if (corpus_path.empty() || taxonomy_path.empty())
            throw Error("usage", "synth needs --corpus and --taxonomy output paths");
        const Corpus corpus = generate_synthetic_corpus(synth_cfg, seed);
        save_corpus(corpus, corpus_path);
        save_taxonomy_edges(synthetic_taxonomy_edges(synth_cfg), taxonomy_path);
        std::cout << "wrote " << corpus.series.size() << " series (" << corpus.groups.size()
                  << " groups x " << corpus.elements.size() << " elements) to " << corpus_path
                  << "\n";
        return 0;
    }

    if (ingest->parsed()) {
        if (out_path.empty()) throw Error("usage", "ingest needs --out");
        Corpus corpus = load_corpus(ingest_in);
        if (!taxonomy_path.empty()) load_taxonomy_for(corpus, taxonomy_path);
        std::size_t dropped = 0;
        std::vector<TimeSeries> kept;
        for (const auto& s : corpus.series) {
            if (s.missing_fraction() > 0.5) {
                ++dropped;
                continue;
            }
            kept.push_back(impute_missing(s));
        }
        if (kept.empty()) throw Error("data", "ingest: every series was dropped");
        corpus.series = std::move(kept);
        save_corpus(corpus, out_path);
        std::cout << "kept " << corpus.series.size() << " series, dropped " << dropped
                  << " sparse series\n";
        return 0;
    }

    if (train->parsed()) {
        if (corpus_path.empty()) throw Error("usage", "train needs --corpus");
        if (out_path.empty()) throw Error("usage", "train needs --out (checkpoint path)");
        const Corpus corpus = load_corpus(corpus_path);
        if (train_cfg.use_external_knowledge && taxonomy_path.empty())
            throw Error("usage", "external knowledge needs --taxonomy (or pass --no-external)");
        const Taxonomy taxonomy = load_taxonomy_for(corpus, taxonomy_path);
        train_cfg.seed = seed;
        const ExperimentSetting resolved = setting.resolve();

        const std::string variant = !train_cfg.use_internal_knowledge && !train_cfg.use_external_knowledge
                                        ? "KERN-IE"
                                    : !train_cfg.use_external_knowledge ? "KERN-E"
                                    : !train_cfg.use_internal_knowledge ? "KERN-I"
                                                                        : "KERN";
        const std::string log_file = log_path.empty() ? out_path + ".log" : log_path;
        std::ostringstream log;
        log << "# variant=" << variant << " setting=" << resolved.name
            << " input=" << resolved.input_len << " horizon=" << resolved.horizon
            << " seed=" << seed << "\n";
        const Checkpoint ckpt = train_kern(corpus, taxonomy, train_cfg, resolved, &log);
        save_checkpoint(ckpt, out_path);
        write_text_file(log_file, log.str());
        std::cout << "trained " << variant << " for " << train_cfg.iterations
                  << " iterations; final loss "
                  << (ckpt.history.empty() ? std::string("-")
                                           : format_double(ckpt.history.back().loss))
                  << "; checkpoint " << out_path << "\n";
        return 0;
    }

    if (evaluate->parsed()) {
        if (corpus_path.empty()) throw Error("usage", "evaluate needs --corpus");
        if (out_path.empty()) throw Error("usage", "evaluate needs --out (directory)");
        const Corpus corpus = load_corpus(corpus_path);
        const ExperimentSetting resolved = setting.resolve();
        fs::create_directories(out_path);

        EvalReport result;
        if (ablation) {
            const Taxonomy taxonomy = load_taxonomy_for(corpus, taxonomy_path);
            train_cfg.seed = seed;
            result = run_ablation(corpus, taxonomy, resolved, train_cfg);
        } else {
            BenchmarkOptions options;
            if (methods_arg.empty()) {
                for (const Method m : all_methods())
                    if (m != Method::Kern || !checkpoint_path.empty()) options.methods.push_back(m);
            } else {
                std::stringstream ss(methods_arg);
                std::string tok;
                while (std::getline(ss, tok, ',')) {
                    if (tok.empty()) continue;
                    const auto m = method_from_string(tok);
                    if (!m) throw Error("usage", "unknown method '" + tok + "'");
                    options.methods.push_back(*m);
                }
                if (options.methods.empty()) throw Error("usage", "empty method list");
            }
            Checkpoint ckpt;
            const bool wants_kern = std::count(options.methods.begin(), options.methods.end(),
                                               Method::Kern) > 0;
            if (wants_kern) {
                if (checkpoint_path.empty())
                    throw Error("usage", "method KERN requires --checkpoint");
                ckpt = load_checkpoint(checkpoint_path);
                options.checkpoint = &ckpt;
            }
            result = run_benchmark(corpus, resolved, options);
        }

        const std::string stem = ablation ? "ablation" : "benchmark";
        write_text_file(fs::path(out_path) / (stem + ".csv"), render_report_csv(result));
        const std::string table = render_report_table(result);
        write_text_file(fs::path(out_path) / (stem + ".txt"), table);
        if (dump_forecasts)
            write_text_file(fs::path(out_path) / "forecasts.txt",
                            render_forecast_dump(result, corpus));
        std::cout << table;
        return 0;
    }

    if (forecast->parsed() || report->parsed()) {
        if (corpus_path.empty()) throw Error("usage", "need --corpus");
        const Corpus corpus = load_corpus(corpus_path);
        const Checkpoint ckpt = load_checkpoint(checkpoint_path);

        if (forecast->parsed()) {
            const int eid = corpus.find_element(f_element);
            if (eid < 0) unknown_element(corpus, f_element);
            const int gid = corpus.find_group({f_city, f_age, f_gender});
            if (gid < 0)
                throw Error("not-found", "no group city=" + std::to_string(f_city) + " age_band=" +
                                             std::to_string(f_age) + " gender=" +
                                             std::to_string(f_gender) + " in the corpus");
            const TimeSeries* raw = corpus.find_series(gid, eid);
            if (!raw) throw Error("not-found", "no series for that (group, element) pair");
            const int t_in = ckpt.model.input_len;
            if (static_cast<long>(raw->values.size()) < t_in)
                throw Error("data", "series shorter than the checkpoint's input window");
            const TimeSeries series = impute_missing(*raw);
            const std::size_t offset = series.values.size() - static_cast<std::size_t>(t_in);
            const std::span<const double> window(series.values.data() + offset,
                                                 static_cast<std::size_t>(t_in));
            const long window_start = series.start_index + static_cast<long>(offset);
            const int mg = ckpt.model.find_group(corpus.groups[static_cast<std::size_t>(gid)]);
            const int me = ckpt.model.find_element(f_element);
            if (mg < 0 || me < 0)
                throw Error("not-found", "checkpoint does not cover that (group, element)");
            auto values = ckpt.model.forecast(mg, me, window, window_start);
            for (auto& v : values) v = std::clamp(v, 0.0, 1.0);

            std::ostringstream out;
            out << "t,y_observed,y_forecast\n";
            for (int t = 0; t < t_in; ++t)
                out << window_start + t << ',' << format_double(window[static_cast<std::size_t>(t)])
                    << ",\n";
            for (std::size_t j = 0; j < values.size(); ++j)
                out << window_start + t_in + static_cast<long>(j) << ",," << format_double(values[j])
                    << "\n";
            if (out_path.empty())
                std::cout << out.str();
            else
                write_text_file(out_path, out.str());
            return 0;
        }

        const int gid = corpus.find_group({r_city, r_age, r_gender});
        if (gid < 0)
            throw Error("not-found", "no group city=" + std::to_string(r_city) + " age_band=" +
                                         std::to_string(r_age) + " gender=" + std::to_string(r_gender) +
                                         " in the corpus");
        const TrendReport trends = trend_report(corpus, ckpt, gid, r_top);
        const std::string text = render_trend_report(trends);
        if (out_path.empty())
            std::cout << text;
        else
            write_text_file(out_path, text);
        return 0;
    }

    throw Error("usage", "no subcommand given");
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const Error& e) {
        std::cerr << "error[" << e.cls() << "]: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error[internal]: " << e.what() << "\n";
        return 1;
    }
}
