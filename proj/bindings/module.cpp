#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "kern/baselines.hpp"
#include "kern/checkpoint.hpp"
#include "kern/corpus.hpp"
#include "kern/eval.hpp"
#include "kern/model.hpp"
#include "kern/report.hpp"
#include "kern/taxonomy.hpp"

namespace py = pybind11;
using namespace kern;

namespace {

Taxonomy taxonomy_for(const Corpus& corpus,
                      const std::vector<std::pair<std::string, std::string>>& edges) {
    return build_taxonomy(edges, corpus.elements);
}

std::vector<Method> parse_methods(const std::vector<std::string>& names) {
    std::vector<Method> out;
    for (const auto& n : names) {
        const auto m = method_from_string(n);
        if (!m) throw Error("usage", "unknown method '" + n + "'");
        out.push_back(*m);
    }
    return out;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "trend forecasting core: corpora, the KERN model, baselines and evaluation";

    py::register_exception<Error>(m, "KernError");

    py::enum_<ElementKind>(m, "ElementKind")
        .value("CATEGORY", ElementKind::Category)
        .value("ATTRIBUTE", ElementKind::Attribute)
        .value("ATTRIBUTE_VALUE", ElementKind::AttributeValue);

    py::class_<UserGroup>(m, "UserGroup")
        .def(py::init<int, int, int>(), py::arg("city"), py::arg("age_band"), py::arg("gender"))
        .def_readonly("city", &UserGroup::city)
        .def_readonly("age_band", &UserGroup::age_band)
        .def_readonly("gender", &UserGroup::gender);

    py::class_<FashionElement>(m, "FashionElement")
        .def_readonly("id", &FashionElement::id)
        .def_readonly("name", &FashionElement::name)
        .def_readonly("kind", &FashionElement::kind);

    py::class_<TimeSeries>(m, "TimeSeries")
        .def_readonly("group_id", &TimeSeries::group_id)
        .def_readonly("element_id", &TimeSeries::element_id)
        .def_readonly("start_index", &TimeSeries::start_index)
        .def_readonly("grid_period", &TimeSeries::grid_period)
        .def_readonly("values", &TimeSeries::values)
        .def("missing_fraction", &TimeSeries::missing_fraction);

    py::class_<Corpus>(m, "Corpus")
        .def_readonly("groups", &Corpus::groups)
        .def_readonly("elements", &Corpus::elements)
        .def_readonly("series", &Corpus::series)
        .def_readonly("grid_period", &Corpus::grid_period)
        .def("find_element", &Corpus::find_element)
        .def("__len__", [](const Corpus& c) { return c.series.size(); });

    py::class_<SynthConfig>(m, "SynthConfig")
        .def(py::init())
        .def_readwrite("cities", &SynthConfig::cities)
        .def_readwrite("age_bands", &SynthConfig::age_bands)
        .def_readwrite("genders", &SynthConfig::genders)
        .def_readwrite("num_groups", &SynthConfig::num_groups)
        .def_readwrite("categories", &SynthConfig::categories)
        .def_readwrite("attributes_per_category", &SynthConfig::attributes_per_category)
        .def_readwrite("values_per_attribute", &SynthConfig::values_per_attribute)
        .def_readwrite("series_length", &SynthConfig::series_length)
        .def_readwrite("grid_period", &SynthConfig::grid_period)
        .def_readwrite("noise", &SynthConfig::noise);

    py::class_<ExperimentSetting>(m, "ExperimentSetting")
        .def(py::init([](const std::string& name, int input_len, int horizon, int grid_period) {
                 return ExperimentSetting{name, input_len, horizon, grid_period};
             }),
             py::arg("name"), py::arg("input_len"), py::arg("horizon"), py::arg("grid_period"))
        .def_readonly("name", &ExperimentSetting::name)
        .def_readonly("input_len", &ExperimentSetting::input_len)
        .def_readonly("horizon", &ExperimentSetting::horizon)
        .def_readonly("grid_period", &ExperimentSetting::grid_period);
    m.def("setting_by_name", &setting_by_name);

    py::class_<TrainConfig>(m, "TrainConfig")
        .def(py::init())
        .def_readwrite("embed_dim", &TrainConfig::embed_dim)
        .def_readwrite("hidden_dim", &TrainConfig::hidden_dim)
        .def_readwrite("triplet_weight", &TrainConfig::triplet_weight)
        .def_readwrite("batch_size", &TrainConfig::batch_size)
        .def_readwrite("iterations", &TrainConfig::iterations)
        .def_readwrite("seed", &TrainConfig::seed)
        .def_readwrite("use_internal_knowledge", &TrainConfig::use_internal_knowledge)
        .def_readwrite("use_external_knowledge", &TrainConfig::use_external_knowledge)
        .def_property(
            "learning_rate", [](const TrainConfig& c) { return c.optimizer.learning_rate; },
            [](TrainConfig& c, double lr) { c.optimizer.learning_rate = lr; });

    py::class_<TrainRecord>(m, "TrainRecord")
        .def_readonly("loss", &TrainRecord::loss)
        .def_readonly("triplet", &TrainRecord::triplet);

    py::class_<Checkpoint>(m, "Checkpoint")
        .def_readonly("history", &Checkpoint::history)
        .def_property_readonly("input_len", [](const Checkpoint& c) { return c.model.input_len; })
        .def_property_readonly("horizon", [](const Checkpoint& c) { return c.model.horizon; })
        .def(
            "forecast",
            [](const Checkpoint& c, const UserGroup& group, const std::string& element,
               const std::vector<double>& window, long window_start) {
                const int gid = c.model.find_group(group);
                const int eid = c.model.find_element(element);
                if (gid < 0 || eid < 0)
                    throw Error("not-found", "checkpoint does not cover that (group, element)");
                return c.model.forecast(gid, eid, window, window_start);
            },
            py::arg("group"), py::arg("element"), py::arg("window"), py::arg("window_start") = 0);

    m.def("popularity_series", [](const std::vector<long long>& element_counts,
                                  const std::vector<long long>& total_counts) {
        return popularity_series(element_counts, total_counts);
    });
    m.def("impute_missing", &impute_missing);
    m.def("timestep_position", &timestep_position, py::arg("t"), py::arg("grid_period"));
    m.def(
        "make_samples",
        [](const TimeSeries& s, int input_len, int horizon, int stride) {
            const auto samples = make_samples(s, input_len, horizon, stride);
            py::list out;
            for (const auto& sample : samples) {
                py::dict d;
                d["input"] = sample.input;
                d["target"] = sample.target;
                d["positions"] = sample.positions;
                d["role"] = sample.role == Sample::Role::Test         ? "test"
                            : sample.role == Sample::Role::Validation ? "validation"
                                                                      : "train";
                out.append(d);
            }
            return out;
        },
        py::arg("series"), py::arg("input_len"), py::arg("horizon"), py::arg("stride") = 1);

    m.def("generate_synthetic_corpus", &generate_synthetic_corpus, py::arg("config"),
          py::arg("seed"));
    m.def("synthetic_taxonomy_edges", &synthetic_taxonomy_edges);
    m.def("load_corpus", &load_corpus);
    m.def("save_corpus", &save_corpus);
    m.def("load_taxonomy_edges", &load_taxonomy_edges);

    m.def(
        "message_pass",
        [](const std::vector<std::vector<double>>& embeddings, const Corpus& corpus,
           const std::vector<std::pair<std::string, std::string>>& edges) {
            const Taxonomy tax = taxonomy_for(corpus, edges);
            return message_pass(embeddings, tax, init_relation_weights(tax));
        },
        "apply child-to-parent message passing with uniform initial weights");

    m.def(
        "train",
        [](const Corpus& corpus, const std::vector<std::pair<std::string, std::string>>& edges,
           const TrainConfig& config, const ExperimentSetting& setting) {
            return train_kern(corpus, taxonomy_for(corpus, edges), config, setting);
        },
        py::arg("corpus"), py::arg("taxonomy_edges"), py::arg("config"), py::arg("setting"));

    m.def("save_checkpoint", &save_checkpoint);
    m.def("load_checkpoint", &load_checkpoint);
    m.def("checkpoint_to_json", &checkpoint_to_json);

    // baselines
    m.def("mean_forecast", [](const std::vector<double>& in, int h) { return mean_forecast(in, h); });
    m.def("last_forecast", [](const std::vector<double>& in, int h) { return last_forecast(in, h); });
    m.def("ar_forecast", [](const std::vector<double>& in, int order, int h) {
        return ar_forecast(ar_fit(in, order), in, h);
    });
    m.def("var_forecast", [](const std::vector<std::vector<double>>& in, int order, int h) {
        return var_forecast(var_fit(in, order), in, h);
    });
    m.def("es_forecast", [](const std::vector<double>& in, int h) {
        return es_forecast(es_fit(in), h);
    });
    m.def("basis_forecast",
          [](const std::vector<double>& in, long t_start, const std::string& kind, int period,
             int h) {
              BasisKind k = kind == "linear"   ? BasisKind::Linear
                            : kind == "cyclic" ? BasisKind::Cyclic
                                               : BasisKind::GeoStyle;
              const auto fit = basis_fit(in, t_start, k, period);
              return basis_forecast(fit, t_start + static_cast<long>(in.size()), h);
          });

    // metrics + harness
    m.def("mae", [](const std::vector<double>& p, const std::vector<double>& t) { return mae(p, t); });
    m.def("mape", [](const std::vector<double>& p, const std::vector<double>& t) {
        const auto r = mape(p, t);
        py::dict d;
        d["value"] = r.value ? py::object(py::float_(*r.value)) : py::none();
        d["used"] = r.used;
        d["excluded"] = r.excluded;
        return d;
    });
    m.def("odd_even_split", [](int horizon) {
        const auto s = odd_even_split(horizon);
        return py::make_tuple(s.validation, s.test);
    });

    m.def(
        "run_benchmark",
        [](const Corpus& corpus, const ExperimentSetting& setting,
           const std::vector<std::string>& methods, const Checkpoint* checkpoint) {
            BenchmarkOptions options;
            options.methods = parse_methods(methods);
            options.checkpoint = checkpoint;
            const EvalReport rep = run_benchmark(corpus, setting, options);
            py::dict out;
            py::list rows;
            for (const auto& r : rep.methods) {
                py::dict row;
                row["method"] = r.label;
                row["validation_mae"] = r.validation_mae;
                row["test_mae"] = r.test_mae;
                row["test_mae_by_series"] = r.test_mae_by_series;
                row["validation_mape"] =
                    r.validation_mape.value ? py::object(py::float_(*r.validation_mape.value))
                                            : py::none();
                row["test_mape"] = r.test_mape.value ? py::object(py::float_(*r.test_mape.value))
                                                     : py::none();
                rows.append(row);
            }
            out["methods"] = rows;
            out["evaluated_series"] = rep.evaluated_series;
            out["skipped"] = rep.skipped;
            out["csv"] = render_report_csv(rep);
            out["table"] = render_report_table(rep);
            return out;
        },
        py::arg("corpus"), py::arg("setting"), py::arg("methods"),
        py::arg("checkpoint") = nullptr);

    m.def(
        "trend_report",
        [](const Corpus& corpus, const Checkpoint& ckpt, const UserGroup& group, int top) {
            const int gid = corpus.find_group(group);
            if (gid < 0) throw Error("not-found", "group not present in the corpus");
            return render_trend_report(trend_report(corpus, ckpt, gid, top));
        },
        py::arg("corpus"), py::arg("checkpoint"), py::arg("group"), py::arg("top") = 5);
}
