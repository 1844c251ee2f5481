#include "kern/checkpoint.hpp"

#include <fstream>

#include <json.hpp>

namespace kern {

namespace {

using nlohmann::json;

json config_to_json(const TrainConfig& c) {
    return json{{"embed_dim", c.embed_dim},
                {"hidden_dim", c.hidden_dim},
                {"triplet_weight", c.triplet_weight},
                {"batch_size", c.batch_size},
                {"iterations", c.iterations},
                {"seed", c.seed},
                {"use_internal_knowledge", c.use_internal_knowledge},
                {"use_external_knowledge", c.use_external_knowledge},
                {"optimizer",
                 json{{"kind", to_string(c.optimizer.kind)},
                      {"learning_rate", c.optimizer.learning_rate},
                      {"beta1", c.optimizer.beta1},
                      {"beta2", c.optimizer.beta2},
                      {"epsilon", c.optimizer.epsilon}}}};
}

TrainConfig config_from_json(const json& j) {
    TrainConfig c;
    c.embed_dim = j.at("embed_dim").get<int>();
    c.hidden_dim = j.at("hidden_dim").get<int>();
    c.triplet_weight = j.at("triplet_weight").get<double>();
    c.batch_size = j.at("batch_size").get<int>();
    c.iterations = j.at("iterations").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.use_internal_knowledge = j.at("use_internal_knowledge").get<bool>();
    c.use_external_knowledge = j.at("use_external_knowledge").get<bool>();
    const auto& o = j.at("optimizer");
    c.optimizer.kind = optimizer_kind_from_string(o.at("kind").get<std::string>());
    c.optimizer.learning_rate = o.at("learning_rate").get<double>();
    c.optimizer.beta1 = o.at("beta1").get<double>();
    c.optimizer.beta2 = o.at("beta2").get<double>();
    c.optimizer.epsilon = o.at("epsilon").get<double>();
    return c;
}

} // namespace

std::string checkpoint_to_json(const Checkpoint& checkpoint) {
    const KernModel& m = checkpoint.model;
    json params = json::object();
    for (const Parameter* p : m.params.all()) {
        params[p->name] = json{{"rows", p->rows}, {"cols", p->cols}, {"values", p->value}};
    }
    json groups = json::array();
    for (const auto& g : m.groups) groups.push_back(json::array({g.city, g.age_band, g.gender}));
    json elements = json::array();
    for (const auto& e : m.elements) elements.push_back(json::array({e.name, to_string(e.kind)}));
    json edges = json::array();
    for (const auto& e : m.taxonomy.edges())
        edges.push_back(json::array({m.elements[static_cast<std::size_t>(e.parent)].name,
                                     m.elements[static_cast<std::size_t>(e.child)].name}));
    json history = json::array();
    for (const auto& r : checkpoint.history) history.push_back(json::array({r.loss, r.triplet}));

    const json doc{{"format_version", 1},
                   {"model", json{{"config", config_to_json(m.config)},
                                  {"input_len", m.input_len},
                                  {"horizon", m.horizon},
                                  {"grid_period", m.grid_period},
                                  {"groups", groups},
                                  {"elements", elements},
                                  {"taxonomy", edges},
                                  {"params", params}}},
                   {"history", history}};
    return doc.dump(1);
}

Checkpoint checkpoint_from_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw Error("format", std::string("checkpoint is not valid JSON: ") + e.what());
    }
    try {
        if (doc.at("format_version").get<int>() != 1)
            throw Error("format", "unsupported checkpoint format version");
        const auto& jm = doc.at("model");

        std::vector<UserGroup> groups;
        for (const auto& g : jm.at("groups"))
            groups.push_back({g.at(0).get<int>(), g.at(1).get<int>(), g.at(2).get<int>()});
        std::vector<FashionElement> elements;
        for (const auto& e : jm.at("elements")) {
            const auto kind = element_kind_from_string(e.at(1).get<std::string>());
            if (!kind) throw Error("format", "checkpoint has unknown element kind");
            elements.push_back({static_cast<int>(elements.size()), e.at(0).get<std::string>(), *kind});
        }
        std::vector<std::pair<std::string, std::string>> edges;
        for (const auto& e : jm.at("taxonomy"))
            edges.emplace_back(e.at(0).get<std::string>(), e.at(1).get<std::string>());

        Checkpoint out;
        out.model = KernModel::shell(config_from_json(jm.at("config")), std::move(groups),
                                     elements, build_taxonomy(edges, elements),
                                     jm.at("input_len").get<int>(), jm.at("horizon").get<int>(),
                                     jm.at("grid_period").get<int>());

        const auto& jp = jm.at("params");
        for (Parameter* p : out.model.params.all()) {
            if (!jp.contains(p->name))
                throw Error("format", "checkpoint is missing parameter '" + p->name + "'");
            const auto& t = jp.at(p->name);
            if (t.at("rows").get<int>() != p->rows || t.at("cols").get<int>() != p->cols)
                throw Error("format", "checkpoint parameter '" + p->name + "' has wrong shape");
            const auto values = t.at("values").get<std::vector<double>>();
            if (values.size() != p->size())
                throw Error("format", "checkpoint parameter '" + p->name + "' has wrong length");
            p->value = values;
        }
        for (const auto& r : doc.at("history"))
            out.history.push_back({r.at(0).get<double>(), r.at(1).get<double>()});
        return out;
    } catch (const json::exception& e) {
        throw Error("format", std::string("malformed checkpoint: ") + e.what());
    }
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw Error("io", "cannot write checkpoint: " + tmp.string());
        out << checkpoint_to_json(checkpoint) << '\n';
        if (!out) throw Error("io", "failed writing checkpoint: " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw Error("io", "cannot move checkpoint into place: " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("io", "cannot open checkpoint: " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return checkpoint_from_json(text);
}

} // namespace kern
