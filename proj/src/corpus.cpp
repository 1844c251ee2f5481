#include "kern/corpus.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include "kern/numio.hpp"
#include "kern/rng.hpp"
#include "kern/taxonomy.hpp"

namespace kern {

const char* to_string(ElementKind kind) {
    switch (kind) {
        case ElementKind::Category: return "category";
        case ElementKind::Attribute: return "attribute";
        case ElementKind::AttributeValue: return "attribute_value";
    }
    return "?";
}

std::optional<ElementKind> element_kind_from_string(std::string_view text) {
    if (text == "category") return ElementKind::Category;
    if (text == "attribute") return ElementKind::Attribute;
    if (text == "attribute_value") return ElementKind::AttributeValue;
    return std::nullopt;
}

double TimeSeries::missing_fraction() const {
    if (values.empty()) return 0.0;
    std::size_t n = 0;
    for (double v : values)
        if (is_missing(v)) ++n;
    return static_cast<double>(n) / static_cast<double>(values.size());
}

int Corpus::find_element(std::string_view name) const {
    for (const auto& e : elements)
        if (e.name == name) return e.id;
    return -1;
}

int Corpus::find_group(const UserGroup& triple) const {
    for (std::size_t i = 0; i < groups.size(); ++i)
        if (groups[i] == triple) return static_cast<int>(i);
    return -1;
}

const TimeSeries* Corpus::find_series(int group_id, int element_id) const {
    for (const auto& s : series)
        if (s.group_id == group_id && s.element_id == element_id) return &s;
    return nullptr;
}

std::vector<double> popularity_series(std::span<const long long> element_counts,
                                      std::span<const long long> total_counts) {
    if (element_counts.size() != total_counts.size())
        throw Error("data", "popularity_series: count length mismatch");
    std::vector<double> out(element_counts.size());
    for (std::size_t t = 0; t < element_counts.size(); ++t) {
        const long long n = element_counts[t];
        const long long total = total_counts[t];
        if (n < 0 || total < 0)
            throw Error("data", "popularity_series: negative count at index " + std::to_string(t));
        if (total == 0) { // undefined ratio maps to missing
            out[t] = kMissing;
            continue;
        }
        if (n > total)
            throw Error("data",
                        "popularity_series: element count exceeds total at index " + std::to_string(t));
        out[t] = static_cast<double>(n) / static_cast<double>(total);
    }
    return out;
}

TimeSeries impute_missing(const TimeSeries& series) {
    const auto& v = series.values;
    const std::size_t n = v.size();
    std::size_t missing = 0;
    for (double x : v)
        if (is_missing(x)) ++missing;
    if (2 * missing > n)
        throw Error("data", "impute_missing: more than half the points are missing (" +
                                std::to_string(missing) + " of " + std::to_string(n) + ")");

    TimeSeries out = series;
    if (missing == 0) return out;

    // previous/next observed index for every point
    std::vector<long> prev(n, -1), next(n, -1);
    long last = -1;
    for (std::size_t i = 0; i < n; ++i) {
        if (!is_missing(v[i])) last = static_cast<long>(i);
        prev[i] = last;
    }
    last = -1;
    for (std::size_t i = n; i-- > 0;) {
        if (!is_missing(v[i])) last = static_cast<long>(i);
        next[i] = last;
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!is_missing(v[i])) continue;
        const long p = prev[i], q = next[i];
        if (p < 0) {
            out.values[i] = v[static_cast<std::size_t>(q)];
        } else if (q < 0) {
            out.values[i] = v[static_cast<std::size_t>(p)];
        } else {
            const double w = static_cast<double>(static_cast<long>(i) - p) / static_cast<double>(q - p);
            out.values[i] = v[static_cast<std::size_t>(p)] * (1.0 - w) + v[static_cast<std::size_t>(q)] * w;
        }
    }
    return out;
}

std::vector<Sample> make_samples(const TimeSeries& series, int input_len, int horizon, int stride) {
    if (input_len < 1 || horizon < 1) throw Error("config", "make_samples: window lengths must be positive");
    if (stride < 1) throw Error("config", "make_samples: stride must be >= 1");
    const long window = static_cast<long>(input_len) + horizon;
    const long length = static_cast<long>(series.values.size());
    if (length < window)
        throw Error("data", "make_samples: series length " + std::to_string(length) +
                                " shorter than window " + std::to_string(window));
    for (double v : series.values)
        if (is_missing(v)) throw Error("data", "make_samples: series contains missing values; impute first");

    const long count = (length - window) / stride + 1;
    std::vector<Sample> samples;
    samples.reserve(static_cast<std::size_t>(count));
    for (long i = 0; i < count; ++i) {
        const long offset = i * stride;
        Sample s;
        s.group_id = series.group_id;
        s.element_id = series.element_id;
        s.input.assign(series.values.begin() + offset, series.values.begin() + offset + input_len);
        s.target.assign(series.values.begin() + offset + input_len,
                        series.values.begin() + offset + window);
        s.positions.resize(static_cast<std::size_t>(window));
        for (long j = 0; j < window; ++j)
            s.positions[static_cast<std::size_t>(j)] =
                timestep_position(series.start_index + offset + j, series.grid_period);
        s.role = i == count - 1                ? Sample::Role::Test
                 : i == count - 2              ? Sample::Role::Validation
                                               : Sample::Role::Train;
        samples.push_back(std::move(s));
    }
    return samples;
}

namespace {

std::string element_name(int cat, int attr = -1, int value = -1) {
    char buf[48];
    if (attr < 0) {
        std::snprintf(buf, sizeof(buf), "c%02d", cat + 1);
    } else if (value < 0) {
        std::snprintf(buf, sizeof(buf), "c%02d.a%02d", cat + 1, attr + 1);
    } else {
        std::snprintf(buf, sizeof(buf), "c%02d.a%02d.v%02d", cat + 1, attr + 1, value + 1);
    }
    return buf;
}

struct SignalParams {
    double base = 0.0;
    double slope = 0.0; // per step
    double amp1 = 0.0, phase1 = 0.0;
    double amp2 = 0.0, phase2 = 0.0;
};

SignalParams draw_params(const SynthConfig& cfg, Rng& rng) {
    SignalParams p;
    p.base = rng.uniform(cfg.base_min, cfg.base_max);
    p.slope = rng.uniform(-cfg.slope_max, cfg.slope_max) /
              std::max(1, cfg.series_length - 1);
    p.amp1 = rng.uniform(cfg.amp_min, cfg.amp_max);
    p.phase1 = rng.uniform(0.0, 2.0 * std::numbers::pi);
    if (cfg.second_harmonic) {
        p.amp2 = p.amp1 * rng.uniform(0.2, 0.5);
        p.phase2 = rng.uniform(0.0, 2.0 * std::numbers::pi);
    }
    return p;
}

void jitter_params(SignalParams& p, double jitter, Rng& rng) {
    if (jitter <= 0.0) return;
    p.base += jitter * rng.uniform(-1.0, 1.0);
    p.amp1 *= 1.0 + jitter * rng.uniform(-1.0, 1.0);
    p.phase1 += jitter * rng.uniform(-1.0, 1.0);
}

std::vector<double> render_signal(const SynthConfig& cfg, const SignalParams& p, Rng& noise_rng) {
    std::vector<double> out(static_cast<std::size_t>(cfg.series_length));
    for (int t = 0; t < cfg.series_length; ++t) {
        const double angle = 2.0 * std::numbers::pi * t / cfg.grid_period;
        double v = p.base + p.slope * t + p.amp1 * std::sin(angle + p.phase1) +
                   p.amp2 * std::sin(2.0 * angle + p.phase2);
        if (cfg.noise > 0.0) v += cfg.noise * noise_rng.normal();
        out[static_cast<std::size_t>(t)] = std::clamp(v, 0.0, 1.0);
    }
    return out;
}

void validate(const SynthConfig& cfg) {
    if (cfg.cities < 1 || cfg.age_bands < 1 || cfg.age_bands > 4 || cfg.genders < 1 ||
        cfg.genders > 2 || cfg.num_groups < 1)
        throw Error("config", "synthetic corpus: invalid group layout");
    if (cfg.categories < 1 || cfg.attributes_per_category < 0 || cfg.values_per_attribute < 0)
        throw Error("config", "synthetic corpus: need at least one element");
    if (cfg.series_length < 1) throw Error("config", "synthetic corpus: series length must be positive");
    if (cfg.grid_period != 24 && cfg.grid_period != 52)
        throw Error("config", "synthetic corpus: grid period must be 24 or 52");
    if (cfg.noise < 0.0) throw Error("config", "synthetic corpus: negative noise level");
    if (cfg.base_min > cfg.base_max || cfg.amp_min > cfg.amp_max)
        throw Error("config", "synthetic corpus: empty parameter range");
}

} // namespace

std::vector<std::pair<std::string, std::string>> synthetic_taxonomy_edges(const SynthConfig& cfg) {
    std::vector<std::pair<std::string, std::string>> edges;
    for (int c = 0; c < cfg.categories; ++c) {
        for (int a = 0; a < cfg.attributes_per_category; ++a) {
            edges.emplace_back(element_name(c), element_name(c, a));
            for (int v = 0; v < cfg.values_per_attribute; ++v)
                edges.emplace_back(element_name(c, a), element_name(c, a, v));
        }
    }
    return edges;
}

Corpus generate_synthetic_corpus(const SynthConfig& cfg, std::uint64_t seed) {
    validate(cfg);

    Corpus corpus;
    corpus.grid_period = cfg.grid_period;

    for (int city = 0; city < cfg.cities && static_cast<int>(corpus.groups.size()) < cfg.num_groups;
         ++city)
        for (int age = 0; age < cfg.age_bands && static_cast<int>(corpus.groups.size()) < cfg.num_groups;
             ++age)
            for (int gender = 0;
                 gender < cfg.genders && static_cast<int>(corpus.groups.size()) < cfg.num_groups;
                 ++gender)
                corpus.groups.push_back({city, age, gender});

    // element catalog, ids in lexicographic name order (same as load_corpus)
    std::vector<std::pair<std::string, ElementKind>> named;
    for (int c = 0; c < cfg.categories; ++c) {
        named.emplace_back(element_name(c), ElementKind::Category);
        for (int a = 0; a < cfg.attributes_per_category; ++a) {
            named.emplace_back(element_name(c, a), ElementKind::Attribute);
            for (int v = 0; v < cfg.values_per_attribute; ++v)
                named.emplace_back(element_name(c, a, v), ElementKind::AttributeValue);
        }
    }
    std::sort(named.begin(), named.end());
    for (std::size_t i = 0; i < named.size(); ++i)
        corpus.elements.push_back(
            {static_cast<int>(i), named[i].first, named[i].second});

    const auto edges = synthetic_taxonomy_edges(cfg);
    corpus.taxonomy = std::make_shared<Taxonomy>(build_taxonomy(edges, corpus.elements));

    const int n_elements = static_cast<int>(corpus.elements.size());
    auto stream_for = [&](int group, int element, std::uint64_t purpose) {
        return Rng(seed, purpose * 1000003ull +
                             static_cast<std::uint64_t>(group) * static_cast<std::uint64_t>(n_elements) +
                             static_cast<std::uint64_t>(element));
    };

    // per group: draw leaves (with planted twins/opposites), then roll parents
    // up as uniform means of their children plus noise
    for (int g = 0; g < static_cast<int>(corpus.groups.size()); ++g) {
        std::vector<std::vector<double>> values(static_cast<std::size_t>(n_elements));

        for (int c = 0; c < cfg.categories; ++c) {
            for (int a = 0; a < cfg.attributes_per_category; ++a) {
                const int anchor_id = cfg.values_per_attribute > 0
                                          ? corpus.find_element(element_name(c, a, 0))
                                          : -1;
                for (int v = 0; v < cfg.values_per_attribute; ++v) {
                    const int id = corpus.find_element(element_name(c, a, v));
                    Rng own = stream_for(g, id, 1);
                    SignalParams p;
                    if (v == 1 || v == 2) {
                        Rng anchor_rng = stream_for(g, anchor_id, 1);
                        p = draw_params(cfg, anchor_rng);
                        jitter_params(p, cfg.mirror_jitter, own);
                        if (v == 2) { // opposite phase
                            p.phase1 += std::numbers::pi;
                            p.phase2 += std::numbers::pi;
                        }
                    } else {
                        p = draw_params(cfg, own);
                    }
                    Rng noise = stream_for(g, id, 2);
                    values[static_cast<std::size_t>(id)] = render_signal(cfg, p, noise);
                }
            }
        }

        // attributes from values, then categories from attributes
        auto roll_up = [&](const std::string& parent_name, const std::vector<int>& child_ids) {
            const int id = corpus.find_element(parent_name);
            if (child_ids.empty()) {
                Rng own = stream_for(g, id, 1);
                const SignalParams p = draw_params(cfg, own);
                Rng noise = stream_for(g, id, 2);
                values[static_cast<std::size_t>(id)] = render_signal(cfg, p, noise);
                return;
            }
            std::vector<double> out(static_cast<std::size_t>(cfg.series_length), 0.0);
            for (int child : child_ids)
                for (int t = 0; t < cfg.series_length; ++t)
                    out[static_cast<std::size_t>(t)] +=
                        values[static_cast<std::size_t>(child)][static_cast<std::size_t>(t)];
            Rng noise = stream_for(g, id, 2);
            for (int t = 0; t < cfg.series_length; ++t) {
                double v = out[static_cast<std::size_t>(t)] / static_cast<double>(child_ids.size());
                if (cfg.noise > 0.0) v += cfg.noise * noise.normal();
                out[static_cast<std::size_t>(t)] = std::clamp(v, 0.0, 1.0);
            }
            values[static_cast<std::size_t>(id)] = std::move(out);
        };

        for (int c = 0; c < cfg.categories; ++c) {
            std::vector<int> attr_ids;
            for (int a = 0; a < cfg.attributes_per_category; ++a) {
                std::vector<int> value_ids;
                for (int v = 0; v < cfg.values_per_attribute; ++v)
                    value_ids.push_back(corpus.find_element(element_name(c, a, v)));
                roll_up(element_name(c, a), value_ids);
                attr_ids.push_back(corpus.find_element(element_name(c, a)));
            }
            roll_up(element_name(c), attr_ids);
        }

        for (int e = 0; e < n_elements; ++e) {
            TimeSeries s;
            s.group_id = g;
            s.element_id = e;
            s.start_index = 0;
            s.grid_period = cfg.grid_period;
            s.values = std::move(values[static_cast<std::size_t>(e)]);
            corpus.series.push_back(std::move(s));
        }
    }
    return corpus;
}

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(sep, start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

[[noreturn]] void row_error(std::size_t row, const std::string& what) {
    throw Error("format", "corpus row " + std::to_string(row) + ": " + what);
}

} // namespace

Corpus load_corpus(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("io", "cannot open corpus file: " + path.string());

    struct Row {
        UserGroup group;
        std::string element;
        ElementKind kind;
        int grid_period;
        long start_index;
        std::vector<double> values;
    };
    std::vector<Row> rows;
    std::map<std::string, ElementKind> kinds;
    std::set<std::pair<std::tuple<int, int, int>, std::string>> seen;

    std::string line;
    std::size_t row_no = 0;
    while (std::getline(in, line)) {
        ++row_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const auto fields = split(line, ',');
        if (fields.size() != 8)
            row_error(row_no, "expected 8 fields, got " + std::to_string(fields.size()));

        Row r;
        const auto city = parse_long(fields[0]);
        const auto age = parse_long(fields[1]);
        const auto gender = parse_long(fields[2]);
        if (!city || *city < 0) row_error(row_no, "bad city id '" + fields[0] + "'");
        if (!age || *age < 0 || *age > 3) row_error(row_no, "age band must be in 0..3");
        if (!gender || *gender < 0 || *gender > 1) row_error(row_no, "gender must be 0 or 1");
        r.group = {static_cast<int>(*city), static_cast<int>(*age), static_cast<int>(*gender)};

        r.element = fields[3];
        if (r.element.empty()) row_error(row_no, "empty element name");
        const auto kind = element_kind_from_string(fields[4]);
        if (!kind) row_error(row_no, "unknown element kind '" + fields[4] + "'");
        r.kind = *kind;
        const auto it = kinds.find(r.element);
        if (it == kinds.end())
            kinds.emplace(r.element, r.kind);
        else if (it->second != r.kind)
            row_error(row_no, "element '" + r.element + "' re-declared with a different kind");

        const auto period = parse_long(fields[5]);
        if (!period || *period < 1) row_error(row_no, "bad grid period '" + fields[5] + "'");
        r.grid_period = static_cast<int>(*period);
        const auto start = parse_long(fields[6]);
        if (!start) row_error(row_no, "bad start index '" + fields[6] + "'");
        r.start_index = *start;

        for (const auto& tok : split(fields[7], ';')) {
            if (tok == "NA") {
                r.values.push_back(kMissing);
                continue;
            }
            const auto v = parse_double(tok);
            if (!v) row_error(row_no, "bad value '" + tok + "'");
            if (*v < 0.0 || *v > 1.0)
                row_error(row_no, "value " + tok + " outside [0,1]");
            r.values.push_back(*v);
        }
        if (r.values.empty()) row_error(row_no, "empty value list");

        const auto key = std::make_pair(
            std::make_tuple(r.group.city, r.group.age_band, r.group.gender), r.element);
        if (!seen.insert(key).second)
            row_error(row_no, "duplicate (group, element) pair for element '" + r.element + "'");
        rows.push_back(std::move(r));
    }
    if (rows.empty()) throw Error("format", "corpus file has no series: " + path.string());

    const int period = rows.front().grid_period;
    for (const auto& r : rows)
        if (r.grid_period != period)
            throw Error("format", "corpus mixes grid periods (" + std::to_string(period) + " and " +
                                      std::to_string(r.grid_period) + ")");

    Corpus corpus;
    corpus.grid_period = period;
    {
        std::set<std::tuple<int, int, int>> triples;
        for (const auto& r : rows)
            triples.insert({r.group.city, r.group.age_band, r.group.gender});
        for (const auto& [c, a, n] : triples) corpus.groups.push_back({c, a, n});
    }
    for (const auto& [name, kind] : kinds)
        corpus.elements.push_back({static_cast<int>(corpus.elements.size()), name, kind});

    for (const auto& r : rows) {
        TimeSeries s;
        s.group_id = corpus.find_group(r.group);
        s.element_id = corpus.find_element(r.element);
        s.start_index = r.start_index;
        s.grid_period = r.grid_period;
        s.values = r.values;
        corpus.series.push_back(std::move(s));
    }
    std::sort(corpus.series.begin(), corpus.series.end(), [](const TimeSeries& a, const TimeSeries& b) {
        return std::tie(a.group_id, a.element_id) < std::tie(b.group_id, b.element_id);
    });
    return corpus;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("io", "cannot write corpus file: " + path.string());
    for (const auto& s : corpus.series) {
        const auto& g = corpus.groups[static_cast<std::size_t>(s.group_id)];
        const auto& e = corpus.elements[static_cast<std::size_t>(s.element_id)];
        out << g.city << ',' << g.age_band << ',' << g.gender << ',' << e.name << ','
            << to_string(e.kind) << ',' << s.grid_period << ',' << s.start_index << ',';
        for (std::size_t i = 0; i < s.values.size(); ++i) {
            if (i) out << ';';
            if (is_missing(s.values[i]))
                out << "NA";
            else
                out << format_double(s.values[i]);
        }
        out << '\n';
    }
    if (!out) throw Error("io", "failed writing corpus file: " + path.string());
}

std::vector<std::pair<std::string, std::string>> load_taxonomy_edges(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("io", "cannot open taxonomy file: " + path.string());
    std::vector<std::pair<std::string, std::string>> edges;
    std::string line;
    std::size_t row_no = 0;
    while (std::getline(in, line)) {
        ++row_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const auto fields = split(line, ',');
        if (fields.size() != 2 || fields[0].empty() || fields[1].empty())
            throw Error("format", "taxonomy row " + std::to_string(row_no) +
                                      ": expected 'parent,child'");
        edges.emplace_back(fields[0], fields[1]);
    }
    return edges;
}

void save_taxonomy_edges(const std::vector<std::pair<std::string, std::string>>& edges,
                         const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("io", "cannot write taxonomy file: " + path.string());
    for (const auto& [parent, child] : edges) out << parent << ',' << child << '\n';
    if (!out) throw Error("io", "failed writing taxonomy file: " + path.string());
}

} // namespace kern
