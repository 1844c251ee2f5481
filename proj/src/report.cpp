#include "kern/report.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "kern/numio.hpp"

namespace kern {

TrendReport trend_report(const Corpus& corpus, const Checkpoint& checkpoint, int group_id,
                         int top_count) {
    if (group_id < 0 || static_cast<std::size_t>(group_id) >= corpus.groups.size())
        throw Error("not-found", "trend report: group id out of range");
    if (top_count < 1) throw Error("config", "trend report: top count must be >= 1");

    const KernModel& model = checkpoint.model;
    const int t_in = model.input_len;
    const int t_out = model.horizon;
    const UserGroup& group = corpus.groups[static_cast<std::size_t>(group_id)];
    const int model_group = model.find_group(group);
    if (model_group < 0)
        throw Error("not-found", "trend report: group is not covered by the checkpoint");

    TrendReport report;
    report.group = group;
    report.input_len = t_in;
    report.horizon = t_out;

    std::vector<TrendEntry> entries;
    for (const auto& raw : corpus.series) {
        if (raw.group_id != group_id) continue;
        const auto& element = corpus.elements[static_cast<std::size_t>(raw.element_id)];
        const int model_element = model.find_element(element.name);
        if (model_element < 0 || static_cast<long>(raw.values.size()) < t_in ||
            raw.missing_fraction() > 0.5) {
            ++report.elements_skipped;
            continue;
        }
        const TimeSeries series = impute_missing(raw);
        const std::size_t offset = series.values.size() - static_cast<std::size_t>(t_in);
        const std::span<const double> window(series.values.data() + offset,
                                             static_cast<std::size_t>(t_in));
        const long window_start = series.start_index + static_cast<long>(offset);
        auto forecast = model.forecast(model_group, model_element, window, window_start);
        for (auto& v : forecast) v = std::clamp(v, 0.0, 1.0);

        const int trailing = std::min(t_out, t_in);
        const double past =
            std::accumulate(window.end() - trailing, window.end(), 0.0) / trailing;
        const double future = std::accumulate(forecast.begin(), forecast.end(), 0.0) /
                              static_cast<double>(forecast.size());

        TrendEntry entry;
        entry.element = element.name;
        entry.kind = element.kind;
        entry.change = future - past;
        entry.forecast_start = window_start + t_in;
        entry.forecast = std::move(forecast);
        entries.push_back(std::move(entry));
    }
    report.elements_ranked = entries.size();

    for (const ElementKind kind :
         {ElementKind::Category, ElementKind::Attribute, ElementKind::AttributeValue}) {
        TrendSection section;
        section.kind = kind;
        std::vector<TrendEntry> of_kind;
        for (const auto& e : entries)
            if (e.kind == kind) of_kind.push_back(e);

        auto by_change_desc = [](const TrendEntry& a, const TrendEntry& b) {
            return a.change != b.change ? a.change > b.change : a.element < b.element;
        };
        auto by_change_asc = [](const TrendEntry& a, const TrendEntry& b) {
            return a.change != b.change ? a.change < b.change : a.element < b.element;
        };
        std::sort(of_kind.begin(), of_kind.end(), by_change_desc);
        const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(top_count),
                                                       of_kind.size());
        section.risers.assign(of_kind.begin(), of_kind.begin() + static_cast<long>(take));
        std::sort(of_kind.begin(), of_kind.end(), by_change_asc);
        section.fallers.assign(of_kind.begin(), of_kind.begin() + static_cast<long>(take));
        report.sections.push_back(std::move(section));
    }
    return report;
}

std::string render_trend_report(const TrendReport& report) {
    std::ostringstream out;
    out << "trend report for group city=" << report.group.city
        << " age_band=" << report.group.age_band << " gender=" << report.group.gender
        << " (input " << report.input_len << ", horizon " << report.horizon << ")\n";
    out << report.elements_ranked << " elements ranked, " << report.elements_skipped
        << " skipped\n";

    auto emit = [&](const char* heading, const std::vector<TrendEntry>& list) {
        out << "  " << heading << ":\n";
        for (const auto& e : list) {
            char buf[64];
            std::snprintf(buf, sizeof(buf), "%+.4f", e.change);
            out << "    " << e.element << " " << buf << " forecast@" << e.forecast_start << "=";
            for (std::size_t i = 0; i < e.forecast.size(); ++i) {
                if (i) out << ';';
                out << format_double(e.forecast[i]);
            }
            out << "\n";
        }
    };
    for (const auto& section : report.sections) {
        out << "[" << to_string(section.kind) << "]\n";
        emit("top risers", section.risers);
        emit("top fallers", section.fallers);
    }
    return out.str();
}

} // namespace kern
