#pragma once

#include <string>
#include <vector>

#include "kern/corpus.hpp"
#include "kern/model.hpp"

namespace kern {

/// One element's outlook for a group: change = mean of the forecast window
/// minus mean of the trailing input window (last min(T', T) observed points).
struct TrendEntry {
    std::string element;
    ElementKind kind = ElementKind::Category;
    double change = 0.0;
    long forecast_start = 0;
    std::vector<double> forecast; // clamped to [0,1]
};

struct TrendSection {
    ElementKind kind = ElementKind::Category;
    std::vector<TrendEntry> risers;  // largest positive change first
    std::vector<TrendEntry> fallers; // most negative change first
};

struct TrendReport {
    UserGroup group;
    int input_len = 0;
    int horizon = 0;
    std::vector<TrendSection> sections; // category, attribute, attribute_value
    std::size_t elements_ranked = 0;
    std::size_t elements_skipped = 0;
};

/// Ranks every fashion element of one group by forecast change, per element
/// kind. Ties break lexicographically by element name.
TrendReport trend_report(const Corpus& corpus, const Checkpoint& checkpoint, int group_id,
                         int top_count);

std::string render_trend_report(const TrendReport& report);

} // namespace kern
