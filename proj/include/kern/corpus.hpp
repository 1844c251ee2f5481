#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kern/error.hpp"

namespace kern {

/// Missing observations are carried as quiet NaN ("NA" on disk).
inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();
inline bool is_missing(double v) { return std::isnan(v); }

enum class ElementKind { Category, Attribute, AttributeValue };

const char* to_string(ElementKind kind);
std::optional<ElementKind> element_kind_from_string(std::string_view text);

/// A (city, age band, gender) triple. Age bands are the four fixed ranges
/// 0-18 / 18-25 / 25-40 / 40+; gender ids are 0/1.
struct UserGroup {
    int city = 0;
    int age_band = 0;
    int gender = 0;

    friend auto operator<=>(const UserGroup&, const UserGroup&) = default;
};

struct FashionElement {
    int id = 0;
    std::string name;
    ElementKind kind = ElementKind::Category;
};

/// Popularity signal of one fashion element for one user group, on a uniform
/// grid with `grid_period` points per year (24 = half-month, 52 = weekly).
struct TimeSeries {
    int group_id = 0;
    int element_id = 0;
    long start_index = 0;
    int grid_period = 24;
    std::vector<double> values; // in [0,1] or missing

    std::size_t length() const { return values.size(); }
    double missing_fraction() const;
};

/// One (input window, forecast window) instance cut from a series.
struct Sample {
    enum class Role { Train, Validation, Test };

    int series_index = -1;
    int group_id = 0;
    int element_id = 0;
    std::vector<double> input;   // length T
    std::vector<double> target;  // length T'
    std::vector<int> positions;  // within-year position for each of the T+T' steps
    Role role = Role::Train;
};

class Taxonomy; // taxonomy.hpp

struct Corpus {
    std::vector<UserGroup> groups;        // index == group id
    std::vector<FashionElement> elements; // index == element id
    std::vector<TimeSeries> series;       // one per (group, element) pair
    int grid_period = 24;
    std::shared_ptr<const Taxonomy> taxonomy; // optional reference

    int find_element(std::string_view name) const;    // -1 if absent
    int find_group(const UserGroup& triple) const;     // -1 if absent
    const TimeSeries* find_series(int group_id, int element_id) const;
};

/// y_t = element_count_t / total_count_t; zero totals become missing.
std::vector<double> popularity_series(std::span<const long long> element_counts,
                                      std::span<const long long> total_counts);

/// Fills gaps: interior by linear interpolation between nearest observed
/// neighbors, leading/trailing by the nearest observed value. Rejects series
/// with more than half the points missing.
TimeSeries impute_missing(const TimeSeries& series);

/// Within-year position of grid index t.
inline int timestep_position(long t, int grid_period) {
    const long m = t % grid_period;
    return static_cast<int>(m < 0 ? m + grid_period : m);
}

/// Sliding windows: floor((L - (T+T'))/stride) + 1 samples. The last window
/// is the test sample, the one before it the validation sample.
std::vector<Sample> make_samples(const TimeSeries& series, int input_len, int horizon,
                                 int stride = 1);

/// Synthetic corpus layout. Elements form a three-level taxonomy
/// (categories / attributes / attribute values); only attribute values get
/// free signals, parents are weighted means of their children. Within every
/// attribute that has at least three values, the second value mirrors the
/// first and the third runs in opposite phase, so both knowledge mechanisms
/// hold by construction.
struct SynthConfig {
    int cities = 14;
    int age_bands = 4;
    int genders = 2;
    int num_groups = 74; // cap on the (city, age, gender) cross product
    int categories = 8;
    int attributes_per_category = 4;
    int values_per_attribute = 5;
    int series_length = 120;
    int grid_period = 24;
    double noise = 0.02;        // per-point sigma, also used for parent noise
    double base_min = 0.3;
    double base_max = 0.6;
    double slope_max = 0.1;     // |total drift| over the whole series
    double amp_min = 0.05;
    double amp_max = 0.2;
    bool second_harmonic = true; // add a half-period component
    double mirror_jitter = 0.0;  // parameter jitter for the planted twin series
};

Corpus generate_synthetic_corpus(const SynthConfig& config, std::uint64_t seed);

/// Taxonomy edges implied by a SynthConfig (parent name, child name).
std::vector<std::pair<std::string, std::string>> synthetic_taxonomy_edges(const SynthConfig& config);

/// One series per line:
/// city,age_band,gender,element,element_kind,grid_period,start_index,v0;v1;...
Corpus load_corpus(const std::filesystem::path& path);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

std::vector<std::pair<std::string, std::string>> load_taxonomy_edges(const std::filesystem::path& path);
void save_taxonomy_edges(const std::vector<std::pair<std::string, std::string>>& edges,
                         const std::filesystem::path& path);

} // namespace kern
