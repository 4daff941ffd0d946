#pragma once

#include "engage/domain.hpp"

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace engage {

enum class Statistic : std::uint8_t { Count, Mean, Std, Min, Max, Range };

inline constexpr std::array kAllStatistics{Statistic::Count, Statistic::Mean, Statistic::Std,
                                           Statistic::Min,   Statistic::Max,  Statistic::Range};

std::string_view to_string(Statistic s);
std::optional<Statistic> parse_statistic(std::string_view text);

/// Which channels of one modality are summarised, and how.
///
/// Feature names are "<channel>.<statistic>" in channel-major order, followed
/// by "sample_rate" (in-window samples per second) when enabled.
struct ModalitySchema {
    std::vector<std::string> channels;
    std::vector<Statistic> statistics{kAllStatistics.begin(), kAllStatistics.end()};
    bool sample_rate = true;

    std::vector<std::string> feature_names() const;
    std::size_t size() const noexcept
    {
        return channels.size() * statistics.size() + (sample_rate ? 1 : 0);
    }

    friend bool operator==(const ModalitySchema&, const ModalitySchema&) = default;
};

struct FeatureSchema {
    std::array<ModalitySchema, 3> modalities;

    ModalitySchema& operator[](Modality m) noexcept { return modalities[index_of(m)]; }
    const ModalitySchema& operator[](Modality m) const noexcept { return modalities[index_of(m)]; }

    friend bool operator==(const FeatureSchema&, const FeatureSchema&) = default;
};

struct FeatureVector {
    Modality modality = Modality::Appearance;
    std::size_t window_index = 0;
    std::vector<std::string> names;
    std::vector<double> values;

    friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

struct Instance {
    std::string student_id;
    std::string session_id;
    Window window;
    std::array<FeatureVector, 3> features;
    EngagementLabel label = EngagementLabel::OnTask;

    const FeatureVector& operator[](Modality m) const noexcept { return features[index_of(m)]; }

    friend bool operator==(const Instance&, const Instance&) = default;
};

/// Aggregates the samples with window.start_s <= t_s < window.end_s.
///
/// Samples may be in any order. An empty window gives an all-zero vector.
/// Throws DataError for a sample of another modality or a non-finite value.
FeatureVector extract_features(std::span<const TimedSample> samples, Modality modality,
                               const Window& window, const ModalitySchema& schema);

/// Same as extract_features for every window, for samples already sorted by t_s.
std::vector<FeatureVector> extract_session_features(std::span<const TimedSample> sorted_samples,
                                                    Modality modality,
                                                    std::span<const Window> windows,
                                                    const ModalitySchema& schema);

FeatureVector zero_features(Modality modality, std::size_t window_index,
                            const ModalitySchema& schema);

/// A feature vector tagged with the stream it came from.
struct KeyedFeatures {
    std::string student_id;
    std::string session_id;
    FeatureVector features;
};

/// A window with its fused ground truth (nullopt = discarded).
struct WindowLabel {
    std::string student_id;
    std::string session_id;
    Window window;
    std::optional<EngagementLabel> label;
};

/// Joins features and labels on (student, session, window index).
///
/// One instance per non-discarded label, ordered by (session, student,
/// window index). Missing modalities get zero_features. Duplicate
/// (student, session, window, modality) vectors throw DataError.
std::vector<Instance> build_instances(std::span<const KeyedFeatures> features,
                                      std::span<const WindowLabel> labels,
                                      const FeatureSchema& schema);

} // namespace engage
