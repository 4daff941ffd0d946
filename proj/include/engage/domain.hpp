#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace engage {

// Class order OnTask < OffTask is used for every deterministic tie-break.
enum class EngagementLabel : std::uint8_t { OnTask = 0, OffTask = 1 };

enum class AnnotatorMark : std::uint8_t { OnTask = 0, OffTask = 1, Invalid = 2 };

enum class SectionType : std::uint8_t { Instructional = 0, Assessment = 1 };

enum class Modality : std::uint8_t { Appearance = 0, ContextPerformance = 1, Mouse = 2 };

inline constexpr std::array kLabels{EngagementLabel::OnTask, EngagementLabel::OffTask};
inline constexpr std::array kSections{SectionType::Instructional, SectionType::Assessment};
inline constexpr std::array kModalities{Modality::Appearance, Modality::ContextPerformance,
                                        Modality::Mouse};

constexpr std::size_t index_of(EngagementLabel l) noexcept { return static_cast<std::size_t>(l); }
constexpr std::size_t index_of(SectionType s) noexcept { return static_cast<std::size_t>(s); }
constexpr std::size_t index_of(Modality m) noexcept { return static_cast<std::size_t>(m); }

/// Fixed-size table indexed by engagement label.
template <typename T>
struct LabelMap {
    std::array<T, 2> values{};

    constexpr T& operator[](EngagementLabel l) noexcept { return values[index_of(l)]; }
    constexpr const T& operator[](EngagementLabel l) const noexcept { return values[index_of(l)]; }

    friend bool operator==(const LabelMap&, const LabelMap&) = default;
};

/// Argmax over labels; exact ties resolve to OnTask.
template <typename T>
constexpr EngagementLabel argmax_label(const LabelMap<T>& scores) noexcept
{
    return scores[EngagementLabel::OffTask] > scores[EngagementLabel::OnTask]
               ? EngagementLabel::OffTask
               : EngagementLabel::OnTask;
}

std::string_view to_string(EngagementLabel l);
std::string_view to_string(AnnotatorMark m);
std::string_view to_string(SectionType s);
std::string_view to_string(Modality m);

std::optional<EngagementLabel> parse_label(std::string_view text);
std::optional<AnnotatorMark> parse_mark(std::string_view text);
std::optional<SectionType> parse_section(std::string_view text);
std::optional<Modality> parse_modality(std::string_view text);

struct TimedSample {
    std::string student_id;
    std::string session_id;
    Modality modality = Modality::Appearance;
    double t_s = 0.0;
    std::map<std::string, double> channels;

    friend bool operator==(const TimedSample&, const TimedSample&) = default;
};

struct Window {
    std::size_t index = 0;
    double start_s = 0.0;
    double end_s = 0.0;
    SectionType section = SectionType::Instructional;

    double length() const noexcept { return end_s - start_s; }

    friend bool operator==(const Window&, const Window&) = default;
};

struct AnnotationSpan {
    std::string annotator_id;
    double start_s = 0.0;
    double end_s = 0.0;
    AnnotatorMark mark = AnnotatorMark::Invalid;

    friend bool operator==(const AnnotationSpan&, const AnnotationSpan&) = default;
};

struct ScheduleSpan {
    double start_s = 0.0;
    double end_s = 0.0;
    SectionType section = SectionType::Instructional;

    friend bool operator==(const ScheduleSpan&, const ScheduleSpan&) = default;
};

inline constexpr double kDefaultWindowSeconds = 8.0;
inline constexpr double kDefaultHopSeconds = 4.0;

/// Fully contained windows [i*hop, i*hop + window] over [0, duration].
std::vector<Window> make_windows(double duration_s, double window_s = kDefaultWindowSeconds,
                                 double hop_s = kDefaultHopSeconds);

/// Section with the largest time overlap; ties go to the earlier-starting span.
/// Throws CoverageError when the window overlaps no span.
SectionType assign_section(const Window& window, std::span<const ScheduleSpan> schedule);

/// Mark covering the most time inside the window. Uncovered time counts as
/// Invalid and exact ties yield Invalid.
AnnotatorMark window_annotator_label(std::span<const AnnotationSpan> spans, const Window& window);

/// 2-of-3 majority over valid marks; std::nullopt means the window is discarded.
std::optional<EngagementLabel> fuse_annotations(std::span<const AnnotatorMark> marks);

} // namespace engage
