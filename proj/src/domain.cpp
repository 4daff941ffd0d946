#include "engage/domain.hpp"

#include "engage/errors.hpp"

#include <algorithm>
#include <cmath>

namespace engage {

std::string_view to_string(EngagementLabel l)
{
    return l == EngagementLabel::OnTask ? "OnTask" : "OffTask";
}

std::string_view to_string(AnnotatorMark m)
{
    switch (m) {
    case AnnotatorMark::OnTask: return "OnTask";
    case AnnotatorMark::OffTask: return "OffTask";
    case AnnotatorMark::Invalid: return "Invalid";
    }
    return "Invalid";
}

std::string_view to_string(SectionType s)
{
    return s == SectionType::Instructional ? "Instructional" : "Assessment";
}

std::string_view to_string(Modality m)
{
    switch (m) {
    case Modality::Appearance: return "Appearance";
    case Modality::ContextPerformance: return "ContextPerformance";
    case Modality::Mouse: return "Mouse";
    }
    return "Appearance";
}

std::optional<EngagementLabel> parse_label(std::string_view text)
{
    for (auto l : kLabels) {
        if (text == to_string(l)) {
            return l;
        }
    }
    return std::nullopt;
}

std::optional<AnnotatorMark> parse_mark(std::string_view text)
{
    for (auto m : {AnnotatorMark::OnTask, AnnotatorMark::OffTask, AnnotatorMark::Invalid}) {
        if (text == to_string(m)) {
            return m;
        }
    }
    return std::nullopt;
}

std::optional<SectionType> parse_section(std::string_view text)
{
    for (auto s : kSections) {
        if (text == to_string(s)) {
            return s;
        }
    }
    return std::nullopt;
}

std::optional<Modality> parse_modality(std::string_view text)
{
    for (auto m : kModalities) {
        if (text == to_string(m)) {
            return m;
        }
    }
    return std::nullopt;
}

std::vector<Window> make_windows(double duration_s, double window_s, double hop_s)
{
    if (!std::isfinite(window_s) || window_s <= 0.0) {
        throw ParameterError("window length must be positive");
    }
    if (!std::isfinite(hop_s) || hop_s <= 0.0 || hop_s > window_s) {
        throw ParameterError("hop must satisfy 0 < hop <= window length");
    }
    if (!std::isfinite(duration_s) || duration_s < 0.0) {
        throw ParameterError("duration must be a non-negative finite number");
    }

    std::vector<Window> windows;
    for (std::size_t i = 0;; ++i) {
        const double start = static_cast<double>(i) * hop_s;
        const double end = start + window_s;
        if (end > duration_s) {
            break;
        }
        windows.push_back(Window{i, start, end, SectionType::Instructional});
    }
    return windows;
}

namespace {

double overlap(double a_start, double a_end, double b_start, double b_end)
{
    return std::max(0.0, std::min(a_end, b_end) - std::max(a_start, b_start));
}

} // namespace

SectionType assign_section(const Window& window, std::span<const ScheduleSpan> schedule)
{
    const ScheduleSpan* best = nullptr;
    double best_overlap = 0.0;
    for (const auto& span : schedule) {
        const double o = overlap(window.start_s, window.end_s, span.start_s, span.end_s);
        if (o <= 0.0) {
            continue;
        }
        if (best == nullptr || o > best_overlap ||
            (o == best_overlap && span.start_s < best->start_s)) {
            best = &span;
            best_overlap = o;
        }
    }
    if (best == nullptr) {
        throw CoverageError("window " + std::to_string(window.index) +
                            " overlaps no schedule span");
    }
    return best->section;
}

AnnotatorMark window_annotator_label(std::span<const AnnotationSpan> spans, const Window& window)
{
    double on = 0.0;
    double off = 0.0;
    for (const auto& span : spans) {
        const double o = overlap(window.start_s, window.end_s, span.start_s, span.end_s);
        if (span.mark == AnnotatorMark::OnTask) {
            on += o;
        } else if (span.mark == AnnotatorMark::OffTask) {
            off += o;
        }
    }
    // Explicit Invalid spans and uncovered time both count as Invalid.
    const double invalid = window.length() - on - off;

    if (on > off && on > invalid) {
        return AnnotatorMark::OnTask;
    }
    if (off > on && off > invalid) {
        return AnnotatorMark::OffTask;
    }
    return AnnotatorMark::Invalid;
}

std::optional<EngagementLabel> fuse_annotations(std::span<const AnnotatorMark> marks)
{
    if (marks.size() != 3) {
        throw ParameterError("annotation fusion expects exactly 3 marks, got " +
                             std::to_string(marks.size()));
    }
    const auto on = std::ranges::count(marks, AnnotatorMark::OnTask);
    const auto off = std::ranges::count(marks, AnnotatorMark::OffTask);
    if (on >= 2) {
        return EngagementLabel::OnTask;
    }
    if (off >= 2) {
        return EngagementLabel::OffTask;
    }
    return std::nullopt;
}

} // namespace engage
