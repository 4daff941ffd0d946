#pragma once

#include "engage/domain.hpp"
#include "engage/features.hpp"
#include "engage/simulate.hpp"

#include <span>
#include <string>
#include <vector>

namespace engage {

struct AnnotationRecord {
    std::string session_id;
    std::string student_id;
    AnnotationSpan span;

    friend bool operator==(const AnnotationRecord&, const AnnotationRecord&) = default;
};

struct ScheduleRecord {
    std::string session_id;
    ScheduleSpan span;

    friend bool operator==(const ScheduleRecord&, const ScheduleRecord&) = default;
};

/// The three raw tables of a dataset directory.
struct RawDataset {
    std::vector<TimedSample> samples;
    std::vector<AnnotationRecord> annotations;
    std::vector<ScheduleRecord> schedule;
};

/// Samples come out sorted by (session, student, modality, t_s), as the loader returns them.
RawDataset to_raw(const SimConfig& config, std::span<const SimulatedSession> sessions);

/// Every channel seen per modality, sorted by name, with all statistics.
FeatureSchema infer_schema(std::span<const TimedSample> samples);

/// Windows of every annotated (student, session) stream with their fused
/// label. The session length is the end of its last schedule span. Each
/// stream needs exactly three annotators (taken in id order).
std::vector<WindowLabel> window_labels(const RawDataset& raw, double window_s, double hop_s);

/// window_labels + per-modality feature extraction + build_instances.
std::vector<Instance> extract_instances(const RawDataset& raw, const FeatureSchema& schema,
                                        double window_s, double hop_s);

} // namespace engage
