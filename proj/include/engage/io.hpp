#pragma once

#include "engage/domain.hpp"
#include "engage/features.hpp"
#include "engage/pipeline.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace engage {

inline constexpr std::string_view kSamplesHeader = "session_id,student_id,modality,t_s,channel,value";
inline constexpr std::string_view kAnnotationsHeader =
    "session_id,student_id,annotator_id,start_s,end_s,mark";
inline constexpr std::string_view kScheduleHeader = "session_id,start_s,end_s,section";
inline constexpr std::string_view kPredictionsHeader =
    "session_id,student_id,window_index,section,label,confidence_on";

/// Shortest decimal text that parses back to the same double.
std::string format_number(double value);

std::string read_file(const std::filesystem::path& path);
/// Writes to "<path>.tmp" and renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

// Samples are stored long: one row per (sample, channel). Rows sharing
// (session, student, modality, t_s) form one TimedSample. Parse errors
// carry the 1-based line number.
std::string samples_to_csv(std::span<const TimedSample> samples);
/// Result sorted by (session, student, modality, t_s).
std::vector<TimedSample> parse_samples_csv(std::string_view text);
std::vector<TimedSample> load_samples(const std::filesystem::path& path);

std::string annotations_to_csv(std::span<const AnnotationRecord> records);
std::vector<AnnotationRecord> parse_annotations_csv(std::string_view text);

std::string schedule_to_csv(std::span<const ScheduleRecord> records);
std::vector<ScheduleRecord> parse_schedule_csv(std::string_view text);

/// samples.csv, annotations.csv and schedule.csv inside `dir`.
void save_dataset(const std::filesystem::path& dir, const RawDataset& raw);
RawDataset load_dataset(const std::filesystem::path& dir);

/// Window columns followed by one "<Modality>:<feature>" column per feature.
std::string instances_to_csv(std::span<const Instance> instances);
std::vector<Instance> parse_instances_csv(std::string_view text);
std::vector<Instance> load_instances(const std::filesystem::path& path);

struct PredictionRow {
    std::string session_id;
    std::string student_id;
    std::size_t window_index = 0;
    SectionType section = SectionType::Instructional;
    EngagementLabel label = EngagementLabel::OnTask;
    double confidence_on = 0.0;
};

std::string predictions_to_csv(std::span<const PredictionRow> rows);

} // namespace engage
