#include "engage/pipeline.hpp"

#include "engage/errors.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <tuple>

namespace engage {

RawDataset to_raw(const SimConfig& config, std::span<const SimulatedSession> sessions)
{
    RawDataset raw;
    std::set<std::string> session_ids;
    for (const auto& s : sessions) {
        raw.samples.insert(raw.samples.end(), s.samples.begin(), s.samples.end());
        for (const auto& spans : s.annotations) {
            for (const auto& span : spans) {
                raw.annotations.push_back(AnnotationRecord{s.session_id, s.student_id, span});
            }
        }
        session_ids.insert(s.session_id);
    }
    std::ranges::stable_sort(raw.samples, {}, [](const TimedSample& s) {
        return std::tie(s.session_id, s.student_id, s.modality, s.t_s);
    });
    for (const auto& id : session_ids) {
        for (const auto& span : config.schedule) {
            raw.schedule.push_back(ScheduleRecord{id, span});
        }
    }
    return raw;
}

FeatureSchema infer_schema(std::span<const TimedSample> samples)
{
    std::array<std::set<std::string>, 3> channels;
    for (const auto& sample : samples) {
        for (const auto& [name, value] : sample.channels) {
            channels[index_of(sample.modality)].insert(name);
        }
    }
    FeatureSchema schema;
    for (auto m : kModalities) {
        const auto& seen = channels[index_of(m)];
        schema[m].channels.assign(seen.begin(), seen.end());
    }
    return schema;
}

namespace {

using StreamKey = std::pair<std::string, std::string>;  // session, student

std::map<std::string, std::vector<ScheduleSpan>> schedules_by_session(const RawDataset& raw)
{
    std::map<std::string, std::vector<ScheduleSpan>> out;
    for (const auto& rec : raw.schedule) {
        out[rec.session_id].push_back(rec.span);
    }
    for (auto& [id, spans] : out) {
        std::ranges::sort(spans, {}, &ScheduleSpan::start_s);
    }
    return out;
}

double session_length(const std::vector<ScheduleSpan>& spans)
{
    double end = 0.0;
    for (const auto& s : spans) {
        end = std::max(end, s.end_s);
    }
    return end;
}

} // namespace

std::vector<WindowLabel> window_labels(const RawDataset& raw, double window_s, double hop_s)
{
    const auto schedules = schedules_by_session(raw);

    std::map<StreamKey, std::map<std::string, std::vector<AnnotationSpan>>> by_stream;
    for (const auto& rec : raw.annotations) {
        by_stream[{rec.session_id, rec.student_id}][rec.span.annotator_id].push_back(rec.span);
    }

    std::vector<WindowLabel> out;
    for (const auto& [key, annotators] : by_stream) {
        const auto& [session, student] = key;
        auto sched = schedules.find(session);
        if (sched == schedules.end()) {
            throw DataError("no schedule for session '" + session + "'");
        }
        if (annotators.size() != 3) {
            throw DataError("session '" + session + "', student '" + student + "' has " +
                            std::to_string(annotators.size()) + " annotators, expected 3");
        }
        for (auto window : make_windows(session_length(sched->second), window_s, hop_s)) {
            window.section = assign_section(window, sched->second);
            std::array<AnnotatorMark, 3> marks{};
            std::size_t a = 0;
            for (const auto& [id, spans] : annotators) {
                marks[a++] = window_annotator_label(spans, window);
            }
            out.push_back(WindowLabel{student, session, window, fuse_annotations(marks)});
        }
    }
    return out;
}

std::vector<Instance> extract_instances(const RawDataset& raw, const FeatureSchema& schema,
                                        double window_s, double hop_s)
{
    const auto labels = window_labels(raw, window_s, hop_s);

    std::map<StreamKey, std::vector<Window>> windows;
    for (const auto& wl : labels) {
        windows[{wl.session_id, wl.student_id}].push_back(wl.window);
    }

    using SampleKey = std::tuple<std::string, std::string, Modality>;
    std::map<SampleKey, std::vector<const TimedSample*>> streams;
    for (const auto& sample : raw.samples) {
        streams[{sample.session_id, sample.student_id, sample.modality}].push_back(&sample);
    }

    std::vector<KeyedFeatures> features;
    std::vector<TimedSample> sorted;
    for (auto& [key, ptrs] : streams) {
        const auto& [session, student, modality] = key;
        auto w = windows.find({session, student});
        if (w == windows.end()) {
            continue;  // unannotated stream
        }
        std::ranges::stable_sort(ptrs, {}, &TimedSample::t_s);
        sorted.clear();
        for (const auto* p : ptrs) {
            sorted.push_back(*p);
        }
        for (auto& fv : extract_session_features(sorted, modality, w->second, schema[modality])) {
            features.push_back(KeyedFeatures{student, session, std::move(fv)});
        }
    }
    return build_instances(features, labels, schema);
}

} // namespace engage
