#include "engage/simulate.hpp"

#include "engage/errors.hpp"
#include "engage/parallel.hpp"
#include "engage/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace engage {

namespace {

void require(bool ok, const std::string& what)
{
    if (!ok) {
        throw ParameterError("invalid simulation config: " + what);
    }
}

bool is_probability(double p) { return p >= 0.0 && p <= 1.0; }

std::size_t step_count(double duration_s, double dt_s)
{
    return static_cast<std::size_t>(std::ceil(duration_s / dt_s - 1e-9));
}

} // namespace

void SimConfig::validate() const
{
    require(version == 1, "unsupported version " + std::to_string(version));
    require(n_students >= 1 && n_sessions >= 1, "need at least one student and one session");
    require(std::isfinite(duration_s) && duration_s > 0.0, "duration_s must be positive");
    require(std::isfinite(dt_s) && dt_s > 0.0, "dt_s must be positive");
    require(annotation_window_s > 0.0 && annotation_hop_s > 0.0 &&
                annotation_hop_s <= annotation_window_s,
            "annotation window/hop must satisfy 0 < hop <= window");

    require(!schedule.empty(), "schedule is empty");
    require(schedule.front().start_s == 0.0, "schedule must start at 0");
    for (std::size_t i = 0; i < schedule.size(); ++i) {
        require(schedule[i].start_s < schedule[i].end_s, "schedule span with start >= end");
        if (i > 0) {
            require(schedule[i].start_s == schedule[i - 1].end_s, "schedule has gaps or overlaps");
        }
    }
    require(schedule.back().end_s >= duration_s, "schedule does not cover the session");

    for (const auto& t : transition) {
        require(is_probability(t.on_to_off) && is_probability(t.off_to_on),
                "transition probabilities must be in [0, 1]");
    }
    for (auto m : kModalities) {
        const auto& e = emissions[index_of(m)];
        const std::string name(to_string(m));
        require(!e.channels.empty(), name + " has no channels");
        require(std::isfinite(e.sample_rate_hz) && e.sample_rate_hz > 0.0,
                name + " sample rate must be positive");
        for (const auto& by_state : e.params) {
            for (const auto& channels : by_state) {
                require(channels.size() == e.channels.size(),
                        name + " emission table does not match its channel list");
                for (const auto& c : channels) {
                    require(std::isfinite(c.mean) && std::isfinite(c.std) && c.std >= 0.0,
                            name + " emission needs finite mean and non-negative std");
                }
            }
        }
    }
    for (const auto& a : annotators) {
        require(is_probability(a.p_flip) && is_probability(a.p_invalid),
                "annotator probabilities must be in [0, 1]");
    }
}

SectionType SimConfig::section_at(double t_s) const
{
    for (const auto& span : schedule) {
        if (t_s >= span.start_s && t_s < span.end_s) {
            return span.section;
        }
    }
    return schedule.back().section;
}

EngagementLabel StateTrack::at(double t_s) const
{
    auto k = static_cast<std::size_t>(std::max(0.0, std::floor(t_s / dt_s)));
    return states[std::min(k, states.size() - 1)];
}

StateTrack markov_states(const SimConfig& config, std::uint64_t seed)
{
    StateTrack track;
    track.dt_s = config.dt_s;
    const std::size_t n = std::max<std::size_t>(step_count(config.duration_s, config.dt_s), 1);
    track.states.reserve(n);
    track.states.push_back(EngagementLabel::OnTask);

    Rng rng(seed);
    for (std::size_t k = 1; k < n; ++k) {
        const EngagementLabel prev = track.states.back();
        const auto& p = config.transition[index_of(config.section_at(track.time(k - 1)))];
        const bool on = prev == EngagementLabel::OnTask;
        const bool flip = rng.bernoulli(on ? p.on_to_off : p.off_to_on);
        track.states.push_back(flip ? (on ? EngagementLabel::OffTask : EngagementLabel::OnTask)
                                    : prev);
    }
    return track;
}

std::vector<TimedSample> emit_modality(const StateTrack& track, Modality modality,
                                       const SimConfig& config, std::uint64_t seed,
                                       std::string_view student_id, std::string_view session_id)
{
    const auto& emission = config.emissions[index_of(modality)];
    const auto n = static_cast<std::size_t>(
        std::floor(config.duration_s * emission.sample_rate_hz + 1e-9));

    Rng rng(seed);
    std::vector<TimedSample> samples;
    samples.reserve(n);
    for (std::size_t j = 0; j < n; ++j) {
        TimedSample sample;
        sample.student_id = student_id;
        sample.session_id = session_id;
        sample.modality = modality;
        sample.t_s = static_cast<double>(j) / emission.sample_rate_hz;
        const auto& params = emission.at(config.section_at(sample.t_s), track.at(sample.t_s));
        for (std::size_t c = 0; c < emission.channels.size(); ++c) {
            sample.channels.emplace(emission.channels[c], rng.normal(params[c].mean, params[c].std));
        }
        samples.push_back(std::move(sample));
    }
    return samples;
}

EngagementLabel window_truth(const StateTrack& track, const Window& window)
{
    std::size_t on = 0;
    std::size_t off = 0;
    const auto first = static_cast<std::size_t>(std::max(0.0, std::floor(window.start_s / track.dt_s)));
    for (std::size_t k = first; k < track.size() && track.time(k) < window.end_s; ++k) {
        if (track.time(k) >= window.start_s) {
            (track.states[k] == EngagementLabel::OnTask ? on : off) += 1;
        }
    }
    if (on + off == 0) {
        return track.at(window.start_s);
    }
    return off > on ? EngagementLabel::OffTask : EngagementLabel::OnTask;
}

namespace {

// Boundary between windows i - 1 and i. Where the marks differ, the boundary
// sits inside the overlap, at increasing offsets along each run of changes,
// so a window of at most twice the hop keeps more than half its length under
// its own mark.
std::vector<double> mark_boundaries(std::span<const Window> windows, std::span<const AnnotatorMark> marks)
{
    const std::size_t n = windows.size();
    std::vector<double> bounds(n + 1);
    bounds[0] = windows.front().start_s;
    bounds[n] = windows.back().end_s;
    for (std::size_t i = 1; i < n;) {
        if (marks[i] == marks[i - 1]) {
            bounds[i] = windows[i].start_s;
            ++i;
            continue;
        }
        std::size_t run_end = i + 1;
        while (run_end < n && marks[run_end] != marks[run_end - 1]) {
            ++run_end;
        }
        const double run = static_cast<double>(run_end - i);
        for (std::size_t k = i; k < run_end; ++k) {
            const double lo = windows[k].start_s;
            const double overlap = windows[k - 1].end_s - lo;
            bounds[k] = overlap > 0.0 ? lo + overlap * static_cast<double>(k - i + 1) / (run + 1.0)
                                      : (lo + windows[k - 1].end_s) / 2.0;
        }
        i = run_end;
    }
    return bounds;
}

std::vector<AnnotationSpan> encode_marks(std::span<const Window> windows,
                                         std::span<const AnnotatorMark> marks, const std::string& id)
{
    std::vector<AnnotationSpan> spans;
    if (windows.empty()) {
        return spans;
    }
    const auto bounds = mark_boundaries(windows, marks);
    for (std::size_t i = 0; i < windows.size(); ++i) {
        if (!spans.empty() && spans.back().mark == marks[i]) {
            spans.back().end_s = bounds[i + 1];
        } else {
            spans.push_back(AnnotationSpan{id, bounds[i], bounds[i + 1], marks[i]});
        }
    }
    return spans;
}

} // namespace

std::array<std::vector<AnnotationSpan>, 3> simulate_annotators(
    const StateTrack& track, std::span<const Window> windows,
    const std::array<AnnotatorNoise, 3>& noise, std::uint64_t seed)
{
    std::vector<EngagementLabel> truth;
    truth.reserve(windows.size());
    for (const auto& w : windows) {
        truth.push_back(window_truth(track, w));
    }

    std::array<std::vector<AnnotationSpan>, 3> out;
    std::vector<AnnotatorMark> marks(windows.size());
    for (std::size_t a = 0; a < 3; ++a) {
        Rng rng(mix(seed, a));
        for (std::size_t i = 0; i < windows.size(); ++i) {
            const bool flip = rng.bernoulli(noise[a].p_flip);
            const bool invalid = rng.bernoulli(noise[a].p_invalid);
            AnnotatorMark mark = truth[i] == EngagementLabel::OnTask ? AnnotatorMark::OnTask
                                                                     : AnnotatorMark::OffTask;
            if (flip) {
                mark = mark == AnnotatorMark::OnTask ? AnnotatorMark::OffTask : AnnotatorMark::OnTask;
            }
            if (invalid) {
                mark = AnnotatorMark::Invalid;
            }
            marks[i] = mark;
        }
        out[a] = encode_marks(windows, marks, "A" + std::to_string(a + 1));
    }
    return out;
}

std::string student_name(std::size_t i)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "stu%02zu", i + 1);
    return buf;
}

std::string session_name(std::size_t k)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "sess%02zu", k + 1);
    return buf;
}

std::vector<SimulatedSession> simulate_sessions(const SimConfig& config, std::size_t jobs)
{
    config.validate();
    const auto windows =
        make_windows(config.duration_s, config.annotation_window_s, config.annotation_hop_s);

    std::vector<SimulatedSession> sessions(config.n_students * config.n_sessions);
    parallel_for(sessions.size(), jobs, [&](std::size_t idx) {
        const std::size_t student = idx / config.n_sessions;
        const std::size_t session = idx % config.n_sessions;
        const std::uint64_t stream = mix(mix(config.master_seed, 1 + student), 1 + session);

        SimulatedSession& out = sessions[idx];
        out.student_id = student_name(student);
        out.session_id = session_name(session);
        out.track = markov_states(config, mix(stream, 0));
        for (auto m : kModalities) {
            auto samples = emit_modality(out.track, m, config, mix(stream, 1 + index_of(m)),
                                         out.student_id, out.session_id);
            out.samples.insert(out.samples.end(), std::make_move_iterator(samples.begin()),
                               std::make_move_iterator(samples.end()));
        }
        out.annotations = simulate_annotators(out.track, windows, config.annotators, mix(stream, 4));
    });
    return sessions;
}

} // namespace engage
