#pragma once

#include "engage/domain.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace engage {

struct ChannelEmission {
    double mean = 0.0;
    double std = 0.0;

    friend bool operator==(const ChannelEmission&, const ChannelEmission&) = default;
};

/// Gaussian emission model of one modality stream.
struct ModalityEmission {
    std::vector<std::string> channels;
    double sample_rate_hz = 1.0;
    // [section][state], one entry per channel
    std::array<std::array<std::vector<ChannelEmission>, 2>, 2> params;

    const std::vector<ChannelEmission>& at(SectionType s, EngagementLabel state) const
    {
        return params[index_of(s)][index_of(state)];
    }

    friend bool operator==(const ModalityEmission&, const ModalityEmission&) = default;
};

/// Per-step switching probabilities of the engagement chain.
struct TransitionProbs {
    double on_to_off = 0.0;
    double off_to_on = 0.0;

    friend bool operator==(const TransitionProbs&, const TransitionProbs&) = default;
};

struct AnnotatorNoise {
    double p_flip = 0.0;
    double p_invalid = 0.0;

    friend bool operator==(const AnnotatorNoise&, const AnnotatorNoise&) = default;
};

struct SimConfig {
    int version = 1;
    std::size_t n_students = 6;
    std::size_t n_sessions = 1;  // every student attends every session
    double duration_s = 480.0;
    double dt_s = 1.0;
    std::vector<ScheduleSpan> schedule;
    std::array<TransitionProbs, 2> transition{};  // per section
    std::array<ModalityEmission, 3> emissions{};  // per modality
    std::array<AnnotatorNoise, 3> annotators{};
    double annotation_window_s = kDefaultWindowSeconds;
    double annotation_hop_s = kDefaultHopSeconds;
    std::uint64_t master_seed = 0;

    /// Throws ParameterError describing the first violated constraint.
    void validate() const;
    /// Section of the schedule span containing t (the last span for t = duration).
    SectionType section_at(double t_s) const;

    friend bool operator==(const SimConfig&, const SimConfig&) = default;
};

/// Engagement state at t = k * dt_s for each step k.
struct StateTrack {
    double dt_s = 1.0;
    std::vector<EngagementLabel> states;

    std::size_t size() const noexcept { return states.size(); }
    double time(std::size_t k) const noexcept { return static_cast<double>(k) * dt_s; }
    EngagementLabel at(double t_s) const;
};

/// Two-state chain starting OnTask; the move from step k - 1 to step k uses
/// the transition probabilities of the section in force at time(k - 1).
StateTrack markov_states(const SimConfig& config, std::uint64_t seed);

/// Samples at t = j / rate for j < duration * rate; each channel is drawn
/// from the Gaussian of (modality, section at t, state at t).
std::vector<TimedSample> emit_modality(const StateTrack& track, Modality modality,
                                       const SimConfig& config, std::uint64_t seed,
                                       std::string_view student_id, std::string_view session_id);

/// Majority state over the steps inside the window; ties go to OnTask.
EngagementLabel window_truth(const StateTrack& track, const Window& window);

/// Three noisy annotators. Each window's mark is its true majority state,
/// flipped with p_flip and then replaced by Invalid with p_invalid. Marks
/// become non-overlapping spans: where neighbouring windows differ, the
/// boundary is placed inside their overlap, at increasing offsets along a run
/// of changes. When window <= 2 * hop, window_annotator_label recovers every
/// window's mark exactly. Adjacent same-mark windows merge into one span.
/// Annotator a draws from Rng(mix(seed, a)) and is named "A<a+1>".
std::array<std::vector<AnnotationSpan>, 3> simulate_annotators(
    const StateTrack& track, std::span<const Window> windows,
    const std::array<AnnotatorNoise, 3>& noise, std::uint64_t seed);

struct SimulatedSession {
    std::string student_id;
    std::string session_id;
    StateTrack track;
    std::vector<TimedSample> samples;  // modality order, then time
    std::array<std::vector<AnnotationSpan>, 3> annotations;
};

/// All (student, session) streams. The stream of student i and session k is
/// seeded with mix(mix(master_seed, 1 + i), 1 + k); within it the state
/// track uses mix(stream, 0), modality m mix(stream, 1 + m) and the
/// annotators mix(stream, 4).
std::vector<SimulatedSession> simulate_sessions(const SimConfig& config, std::size_t jobs = 1);

std::string student_name(std::size_t i);
std::string session_name(std::size_t k);

} // namespace engage
