#include "doctest.h"

#include "engage/config.hpp"
#include "engage/errors.hpp"
#include "engage/io.hpp"
#include "engage/pipeline.hpp"
#include "engage/random.hpp"
#include "engage/simulate.hpp"

#include "../support/oracles.hpp"

#include <cmath>
#include <filesystem>

using namespace engage;

namespace {

constexpr auto On = EngagementLabel::OnTask;
constexpr auto Off = EngagementLabel::OffTask;

SimConfig small_config()
{
    SimConfig c;
    c.n_students = 2;
    c.n_sessions = 2;
    c.duration_s = 120.0;
    c.schedule = {{0, 60, SectionType::Instructional}, {60, 120, SectionType::Assessment}};
    c.transition = {TransitionProbs{0.05, 0.1}, TransitionProbs{0.05, 0.1}};
    for (auto m : kModalities) {
        auto& e = c.emissions[index_of(m)];
        e.channels = {"x", "y"};
        e.sample_rate_hz = m == Modality::Mouse ? 4.0 : 1.0;
        for (auto s : kSections) {
            for (auto l : kLabels) {
                const double mean = l == On ? 0.0 : 1.0;
                e.params[index_of(s)][index_of(l)] = {{mean, 0.5}, {2.0 * mean, 1.0}};
            }
        }
    }
    c.annotators = {AnnotatorNoise{0.1, 0.05}, AnnotatorNoise{0.1, 0.05}, AnnotatorNoise{0.1, 0.05}};
    c.master_seed = 3;
    return c;
}

std::filesystem::path default_config_path()
{
    return std::filesystem::path(ENGAGE_SOURCE_DIR) / "config" / "sim_default.json";
}

} // namespace

TEST_CASE("markov_states: absorbing and forced chains")
{
    auto c = small_config();
    c.duration_s = 100.0;
    c.transition = {TransitionProbs{0.0, 0.5}, TransitionProbs{0.0, 0.5}};
    const auto still = markov_states(c, 1);
    CHECK(still.size() == 100);
    for (auto s : still.states) {
        CHECK(s == On);
    }

    c.transition = {TransitionProbs{1.0, 1.0}, TransitionProbs{1.0, 1.0}};
    const auto alt = markov_states(c, 1);
    for (std::size_t k = 0; k < alt.size(); ++k) {
        CHECK(alt.states[k] == (k % 2 == 0 ? On : Off));
    }
}

TEST_CASE("markov_states: empirical transition rates")
{
    auto c = small_config();
    c.duration_s = 1e6;
    c.schedule = {{0, 1e6, SectionType::Assessment}};
    c.transition[index_of(SectionType::Assessment)] = TransitionProbs{0.1, 0.3};
    const auto track = markov_states(c, 42);
    REQUIRE(track.size() == 1000000);
    double from_on = 0, on_to_off = 0, from_off = 0, off_to_on = 0;
    for (std::size_t k = 1; k < track.size(); ++k) {
        if (track.states[k - 1] == On) {
            from_on += 1;
            on_to_off += track.states[k] == Off ? 1 : 0;
        } else {
            from_off += 1;
            off_to_on += track.states[k] == On ? 1 : 0;
        }
    }
    CHECK(std::abs(on_to_off / from_on - 0.1) <= 0.02);
    CHECK(std::abs(off_to_on / from_off - 0.3) <= 0.02);
}

TEST_CASE("markov_states: section-specific probabilities")
{
    auto c = small_config();
    c.transition = {TransitionProbs{0.0, 0.0}, TransitionProbs{1.0, 1.0}};
    const auto track = markov_states(c, 5);
    // Instructional [0, 60): no moves. The move into step 60 uses time 59, still Instructional.
    for (std::size_t k = 0; k <= 60; ++k) {
        CHECK(track.states[k] == On);
    }
    CHECK(track.states[61] == Off);
    CHECK(track.states[62] == On);
}

TEST_CASE("emit_modality: counts, timing and degenerate emissions")
{
    auto c = small_config();
    const auto track = markov_states(c, 9);
    const auto mouse = emit_modality(track, Modality::Mouse, c, 1, "stu01", "sess01");
    CHECK(mouse.size() == 480);
    CHECK(mouse[1].t_s == 0.25);
    CHECK(mouse.back().t_s < c.duration_s);
    for (const auto& s : mouse) {
        CHECK(s.modality == Modality::Mouse);
        CHECK(s.channels.size() == 2);
    }

    auto flat = c;
    for (auto& by_section : flat.emissions[index_of(Modality::Appearance)].params) {
        for (auto& by_state : by_section) {
            by_state = {{3.5, 0.0}, {3.5, 0.0}};
        }
    }
    const auto constant = emit_modality(track, Modality::Appearance, flat, 2, "stu01", "sess01");
    CHECK(constant.size() == 120);
    for (const auto& s : constant) {
        CHECK(s.channels.at("x") == 3.5);
        CHECK(s.channels.at("y") == 3.5);
    }
}

TEST_CASE("default config: Instructional Mouse channels do not depend on the state")
{
    const auto c = load_sim_config(default_config_path());
    c.validate();
    const auto& mouse = c.emissions[index_of(Modality::Mouse)];
    const auto& on = mouse.at(SectionType::Instructional, On);
    const auto& off = mouse.at(SectionType::Instructional, Off);
    REQUIRE(on.size() == off.size());
    for (std::size_t ch = 0; ch < on.size(); ++ch) {
        CHECK(on[ch].mean - off[ch].mean == 0.0);
    }
}

TEST_CASE("window_truth: majority with ties to OnTask")
{
    StateTrack track;
    track.states = {On, Off, Off, Off, Off, Off, On, On};
    CHECK(window_truth(track, Window{0, 0, 8, {}}) == Off);
    track.states = {On, Off, Off, Off, Off, On, On, On, On};
    CHECK(window_truth(track, Window{0, 1, 9, {}}) == On);
}

TEST_CASE("simulate_annotators: noise extremes")
{
    auto c = small_config();
    c.duration_s = 600.0;
    c.schedule = {{0, 600, SectionType::Instructional}};
    const auto track = markov_states(c, 77);
    const auto windows = make_windows(c.duration_s);

    SUBCASE("no noise: all three annotators reproduce the truth")
    {
        const std::array<AnnotatorNoise, 3> none{};
        const auto spans = simulate_annotators(track, windows, none, 4);
        std::size_t changes = 0;
        for (std::size_t i = 0; i < windows.size(); ++i) {
            const auto truth = window_truth(track, windows[i]);
            changes += i > 0 && window_truth(track, windows[i - 1]) != truth ? 1 : 0;
            std::array<AnnotatorMark, 3> marks{};
            for (std::size_t a = 0; a < 3; ++a) {
                marks[a] = window_annotator_label(spans[a], windows[i]);
                CHECK(marks[a] == (truth == On ? AnnotatorMark::OnTask : AnnotatorMark::OffTask));
            }
            CHECK(fuse_annotations(marks) == truth);
        }
        CHECK(changes > 10);
        for (std::size_t a = 0; a < 3; ++a) {
            CHECK(spans[a].front().annotator_id == "A" + std::to_string(a + 1));
            CHECK(spans[a].front().start_s == 0.0);
            CHECK(spans[a].back().end_s == windows.back().end_s);
            for (std::size_t k = 1; k < spans[a].size(); ++k) {
                CHECK(spans[a][k].start_s == spans[a][k - 1].end_s);
                CHECK(spans[a][k].mark != spans[a][k - 1].mark);
            }
        }
    }
    SUBCASE("noisy marks are each recovered, including long runs of changes")
    {
        oracle::Gen g(12);
        const auto w = make_windows(200.0);
        const std::array<AnnotatorNoise, 3> noisy{AnnotatorNoise{0.4, 0.2}, AnnotatorNoise{0.5, 0.0},
                                                  AnnotatorNoise{0.0, 0.0}};
        std::size_t longest_run = 0;
        for (std::uint64_t trial = 0; trial < 200; ++trial) {
            StateTrack t;
            EngagementLabel s = On;
            for (int k = 0; k < 200; ++k) {
                if (g.coin(0.3)) {
                    s = s == On ? Off : On;
                }
                t.states.push_back(s);
            }
            const auto sp = simulate_annotators(t, w, noisy, trial);
            for (std::size_t a = 0; a < 3; ++a) {
                // Same draws as documented: per window, flip then invalid.
                Rng rng(mix(trial, a));
                std::size_t run = 0;
                AnnotatorMark previous = AnnotatorMark::Invalid;
                for (std::size_t i = 0; i < w.size(); ++i) {
                    const bool flip = rng.bernoulli(noisy[a].p_flip);
                    const bool invalid = rng.bernoulli(noisy[a].p_invalid);
                    const bool off = (window_truth(t, w[i]) == Off) != flip;
                    const auto expected =
                        invalid ? AnnotatorMark::Invalid : (off ? AnnotatorMark::OffTask : AnnotatorMark::OnTask);
                    CHECK(window_annotator_label(sp[a], w[i]) == expected);
                    run = i > 0 && expected != previous ? run + 1 : 0;
                    longest_run = std::max(longest_run, run);
                    previous = expected;
                }
            }
        }
        CHECK(longest_run >= 8);
    }
    SUBCASE("all invalid: every window is discarded")
    {
        const std::array<AnnotatorNoise, 3> invalid{AnnotatorNoise{0.0, 1.0}, AnnotatorNoise{0.2, 1.0},
                                                    AnnotatorNoise{0.0, 1.0}};
        const auto spans = simulate_annotators(track, windows, invalid, 4);
        for (const auto& w : windows) {
            std::array<AnnotatorMark, 3> marks{};
            for (std::size_t a = 0; a < 3; ++a) {
                marks[a] = window_annotator_label(spans[a], w);
            }
            CHECK_FALSE(fuse_annotations(marks).has_value());
        }
    }
}

TEST_CASE("simulate_sessions: deterministic, jobs-independent, seeded per stream")
{
    const auto c = small_config();
    const auto a = simulate_sessions(c, 1);
    const auto b = simulate_sessions(c, 3);
    REQUIRE(a.size() == 4);
    REQUIRE(b.size() == 4);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].student_id == b[i].student_id);
        CHECK(a[i].track.states == b[i].track.states);
        CHECK(a[i].samples == b[i].samples);
        CHECK(a[i].annotations == b[i].annotations);
    }
    CHECK(a[0].student_id == "stu01");
    CHECK(a[1].session_id == "sess02");

    const std::uint64_t stream = mix(mix(c.master_seed, 1 + 1), 1 + 0);
    CHECK(a[2].track.states == markov_states(c, mix(stream, 0)).states);

    auto other = c;
    other.master_seed = 4;
    CHECK_FALSE(simulate_sessions(other, 1)[0].samples == a[0].samples);
}

TEST_CASE("SimConfig validation")
{
    auto c = small_config();
    CHECK_NOTHROW(c.validate());
    c.transition[0].on_to_off = 1.5;
    CHECK_THROWS_AS(c.validate(), ParameterError);
    c = small_config();
    c.schedule[1].start_s = 70;
    CHECK_THROWS_AS(c.validate(), ParameterError);
    c = small_config();
    c.emissions[0].params[0][0][0].std = -1.0;
    CHECK_THROWS_AS(c.validate(), ParameterError);
}

TEST_CASE("generated CSVs round-trip through the loaders")
{
    const auto c = small_config();
    const auto sessions = simulate_sessions(c, 1);
    const auto raw = to_raw(c, sessions);
    const auto dir = std::filesystem::temp_directory_path() / "engage_sim_roundtrip";
    std::filesystem::remove_all(dir);
    save_dataset(dir, raw);
    const auto back = load_dataset(dir);
    CHECK(back.samples == raw.samples);
    CHECK(back.annotations == raw.annotations);
    CHECK(back.schedule == raw.schedule);
    std::filesystem::remove_all(dir);
}

TEST_CASE("default config runs through extraction")
{
    auto c = load_sim_config(default_config_path());
    c.n_students = 2;
    const auto sessions = simulate_sessions(c, 1);
    const auto raw = to_raw(c, sessions);
    const auto schema = infer_schema(raw.samples);
    const auto instances = extract_instances(raw, schema, 8.0, 4.0);
    const auto windows = make_windows(c.duration_s);
    CHECK(instances.size() <= 2 * windows.size());
    CHECK(instances.size() >= windows.size());
    bool both_sections[2] = {false, false};
    for (const auto& inst : instances) {
        both_sections[index_of(inst.window.section)] = true;
        for (auto m : kModalities) {
            CHECK(inst[m].values.size() == schema[m].size());
        }
    }
    CHECK(both_sections[0]);
    CHECK(both_sections[1]);
}
