#include "engage/features.hpp"

#include "engage/errors.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <tuple>

namespace engage {

std::string_view to_string(Statistic s)
{
    switch (s) {
    case Statistic::Count: return "count";
    case Statistic::Mean: return "mean";
    case Statistic::Std: return "std";
    case Statistic::Min: return "min";
    case Statistic::Max: return "max";
    case Statistic::Range: return "range";
    }
    return "count";
}

std::optional<Statistic> parse_statistic(std::string_view text)
{
    for (auto s : kAllStatistics) {
        if (text == to_string(s)) {
            return s;
        }
    }
    return std::nullopt;
}

std::vector<std::string> ModalitySchema::feature_names() const
{
    std::vector<std::string> names;
    names.reserve(size());
    for (const auto& channel : channels) {
        for (auto stat : statistics) {
            names.push_back(channel + "." + std::string(to_string(stat)));
        }
    }
    if (sample_rate) {
        names.emplace_back("sample_rate");
    }
    return names;
}

namespace {

struct ChannelSummary {
    double count = 0, mean = 0, std = 0, min = 0, max = 0;
};

// Values are sorted first so the result does not depend on sample order.
ChannelSummary summarise(std::vector<double>& values)
{
    ChannelSummary s;
    if (values.empty()) {
        return s;
    }
    std::ranges::sort(values);
    const auto n = static_cast<double>(values.size());
    double sum = 0.0;
    for (double v : values) {
        sum += v;
    }
    s.count = n;
    s.mean = sum / n;
    double sq = 0.0;
    for (double v : values) {
        sq += (v - s.mean) * (v - s.mean);
    }
    s.std = std::sqrt(sq / n);
    s.min = values.front();
    s.max = values.back();
    return s;
}

double pick(const ChannelSummary& s, Statistic stat)
{
    switch (stat) {
    case Statistic::Count: return s.count;
    case Statistic::Mean: return s.mean;
    case Statistic::Std: return s.std;
    case Statistic::Min: return s.min;
    case Statistic::Max: return s.max;
    case Statistic::Range: return s.max - s.min;
    }
    return 0.0;
}

void check_sample(const TimedSample& sample, Modality modality)
{
    if (sample.modality != modality) {
        throw DataError("sample at t=" + std::to_string(sample.t_s) + " in session '" +
                        sample.session_id + "' is " + std::string(to_string(sample.modality)) +
                        ", expected " + std::string(to_string(modality)));
    }
    if (!std::isfinite(sample.t_s)) {
        throw DataError("non-finite timestamp in session '" + sample.session_id + "'");
    }
    for (const auto& [name, value] : sample.channels) {
        if (!std::isfinite(value)) {
            std::ostringstream msg;
            msg << "non-finite value for channel '" << name << "' at t=" << sample.t_s
                << " (student '" << sample.student_id << "', session '" << sample.session_id
                << "', " << to_string(modality) << ")";
            throw DataError(msg.str());
        }
    }
}

template <typename Range>
FeatureVector summarise_window(const Range& in_window, Modality modality, const Window& window,
                               const ModalitySchema& schema)
{
    FeatureVector fv;
    fv.modality = modality;
    fv.window_index = window.index;
    fv.names = schema.feature_names();
    fv.values.reserve(fv.names.size());

    std::vector<double> values;
    for (const auto& channel : schema.channels) {
        values.clear();
        for (const TimedSample& sample : in_window) {
            if (auto it = sample.channels.find(channel); it != sample.channels.end()) {
                values.push_back(it->second);
            }
        }
        const auto summary = summarise(values);
        for (auto stat : schema.statistics) {
            fv.values.push_back(pick(summary, stat));
        }
    }
    if (schema.sample_rate) {
        fv.values.push_back(static_cast<double>(std::ranges::distance(in_window)) /
                            window.length());
    }
    return fv;
}

} // namespace

FeatureVector extract_features(std::span<const TimedSample> samples, Modality modality,
                               const Window& window, const ModalitySchema& schema)
{
    std::vector<std::reference_wrapper<const TimedSample>> in_window;
    for (const auto& sample : samples) {
        check_sample(sample, modality);
        if (sample.t_s >= window.start_s && sample.t_s < window.end_s) {
            in_window.emplace_back(sample);
        }
    }
    return summarise_window(in_window, modality, window, schema);
}

std::vector<FeatureVector> extract_session_features(std::span<const TimedSample> sorted_samples,
                                                    Modality modality,
                                                    std::span<const Window> windows,
                                                    const ModalitySchema& schema)
{
    for (const auto& sample : sorted_samples) {
        check_sample(sample, modality);
    }
    if (!std::ranges::is_sorted(sorted_samples, {}, &TimedSample::t_s)) {
        throw DataError("samples must be sorted by time for session feature extraction");
    }

    std::vector<FeatureVector> out;
    out.reserve(windows.size());
    for (const auto& window : windows) {
        auto first = std::ranges::lower_bound(sorted_samples, window.start_s, {}, &TimedSample::t_s);
        auto last = std::ranges::lower_bound(first, sorted_samples.end(), window.end_s, {},
                                             &TimedSample::t_s);
        out.push_back(
            summarise_window(std::span<const TimedSample>(first, last), modality, window, schema));
    }
    return out;
}

FeatureVector zero_features(Modality modality, std::size_t window_index,
                            const ModalitySchema& schema)
{
    FeatureVector fv;
    fv.modality = modality;
    fv.window_index = window_index;
    fv.names = schema.feature_names();
    fv.values.assign(fv.names.size(), 0.0);
    return fv;
}

std::vector<Instance> build_instances(std::span<const KeyedFeatures> features,
                                      std::span<const WindowLabel> labels,
                                      const FeatureSchema& schema)
{
    using Key = std::tuple<std::string, std::string, std::size_t>; // session, student, window
    std::map<Key, std::array<const FeatureVector*, 3>> by_window;
    for (const auto& keyed : features) {
        const auto& fv = keyed.features;
        auto& slot = by_window[Key{keyed.session_id, keyed.student_id, fv.window_index}];
        auto& entry = slot[index_of(fv.modality)];
        if (entry != nullptr) {
            throw DataError("duplicate " + std::string(to_string(fv.modality)) +
                            " features for session '" + keyed.session_id + "', student '" +
                            keyed.student_id + "', window " + std::to_string(fv.window_index));
        }
        if (fv.values.size() != schema[fv.modality].size()) {
            throw DataError("feature vector for window " + std::to_string(fv.window_index) +
                            " has " + std::to_string(fv.values.size()) + " values, schema has " +
                            std::to_string(schema[fv.modality].size()));
        }
        entry = &fv;
    }

    std::vector<const WindowLabel*> kept;
    for (const auto& wl : labels) {
        if (wl.label) {
            kept.push_back(&wl);
        }
    }
    std::ranges::sort(kept, {}, [](const WindowLabel* wl) {
        return std::tie(wl->session_id, wl->student_id, wl->window.index);
    });

    std::vector<Instance> instances;
    instances.reserve(kept.size());
    for (const WindowLabel* wl : kept) {
        Instance inst;
        inst.student_id = wl->student_id;
        inst.session_id = wl->session_id;
        inst.window = wl->window;
        inst.label = *wl->label;
        auto it = by_window.find(Key{wl->session_id, wl->student_id, wl->window.index});
        for (auto m : kModalities) {
            const FeatureVector* fv = it != by_window.end() ? it->second[index_of(m)] : nullptr;
            inst.features[index_of(m)] =
                fv != nullptr ? *fv : zero_features(m, wl->window.index, schema[m]);
        }
        instances.push_back(std::move(inst));
    }
    return instances;
}

} // namespace engage
