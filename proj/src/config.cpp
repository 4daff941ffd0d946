#include "engage/config.hpp"

#include "engage/errors.hpp"
#include "engage/io.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <initializer_list>
#include <set>

namespace engage {

using nlohmann::json;

namespace {

void only_keys(const json& obj, std::string_view where, std::initializer_list<std::string_view> allowed)
{
    if (!obj.is_object()) {
        throw ParseError(std::string(where) + ": expected an object");
    }
    for (const auto& [key, value] : obj.items()) {
        bool known = false;
        for (auto a : allowed) {
            known = known || key == a;
        }
        if (!known) {
            throw ParseError(std::string(where) + ": unknown key '" + key + "'");
        }
    }
}

template <typename T>
T get(const json& obj, std::string_view where, const char* key)
{
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ParseError(std::string(where) + "." + key + ": " + e.what());
    }
}

template <typename T>
void get_if(const json& obj, std::string_view where, const char* key, T& out)
{
    if (obj.contains(key)) {
        out = get<T>(obj, where, key);
    }
}

json parse_json(std::string_view text, std::string_view what)
{
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string(what) + ": " + e.what());
    }
}

Modality modality_key(const std::string& key, std::string_view where)
{
    auto m = parse_modality(key);
    if (!m) {
        throw ParseError(std::string(where) + ": unknown modality '" + key + "'");
    }
    return *m;
}

void read_forest(const json& j, std::string_view where, ForestParams& p)
{
    only_keys(j, where, {"n_trees", "max_depth", "min_samples_leaf", "mtry"});
    get_if(j, where, "n_trees", p.n_trees);
    get_if(j, where, "max_depth", p.max_depth);
    get_if(j, where, "min_samples_leaf", p.min_samples_leaf);
    if (j.contains("mtry")) {
        if (j.at("mtry").is_null()) {
            p.mtry.reset();
        } else {
            p.mtry = get<std::size_t>(j, where, "mtry");
        }
    }
}

json write_forest(const ForestParams& p)
{
    json j;
    j["n_trees"] = p.n_trees;
    j["max_depth"] = p.max_depth;
    j["min_samples_leaf"] = p.min_samples_leaf;
    j["mtry"] = p.mtry ? json(*p.mtry) : json(nullptr);
    return j;
}

ModalitySchema read_schema(const json& j, std::string_view where)
{
    only_keys(j, where, {"channels", "statistics", "sample_rate"});
    ModalitySchema schema;
    schema.channels = get<std::vector<std::string>>(j, where, "channels");
    if (j.contains("statistics")) {
        schema.statistics.clear();
        for (const auto& name : get<std::vector<std::string>>(j, where, "statistics")) {
            auto stat = parse_statistic(name);
            if (!stat) {
                throw ParseError(std::string(where) + ": unknown statistic '" + name + "'");
            }
            schema.statistics.push_back(*stat);
        }
    }
    get_if(j, where, "sample_rate", schema.sample_rate);
    return schema;
}

json write_schema(const ModalitySchema& schema)
{
    json stats = json::array();
    for (auto s : schema.statistics) {
        stats.push_back(std::string(to_string(s)));
    }
    return json{{"channels", schema.channels}, {"statistics", stats}, {"sample_rate", schema.sample_rate}};
}

} // namespace

std::uint64_t fnv1a64(std::string_view bytes) noexcept
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

void RunConfig::validate() const
{
    if (!(window_s > 0.0) || !(hop_s > 0.0) || hop_s > window_s) {
        throw ParameterError("window_s and hop_s must satisfy 0 < hop_s <= window_s");
    }
    if (repeats == 0) {
        throw ParameterError("repeats must be at least 1");
    }
    if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0)) {
        throw ParameterError("holdout_fraction must be in (0, 1)");
    }
    for (const auto& p : forest) {
        if (p.n_trees == 0 || p.max_depth == 0 || p.min_samples_leaf == 0 || (p.mtry && *p.mtry == 0)) {
            throw ParameterError("forest parameters must be positive");
        }
    }
    if (features) {
        for (auto m : kModalities) {
            const auto& schema = (*features)[m];
            std::set<std::string> unique(schema.channels.begin(), schema.channels.end());
            if (unique.size() != schema.channels.size() || unique.contains("")) {
                throw ParameterError(std::string(to_string(m)) +
                                     " feature channels must be non-empty and unique");
            }
            if (schema.size() == 0) {
                throw ParameterError(std::string(to_string(m)) + " feature schema is empty");
            }
            const auto names = schema.feature_names();
            if (names.size() != std::set(names.begin(), names.end()).size()) {
                throw ParameterError(std::string(to_string(m)) + " feature names are not unique");
            }
        }
    }
}

ExperimentSettings RunConfig::experiment(std::size_t jobs) const
{
    ExperimentSettings s;
    s.protocol = protocol;
    s.repeats = repeats;
    s.master_seed = seed;
    s.forest = forest;
    s.fusion = fusion;
    s.scheme = overall;
    s.holdout_fraction = holdout_fraction;
    s.jobs = jobs;
    return s;
}

RunConfig parse_run_config(std::string_view json_text)
{
    const json j = parse_json(json_text, "run config");
    const std::string_view where = "run config";
    only_keys(j, where,
              {"protocol", "window_s", "hop_s", "repeats", "seed", "fusion", "overall",
               "holdout_fraction", "forest", "forest_overrides", "features", "paths"});

    RunConfig c;
    if (j.contains("protocol")) {
        try {
            c.protocol = parse_protocol(get<std::string>(j, where, "protocol"));
        } catch (const ParameterError& e) {
            throw ParseError(e.what());
        }
    }
    get_if(j, where, "window_s", c.window_s);
    get_if(j, where, "hop_s", c.hop_s);
    get_if(j, where, "repeats", c.repeats);
    get_if(j, where, "seed", c.seed);
    get_if(j, where, "fusion", c.fusion);
    get_if(j, where, "holdout_fraction", c.holdout_fraction);
    if (j.contains("overall")) {
        try {
            c.overall = parse_overall_scheme(get<std::string>(j, where, "overall"));
        } catch (const ParameterError& e) {
            throw ParseError(e.what());
        }
    }

    ForestParams base;
    if (j.contains("forest")) {
        read_forest(j.at("forest"), "run config.forest", base);
    }
    c.forest.fill(base);
    if (j.contains("forest_overrides")) {
        const auto& overrides = j.at("forest_overrides");
        only_keys(overrides, "run config.forest_overrides",
                  {"Appearance", "ContextPerformance", "Mouse"});
        for (const auto& [key, value] : overrides.items()) {
            const Modality m = modality_key(key, "run config.forest_overrides");
            read_forest(value, "run config.forest_overrides." + key, c.forest[index_of(m)]);
        }
    }

    if (j.contains("features")) {
        const auto& f = j.at("features");
        only_keys(f, "run config.features", {"Appearance", "ContextPerformance", "Mouse"});
        FeatureSchema schema;
        for (auto m : kModalities) {
            const std::string key(to_string(m));
            if (!f.contains(key)) {
                throw ParseError("run config.features: missing modality '" + key + "'");
            }
            schema[m] = read_schema(f.at(key), "run config.features." + key);
        }
        c.features = std::move(schema);
    }

    if (j.contains("paths")) {
        const auto& p = j.at("paths");
        only_keys(p, "run config.paths", {"data", "out"});
        get_if(p, "run config.paths", "data", c.paths.data);
        get_if(p, "run config.paths", "out", c.paths.out);
    }

    c.validate();
    return c;
}

std::string dump_run_config(const RunConfig& c)
{
    json j;
    j["protocol"] = std::string(to_string(c.protocol));
    j["window_s"] = c.window_s;
    j["hop_s"] = c.hop_s;
    j["repeats"] = c.repeats;
    j["seed"] = c.seed;
    j["fusion"] = c.fusion;
    j["overall"] = std::string(to_string(c.overall));
    j["holdout_fraction"] = c.holdout_fraction;
    // Every modality is written out explicitly; "forest" holds the Appearance values.
    j["forest"] = write_forest(c.forest[0]);
    json overrides = json::object();
    for (auto m : kModalities) {
        overrides[std::string(to_string(m))] = write_forest(c.forest[index_of(m)]);
    }
    j["forest_overrides"] = overrides;
    if (c.features) {
        json f = json::object();
        for (auto m : kModalities) {
            f[std::string(to_string(m))] = write_schema((*c.features)[m]);
        }
        j["features"] = f;
    }
    j["paths"] = json{{"data", c.paths.data}, {"out", c.paths.out}};
    return j.dump(2) + "\n";
}

std::string config_hash(const RunConfig& config)
{
    // Paths do not affect results.
    RunConfig copy = config;
    copy.paths = {};
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(dump_run_config(copy))));
    return buf;
}

namespace {

ChannelEmission read_emission(const json& j, std::string_view where)
{
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
        throw ParseError(std::string(where) + ": expected [mean, std]");
    }
    return {j[0].get<double>(), j[1].get<double>()};
}

} // namespace

SimConfig parse_sim_config(std::string_view json_text)
{
    const json j = parse_json(json_text, "sim config");
    const std::string_view where = "sim config";
    only_keys(j, where,
              {"version", "n_students", "n_sessions", "duration_s", "dt_s", "master_seed",
               "annotation_window_s", "annotation_hop_s", "schedule", "transition", "modalities",
               "annotators", "description"});

    SimConfig c;
    c.version = get<int>(j, where, "version");
    if (c.version != 1) {
        throw UnsupportedVersionError("sim config version " + std::to_string(c.version) +
                                      " is not supported");
    }
    get_if(j, where, "n_students", c.n_students);
    get_if(j, where, "n_sessions", c.n_sessions);
    get_if(j, where, "duration_s", c.duration_s);
    get_if(j, where, "dt_s", c.dt_s);
    get_if(j, where, "master_seed", c.master_seed);
    get_if(j, where, "annotation_window_s", c.annotation_window_s);
    get_if(j, where, "annotation_hop_s", c.annotation_hop_s);

    for (const auto& span : j.at("schedule")) {
        only_keys(span, "sim config.schedule[]", {"section", "start_s", "end_s"});
        auto section = parse_section(get<std::string>(span, "sim config.schedule[]", "section"));
        if (!section) {
            throw ParseError("sim config.schedule[]: unknown section");
        }
        c.schedule.push_back(ScheduleSpan{get<double>(span, "sim config.schedule[]", "start_s"),
                                          get<double>(span, "sim config.schedule[]", "end_s"),
                                          *section});
    }

    const auto& transition = j.at("transition");
    only_keys(transition, "sim config.transition", {"Instructional", "Assessment"});
    for (auto s : kSections) {
        const std::string key(to_string(s));
        const std::string w = "sim config.transition." + key;
        const auto& t = transition.at(key);
        only_keys(t, w, {"on_to_off", "off_to_on"});
        c.transition[index_of(s)] = {get<double>(t, w, "on_to_off"), get<double>(t, w, "off_to_on")};
    }

    const auto& modalities = j.at("modalities");
    only_keys(modalities, "sim config.modalities", {"Appearance", "ContextPerformance", "Mouse"});
    for (auto m : kModalities) {
        const std::string key(to_string(m));
        const std::string w = "sim config.modalities." + key;
        const auto& mj = modalities.at(key);
        only_keys(mj, w, {"sample_rate_hz", "channels"});
        auto& e = c.emissions[index_of(m)];
        e.sample_rate_hz = get<double>(mj, w, "sample_rate_hz");
        for (const auto& ch : mj.at("channels")) {
            const std::string cw = w + ".channels[]";
            only_keys(ch, cw, {"name", "Instructional", "Assessment"});
            e.channels.push_back(get<std::string>(ch, cw, "name"));
            for (auto s : kSections) {
                const auto& sj = ch.at(std::string(to_string(s)));
                only_keys(sj, cw, {"OnTask", "OffTask"});
                for (auto l : kLabels) {
                    e.params[index_of(s)][index_of(l)].push_back(
                        read_emission(sj.at(std::string(to_string(l))), cw));
                }
            }
        }
    }

    const auto& annotators = j.at("annotators");
    if (!annotators.is_array() || annotators.size() != 3) {
        throw ParseError("sim config.annotators: expected exactly 3 entries");
    }
    for (std::size_t a = 0; a < 3; ++a) {
        only_keys(annotators[a], "sim config.annotators[]", {"p_flip", "p_invalid"});
        c.annotators[a] = {get<double>(annotators[a], "sim config.annotators[]", "p_flip"),
                           get<double>(annotators[a], "sim config.annotators[]", "p_invalid")};
    }

    c.validate();
    return c;
}

std::string dump_sim_config(const SimConfig& c)
{
    json j;
    j["version"] = c.version;
    j["n_students"] = c.n_students;
    j["n_sessions"] = c.n_sessions;
    j["duration_s"] = c.duration_s;
    j["dt_s"] = c.dt_s;
    j["master_seed"] = c.master_seed;
    j["annotation_window_s"] = c.annotation_window_s;
    j["annotation_hop_s"] = c.annotation_hop_s;
    json schedule = json::array();
    for (const auto& s : c.schedule) {
        schedule.push_back({{"section", to_string(s.section)}, {"start_s", s.start_s}, {"end_s", s.end_s}});
    }
    j["schedule"] = schedule;
    for (auto s : kSections) {
        const auto& t = c.transition[index_of(s)];
        j["transition"][std::string(to_string(s))] = {{"on_to_off", t.on_to_off}, {"off_to_on", t.off_to_on}};
    }
    for (auto m : kModalities) {
        const auto& e = c.emissions[index_of(m)];
        json channels = json::array();
        for (std::size_t ch = 0; ch < e.channels.size(); ++ch) {
            json cj{{"name", e.channels[ch]}};
            for (auto s : kSections) {
                for (auto l : kLabels) {
                    const auto& p = e.params[index_of(s)][index_of(l)][ch];
                    cj[std::string(to_string(s))][std::string(to_string(l))] = {p.mean, p.std};
                }
            }
            channels.push_back(cj);
        }
        j["modalities"][std::string(to_string(m))] = {{"sample_rate_hz", e.sample_rate_hz},
                                                      {"channels", channels}};
    }
    json annotators = json::array();
    for (const auto& a : c.annotators) {
        annotators.push_back({{"p_flip", a.p_flip}, {"p_invalid", a.p_invalid}});
    }
    j["annotators"] = annotators;
    return j.dump(2) + "\n";
}

RunConfig load_run_config(const std::filesystem::path& path)
{
    return parse_run_config(read_file(path));
}

SimConfig load_sim_config(const std::filesystem::path& path)
{
    return parse_sim_config(read_file(path));
}

} // namespace engage
