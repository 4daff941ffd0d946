#include "engage/model.hpp"

#include "engage/errors.hpp"
#include "engage/io.hpp"

#include <json.hpp>

#include <cmath>
#include <functional>
#include <limits>

namespace engage {

using nlohmann::json;

namespace {

json tree_to_json(const DecisionTree& tree, std::uint32_t index)
{
    const TreeNode& node = tree.nodes[index];
    if (node.leaf) {
        return json{{"leaf", {node.counts[EngagementLabel::OnTask], node.counts[EngagementLabel::OffTask]}}};
    }
    return json{{"feature", node.split.feature_index},
                {"threshold", node.split.threshold},
                {"left", tree_to_json(tree, node.left)},
                {"right", tree_to_json(tree, node.right)}};
}

[[noreturn]] void malformed(const std::string& what)
{
    throw ParseError("model file: " + what);
}

std::uint32_t tree_from_json(const json& j, std::size_t n_features, DecisionTree& tree,
                             std::size_t depth)
{
    if (depth > 100000) {
        malformed("tree too deep");
    }
    if (!j.is_object()) {
        malformed("tree node is not an object");
    }
    const auto index = static_cast<std::uint32_t>(tree.nodes.size());
    tree.nodes.emplace_back();
    if (j.contains("leaf")) {
        const auto& counts = j.at("leaf");
        if (j.size() != 1 || !counts.is_array() || counts.size() != 2 ||
            !counts[0].is_number_unsigned() || !counts[1].is_number_unsigned()) {
            malformed("leaf must be {\"leaf\": [on, off]}");
        }
        TreeNode& node = tree.nodes[index];
        node.counts[EngagementLabel::OnTask] = counts[0].get<std::size_t>();
        node.counts[EngagementLabel::OffTask] = counts[1].get<std::size_t>();
        if (node.counts.values[0] + node.counts.values[1] == 0) {
            malformed("leaf with zero counts");
        }
        return index;
    }
    for (const char* key : {"feature", "threshold", "left", "right"}) {
        if (!j.contains(key)) {
            malformed(std::string("internal node missing '") + key + "'");
        }
    }
    if (j.size() != 4 || !j.at("feature").is_number_unsigned() || !j.at("threshold").is_number()) {
        malformed("bad internal node");
    }
    Split split{j.at("feature").get<std::size_t>(), j.at("threshold").get<double>()};
    if (split.feature_index >= n_features || !std::isfinite(split.threshold)) {
        malformed("split references feature " + std::to_string(split.feature_index) +
                  " of " + std::to_string(n_features));
    }
    const auto left = tree_from_json(j.at("left"), n_features, tree, depth + 1);
    const auto right = tree_from_json(j.at("right"), n_features, tree, depth + 1);
    TreeNode& node = tree.nodes[index];
    node.leaf = false;
    node.split = split;
    node.left = left;
    node.right = right;
    return index;
}

json params_to_json(const ForestParams& p)
{
    return json{{"n_trees", p.n_trees},
                {"max_depth", p.max_depth},
                {"min_samples_leaf", p.min_samples_leaf},
                {"mtry", p.mtry ? json(*p.mtry) : json(nullptr)},
                {"bootstrap", p.bootstrap}};
}

ForestParams params_from_json(const json& j)
{
    ForestParams p;
    p.n_trees = j.at("n_trees").get<std::size_t>();
    p.max_depth = j.at("max_depth").get<std::size_t>();
    p.min_samples_leaf = j.at("min_samples_leaf").get<std::size_t>();
    if (!j.at("mtry").is_null()) {
        p.mtry = j.at("mtry").get<std::size_t>();
    }
    p.bootstrap = j.at("bootstrap").get<bool>();
    return p;
}

} // namespace

std::string model_to_json(const ModelBundle& bundle)
{
    json j;
    j["format"] = "engage-model";
    j["version"] = bundle.version;
    j["seed"] = bundle.seed;
    j["config_hash"] = bundle.config_hash;
    j["section"] = bundle.section;
    json forests = json::array();
    for (const auto& forest : bundle.forests) {
        json trees = json::array();
        for (const auto& tree : forest.trees) {
            trees.push_back(tree_to_json(tree, 0));
        }
        forests.push_back(json{{"modality", to_string(forest.modality)},
                               {"seed", forest.seed},
                               {"params", params_to_json(forest.params)},
                               {"feature_names", forest.feature_names},
                               {"trees", trees}});
    }
    j["forests"] = forests;
    return j.dump(1) + "\n";
}

ModelBundle model_from_json(std::string_view text)
{
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("model file: ") + e.what());
    }

    try {
        if (!j.is_object() || j.value("format", "") != "engage-model") {
            malformed("not an engage model");
        }
        const int version = j.at("version").get<int>();
        if (version != kModelFormatVersion) {
            throw UnsupportedVersionError("unsupported model format version " +
                                          std::to_string(version) + " (this build reads " +
                                          std::to_string(kModelFormatVersion) + ")");
        }
        ModelBundle bundle;
        bundle.version = version;
        bundle.seed = j.at("seed").get<std::uint64_t>();
        bundle.config_hash = j.at("config_hash").get<std::string>();
        bundle.section = j.at("section").get<std::string>();

        const auto& forests = j.at("forests");
        if (!forests.is_array() || forests.size() != 3) {
            malformed("expected three forests");
        }
        std::array<bool, 3> seen{};
        for (const auto& fj : forests) {
            auto modality = parse_modality(fj.at("modality").get<std::string>());
            if (!modality || seen[index_of(*modality)]) {
                malformed("bad or repeated forest modality");
            }
            seen[index_of(*modality)] = true;
            Forest& forest = bundle.forests[index_of(*modality)];
            forest.modality = *modality;
            forest.seed = fj.at("seed").get<std::uint64_t>();
            forest.params = params_from_json(fj.at("params"));
            forest.feature_names = fj.at("feature_names").get<std::vector<std::string>>();
            for (const auto& tj : fj.at("trees")) {
                DecisionTree tree;
                tree_from_json(tj, forest.feature_names.size(), tree, 0);
                forest.trees.push_back(std::move(tree));
            }
            if (forest.trees.empty()) {
                malformed(std::string(to_string(forest.modality)) + " forest has no trees");
            }
        }
        return bundle;
    } catch (const json::exception& e) {
        throw ParseError(std::string("model file: ") + e.what());
    }
}

void save_model(const ModelBundle& bundle, const std::filesystem::path& path)
{
    write_file_atomic(path, model_to_json(bundle));
}

ModelBundle load_model(const std::filesystem::path& path)
{
    return model_from_json(read_file(path));
}

std::string metrics_to_json(const MetricsReport& report)
{
    const auto& md = report.metadata;
    json j;
    j["format"] = "engage-metrics";
    j["version"] = kMetricsFormatVersion;
    json models = json::array();
    for (auto m : md.models) {
        models.push_back(to_string(m));
    }
    j["metadata"] = json{{"master_seed", md.master_seed},
                         {"protocol", md.protocol},
                         {"repeats", md.repeats},
                         {"folds", {{"Instructional", md.folds[0]}, {"Assessment", md.folds[1]}}},
                         {"overall", to_string(md.scheme)},
                         {"models", models}};
    json cells = json::array();
    for (auto s : kSections) {
        for (auto m : md.models) {
            for (auto r : kReportRows) {
                cells.push_back(json{{"section", to_string(s)},
                                     {"model", to_string(m)},
                                     {"class", to_string(r)},
                                     {"f1", report.at(s, m, r)}});
            }
        }
    }
    j["cells"] = cells;
    return j.dump(2) + "\n";
}

MetricsReport metrics_from_json(std::string_view text)
{
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("metrics file: ") + e.what());
    }
    try {
        if (!j.is_object() || j.value("format", "") != "engage-metrics") {
            throw ParseError("metrics file: not an engage metrics file");
        }
        const int version = j.at("version").get<int>();
        if (version != kMetricsFormatVersion) {
            throw UnsupportedVersionError("unsupported metrics format version " +
                                          std::to_string(version));
        }
        MetricsReport report;
        const auto& mj = j.at("metadata");
        auto& md = report.metadata;
        md.master_seed = mj.at("master_seed").get<std::uint64_t>();
        md.protocol = mj.at("protocol").get<std::string>();
        md.repeats = mj.at("repeats").get<std::size_t>();
        md.folds = {mj.at("folds").at("Instructional").get<std::size_t>(),
                    mj.at("folds").at("Assessment").get<std::size_t>()};
        md.scheme = parse_overall_scheme(mj.at("overall").get<std::string>());
        md.models.clear();
        for (const auto& name : mj.at("models")) {
            auto m = parse_report_model(name.get<std::string>());
            if (!m) {
                throw ParseError("metrics file: unknown model " + name.dump());
            }
            md.models.push_back(*m);
        }
        for (const auto& cj : j.at("cells")) {
            auto s = parse_section(cj.at("section").get<std::string>());
            auto m = parse_report_model(cj.at("model").get<std::string>());
            auto r = parse_report_row(cj.at("class").get<std::string>());
            if (!s || !m || !r) {
                throw ParseError("metrics file: bad cell " + cj.dump());
            }
            report.cells[index_of(*s)][index_of(*m)][index_of(*r)] = cj.at("f1").get<double>();
        }
        return report;
    } catch (const json::exception& e) {
        throw ParseError(std::string("metrics file: ") + e.what());
    } catch (const ParameterError& e) {
        throw ParseError(std::string("metrics file: ") + e.what());
    }
}

} // namespace engage
