// engage: command-line front end for the multimodal engagement pipeline.

#include "engage/config.hpp"
#include "engage/errors.hpp"
#include "engage/experiment.hpp"
#include "engage/io.hpp"
#include "engage/model.hpp"
#include "engage/pipeline.hpp"
#include "engage/random.hpp"
#include "engage/simulate.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using namespace engage;

namespace {

struct CommonOptions {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::size_t jobs = 1;
};

RunConfig run_config(const CommonOptions& opts)
{
    RunConfig config = opts.config.empty() ? RunConfig{} : load_run_config(opts.config);
    if (opts.seed) {
        config.seed = *opts.seed;
    }
    return config;
}

std::string out_path(const CommonOptions& opts, const RunConfig& config)
{
    std::string out = opts.out.empty() ? config.paths.out : opts.out;
    if (out.empty()) {
        throw ParameterError("no output path (use --out)");
    }
    return out;
}

std::vector<Instance> instances_from_data(const fs::path& dir, const RunConfig& config)
{
    const RawDataset raw = load_dataset(dir);
    const FeatureSchema schema = config.features ? *config.features : infer_schema(raw.samples);
    return extract_instances(raw, schema, config.window_s, config.hop_s);
}

void cmd_generate(const CommonOptions& opts)
{
    if (opts.config.empty()) {
        throw ParameterError("generate needs --config <sim config>");
    }
    SimConfig config = load_sim_config(opts.config);
    if (opts.seed) {
        config.master_seed = *opts.seed;
    }
    if (opts.out.empty()) {
        throw ParameterError("no output directory (use --out)");
    }
    const auto sessions = simulate_sessions(config, opts.jobs);
    save_dataset(opts.out, to_raw(config, sessions));
    std::cout << "wrote " << sessions.size() << " simulated streams to " << opts.out << "\n";
}

void cmd_extract(const CommonOptions& opts, const std::string& data)
{
    const RunConfig config = run_config(opts);
    const std::string dir = data.empty() ? config.paths.data : data;
    if (dir.empty()) {
        throw ParameterError("extract needs --data <dataset dir>");
    }
    const auto instances = instances_from_data(dir, config);
    const std::string out = out_path(opts, config);
    write_file_atomic(out, instances_to_csv(instances));
    std::cout << "wrote " << instances.size() << " instances to " << out << "\n";
}

std::vector<Instance> select_section(std::vector<Instance> instances, const std::string& section)
{
    if (section == "all") {
        return instances;
    }
    auto s = parse_section(section);
    if (!s) {
        throw ParameterError("unknown section '" + section + "' (all, Instructional, Assessment)");
    }
    std::erase_if(instances, [&](const Instance& i) { return i.window.section != *s; });
    return instances;
}

void cmd_train(const CommonOptions& opts, const std::string& instances_path,
               const std::string& section, bool no_balance)
{
    const RunConfig config = run_config(opts);
    const auto instances = select_section(load_instances(instances_path), section);
    if (instances.empty()) {
        throw DataError("no training instances");
    }

    std::vector<std::size_t> rows(instances.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        rows[i] = i;
    }
    if (!no_balance) {
        rows = balance(instances, rows, mix(config.seed, 0), "train");
    }
    TrainedModels models = train_models(instances, rows, config.forest, mix(config.seed, 1), opts.jobs);

    ModelBundle bundle;
    bundle.forests = std::move(models.forests);
    bundle.seed = config.seed;
    bundle.config_hash = config_hash(config);
    bundle.section = section;
    const std::string out = out_path(opts, config);
    save_model(bundle, out);
    std::cout << "trained on " << rows.size() << " instances, model written to " << out << "\n";
}

void cmd_predict(const CommonOptions& opts, const std::string& model_path,
                 const std::string& instances_path)
{
    const ModelBundle bundle = load_model(model_path);
    if (!opts.config.empty()) {
        const RunConfig config = run_config(opts);
        if (config_hash(config) != bundle.config_hash) {
            std::clog << "warning: model was trained with a different config (hash "
                      << bundle.config_hash << ")\n";
        }
    }
    const auto instances = load_instances(instances_path);
    const FusionPool pool = pool_trees(bundle.forests);

    std::vector<PredictionRow> rows;
    rows.reserve(instances.size());
    for (const auto& inst : instances) {
        for (auto m : kModalities) {
            if (inst[m].names != bundle[m].feature_names) {
                throw DataError(std::string(to_string(m)) +
                                " features of the instances do not match the model");
            }
        }
        const auto decision = fuse_pooled(pool, ModalInput::from(inst));
        rows.push_back(PredictionRow{inst.session_id, inst.student_id, inst.window.index,
                                     inst.window.section, decision.label,
                                     static_cast<double>(decision.votes[EngagementLabel::OnTask]) /
                                         static_cast<double>(pool.size())});
    }
    if (opts.out.empty()) {
        throw ParameterError("no output path (use --out)");
    }
    write_file_atomic(opts.out, predictions_to_csv(rows));
    std::cout << "wrote " << rows.size() << " predictions to " << opts.out << "\n";
}

void write_report_files(const fs::path& dir, const MetricsReport& report)
{
    fs::create_directories(dir);
    write_file_atomic(dir / "metrics.json", metrics_to_json(report));
    write_file_atomic(dir / "report.txt", render_table(report));
    write_file_atomic(dir / "report.csv", render_csv(report));
}

void cmd_evaluate(const CommonOptions& opts, const std::string& instances_path,
                  const std::string& data, const std::string& protocol)
{
    RunConfig config = run_config(opts);
    if (!protocol.empty()) {
        config.protocol = parse_protocol(protocol);
    }
    std::vector<Instance> instances;
    if (!instances_path.empty()) {
        instances = load_instances(instances_path);
    } else {
        const std::string dir = data.empty() ? config.paths.data : data;
        if (dir.empty()) {
            throw ParameterError("evaluate needs --instances <file> or --data <dir>");
        }
        instances = instances_from_data(dir, config);
    }
    const std::string out = out_path(opts, config);
    const MetricsReport report = run_experiment(instances, config.experiment(opts.jobs));
    write_report_files(out, report);
    std::cout << render_table(report);
}

void cmd_report(const CommonOptions& opts, const std::string& metrics_path)
{
    const MetricsReport report = metrics_from_json(read_file(metrics_path));
    if (!opts.out.empty()) {
        write_report_files(opts.out, report);
    }
    std::cout << render_table(report);
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Multimodal behavioral engagement detection"};
    app.require_subcommand(1);

    CommonOptions opts;
    auto add_common = [&](CLI::App* cmd, bool with_seed) {
        cmd->add_option("--config", opts.config, "Configuration file (JSON)");
        if (with_seed) {
            cmd->add_option("--seed", opts.seed, "Master seed (overrides the config)");
        }
        cmd->add_option("--out", opts.out, "Output file or directory");
        cmd->add_option("--jobs", opts.jobs, "Worker threads; results do not depend on it")
            ->check(CLI::PositiveNumber);
    };

    std::string data, instances, model, metrics, protocol, section = "all";
    bool no_balance = false;

    auto* generate = app.add_subcommand("generate", "Simulate a classroom dataset");
    add_common(generate, true);

    auto* extract = app.add_subcommand("extract", "Raw CSVs -> windowed instances");
    add_common(extract, false);
    extract->add_option("--data", data, "Dataset directory");

    auto* train = app.add_subcommand("train", "Instances -> model bundle");
    add_common(train, true);
    train->add_option("--instances", instances, "Instances file")->required();
    train->add_option("--section", section, "all, Instructional or Assessment");
    train->add_flag("--no-balance", no_balance, "Train on the unbalanced set");

    auto* predict = app.add_subcommand("predict", "Model + instances -> fused predictions");
    add_common(predict, false);
    predict->add_option("--model", model, "Model bundle")->required();
    predict->add_option("--instances", instances, "Instances file")->required();

    auto* evaluate = app.add_subcommand("evaluate", "Run the evaluation protocol");
    add_common(evaluate, true);
    evaluate->add_option("--instances", instances, "Instances file");
    evaluate->add_option("--data", data, "Dataset directory (extracted on the fly)");
    evaluate->add_option("--protocol", protocol, "loso or holdout");

    auto* report = app.add_subcommand("report", "Render a metrics file as a table");
    add_common(report, false);
    report->add_option("--metrics", metrics, "metrics.json from evaluate")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (generate->parsed()) {
            cmd_generate(opts);
        } else if (extract->parsed()) {
            cmd_extract(opts, data);
        } else if (train->parsed()) {
            cmd_train(opts, instances, section, no_balance);
        } else if (predict->parsed()) {
            cmd_predict(opts, model, instances);
        } else if (evaluate->parsed()) {
            cmd_evaluate(opts, instances, data, protocol);
        } else if (report->parsed()) {
            cmd_report(opts, metrics);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
