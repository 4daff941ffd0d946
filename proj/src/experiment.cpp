#include "engage/experiment.hpp"

#include "engage/errors.hpp"
#include "engage/parallel.hpp"
#include "engage/random.hpp"

#include <map>

namespace engage {

std::string_view to_string(Protocol p)
{
    return p == Protocol::Loso ? "loso" : "holdout";
}

Protocol parse_protocol(std::string_view text)
{
    if (text == "loso") {
        return Protocol::Loso;
    }
    if (text == "holdout") {
        return Protocol::Holdout;
    }
    throw ParameterError("unknown protocol '" + std::string(text) + "' (expected loso or holdout)");
}

TrainedModels train_models(std::span<const Instance> instances, std::span<const std::size_t> rows,
                           const std::array<ForestParams, 3>& params, std::uint64_t seed,
                           std::size_t jobs)
{
    if (rows.empty()) {
        throw ParameterError("no training rows");
    }
    TrainedModels models;
    for (auto m : kModalities) {
        const auto& names = instances[rows.front()][m].names;
        Dataset data(names.size());
        for (auto r : rows) {
            data.add(instances[r][m].values, instances[r].label);
        }
        models.forests[index_of(m)] =
            train_forest(data, m, names, params[index_of(m)], mix(seed, 1 + index_of(m)), jobs);
    }
    models.pool = pool_trees(models.forests);
    return models;
}

RepeatPredictions run_repeat(std::span<const Instance> instances, const Fold& fold,
                             const ExperimentSettings& settings, std::uint64_t base_seed,
                             std::size_t repeat)
{
    const std::uint64_t seed = mix(base_seed, repeat);
    const auto subset = balance(instances, fold.train, seed, fold.test_student);
    const TrainedModels models = train_models(instances, subset, settings.forest, seed);

    RepeatPredictions out;
    for (auto& labels : out.labels) {
        labels.reserve(fold.test.size());
    }
    for (auto t : fold.test) {
        const Instance& inst = instances[t];
        for (auto m : kModalities) {
            out.labels[index_of(report_model(m))].push_back(
                argmax_label(forest_votes(models[m], inst[m].values)));
        }
        if (settings.fusion) {
            const auto decision = fuse_pooled(models.pool, ModalInput::from(inst));
            out.labels[index_of(ReportModel::Fusion)].push_back(decision.label);
            out.fusion_confidence_on.push_back(
                static_cast<double>(decision.votes[EngagementLabel::OnTask]) /
                static_cast<double>(models.pool.size()));
        }
    }
    return out;
}

std::vector<RepeatPredictions> run_repeats(std::span<const Instance> instances, const Fold& fold,
                                           const ExperimentSettings& settings,
                                           std::uint64_t base_seed)
{
    if (settings.repeats == 0) {
        throw ParameterError("repeat count must be at least 1");
    }
    std::vector<RepeatPredictions> out(settings.repeats);
    parallel_for(settings.repeats, settings.jobs, [&](std::size_t j) {
        out[j] = run_repeat(instances, fold, settings, base_seed, j);
    });
    return out;
}

MetricsReport run_experiment(std::span<const Instance> instances, const ExperimentSettings& settings)
{
    if (settings.repeats == 0) {
        throw ParameterError("repeat count must be at least 1");
    }

    struct SectionData {
        SectionType section;
        std::vector<Instance> instances;
        std::vector<Fold> folds;
    };
    std::vector<SectionData> sections;
    for (auto s : kSections) {
        SectionData sd{s, {}, {}};
        for (const auto& inst : instances) {
            if (inst.window.section == s) {
                sd.instances.push_back(inst);
            }
        }
        if (sd.instances.empty()) {
            continue;  // build_report reports the missing cells
        }
        if (settings.protocol == Protocol::Loso) {
            sd.folds = loso_folds(sd.instances);
        } else {
            sd.folds.push_back(holdout_split_per_student(sd.instances, settings.holdout_fraction));
        }
        sections.push_back(std::move(sd));
    }

    struct Task {
        std::size_t section;
        std::size_t fold;
        std::size_t repeat;
    };
    std::vector<Task> tasks;
    for (std::size_t s = 0; s < sections.size(); ++s) {
        for (std::size_t f = 0; f < sections[s].folds.size(); ++f) {
            for (std::size_t j = 0; j < settings.repeats; ++j) {
                tasks.push_back({s, f, j});
            }
        }
    }

    std::vector<RepeatPredictions> results(tasks.size());
    parallel_for(tasks.size(), settings.jobs, [&](std::size_t i) {
        const Task& task = tasks[i];
        const SectionData& sd = sections[task.section];
        const std::uint64_t section_seed = mix(settings.master_seed, 1 + index_of(sd.section));
        results[i] = run_repeat(sd.instances, sd.folds[task.fold], settings,
                                mix(section_seed, task.fold), task.repeat);
    });

    RunMetadata metadata;
    metadata.master_seed = settings.master_seed;
    metadata.protocol = std::string(to_string(settings.protocol));
    metadata.repeats = settings.repeats;
    metadata.scheme = settings.scheme;
    metadata.models = {ReportModel::Appearance, ReportModel::ContextPerformance, ReportModel::Mouse};
    if (settings.fusion) {
        metadata.models.push_back(ReportModel::Fusion);
    }

    // Reduce in (section, fold, repeat) order into per-student confusion matrices.
    std::vector<StudentScores> scores;
    std::size_t task_index = 0;
    for (const auto& sd : sections) {
        metadata.folds[index_of(sd.section)] = sd.folds.size();
        for (const auto& fold : sd.folds) {
            std::map<std::string, std::array<std::vector<ConfusionMatrix>, 4>> per_student;
            for (std::size_t j = 0; j < settings.repeats; ++j, ++task_index) {
                const RepeatPredictions& pred = results[task_index];
                for (auto model : metadata.models) {
                    const auto& labels = pred.labels[index_of(model)];
                    for (std::size_t k = 0; k < fold.test.size(); ++k) {
                        const Instance& inst = sd.instances[fold.test[k]];
                        auto& repeats = per_student[inst.student_id][index_of(model)];
                        repeats.resize(settings.repeats);
                        repeats[j].add(labels[k], inst.label);
                    }
                }
            }
            for (auto& [student, by_model] : per_student) {
                for (auto model : metadata.models) {
                    scores.push_back(StudentScores{sd.section, model, student,
                                                   std::move(by_model[index_of(model)])});
                }
            }
        }
    }
    return build_report(scores, std::move(metadata));
}

} // namespace engage
