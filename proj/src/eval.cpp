#include "engage/eval.hpp"

#include "engage/errors.hpp"
#include "engage/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>
#include <tuple>

namespace engage {

void ConfusionMatrix::add(EngagementLabel predicted, EngagementLabel truth)
{
    const bool p = predicted == EngagementLabel::OnTask;
    const bool t = truth == EngagementLabel::OnTask;
    if (p && t) {
        ++tp;
    } else if (p) {
        ++fp;
    } else if (t) {
        ++fn;
    } else {
        ++tn;
    }
}

std::size_t ConfusionMatrix::support(EngagementLabel label) const noexcept
{
    return label == EngagementLabel::OnTask ? tp + fn : fp + tn;
}

ConfusionMatrix ConfusionMatrix::for_class(EngagementLabel label) const noexcept
{
    if (label == EngagementLabel::OnTask) {
        return *this;
    }
    return ConfusionMatrix{tn, fn, fp, tp};
}

ConfusionMatrix ConfusionMatrix::from_pairs(std::span<const EngagementLabel> predicted,
                                            std::span<const EngagementLabel> truth)
{
    if (predicted.size() != truth.size()) {
        throw ParameterError("prediction and truth lists differ in length");
    }
    ConfusionMatrix m;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        m.add(predicted[i], truth[i]);
    }
    return m;
}

std::optional<double> f1_if_defined(const ConfusionMatrix& m)
{
    const std::size_t denom = 2 * m.tp + m.fp + m.fn;
    if (denom == 0) {
        return std::nullopt;
    }
    return static_cast<double>(2 * m.tp) / static_cast<double>(denom);
}

double f1_from_confusion(const ConfusionMatrix& m)
{
    if (auto f1 = f1_if_defined(m)) {
        return *f1;
    }
    std::clog << "warning: F1 undefined (no positives predicted or present); using 0\n";
    return 0.0;
}

std::string_view to_string(OverallScheme s)
{
    return s == OverallScheme::Macro ? "macro" : "weighted";
}

OverallScheme parse_overall_scheme(std::string_view text)
{
    if (text == "macro") {
        return OverallScheme::Macro;
    }
    if (text == "weighted") {
        return OverallScheme::Weighted;
    }
    throw ParameterError("unknown overall F1 scheme '" + std::string(text) + "'");
}

double overall_f1(const LabelMap<double>& per_class, const LabelMap<std::size_t>& supports,
                  OverallScheme scheme)
{
    if (scheme == OverallScheme::Macro) {
        return (per_class[EngagementLabel::OnTask] + per_class[EngagementLabel::OffTask]) / 2.0;
    }
    const std::size_t total = supports[EngagementLabel::OnTask] + supports[EngagementLabel::OffTask];
    if (total == 0) {
        throw ParameterError("weighted F1 needs a positive total support");
    }
    double sum = 0.0;
    for (auto l : kLabels) {
        sum += static_cast<double>(supports[l]) * per_class[l];
    }
    return sum / static_cast<double>(total);
}

std::vector<Fold> loso_folds(std::span<const Instance> instances)
{
    std::map<std::string, Fold> by_student;
    for (const auto& inst : instances) {
        by_student[inst.student_id].test_student = inst.student_id;
    }
    if (by_student.size() < 2) {
        throw ProtocolError("leave-one-subject-out needs at least 2 students, found " +
                            std::to_string(by_student.size()));
    }
    for (std::size_t i = 0; i < instances.size(); ++i) {
        for (auto& [student, fold] : by_student) {
            (student == instances[i].student_id ? fold.test : fold.train).push_back(i);
        }
    }
    std::vector<Fold> folds;
    folds.reserve(by_student.size());
    for (auto& [student, fold] : by_student) {
        folds.push_back(std::move(fold));
    }
    return folds;
}

Fold holdout_split_per_student(std::span<const Instance> instances, double train_fraction)
{
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw ParameterError("train fraction must be in (0, 1)");
    }
    std::map<std::string, std::vector<std::size_t>> by_student;
    for (std::size_t i = 0; i < instances.size(); ++i) {
        by_student[instances[i].student_id].push_back(i);
    }

    Fold split;
    split.test_student = "holdout";
    for (auto& [student, rows] : by_student) {
        std::ranges::stable_sort(rows, {}, [&](std::size_t i) {
            return std::tie(instances[i].session_id, instances[i].window.index);
        });
        // The epsilon keeps products like 0.8 * 10 from rounding up past an integer.
        const auto n_train = static_cast<std::size_t>(
            std::ceil(train_fraction * static_cast<double>(rows.size()) - 1e-9));
        split.train.insert(split.train.end(), rows.begin(), rows.begin() + n_train);
        split.test.insert(split.test.end(), rows.begin() + n_train, rows.end());
    }
    std::ranges::sort(split.train);
    std::ranges::sort(split.test);
    return split;
}

std::vector<std::size_t> balance(std::span<const Instance> instances,
                                 std::span<const std::size_t> train, std::uint64_t seed,
                                 std::string_view fold_name)
{
    LabelMap<std::vector<std::size_t>> by_class;
    for (auto i : train) {
        by_class[instances[i].label].push_back(i);
    }
    for (auto l : kLabels) {
        if (by_class[l].empty()) {
            throw ProtocolError("cannot balance training set of fold '" + std::string(fold_name) +
                                "': no " + std::string(to_string(l)) + " instances");
        }
    }

    const bool on_is_minority =
        by_class[EngagementLabel::OnTask].size() <= by_class[EngagementLabel::OffTask].size();
    auto& minority = by_class[on_is_minority ? EngagementLabel::OnTask : EngagementLabel::OffTask];
    auto& majority = by_class[on_is_minority ? EngagementLabel::OffTask : EngagementLabel::OnTask];

    Rng rng(seed);
    const std::size_t keep = minority.size();
    for (std::size_t i = 0; i < keep; ++i) {
        const auto j = i + static_cast<std::size_t>(rng.uniform_below(majority.size() - i));
        std::swap(majority[i], majority[j]);
    }

    std::vector<std::size_t> subset(minority.begin(), minority.end());
    subset.insert(subset.end(), majority.begin(), majority.begin() + keep);
    std::ranges::sort(subset);
    return subset;
}

std::string_view to_string(ReportModel m)
{
    switch (m) {
    case ReportModel::Appearance: return "Appr";
    case ReportModel::ContextPerformance: return "CP";
    case ReportModel::Mouse: return "Ms";
    case ReportModel::Fusion: return "FUSION";
    }
    return "Appr";
}

std::string_view to_string(ReportRow r)
{
    switch (r) {
    case ReportRow::OnTask: return "On-Task";
    case ReportRow::OffTask: return "Off-Task";
    case ReportRow::Overall: return "OVERALL";
    }
    return "OVERALL";
}

std::optional<ReportModel> parse_report_model(std::string_view text)
{
    for (auto m : kReportModels) {
        if (text == to_string(m)) {
            return m;
        }
    }
    return std::nullopt;
}

std::optional<ReportRow> parse_report_row(std::string_view text)
{
    for (auto r : kReportRows) {
        if (text == to_string(r)) {
            return r;
        }
    }
    return std::nullopt;
}

namespace {

std::string cell_name(SectionType s, ReportModel m, ReportRow r)
{
    return std::string(to_string(s)) + "/" + std::string(to_string(m)) + "/" +
           std::string(to_string(r));
}

struct Mean {
    double sum = 0.0;
    std::size_t n = 0;

    void add(double v)
    {
        sum += v;
        ++n;
    }
    std::optional<double> value() const
    {
        return n == 0 ? std::nullopt : std::optional(sum / static_cast<double>(n));
    }
};

std::string_view section_label(SectionType s)
{
    return s == SectionType::Instructional ? "INSTR." : "ASSESS.";
}

std::string format2(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

} // namespace

double MetricsReport::at(SectionType s, ReportModel m, ReportRow r) const
{
    const auto& cell = cells[index_of(s)][index_of(m)][index_of(r)];
    if (!cell) {
        throw ReportError("missing report cell " + cell_name(s, m, r));
    }
    return *cell;
}

MetricsReport build_report(std::span<const StudentScores> scores, RunMetadata metadata)
{
    // Student means per cell, keyed in a fixed order so the reduction is stable.
    std::map<std::tuple<std::size_t, std::size_t, std::string>, std::array<Mean, 3>> per_student;
    for (const auto& record : scores) {
        auto& means = per_student[{index_of(record.section), index_of(record.model),
                                   record.student_id}];
        for (const auto& m : record.repeats) {
            if (m.total() == 0) {
                continue;
            }
            LabelMap<double> f1;
            LabelMap<std::size_t> support;
            std::size_t defined = 0;
            for (auto l : kLabels) {
                support[l] = m.support(l);
                if (auto v = f1_if_defined(m.for_class(l))) {
                    f1[l] = *v;
                    means[index_of(l)].add(*v);
                    ++defined;
                }
            }
            // An undefined class has zero support, so it carries no weight.
            if (metadata.scheme == OverallScheme::Macro) {
                means[index_of(ReportRow::Overall)].add(
                    (f1[EngagementLabel::OnTask] + f1[EngagementLabel::OffTask]) /
                    static_cast<double>(defined));
            } else {
                means[index_of(ReportRow::Overall)].add(overall_f1(f1, support, metadata.scheme));
            }
        }
    }

    std::array<std::array<std::array<Mean, 3>, 4>, 2> across;
    for (const auto& [key, means] : per_student) {
        const auto& [section, model, student] = key;
        for (std::size_t r = 0; r < 3; ++r) {
            if (auto v = means[r].value()) {
                across[section][model][r].add(*v);
            }
        }
    }

    MetricsReport report;
    report.metadata = std::move(metadata);
    for (auto s : kSections) {
        for (auto m : report.metadata.models) {
            for (auto r : kReportRows) {
                auto v = across[index_of(s)][index_of(m)][index_of(r)].value();
                if (!v) {
                    throw ReportError("missing report cell " + cell_name(s, m, r) +
                                      " (no scored windows)");
                }
                report.cells[index_of(s)][index_of(m)][index_of(r)] = v;
            }
        }
    }
    return report;
}

std::string render_table(const MetricsReport& report)
{
    const auto& md = report.metadata;
    std::ostringstream out;
    out << "# protocol=" << md.protocol << " repeats=" << md.repeats << " seed=" << md.master_seed
        << " overall=" << to_string(md.scheme) << " folds=" << md.folds[0] << "/" << md.folds[1]
        << "\n";

    auto pad = [](std::string_view text, std::size_t width) {
        std::string s(text);
        s.resize(std::max(width, s.size()), ' ');
        return s;
    };
    out << pad("Section", 9) << pad("Class", 10);
    for (auto m : md.models) {
        out << pad(to_string(m), 8);
    }
    out << "\n";
    for (auto s : kSections) {
        for (auto r : kReportRows) {
            out << pad(r == ReportRow::OnTask ? section_label(s) : "", 9) << pad(to_string(r), 10);
            for (auto m : md.models) {
                out << pad(format2(report.at(s, m, r)), 8);
            }
            out << "\n";
        }
    }
    std::string text = out.str();
    // Strip trailing spaces on each line.
    std::string cleaned;
    std::istringstream lines(text);
    for (std::string line; std::getline(lines, line);) {
        line.erase(line.find_last_not_of(' ') + 1);
        cleaned += line + "\n";
    }
    return cleaned;
}

std::string render_csv(const MetricsReport& report)
{
    std::ostringstream out;
    out << "section,class";
    for (auto m : report.metadata.models) {
        out << "," << to_string(m);
    }
    out << "\n";
    for (auto s : kSections) {
        for (auto r : kReportRows) {
            out << section_label(s) << "," << to_string(r);
            for (auto m : report.metadata.models) {
                out << "," << format2(report.at(s, m, r));
            }
            out << "\n";
        }
    }
    return out.str();
}

} // namespace engage
