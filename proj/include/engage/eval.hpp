#pragma once

#include "engage/domain.hpp"
#include "engage/features.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace engage {

/// Binary confusion counts with OnTask as the positive class.
struct ConfusionMatrix {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::size_t tn = 0;

    void add(EngagementLabel predicted, EngagementLabel truth);
    std::size_t total() const noexcept { return tp + fp + fn + tn; }
    /// Number of instances whose truth is `label`.
    std::size_t support(EngagementLabel label) const noexcept;
    /// The same counts with `label` as the positive class.
    ConfusionMatrix for_class(EngagementLabel label) const noexcept;

    static ConfusionMatrix from_pairs(std::span<const EngagementLabel> predicted,
                                      std::span<const EngagementLabel> truth);

    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

/// 2tp / (2tp + fp + fn), or nullopt when tp = fp = fn = 0.
std::optional<double> f1_if_defined(const ConfusionMatrix& m);

/// As f1_if_defined, but the undefined case returns 0 and logs a warning.
double f1_from_confusion(const ConfusionMatrix& m);

enum class OverallScheme : std::uint8_t { Macro, Weighted };

std::string_view to_string(OverallScheme s);
/// Throws ParameterError for anything but "macro" or "weighted".
OverallScheme parse_overall_scheme(std::string_view text);

double overall_f1(const LabelMap<double>& per_class, const LabelMap<std::size_t>& supports,
                  OverallScheme scheme);

/// Train and test rows as indices into an instance list.
struct Fold {
    std::string test_student;
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

/// One fold per student, ordered by student id. Needs at least two students.
std::vector<Fold> loso_folds(std::span<const Instance> instances);

/// Chronological per-student split: of each student's n instances sorted by
/// (session, window index), the first ceil(fraction * n) go to train.
Fold holdout_split_per_student(std::span<const Instance> instances, double train_fraction = 0.8);

/// Random undersampling of the majority class down to the minority count.
/// Returns a sorted subset of `train`. Throws ProtocolError naming `fold_name`
/// when a class is absent.
std::vector<std::size_t> balance(std::span<const Instance> instances,
                                 std::span<const std::size_t> train, std::uint64_t seed,
                                 std::string_view fold_name = {});

enum class ReportModel : std::uint8_t { Appearance, ContextPerformance, Mouse, Fusion };
enum class ReportRow : std::uint8_t { OnTask, OffTask, Overall };

inline constexpr std::array kReportModels{ReportModel::Appearance, ReportModel::ContextPerformance,
                                          ReportModel::Mouse, ReportModel::Fusion};
inline constexpr std::array kReportRows{ReportRow::OnTask, ReportRow::OffTask, ReportRow::Overall};

constexpr std::size_t index_of(ReportModel m) noexcept { return static_cast<std::size_t>(m); }
constexpr std::size_t index_of(ReportRow r) noexcept { return static_cast<std::size_t>(r); }
constexpr ReportModel report_model(Modality m) noexcept { return static_cast<ReportModel>(m); }

std::string_view to_string(ReportModel m);
std::string_view to_string(ReportRow r);
std::optional<ReportModel> parse_report_model(std::string_view text);
std::optional<ReportRow> parse_report_row(std::string_view text);

struct RunMetadata {
    std::uint64_t master_seed = 0;
    std::string protocol = "loso";
    std::size_t repeats = 10;
    std::array<std::size_t, 2> folds{};  // per section
    OverallScheme scheme = OverallScheme::Weighted;
    std::vector<ReportModel> models{kReportModels.begin(), kReportModels.end()};

    friend bool operator==(const RunMetadata&, const RunMetadata&) = default;
};

/// Confusion matrices of one student, one model and one section, one per repeat.
struct StudentScores {
    SectionType section = SectionType::Instructional;
    ReportModel model = ReportModel::Appearance;
    std::string student_id;
    std::vector<ConfusionMatrix> repeats;
};

/// Table of F1 values: section x model x (On-Task, Off-Task, OVERALL).
struct MetricsReport {
    using Cells = std::array<std::array<std::array<std::optional<double>, 3>, 4>, 2>;

    RunMetadata metadata;
    Cells cells{};

    /// Throws ReportError naming the cell when it is empty.
    double at(SectionType s, ReportModel m, ReportRow r) const;

    friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

/// Averages F1 over repeats within each student, then over students.
///
/// Per repeat, a class F1 is skipped when undefined (tp = fp = fn = 0) and
/// OVERALL combines the class values with metadata.scheme using that
/// repeat's test supports. Every (section, model in metadata.models) must
/// end up with all three rows, otherwise ReportError names the missing cell.
MetricsReport build_report(std::span<const StudentScores> scores, RunMetadata metadata);

/// Aligned plain-text table; values printed with two decimals.
std::string render_table(const MetricsReport& report);
/// section,class,<model columns> with two-decimal values.
std::string render_csv(const MetricsReport& report);

} // namespace engage
