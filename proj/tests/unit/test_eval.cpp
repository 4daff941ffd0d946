#include "doctest.h"

#include "engage/errors.hpp"
#include "engage/eval.hpp"

#include "../support/oracles.hpp"

#include <algorithm>
#include <map>
#include <set>

using namespace engage;

namespace {

constexpr auto On = EngagementLabel::OnTask;
constexpr auto Off = EngagementLabel::OffTask;

ConfusionMatrix cm(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn)
{
    return ConfusionMatrix{tp, fp, fn, tn};
}

} // namespace

TEST_CASE("f1 examples")
{
    CHECK(f1_from_confusion(cm(8, 2, 2, 0)) == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(f1_from_confusion(cm(5, 0, 0, 5)) == 1.0);
    CHECK(f1_from_confusion(cm(0, 3, 1, 2)) == 0.0);
    CHECK_FALSE(f1_if_defined(cm(0, 0, 0, 9)).has_value());
    CHECK(f1_from_confusion(cm(0, 0, 0, 9)) == 0.0);
}

TEST_CASE("confusion matrix bookkeeping")
{
    const std::vector<EngagementLabel> pred{On, On, Off, Off, On};
    const std::vector<EngagementLabel> truth{On, Off, On, Off, On};
    const auto m = ConfusionMatrix::from_pairs(pred, truth);
    CHECK(m == cm(2, 1, 1, 1));
    CHECK(m.total() == 5);
    CHECK(m.support(On) == 3);
    CHECK(m.support(Off) == 2);
    CHECK(m.for_class(Off) == cm(1, 1, 1, 2));
    CHECK(m.for_class(Off).for_class(Off) == m);
    const std::vector<EngagementLabel> shorter{On};
    CHECK_THROWS_AS(ConfusionMatrix::from_pairs(shorter, truth), ParameterError);
}

TEST_CASE("per-class F1 matches the brute-force oracle")
{
    oracle::Gen g(100);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = g.between(0, 60);
        const double p_off_truth = g.uniform(0.0, 1.0);
        const double p_off_pred = g.uniform(0.0, 1.0);
        std::vector<EngagementLabel> pred;
        std::vector<EngagementLabel> truth;
        for (std::size_t i = 0; i < n; ++i) {
            truth.push_back(g.label(p_off_truth));
            pred.push_back(g.coin(0.3) ? truth.back() : g.label(p_off_pred));
        }
        const auto m = ConfusionMatrix::from_pairs(pred, truth);
        CHECK(m.total() == n);
        for (auto l : kLabels) {
            const auto expected = oracle::f1_from_pairs(pred, truth, l);
            const auto actual = f1_if_defined(m.for_class(l));
            REQUIRE(expected.has_value() == actual.has_value());
            if (expected) {
                CHECK(std::abs(*expected - *actual) <= 1e-12);
            }
        }
    }
}

TEST_CASE("overall_f1")
{
    const LabelMap<double> f1{{0.9, 0.5}};
    CHECK(overall_f1(f1, LabelMap<std::size_t>{{3, 1}}, OverallScheme::Weighted) ==
          doctest::Approx(0.8).epsilon(1e-12));
    CHECK(overall_f1(f1, LabelMap<std::size_t>{{4, 4}}, OverallScheme::Weighted) ==
          doctest::Approx(overall_f1(f1, LabelMap<std::size_t>{{4, 4}}, OverallScheme::Macro)).epsilon(1e-12));
    CHECK(overall_f1(LabelMap<double>{{0.78, 0.71}}, {}, OverallScheme::Macro) ==
          doctest::Approx(0.745).epsilon(1e-12));
    CHECK(parse_overall_scheme("macro") == OverallScheme::Macro);
    CHECK_THROWS_AS(parse_overall_scheme("micro"), ParameterError);
}

TEST_CASE("loso_folds")
{
    oracle::Gen g(1);
    SUBCASE("one fold per student")
    {
        std::vector<Instance> instances;
        for (int s = 0; s < 17; ++s) {
            for (int w = 0; w < 3; ++w) {
                Instance inst;
                inst.student_id = "stu" + std::to_string(100 + s);
                inst.window.index = static_cast<std::size_t>(w);
                instances.push_back(inst);
            }
        }
        const auto folds = loso_folds(instances);
        CHECK(folds.size() == 17);
        CHECK(folds.front().test_student == "stu100");
        CHECK(folds.front().test.size() == 3);
        CHECK(folds.front().train.size() == 48);
    }
    SUBCASE("two students give complementary folds")
    {
        std::vector<Instance> instances(5);
        for (std::size_t i = 0; i < 5; ++i) {
            instances[i].student_id = i < 2 ? "a" : "b";
        }
        const auto folds = loso_folds(instances);
        REQUIRE(folds.size() == 2);
        CHECK(folds[0].train == folds[1].test);
        CHECK(folds[0].test == folds[1].train);
    }
    SUBCASE("a single student is rejected")
    {
        std::vector<Instance> instances(3);
        CHECK_THROWS_AS(loso_folds(instances), ProtocolError);
    }
    SUBCASE("random datasets: disjoint students, full cover")
    {
        for (int trial = 0; trial < 30; ++trial) {
            const auto instances = oracle::random_instances(g);
            const auto folds = loso_folds(instances);
            std::set<std::string> students;
            for (const auto& inst : instances) {
                students.insert(inst.student_id);
            }
            CHECK(folds.size() == students.size());
            for (const auto& fold : folds) {
                std::set<std::string> train_students;
                for (auto i : fold.train) {
                    train_students.insert(instances[i].student_id);
                }
                for (auto i : fold.test) {
                    CHECK(instances[i].student_id == fold.test_student);
                }
                CHECK(train_students.count(fold.test_student) == 0);
                CHECK(fold.train.size() + fold.test.size() == instances.size());
            }
        }
    }
}

TEST_CASE("holdout_split_per_student")
{
    SUBCASE("10 windows: first 8 train")
    {
        std::vector<Instance> instances(10);
        for (std::size_t i = 0; i < 10; ++i) {
            instances[i].student_id = "a";
            instances[i].window.index = 9 - i;  // reverse order on purpose
        }
        const auto fold = holdout_split_per_student(instances, 0.8);
        REQUIRE(fold.train.size() == 8);
        REQUIRE(fold.test.size() == 2);
        for (auto i : fold.test) {
            CHECK(instances[i].window.index >= 8);
        }
    }
    SUBCASE("1 window goes to train")
    {
        std::vector<Instance> instances(1);
        const auto fold = holdout_split_per_student(instances, 0.8);
        CHECK(fold.train.size() == 1);
        CHECK(fold.test.empty());
    }
    SUBCASE("bad fraction")
    {
        std::vector<Instance> instances(1);
        CHECK_THROWS_AS(holdout_split_per_student(instances, 0.0), ParameterError);
        CHECK_THROWS_AS(holdout_split_per_student(instances, 1.5), ParameterError);
    }
    SUBCASE("random datasets: a partition, earlier windows first")
    {
        oracle::Gen g(2);
        for (int trial = 0; trial < 30; ++trial) {
            const auto instances = oracle::random_instances(g);
            const double fraction = g.uniform(0.1, 0.95);
            const auto fold = holdout_split_per_student(instances, fraction);
            std::vector<int> seen(instances.size(), 0);
            for (auto i : fold.train) {
                ++seen[i];
            }
            for (auto i : fold.test) {
                ++seen[i];
            }
            CHECK(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
            for (auto te : fold.test) {
                for (auto tr : fold.train) {
                    if (instances[te].student_id == instances[tr].student_id) {
                        const auto& a = instances[tr];
                        const auto& b = instances[te];
                        CHECK(std::tie(a.session_id, a.window.index) < std::tie(b.session_id, b.window.index));
                    }
                }
            }
        }
    }
}

TEST_CASE("balance")
{
    std::vector<Instance> instances(40);
    std::vector<std::size_t> train(40);
    for (std::size_t i = 0; i < 40; ++i) {
        instances[i].label = i < 30 ? On : Off;
        train[i] = i;
    }
    const auto subset = balance(instances, train, 5);
    CHECK(subset.size() == 20);
    std::size_t off = 0;
    for (auto i : subset) {
        off += instances[i].label == Off ? 1 : 0;
    }
    CHECK(off == 10);
    CHECK(std::is_sorted(subset.begin(), subset.end()));
    CHECK(balance(instances, train, 5) == subset);
    CHECK_FALSE(balance(instances, train, 6) == subset);

    const std::vector<std::size_t> even{0, 1, 30, 31};
    CHECK(balance(instances, even, 9) == even);

    const std::vector<std::size_t> one_class{0, 1, 2};
    CHECK_THROWS_AS(balance(instances, one_class, 1, "stu07"), ProtocolError);
}

namespace {

// Random prediction/truth pairs per (section, model, student, repeat).
struct RunPairs {
    SectionType section;
    ReportModel model;
    std::string student;
    std::vector<std::pair<std::vector<EngagementLabel>, std::vector<EngagementLabel>>> repeats;
};

std::vector<RunPairs> random_runs(oracle::Gen& g)
{
    std::vector<RunPairs> runs;
    const std::size_t students = g.between(2, 5);
    const std::size_t repeats = g.between(1, 4);
    for (auto s : kSections) {
        for (auto m : kReportModels) {
            for (std::size_t st = 0; st < students; ++st) {
                RunPairs run{s, m, "stu" + std::to_string(st), {}};
                const double p_off = g.uniform(0.0, 1.0);
                const std::size_t n = g.between(1, 15);
                for (std::size_t j = 0; j < repeats; ++j) {
                    std::vector<EngagementLabel> pred;
                    std::vector<EngagementLabel> truth;
                    for (std::size_t i = 0; i < n; ++i) {
                        truth.push_back(g.label(p_off));
                        pred.push_back(g.coin(0.6) ? truth.back() : g.label());
                    }
                    run.repeats.emplace_back(pred, truth);
                }
                runs.push_back(std::move(run));
            }
        }
    }
    return runs;
}

// Repeat mean per student, then mean over students; undefined class values skipped.
double oracle_cell(const std::vector<RunPairs>& runs, SectionType s, ReportModel m, ReportRow r,
                   OverallScheme scheme)
{
    std::vector<double> student_means;
    for (const auto& run : runs) {
        if (run.section != s || run.model != m) {
            continue;
        }
        std::vector<double> values;
        for (const auto& [pred, truth] : run.repeats) {
            const auto on = oracle::f1_from_pairs(pred, truth, On);
            const auto off = oracle::f1_from_pairs(pred, truth, Off);
            if (r == ReportRow::OnTask) {
                if (on) values.push_back(*on);
            } else if (r == ReportRow::OffTask) {
                if (off) values.push_back(*off);
            } else {
                double n_on = 0;
                for (auto t : truth) {
                    n_on += t == On ? 1 : 0;
                }
                const double n = static_cast<double>(truth.size());
                if (scheme == OverallScheme::Weighted) {
                    values.push_back((n_on * on.value_or(0) + (n - n_on) * off.value_or(0)) / n);
                } else {
                    const int defined = (on ? 1 : 0) + (off ? 1 : 0);
                    values.push_back((on.value_or(0) + off.value_or(0)) / defined);
                }
            }
        }
        if (!values.empty()) {
            double sum = 0;
            for (double v : values) sum += v;
            student_means.push_back(sum / static_cast<double>(values.size()));
        }
    }
    double sum = 0;
    for (double v : student_means) sum += v;
    return sum / static_cast<double>(student_means.size());
}

std::vector<StudentScores> to_scores(const std::vector<RunPairs>& runs)
{
    std::vector<StudentScores> scores;
    for (const auto& run : runs) {
        StudentScores sc{run.section, run.model, run.student, {}};
        for (const auto& [pred, truth] : run.repeats) {
            sc.repeats.push_back(ConfusionMatrix::from_pairs(pred, truth));
        }
        scores.push_back(sc);
    }
    return scores;
}

} // namespace

TEST_CASE("build_report averages repeats within a student, then students")
{
    oracle::Gen g(55);
    for (int trial = 0; trial < 40; ++trial) {
        const auto runs = random_runs(g);
        auto scores = to_scores(runs);
        // Input order must not matter.
        for (std::size_t i = scores.size(); i > 1; --i) {
            std::swap(scores[i - 1], scores[g.below(i)]);
        }
        for (auto scheme : {OverallScheme::Weighted, OverallScheme::Macro}) {
            RunMetadata md;
            md.scheme = scheme;
            const auto report = build_report(scores, md);
            for (auto s : kSections) {
                for (auto m : kReportModels) {
                    for (auto r : kReportRows) {
                        CHECK(std::abs(report.at(s, m, r) - oracle_cell(runs, s, m, r, scheme)) <= 1e-12);
                    }
                }
            }
        }
    }
}

TEST_CASE("build_report: averaging order is repeats first")
{
    // Student a: repeats with OnTask F1 1.0 and 0.0; student b: one repeat at 1.0.
    // Repeats-then-students gives (0.5 + 1.0) / 2 = 0.75; pooling all runs would give 2/3.
    std::vector<StudentScores> scores;
    for (auto s : kSections) {
        for (auto m : kReportModels) {
            scores.push_back({s, m, "a", {cm(2, 0, 0, 2), cm(0, 1, 1, 2)}});
            scores.push_back({s, m, "b", {cm(3, 0, 0, 1)}});
        }
    }
    const auto report = build_report(scores, RunMetadata{});
    CHECK(report.at(SectionType::Assessment, ReportModel::Fusion, ReportRow::OnTask) ==
          doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("build_report: 24 cells, missing section is an error")
{
    std::vector<StudentScores> scores;
    for (auto s : kSections) {
        for (auto m : kReportModels) {
            scores.push_back({s, m, "a", {cm(2, 1, 1, 2)}});
        }
    }
    const auto report = build_report(scores, RunMetadata{});
    std::size_t filled = 0;
    for (const auto& section : report.cells) {
        for (const auto& model : section) {
            for (const auto& cell : model) {
                filled += cell.has_value() ? 1 : 0;
            }
        }
    }
    CHECK(filled == 24);

    std::vector<StudentScores> instructional_only;
    for (const auto& sc : scores) {
        if (sc.section == SectionType::Instructional) {
            instructional_only.push_back(sc);
        }
    }
    CHECK_THROWS_AS(build_report(instructional_only, RunMetadata{}), ReportError);
}

TEST_CASE("render_table and render_csv layout")
{
    std::vector<StudentScores> scores;
    for (auto s : kSections) {
        for (auto m : kReportModels) {
            scores.push_back({s, m, "a", {cm(3, 1, 1, 3)}});
        }
    }
    RunMetadata md;
    md.master_seed = 7;
    md.folds = {5, 5};
    const auto report = build_report(scores, md);
    const auto table = render_table(report);
    CHECK(table.find("Appr") != std::string::npos);
    CHECK(table.find("CP") != std::string::npos);
    CHECK(table.find("Ms") != std::string::npos);
    CHECK(table.find("FUSION") != std::string::npos);
    for (const char* row : {"On-Task", "Off-Task", "OVERALL", "0.75"}) {
        CHECK(table.find(row) != std::string::npos);
    }
    CHECK(table.rfind("# protocol=loso repeats=10 seed=7", 0) == 0);

    const auto csv = render_csv(report);
    CHECK(csv.rfind("section,class,Appr,CP,Ms,FUSION\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);
}
