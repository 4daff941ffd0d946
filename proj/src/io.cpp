#include "engage/io.hpp"

#include "engage/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

namespace engage {

std::string format_number(double value)
{
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
    if (ec != std::errc{}) {
        throw DataError("cannot format number");
    }
    return std::string(buf, end);
}

std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open '" + path.string() + "'");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content)
{
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw DataError("cannot write '" + tmp.string() + "'");
        }
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) {
            throw DataError("write failed for '" + tmp.string() + "'");
        }
    }
    std::filesystem::rename(tmp, path);
}

namespace {

class CsvReader {
public:
    CsvReader(std::string_view text, std::string_view header, std::string_view what)
        : text_(text), what_(what)
    {
        std::vector<std::string_view> fields;
        if (!next(fields)) {
            throw ParseError(std::string(what_) + ": empty file, expected header '" +
                             std::string(header) + "'");
        }
        if (line_text_ != header) {
            throw ParseError(error_prefix() + "expected header '" + std::string(header) + "'");
        }
    }

    // Reads the next non-empty line into `fields`; false at end of input.
    bool next(std::vector<std::string_view>& fields)
    {
        while (pos_ < text_.size()) {
            auto nl = text_.find('\n', pos_);
            if (nl == std::string_view::npos) {
                nl = text_.size();
            }
            line_text_ = text_.substr(pos_, nl - pos_);
            pos_ = nl + 1;
            ++line_;
            if (!line_text_.empty() && line_text_.back() == '\r') {
                line_text_.remove_suffix(1);
            }
            if (line_text_.empty()) {
                continue;
            }
            fields.clear();
            std::size_t start = 0;
            while (true) {
                auto comma = line_text_.find(',', start);
                fields.push_back(line_text_.substr(start, comma - start));
                if (comma == std::string_view::npos) {
                    break;
                }
                start = comma + 1;
            }
            return true;
        }
        return false;
    }

    std::size_t line() const noexcept { return line_; }

    std::string error_prefix() const
    {
        return std::string(what_) + " line " + std::to_string(line_) + ": ";
    }

    [[noreturn]] void fail(const std::string& message) const
    {
        throw ParseError(error_prefix() + message);
    }

    void expect_columns(const std::vector<std::string_view>& fields, std::size_t n) const
    {
        if (fields.size() != n) {
            fail("expected " + std::to_string(n) + " columns, got " + std::to_string(fields.size()));
        }
    }

    double number(std::string_view field, std::string_view column) const
    {
        double value = 0.0;
        auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
        if (ec != std::errc{} || ptr != field.data() + field.size() || field.empty()) {
            fail("cannot parse " + std::string(column) + " '" + std::string(field) + "'");
        }
        return value;
    }

    std::size_t integer(std::string_view field, std::string_view column) const
    {
        std::size_t value = 0;
        auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
        if (ec != std::errc{} || ptr != field.data() + field.size() || field.empty()) {
            fail("cannot parse " + std::string(column) + " '" + std::string(field) + "'");
        }
        return value;
    }

    std::string text(std::string_view field, std::string_view column) const
    {
        if (field.empty()) {
            fail("empty " + std::string(column));
        }
        return std::string(field);
    }

    template <typename T, typename Parser>
    T enumeration(std::string_view field, std::string_view column, Parser parse) const
    {
        auto value = parse(field);
        if (!value) {
            fail("unknown " + std::string(column) + " '" + std::string(field) + "'");
        }
        return *value;
    }

private:
    std::string_view text_;
    std::string_view what_;
    std::string_view line_text_;
    std::size_t pos_ = 0;
    std::size_t line_ = 0;
};

} // namespace

std::string samples_to_csv(std::span<const TimedSample> samples)
{
    std::vector<const TimedSample*> ordered;
    ordered.reserve(samples.size());
    for (const auto& s : samples) {
        ordered.push_back(&s);
    }
    std::ranges::stable_sort(ordered, {}, [](const TimedSample* s) {
        return std::tie(s->session_id, s->student_id, s->modality, s->t_s);
    });

    std::string out(kSamplesHeader);
    out += '\n';
    for (const TimedSample* s : ordered) {
        const std::string prefix = s->session_id + "," + s->student_id + "," +
                                   std::string(to_string(s->modality)) + "," +
                                   format_number(s->t_s) + ",";
        for (const auto& [channel, value] : s->channels) {
            out += prefix;
            out += channel;
            out += ',';
            out += format_number(value);
            out += '\n';
        }
    }
    return out;
}

std::vector<TimedSample> parse_samples_csv(std::string_view text)
{
    CsvReader reader(text, kSamplesHeader, "samples.csv");

    using Key = std::tuple<std::string, std::string, Modality, double>;
    std::map<Key, TimedSample> grouped;
    std::vector<std::string_view> f;
    while (reader.next(f)) {
        reader.expect_columns(f, 6);
        const auto modality = reader.enumeration<Modality>(f[2], "modality", parse_modality);
        const double t = reader.number(f[3], "t_s");
        if (!std::isfinite(t) || t < 0.0) {
            reader.fail("t_s must be a non-negative finite number");
        }
        const std::string channel = reader.text(f[4], "channel");
        const double value = reader.number(f[5], "value");

        Key key{reader.text(f[0], "session_id"), reader.text(f[1], "student_id"), modality, t};
        auto [it, inserted] = grouped.try_emplace(key);
        if (inserted) {
            it->second.session_id = std::get<0>(key);
            it->second.student_id = std::get<1>(key);
            it->second.modality = modality;
            it->second.t_s = t;
        }
        if (!it->second.channels.emplace(channel, value).second) {
            reader.fail("duplicate channel '" + channel + "' for this sample");
        }
    }

    std::vector<TimedSample> samples;
    samples.reserve(grouped.size());
    for (auto& [key, sample] : grouped) {
        samples.push_back(std::move(sample));
    }
    return samples;
}

std::vector<TimedSample> load_samples(const std::filesystem::path& path)
{
    return parse_samples_csv(read_file(path));
}

std::string annotations_to_csv(std::span<const AnnotationRecord> records)
{
    std::string out(kAnnotationsHeader);
    out += '\n';
    for (const auto& r : records) {
        out += r.session_id + "," + r.student_id + "," + r.span.annotator_id + "," +
               format_number(r.span.start_s) + "," + format_number(r.span.end_s) + "," +
               std::string(to_string(r.span.mark)) + "\n";
    }
    return out;
}

std::vector<AnnotationRecord> parse_annotations_csv(std::string_view text)
{
    CsvReader reader(text, kAnnotationsHeader, "annotations.csv");
    std::vector<AnnotationRecord> records;
    std::vector<std::string_view> f;
    while (reader.next(f)) {
        reader.expect_columns(f, 6);
        AnnotationRecord r;
        r.session_id = reader.text(f[0], "session_id");
        r.student_id = reader.text(f[1], "student_id");
        r.span.annotator_id = reader.text(f[2], "annotator_id");
        r.span.start_s = reader.number(f[3], "start_s");
        r.span.end_s = reader.number(f[4], "end_s");
        r.span.mark = reader.enumeration<AnnotatorMark>(f[5], "mark", parse_mark);
        if (!(r.span.start_s < r.span.end_s)) {
            reader.fail("annotation span needs start_s < end_s");
        }
        records.push_back(std::move(r));
    }
    return records;
}

std::string schedule_to_csv(std::span<const ScheduleRecord> records)
{
    std::string out(kScheduleHeader);
    out += '\n';
    for (const auto& r : records) {
        out += r.session_id + "," + format_number(r.span.start_s) + "," +
               format_number(r.span.end_s) + "," + std::string(to_string(r.span.section)) + "\n";
    }
    return out;
}

std::vector<ScheduleRecord> parse_schedule_csv(std::string_view text)
{
    CsvReader reader(text, kScheduleHeader, "schedule.csv");
    std::vector<ScheduleRecord> records;
    std::vector<std::string_view> f;
    while (reader.next(f)) {
        reader.expect_columns(f, 4);
        ScheduleRecord r;
        r.session_id = reader.text(f[0], "session_id");
        r.span.start_s = reader.number(f[1], "start_s");
        r.span.end_s = reader.number(f[2], "end_s");
        r.span.section = reader.enumeration<SectionType>(f[3], "section", parse_section);
        if (!(r.span.start_s < r.span.end_s)) {
            reader.fail("schedule span needs start_s < end_s");
        }
        records.push_back(std::move(r));
    }
    return records;
}

void save_dataset(const std::filesystem::path& dir, const RawDataset& raw)
{
    std::filesystem::create_directories(dir);
    write_file_atomic(dir / "samples.csv", samples_to_csv(raw.samples));
    write_file_atomic(dir / "annotations.csv", annotations_to_csv(raw.annotations));
    write_file_atomic(dir / "schedule.csv", schedule_to_csv(raw.schedule));
}

RawDataset load_dataset(const std::filesystem::path& dir)
{
    RawDataset raw;
    raw.samples = load_samples(dir / "samples.csv");
    raw.annotations = parse_annotations_csv(read_file(dir / "annotations.csv"));
    raw.schedule = parse_schedule_csv(read_file(dir / "schedule.csv"));
    return raw;
}

namespace {

constexpr std::string_view kInstanceColumns =
    "session_id,student_id,window_index,start_s,end_s,section,label";
constexpr std::size_t kInstanceFixed = 7;

} // namespace

std::string instances_to_csv(std::span<const Instance> instances)
{
    std::string out(kInstanceColumns);
    if (!instances.empty()) {
        for (auto m : kModalities) {
            for (const auto& name : instances.front()[m].names) {
                out += "," + std::string(to_string(m)) + ":" + name;
            }
        }
    }
    out += '\n';
    for (const auto& inst : instances) {
        for (auto m : kModalities) {
            if (inst[m].names != instances.front()[m].names) {
                throw DataError("instances do not share one feature schema");
            }
        }
        out += inst.session_id + "," + inst.student_id + "," + std::to_string(inst.window.index) +
               "," + format_number(inst.window.start_s) + "," + format_number(inst.window.end_s) +
               "," + std::string(to_string(inst.window.section)) + "," +
               std::string(to_string(inst.label));
        for (auto m : kModalities) {
            for (double v : inst[m].values) {
                out += ',';
                out += format_number(v);
            }
        }
        out += '\n';
    }
    return out;
}

std::vector<Instance> parse_instances_csv(std::string_view text)
{
    // The header is variable, so read it first and hand the reader the exact line.
    const auto nl = text.find('\n');
    std::string_view header = text.substr(0, nl);
    if (!header.empty() && header.back() == '\r') {
        header.remove_suffix(1);
    }
    if (header.substr(0, kInstanceColumns.size()) != kInstanceColumns) {
        throw ParseError("instances.csv line 1: expected header starting with '" +
                         std::string(kInstanceColumns) + "'");
    }

    std::array<std::vector<std::string>, 3> names;
    std::vector<Modality> column_modality;
    {
        std::string_view rest = header.substr(kInstanceColumns.size());
        std::optional<Modality> previous;
        while (!rest.empty()) {
            rest.remove_prefix(1);  // comma
            const auto comma = rest.find(',');
            const std::string_view column = rest.substr(0, comma);
            rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma);
            const auto colon = column.find(':');
            const auto m = colon == std::string_view::npos ? std::nullopt
                                                           : parse_modality(column.substr(0, colon));
            if (!m || column.size() == colon + 1) {
                throw ParseError("instances.csv line 1: bad feature column '" + std::string(column) + "'");
            }
            if (previous && index_of(*m) < index_of(*previous)) {
                throw ParseError("instances.csv line 1: feature columns out of modality order");
            }
            previous = m;
            names[index_of(*m)].emplace_back(column.substr(colon + 1));
            column_modality.push_back(*m);
        }
    }

    CsvReader reader(text, header, "instances.csv");
    std::vector<Instance> instances;
    std::vector<std::string_view> f;
    while (reader.next(f)) {
        reader.expect_columns(f, kInstanceFixed + column_modality.size());
        Instance inst;
        inst.session_id = reader.text(f[0], "session_id");
        inst.student_id = reader.text(f[1], "student_id");
        inst.window.index = reader.integer(f[2], "window_index");
        inst.window.start_s = reader.number(f[3], "start_s");
        inst.window.end_s = reader.number(f[4], "end_s");
        inst.window.section = reader.enumeration<SectionType>(f[5], "section", parse_section);
        inst.label = reader.enumeration<EngagementLabel>(f[6], "label", parse_label);
        for (auto m : kModalities) {
            auto& fv = inst.features[index_of(m)];
            fv.modality = m;
            fv.window_index = inst.window.index;
            fv.names = names[index_of(m)];
            fv.values.reserve(fv.names.size());
        }
        for (std::size_t c = 0; c < column_modality.size(); ++c) {
            const double v = reader.number(f[kInstanceFixed + c], "feature value");
            if (!std::isfinite(v)) {
                reader.fail("non-finite feature value");
            }
            inst.features[index_of(column_modality[c])].values.push_back(v);
        }
        instances.push_back(std::move(inst));
    }
    return instances;
}

std::vector<Instance> load_instances(const std::filesystem::path& path)
{
    return parse_instances_csv(read_file(path));
}

std::string predictions_to_csv(std::span<const PredictionRow> rows)
{
    std::string out(kPredictionsHeader);
    out += '\n';
    for (const auto& r : rows) {
        out += r.session_id + "," + r.student_id + "," + std::to_string(r.window_index) + "," +
               std::string(to_string(r.section)) + "," + std::string(to_string(r.label)) + "," +
               format_number(r.confidence_on) + "\n";
    }
    return out;
}

} // namespace engage
