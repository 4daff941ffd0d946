#pragma once

#include "engage/eval.hpp"
#include "engage/forest.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace engage {

inline constexpr int kModelFormatVersion = 1;

/// Three trained modality forests plus what produced them.
struct ModelBundle {
    int version = kModelFormatVersion;
    std::array<Forest, 3> forests;
    std::uint64_t seed = 0;
    std::string config_hash;
    std::string section = "all";  // training subset: all, Instructional or Assessment

    const Forest& operator[](Modality m) const noexcept { return forests[index_of(m)]; }

    friend bool operator==(const ModelBundle&, const ModelBundle&) = default;
};

/// Indented JSON; trees are written as nested {feature, threshold, left,
/// right} / {leaf: [on, off]} objects.
std::string model_to_json(const ModelBundle& bundle);
/// Throws UnsupportedVersionError for another format version and ParseError
/// for anything malformed, including truncated input.
ModelBundle model_from_json(std::string_view text);

void save_model(const ModelBundle& bundle, const std::filesystem::path& path);
ModelBundle load_model(const std::filesystem::path& path);

inline constexpr int kMetricsFormatVersion = 1;

/// Unrounded report values with their run metadata.
std::string metrics_to_json(const MetricsReport& report);
MetricsReport metrics_from_json(std::string_view text);

} // namespace engage
