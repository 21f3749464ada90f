#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "rankcal/types.hpp"

namespace rankcal {

inline constexpr int kModelFormatVersion = 1;

/// Keyed text document, one `section.key = value` per line, fixed field order,
/// scalars printed with 17 significant digits.
std::string serialize_model(const PipelineModel& model);

/// Throws ParseError naming the offending key on unknown versions, missing or
/// unknown keys, wrong node counts and non-finite scalars.
PipelineModel deserialize_model(std::string_view text);

void save_model(const std::filesystem::path& path, const PipelineModel& model);
PipelineModel load_model(const std::filesystem::path& path);

/// %.17g formatting shared by every text writer in the project.
std::string format_scalar(double value);

}  // namespace rankcal
