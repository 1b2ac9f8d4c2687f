#pragma once

#include <optional>
#include <string>

namespace lbp {

// 17 significant digits with a "." decimal separator, independent of locale.
auto format_double(double x) -> std::string;
auto format_optional(std::optional<double> x) -> std::string;

}  // namespace lbp
