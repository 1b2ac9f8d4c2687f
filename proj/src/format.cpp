#include "lbp/format.h"

#include <array>
#include <charconv>

namespace lbp {

auto format_double(double x) -> std::string {
  auto buffer = std::array<char, 64>{};
  auto [end, ec] = std::to_chars(buffer.data(), buffer.data() + buffer.size(), x,
                                 std::chars_format::general, 17);
  return std::string(buffer.data(), end);
}

auto format_optional(std::optional<double> x) -> std::string {
  return x ? format_double(*x) : std::string{};
}

}  // namespace lbp
