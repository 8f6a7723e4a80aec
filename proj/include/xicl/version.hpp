#pragma once

#include <string_view>

namespace xicl {

inline constexpr std::string_view kHarnessName = "xicl";
inline constexpr std::string_view kHarnessVersion = "1.0.0";

}  // namespace xicl
