#pragma once

namespace cavspin {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace cavspin
