#pragma once

namespace echolab {

inline constexpr const char* kVersion = "0.1.0";

} // namespace echolab
