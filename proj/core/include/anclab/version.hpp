#pragma once

namespace anclab {

inline constexpr const char* kVersion = "anclab 0.3.0";

}  // namespace anclab
