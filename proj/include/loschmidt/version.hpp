#pragma once

namespace loschmidt {

inline constexpr const char* version = "0.1.0";

}  // namespace loschmidt
