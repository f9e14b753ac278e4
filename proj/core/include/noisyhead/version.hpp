#pragma once

namespace noisyhead {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace noisyhead
