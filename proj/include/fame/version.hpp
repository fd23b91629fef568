#pragma once

namespace fame {

inline constexpr const char* kArtifactVersion = "0.1.0";

}  // namespace fame
