#pragma once

namespace moge {

inline constexpr char version[] = "0.1.0";

}  // namespace moge
