#ifndef SUPERBUNCH_VERSION_HPP
#define SUPERBUNCH_VERSION_HPP

namespace superbunch {

inline constexpr const char* kVersion = "1.0.0";

} // namespace superbunch

#endif // SUPERBUNCH_VERSION_HPP
