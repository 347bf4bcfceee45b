#ifndef SGGN_VERSION_HPP
#define SGGN_VERSION_HPP

#define SGGN_VERSION_MAJOR 0
#define SGGN_VERSION_MINOR 1
#define SGGN_VERSION_PATCH 0

namespace sggn {
inline constexpr const char* kVersion = "0.1.0";
}

#endif  // SGGN_VERSION_HPP
