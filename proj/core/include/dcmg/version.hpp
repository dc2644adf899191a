#pragma once

namespace dcmg {

inline constexpr const char* kVersion = "0.1.0";

#if defined(__clang__)
inline constexpr const char* kCompiler = "clang " __clang_version__;
#elif defined(__GNUC__)
inline constexpr const char* kCompiler = "gcc " __VERSION__;
#else
inline constexpr const char* kCompiler = "unknown";
#endif

}  // namespace dcmg
