#ifndef IONCHAIN_VERSION_HPP
#define IONCHAIN_VERSION_HPP

namespace ionchain {

inline constexpr const char* kVersion = "0.1.0";

}

#endif
