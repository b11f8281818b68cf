#pragma once

#include <iostream>
#include <sstream>
#include <string_view>

namespace bisp::log {

// Progress and warnings go to stderr so stdout stays machine-readable.
template <typename... Args>
void info(Args&&... args) {
    std::ostringstream os;
    (os << ... << args);
    std::cerr << "[bisp] " << os.str() << '\n';
}

template <typename... Args>
void warn(Args&&... args) {
    std::ostringstream os;
    (os << ... << args);
    std::cerr << "[bisp:warn] " << os.str() << '\n';
}

} // namespace bisp::log
