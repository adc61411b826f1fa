#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace faultbench {

// All recoverable failures surface as this exception; the CLI maps it to a
// nonzero exit code with the stage name prepended.
class error : public std::runtime_error {
public:
    explicit error(const std::string& what) : std::runtime_error(what) {}
};

[[noreturn]] inline void fail(const std::string& msg) {
    throw error(msg);
}

inline void require(bool cond, const std::string& msg) {
    if (!cond) fail(msg);
}

} // namespace faultbench
