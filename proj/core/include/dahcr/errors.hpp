#pragma once

#include <stdexcept>
#include <string>

namespace dahcr {

// Bad user input: malformed files, invalid ids, infeasible configs.
// The CLI maps this to exit code 2; everything else exits 1.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace dahcr
