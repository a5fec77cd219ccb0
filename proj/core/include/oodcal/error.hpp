#pragma once

#include <stdexcept>
#include <string>

namespace oodcal {

// Thrown for contract violations on inputs (bad shapes, out-of-range parameters,
// malformed files). Messages are meant to be shown to users verbatim.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Raised when a training loop produces a non-finite loss.
class DivergenceError : public Error {
public:
    using Error::Error;
};

inline void require(bool cond, const std::string& message) {
    if (!cond) throw Error(message);
}

}  // namespace oodcal
