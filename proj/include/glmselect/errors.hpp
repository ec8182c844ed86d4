#pragma once

#include <stdexcept>
#include <string>

namespace glmselect {

// Bad input: out-of-range arguments, malformed files, invalid configs.
// The CLI maps this to exit status 2.
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A numerical procedure failed: rank deficiency, non-convergence, a
// replicate failure rate above threshold. The CLI maps this to exit status 3.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace glmselect
