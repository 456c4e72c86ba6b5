#ifndef PGDCM_ERROR_HPP
#define PGDCM_ERROR_HPP

#include <stdexcept>
#include <string>

namespace pgdcm {

/// Malformed or inconsistent user input (bad Q-matrix, non-binary responses,
/// dimension mismatch). The CLI maps this to exit code 2.
class InputError : public std::invalid_argument {
public:
    explicit InputError(const std::string& what) : std::invalid_argument(what) {}
};

/// A numerical breakdown during estimation, e.g. a non-finite VLB.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool condition, const std::string& message) {
    if (!condition) {
        throw InputError(message);
    }
}

} // namespace pgdcm

#endif
