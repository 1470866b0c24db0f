#pragma once

#include <stdexcept>
#include <string>

namespace spsim {

// Bad user input: malformed config, out-of-range parameter, unusable file.
struct data_error : std::runtime_error {
    explicit data_error(const std::string& what) : std::runtime_error(what) {}
};

// Corrupt or inconsistent tag file. `kind` is a stable short token
// ("bad magic", "truncated file", ...) so callers can branch on it.
struct tag_file_error : data_error {
    std::string kind;
    tag_file_error(std::string k, const std::string& what)
        : data_error(k + ": " + what), kind(std::move(k)) {}
};

// Fit could not even be set up (singular Jacobian, too few points).
// Non-convergence is NOT an error; it is reported in FitResult.
struct fit_error : std::runtime_error {
    explicit fit_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace spsim
