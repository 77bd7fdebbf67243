#pragma once

#include <stdexcept>
#include <string>

namespace posfaith {

// Base class for everything this library throws. The CLI maps subclasses
// onto exit codes: DataError -> 2, ServiceError -> 3.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Malformed or inconsistent input: corpus lines, label files, attention
// bundles, degenerate metric inputs.
class DataError : public Error {
public:
    using Error::Error;
};

// Failure of an upstream HTTP service (LLM endpoint or fact-check scorer).
// http_status() is 0 when the failure happened below the HTTP layer.
class ServiceError : public Error {
public:
    explicit ServiceError(const std::string& what, int http_status = 0)
        : Error(what), status_(http_status) {}

    int http_status() const { return status_; }

private:
    int status_;
};

}  // namespace posfaith
