#pragma once

#include <stdexcept>
#include <string>

namespace fockchaos {

// Exit/status codes shared by the C API and the CLI.
enum class Status : int {
    ok = 0,
    invalid_argument = 1,
    config = 2,
    capacity = 3,
    numeric = 4,
    dimension = 5,
    internal = 9,
};

class Error : public std::runtime_error {
public:
    Error(Status s, const std::string &msg) : std::runtime_error(msg), status_(s) {}
    Status status() const noexcept { return status_; }

private:
    Status status_;
};

struct ConfigError : Error {
    explicit ConfigError(const std::string &m) : Error(Status::config, m) {}
};
struct CapacityError : Error {
    explicit CapacityError(const std::string &m) : Error(Status::capacity, m) {}
};
struct NumericError : Error {
    explicit NumericError(const std::string &m) : Error(Status::numeric, m) {}
};
struct DimensionError : Error {
    explicit DimensionError(const std::string &m) : Error(Status::dimension, m) {}
};
struct ArgumentError : Error {
    explicit ArgumentError(const std::string &m) : Error(Status::invalid_argument, m) {}
};

} // namespace fockchaos
