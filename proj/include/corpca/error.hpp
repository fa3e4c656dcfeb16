#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

namespace corpca {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed arguments: wrong dimensions, non-finite values, out-of-range scalars.
class InvalidInput : public Error {
public:
    using Error::Error;
};

/// Configuration that cannot be run (bad scalar ranges, infeasible geometry).
class InvalidConfig : public Error {
public:
    using Error::Error;
};

/// The solver produced non-finite iterates or a runaway objective.
class DivergenceDetected : public Error {
public:
    DivergenceDetected(const std::string& what, int iteration)
        : Error(what + " (iteration " + std::to_string(iteration) + ")"), iteration_(iteration) {}

    int iteration() const noexcept { return iteration_; }

private:
    int iteration_;
};

/// Failure to read a frame, flow or checkpoint file.
class IngestError : public Error {
public:
    IngestError(const std::filesystem::path& path, std::uint64_t offset, const std::string& what)
        : Error(path.string() + " @" + std::to_string(offset) + ": " + what), path_(path), offset_(offset) {}

    const std::filesystem::path& path() const noexcept { return path_; }
    std::uint64_t offset() const noexcept { return offset_; }

private:
    std::filesystem::path path_;
    std::uint64_t offset_;
};

} // namespace corpca
