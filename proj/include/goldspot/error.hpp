#pragma once

#include <stdexcept>
#include <string>

namespace goldspot {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// File could not be opened, read or written.
class IoError : public Error {
public:
    IoError(const std::string& path, const std::string& reason)
        : Error(path + ": " + reason), path_(path) {}

    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

/// File contents do not follow the expected format.
class FormatError : public Error {
public:
    using Error::Error;
};

/// Vector or matrix shapes do not agree.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Argument outside its documented domain.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

}  // namespace goldspot
