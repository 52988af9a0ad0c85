#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rwc {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Parameter outside its mathematical domain.
class DomainError : public Error {
public:
    using Error::Error;
};

// Wrong call sequence or inconsistent arguments.
class UsageError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class ResourceError : public Error {
public:
    using Error::Error;
};

class NotPositiveDefinite : public Error {
public:
    NotPositiveDefinite(const std::string& what, std::size_t index, double pivot)
        : Error(what), index_(index), pivot_(pivot) {}
    std::size_t index() const noexcept { return index_; }
    double pivot() const noexcept { return pivot_; }

private:
    std::size_t index_;
    double pivot_;
};

class SingularSystem : public Error {
public:
    SingularSystem(const std::string& what, std::size_t row) : Error(what), row_(row) {}
    std::size_t row() const noexcept { return row_; }

private:
    std::size_t row_;
};

}  // namespace rwc
