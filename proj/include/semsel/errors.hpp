#ifndef SEMSEL_ERRORS_HPP
#define SEMSEL_ERRORS_HPP

#include <iostream>
#include <stdexcept>
#include <string>

namespace semsel {

// Error classes map to process exit codes: config=2, data=3, numeric=4.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(kind + ": " + what), kind_(std::move(kind)) {}
    const std::string& kind() const { return kind_; }
    virtual int exit_code() const { return 1; }

private:
    std::string kind_;
};

class ConfigError : public Error {
public:
    using Error::Error;
    int exit_code() const override { return 2; }
};

class DataError : public Error {
public:
    using Error::Error;
    int exit_code() const override { return 3; }
};

class NumericError : public Error {
public:
    using Error::Error;
    int exit_code() const override { return 4; }
};

inline void warn(const std::string& msg) {
    std::cerr << "semsel: warning: " << msg << "\n";
}

}  // namespace semsel

#endif
