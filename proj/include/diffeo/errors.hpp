#pragma once

#include <stdexcept>
#include <string>

namespace diffeo {

// Error categories map one-to-one onto CLI exit codes.
enum class ErrorKind { config, schema, numeric, invariant };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

inline Error config_error(const std::string& m) { return {ErrorKind::config, m}; }
inline Error schema_error(const std::string& m) { return {ErrorKind::schema, m}; }
inline Error numeric_error(const std::string& m) { return {ErrorKind::numeric, m}; }
inline Error invariant_error(const std::string& m) { return {ErrorKind::invariant, m}; }

}  // namespace diffeo
