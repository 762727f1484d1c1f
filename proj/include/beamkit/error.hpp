#ifndef BEAMKIT_ERROR_HPP
#define BEAMKIT_ERROR_HPP

#include <stdexcept>
#include <string>

namespace beamkit {

// Error categories map onto CLI exit codes: config/io/infeasible are user
// errors (exit 2), numeric is an internal failure (exit 1).
enum class ErrorKind { config, io, infeasible, numeric };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void throw_config(const std::string& msg) { throw Error(ErrorKind::config, msg); }
[[noreturn]] inline void throw_io(const std::string& msg) { throw Error(ErrorKind::io, msg); }
[[noreturn]] inline void throw_infeasible(const std::string& msg) { throw Error(ErrorKind::infeasible, msg); }
[[noreturn]] inline void throw_numeric(const std::string& msg) { throw Error(ErrorKind::numeric, msg); }

} // namespace beamkit

#endif
