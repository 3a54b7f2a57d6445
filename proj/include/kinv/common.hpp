#pragma once

#include <stdexcept>
#include <string>

namespace kinv {

/// Base class for all errors raised by the library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Problem definition errors: bad config files, violated preconditions,
/// expression parse/eval failures. CLI maps these to exit code 2.
struct ConfigError : Error {
    using Error::Error;
};

/// Numerical failures: blow-up, Picard divergence, Newton line-search or
/// Jacobian solve failures. CLI maps these to exit code 3.
struct SolverError : Error {
    using Error::Error;
};

/// Picard residuals increased for three consecutive iterations.
struct PicardDivergenceError : SolverError {
    using SolverError::SolverError;
};

/// File system / serialization failures. CLI maps these to exit code 4.
struct IoError : Error {
    using Error::Error;
};

enum class LogLevel { error = 0, info = 1, debug = 2 };

/// Current log level, read once from KINV_LOG (error|info|debug).
LogLevel log_level();

void log_error(const std::string& msg);
void log_info(const std::string& msg);
void log_debug(const std::string& msg);

} // namespace kinv
