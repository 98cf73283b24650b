#ifndef HDCM_ERROR_HPP
#define HDCM_ERROR_HPP

#include <stdexcept>
#include <string>

namespace hdcm {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
	using std::runtime_error::runtime_error;
};

/// Input that fails validation: bad model spec, malformed data, inconsistent parameters.
/// The CLI maps these to exit code 1.
class ValidationError : public Error {
public:
	using Error::Error;
};

class ConfigurationError : public ValidationError {
public:
	using ValidationError::ValidationError;
};

class DataError : public ValidationError {
public:
	using ValidationError::ValidationError;
};

class ParameterError : public ValidationError {
public:
	using ValidationError::ValidationError;
};

/// Requested a brute-force oracle outside the dimensions it can handle.
class UnsupportedOracleError : public ConfigurationError {
public:
	using ConfigurationError::ConfigurationError;
};

/// Numerical failure (non-finite likelihood, empty posterior, ...). CLI exit code 2.
class NumericError : public Error {
public:
	using Error::Error;
};

} // namespace hdcm

#endif
