#pragma once

#include <stdexcept>
#include <string>

namespace inslen {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Manifest missing, unparseable, or of an unsupported version.
class FormatError : public Error {
public:
    using Error::Error;
};

/// Tensor blob lengths disagree with what the manifest declares.
class CorruptionError : public Error {
public:
    using Error::Error;
};

/// A sample does not match the shapes declared by the model card.
class ShapeError : public Error {
public:
    ShapeError(std::string sample_id, const std::string& what)
        : Error("sample '" + sample_id + "': " + what), sample_id_(std::move(sample_id)) {}
    const std::string& sample_id() const noexcept { return sample_id_; }

private:
    std::string sample_id_;
};

class InputError : public Error {
public:
    using Error::Error;
};

class ParameterError : public Error {
public:
    using Error::Error;
};

class IndexError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// Zero-norm vector where a norm or cosine is required.
class DegenerateInputError : public Error {
public:
    using Error::Error;
};

/// Metric is undefined for the given input (e.g. a single class).
class UndefinedMetricError : public Error {
public:
    using Error::Error;
};

}  // namespace inslen
