#pragma once

#include <stdexcept>
#include <string>

namespace bdgx {

/// Shape or segment-size disagreement between tensors, layers, or datasets.
class DimensionError : public std::runtime_error {
public:
    explicit DimensionError(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid or inconsistent configuration / user input.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// A required artifact (dataset, checkpoint, reference file) is missing.
class PrerequisiteError : public std::runtime_error {
public:
    explicit PrerequisiteError(const std::string& what) : std::runtime_error(what) {}
};

/// Non-finite values, diverging losses, or failed numerical gates.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed or truncated on-disk artifacts.
class FormatError : public std::runtime_error {
public:
    explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace bdgx
