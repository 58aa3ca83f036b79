#pragma once

#include <stdexcept>
#include <string>

namespace selfmine {

// Invalid parameters, configs, or inputs that violate a documented
// constraint. The message names the violated constraint.
class ValidationError : public std::runtime_error {
  public:
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// A linear solve or estimator failed beyond tolerance.
class NumericalError : public std::runtime_error {
  public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace selfmine
