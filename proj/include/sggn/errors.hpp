#ifndef SGGN_ERRORS_HPP
#define SGGN_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace sggn {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Input dimension does not match the network or point set.
class DimensionError : public Error {
public:
  using Error::Error;
};

/// A neuron whose weight vector has zero norm cannot be put back on the unit sphere.
class DegenerateNeuronError : public Error {
public:
  DegenerateNeuronError(std::size_t index, const std::string& what)
      : Error(what), index_(index) {}
  std::size_t index() const noexcept { return index_; }

private:
  std::size_t index_;
};

/// Invalid problem, optimizer, or experiment configuration.
class ConfigError : public Error {
public:
  using Error::Error;
};

/// Failure inside an iteration (non-finite values, solver breakdown).
class NumericalError : public Error {
public:
  using Error::Error;
};

}  // namespace sggn

#endif  // SGGN_ERRORS_HPP
