#pragma once

#include <stdexcept>
#include <string>

namespace e2n
{

/// Base class for every error raised by the library.
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error
{
public:
  using Error::Error;
};

class DegenerateElement : public Error
{
public:
  using Error::Error;
};

/// A fine/coarse operation was given meshes that are not parent and child.
class HierarchyMismatch : public Error
{
public:
  using Error::Error;
};

class SingularSystem : public Error
{
public:
  using Error::Error;
};

class IllConditionedEffectivity : public Error
{
public:
  using Error::Error;
};

class DegenerateIndicator : public Error
{
public:
  using Error::Error;
};

class InvalidMetric : public Error
{
public:
  using Error::Error;
};

class RemeshFailure : public Error
{
public:
  using Error::Error;
};

class DimensionMismatch : public Error
{
public:
  using Error::Error;
};

class ParseError : public Error
{
public:
  ParseError(const std::string &what, int line)
    : Error(what + " (line " + std::to_string(line) + ")"), line_(line)
  {
  }

  int line() const { return line_; }

private:
  int line_;
};

}  // namespace e2n
