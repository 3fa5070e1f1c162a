// Copyright 2026 The mpsts Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace mpsts {

/// Base class of every error thrown by the toolkit.
class Error : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

/// A parameter lies outside the domain of an operation.
class DomainError : public Error
{
  public:
    DomainError(std::string field, std::string const& what)
        : Error(field + ": " + what), field_(std::move(field))
    {
    }

    std::string const& field() const noexcept { return field_; }

  private:
    std::string field_;
};

/// The operation is mathematically undefined for the input (zero mean, vacuum).
class ArithmeticDomainError : public Error
{
  public:
    using Error::Error;
};

/// Sample moments are incompatible with the compound-Poisson family.
class EstimationError : public Error
{
  public:
    using Error::Error;
};

class InsufficientDataError : public Error
{
  public:
    using Error::Error;
};

/// Simulation configuration violates an invariant.
class ConfigError : public Error
{
  public:
    ConfigError(std::string field, std::string const& what)
        : Error(field + ": " + what), field_(std::move(field))
    {
    }

    std::string const& field() const noexcept { return field_; }

  private:
    std::string field_;
};

/// Selected bins are closer than twice the coherence time.
class CorrelatedBinsError : public Error
{
  public:
    using Error::Error;
};

/// A file could not be read or written.
class IoError : public Error
{
  public:
    using Error::Error;
};

/// Input data is well-formed but unusable (missing k, empty table).
class DataError : public Error
{
  public:
    using Error::Error;
};

} // namespace mpsts
