// Copyright the cavity-td contributors.
// SPDX-License-Identifier: Apache-2.0

#ifndef CAVITY_TD_ERROR_HPP
#define CAVITY_TD_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace cavity_td
{

enum class ErrorKind
{
  ConfigError,
  OverlappingApertures,
  NonPositiveMaterial,
  ApertureCollarViolation,
  UnsupportedPolarization,
  PreconditionViolation,
  MeshFailure,
  DomainError,
  GridMismatch,
  SizeError,
  IndexError,
  SingularElement,
  DimensionMismatch,
  FactorizationFailure,
  QuadratureFailure,
  ContractViolation,
  CausalityViolation,
};

inline constexpr std::string_view to_string(ErrorKind kind)
{
  switch (kind)
  {
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::OverlappingApertures: return "OverlappingApertures";
    case ErrorKind::NonPositiveMaterial: return "NonPositiveMaterial";
    case ErrorKind::ApertureCollarViolation: return "ApertureCollarViolation";
    case ErrorKind::UnsupportedPolarization: return "UnsupportedPolarization";
    case ErrorKind::PreconditionViolation: return "PreconditionViolation";
    case ErrorKind::MeshFailure: return "MeshFailure";
    case ErrorKind::DomainError: return "DomainError";
    case ErrorKind::GridMismatch: return "GridMismatch";
    case ErrorKind::SizeError: return "SizeError";
    case ErrorKind::IndexError: return "IndexError";
    case ErrorKind::SingularElement: return "SingularElement";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::FactorizationFailure: return "FactorizationFailure";
    case ErrorKind::QuadratureFailure: return "QuadratureFailure";
    case ErrorKind::ContractViolation: return "ContractViolation";
    case ErrorKind::CausalityViolation: return "CausalityViolation";
  }
  return "Unknown";
}

// All library failures are reported through this one exception type; the kind
// lets callers (and the CLI exit-code mapping) branch without string matching.
class Error : public std::runtime_error
{
public:
  Error(ErrorKind kind, const std::string &what)
    : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind)
  {
  }

  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

inline void verify(bool cond, ErrorKind kind, const std::string &what)
{
  if (!cond)
  {
    throw Error(kind, what);
  }
}

}  // namespace cavity_td

#endif  // CAVITY_TD_ERROR_HPP
