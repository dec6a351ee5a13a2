#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace loopcert {

/// Base class for all toolkit errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed inputs: unknown blocks, dimension mismatches, missing assignments.
class StructuralError : public Error {
 public:
  explicit StructuralError(const std::string& what) : Error(what) {}
};

/// Integration against a weight that does not cover the integrand.
class UnsupportedMeasureError : public Error {
 public:
  explicit UnsupportedMeasureError(const std::string& what) : Error(what) {}
};

/// A matched identity contains monomials no multiplier of the chosen degrees
/// can reach. Carries the offending monomials (printed form).
class DegreeDeficiencyError : public Error {
 public:
  DegreeDeficiencyError(const std::string& what, std::vector<std::string> monomials)
      : Error(what), offending_monomials(std::move(monomials)) {}
  std::vector<std::string> offending_monomials;
};

/// Errors surfaced by the SDP backend outside of the normal status codes.
class SolverError : public Error {
 public:
  explicit SolverError(const std::string& what) : Error(what) {}
};

/// Problem-file schema violations; carries a field path for diagnostics.
class SchemaError : public Error {
 public:
  SchemaError(const std::string& field, const std::string& what)
      : Error(field + ": " + what), field_path(field) {}
  std::string field_path;
};

}  // namespace loopcert
