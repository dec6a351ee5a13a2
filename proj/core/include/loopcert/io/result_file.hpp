#pragma once

#include <string>

#include "loopcert/certify/certificate.hpp"

namespace loopcert {

/// Writes a certificate to a JSON result file: the certified polynomials in
/// the problem-file term format, scalars, diagnostics and solver metadata.
/// The file carries enough data to re-validate against trajectories without
/// re-solving.
void write_result_file(const Certificate& cert, const std::string& path);
std::string result_to_string(const Certificate& cert);

/// Restores a certificate (polynomials, scalars, kind, diagnostics) from a
/// result file.
Certificate read_result_file(const std::string& path);

}  // namespace loopcert
