#pragma once

#include <string>

#include "loopcert/sdp/problem.hpp"

namespace loopcert {

/// Writes the problem in sparse SDPA-style layout:
///   line 1: m (number of equalities)
///   line 2: nBlocks
///   line 3: block sizes, negative for diagonal blocks
///   line 4: the m right-hand sides, space separated
///   then one line per nonzero: "matno blockno i j value" with matno 0 for
///   the objective, upper-triangular entries only, 1-based indices, values
///   printed with 17 significant digits.
/// Free variables are encoded as a trailing diagonal block of (t+, t-) pairs.
void export_sdpa(const SdpProblem& problem, const std::string& path);

/// Reads a file in the same layout. Free variables do not reappear (the
/// split encoding is kept), so a round trip is exact for problems without
/// free variables and objective-equivalent otherwise.
SdpProblem import_sdpa(const std::string& path);

}  // namespace loopcert
