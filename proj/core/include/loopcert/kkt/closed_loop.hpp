#pragma once

#include <map>
#include <string>

#include "loopcert/kkt/builder.hpp"
#include "loopcert/kkt/controller.hpp"

namespace loopcert {

// Canonical block names of the plant side.
inline constexpr const char* kStateBlock = "x";
inline constexpr const char* kCompBlock = "z";   // compensator / estimator state
inline constexpr const char* kInputBlock = "u";
inline constexpr const char* kOutputBlock = "y";
inline constexpr const char* kProcessNoiseBlock = "w";
inline constexpr const char* kMeasNoiseBlock = "v";

/// Plant + compensator + optimization-based controller, with optional noise
/// structure and state/disturbance sets. Polynomial families are written
/// over small spaces with the canonical block names and are embedded by name
/// during set assembly.
struct ClosedLoopModel {
  int nx = 0, nz = 0, nu = 0, ny = 0, nw = 0, nv = 0;

  PolyVec f_x;  // over (x, u[, w]); nx rows
  PolyVec f_y;  // over (x[, v]); ny rows
  PolyVec f_z;  // over (z, y[, u]); nz rows
  PolyVec f_s;  // over (z, y); n_s rows

  ControllerSpec controller;

  PolyVec state_set;        // psi_i over (x, z); empty = no X
  PolyVec disturbance_set;  // psi_w over (x, z, w, v); may be empty (unbounded W)
  PolyVec perf_output;      // f_yhat over (x); empty = identity not assumed

  int n_s() const { return static_cast<int>(f_s.size()); }
  bool has_noise() const { return nw > 0 || nv > 0; }

  void validate() const;  // dimensional consistency; throws StructuralError
};

/// Which of the closed-loop semialgebraic sets to assemble.
enum class SetMode {
  K,      // two-step transition set, no state constraint
  KBar,   // K intersected with (x, z) in X
  KHat,   // single-step set; includes the X rows when the model has them
  KHatC,  // single-step set without X rows (complement handled per identity)
  KW,     // two-step noise-extended set with disturbance rows at both steps
  KHatW,  // single-step noise-extended set
};

struct AssemblyOptions {
  enum class Substitute { Auto, On, Off };
  /// Eliminate the primed state by composing the dynamics into the successor
  /// rows. Auto substitutes when the composed dynamics stay within
  /// `substitute_degree_threshold` total degree.
  Substitute substitute = Substitute::Auto;
  int substitute_degree_threshold = 2;
  KktOptions kkt;
};

/// An assembled set plus the composed machinery the certifiers need.
struct ClosedLoopSet {
  SemialgebraicSet set;
  SetMode mode = SetMode::K;
  bool substituted = false;
  bool two_step = false;

  PolyVec kappa;   // u as a polynomial over the set's space (current step)
  PolyVec x_next;  // composed successor state (substituted modes only)
  PolyVec z_next;

  /// Unprimed block name -> primed block name for every duplicated block.
  /// In substituted modes "x"/"z" are absent (eliminated).
  std::map<std::string, std::string> prime_map;

  PolyVec psi;     // state-set rows over the set's space (also for KHatC)
  PolyVec psi_w;   // disturbance rows over the set's space (current step)
  PolyVec y_hat;   // performance output over the set's space

  std::vector<std::string> controller_blocks;  // unprimed internal blocks

  const SpacePtr& space() const { return set.space; }
};

/// Assembles the requested closed-loop set. Errors: KBar without a state
/// set; KW/KHatW without noise-extended dynamics.
ClosedLoopSet assemble_closed_loop_set(const ClosedLoopModel& model, SetMode mode,
                                       const AssemblyOptions& options = {});

/// True when the composed dynamics degree allows elimination of the primed
/// state under the configured threshold.
bool substitution_applies(const ClosedLoopModel& model, const AssemblyOptions& options);

}  // namespace loopcert
