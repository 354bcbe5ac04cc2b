#pragma once

#include <stdexcept>
#include <string>

namespace orbsus {

enum class errc {
  degenerate_lattice,
  non_hermitian_conflict,
  range_violation,
  eig_solver_failure,
  on_spectrum,
  degenerate_band,
  outside_strip,
  quadrature_not_converged,
  contour_touches_spectrum,
  target_out_of_range,
  not_semiconducting,
  non_integer_filling,
  not_two_band,
  size_limit,
  boundary_proximity,
  bad_arity,
  singular_basis,
  non_positive_gap,
  config_error,
  compute_error,
};

inline const char* errc_name(errc c) {
  switch (c) {
    case errc::degenerate_lattice:       return "DegenerateLattice";
    case errc::non_hermitian_conflict:   return "NonHermitianConflict";
    case errc::range_violation:          return "RangeViolation";
    case errc::eig_solver_failure:       return "EigSolverFailure";
    case errc::on_spectrum:              return "OnSpectrum";
    case errc::degenerate_band:          return "DegenerateBand";
    case errc::outside_strip:            return "OutsideStrip";
    case errc::quadrature_not_converged: return "QuadratureNotConverged";
    case errc::contour_touches_spectrum: return "ContourTouchesSpectrum";
    case errc::target_out_of_range:      return "TargetOutOfRange";
    case errc::not_semiconducting:       return "NotSemiconducting";
    case errc::non_integer_filling:      return "NonIntegerFilling";
    case errc::not_two_band:             return "NotTwoBand";
    case errc::size_limit:               return "SizeLimit";
    case errc::boundary_proximity:       return "BoundaryProximity";
    case errc::bad_arity:                return "BadArity";
    case errc::singular_basis:           return "SingularBasis";
    case errc::non_positive_gap:         return "NonPositiveGap";
    case errc::config_error:             return "ConfigError";
    case errc::compute_error:            return "ComputeError";
  }
  return "UnknownError";
}

class Error : public std::runtime_error {
 public:
  Error(errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}
  errc code() const noexcept { return code_; }

 private:
  errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace orbsus
