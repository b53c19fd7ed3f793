#pragma once

// Central finite-difference checks of the analytic gradients.
//
// Relative error per coordinate is |a - n| / max(|a|, |n|, 1e-6): the floor
// keeps coordinates whose true gradient is essentially zero from turning
// rounding noise into a large ratio.
//
// Stop-gradient objectives are differentiated against a surrogate whose
// targets are frozen at the base point, which is exactly the function the
// analytic gradient describes. Flow-gradient objectives use the true loss.

#include <cstdint>
#include <string>
#include <vector>

#include "crctc/consistency.hpp"

namespace crctc {

struct GradCheckReport {
  std::string name;
  int coordinates = 0;
  double max_rel_error = 0;
  double max_abs_error = 0;

  bool passed(double tol) const { return coordinates > 0 && max_rel_error <= tol; }
};

double relative_error(double analytic, double numeric);

struct GradCheckOptions {
  double step = 1e-5;
  int coordinates = 10;
  std::uint64_t seed = 1;
};

GradCheckReport check_ctc_grad(const GradCheckOptions& opt);
GradCheckReport check_cr_loss(TargetMode mode, const GradCheckOptions& opt);
GradCheckReport check_sr_total_loss(const GradCheckOptions& opt);
// Encoder parameters through the two-branch objective (flow-gradient CR so
// the whole loss is a plain function of the parameters) with fixed dropout
// and layer-drop seeds.
GradCheckReport check_model_backward(const GradCheckOptions& opt);

std::vector<GradCheckReport> run_gradchecks(const GradCheckOptions& opt);

}  // namespace crctc
