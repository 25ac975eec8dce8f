#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ercmc/context_model.hpp"
#include "ercmc/optimizer.hpp"

namespace ercmc {

struct GradCheckOptions {
  double step = 1e-3;
  // Denominator floor for the relative error |a - n| / max(|a|, |n|, floor),
  // so entries whose true gradient is ~0 are judged on absolute error.
  double floor = 1e-3;
  // Check every `stride`-th coordinate of each parameter (1 = all).
  std::size_t stride = 1;
  // A coordinate whose stencil changes a relu activation pattern is not
  // differentiable over [x-step, x+step]; it is re-checked with the step
  // halved until the pattern is stable, down to this limit.
  double min_step = 1e-9;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t coordinates = 0;
  std::size_t kink_rechecks = 0;   // coordinates checked with a reduced step
  std::size_t unresolved_kinks = 0;  // no stable step found; judged at min_step
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

// Compares reverse-mode gradients of `loss` against central finite
// differences. `loss` must be a pure function of the parameter values.
GradCheckResult check_gradients(ParameterList<double>& params,
                                const std::function<Tensor<double>(Tape<double>&)>& loss,
                                const GradCheckOptions& options = {});

struct GradSuiteEntry {
  std::string name;
  GradCheckResult result;
};

// Small random instance of a conversation for the composed-model check.
ConversationInputs random_conversation(std::size_t length, std::size_t d_m, std::size_t m,
                                       std::size_t num_classes, std::uint64_t seed);

// Every differentiable primitive, the attention/gate/GRU blocks and the full
// three-context model (d_m=8, n_h=2, window 3, m=3, 4 classes), each on a
// seeded random instance.
std::vector<GradSuiteEntry> run_gradient_suite(std::uint64_t seed,
                                               const GradCheckOptions& options = {});

}  // namespace ercmc
