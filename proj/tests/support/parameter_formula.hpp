#pragma once

#include <cstddef>

#include "ercmc/model_config.hpp"

namespace ercmc::testing {

// Trainable scalars implied by the layer shapes of a configuration.
inline std::size_t expected_parameter_count(const ModelConfig& c) {
  const std::size_t d = c.d_m, dk = c.d_m / c.n_h, y = c.num_classes;
  if (c.contexts.raw) return d * y + y;
  std::size_t total = 0;
  for (ContextKind kind : kAllContexts) {
    if (!c.contexts.has(kind)) continue;
    // Q/K/V per head, output projection, two feed-forward layers.
    std::size_t branch = c.n_h * 3 * d * dk + d * d + (d * 4 * d + 4 * d) + (4 * d * d + d);
    if (c.pos_mode == PosMode::relative) {
      branch += (c.share_rp ? 1 : c.n_h) * 2 * (2 * c.window + 1) * dk;
    }
    if (c.pos_mode == PosMode::learned) {
      branch += (kind == ContextKind::future ? c.futures + 1 : c.window + 1) * d;
    }
    if (c.use_s || c.use_t) branch += d * d;
    if (c.use_t) branch += 3 * (2 * d * d + d);
    total += branch;
  }
  const std::size_t comps = static_cast<std::size_t>(c.use_h) + c.use_s + c.use_t;
  const std::size_t branches = static_cast<std::size_t>(c.contexts.historical) +
                               c.contexts.speaker + c.contexts.future;
  total += comps * branches * d * d;
  total += comps * d * y + y;
  return total;
}

}  // namespace ercmc::testing
