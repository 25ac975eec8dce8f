#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace ercmc {

enum class EcWeighting { uniform, proximal };

EcWeighting parse_ec_weighting(std::string_view text);
std::string_view to_string(EcWeighting weighting);

// Weights for followers 1..ell. Uniform: 1/ell each. Proximal: proportional
// to exp(e^(ell-i)), so the nearest follower dominates.
std::vector<double> ec_weights(std::size_t ell, EcWeighting weighting);

// 100 · Σ_i [labels[start+i] == labels[start]] · w_i over followers i = 1..ell.
// Throws ContractError when fewer than ell followers exist.
double emotion_consistency(std::span<const std::size_t> labels, std::size_t start, std::size_t ell,
                           EcWeighting weighting);

struct EcSummary {
  double score = 0.0;       // mean over qualifying utterances
  std::size_t windows = 0;  // qualifying utterances
};

// Mean EC over every utterance with at least ell followers, across all
// conversations. `windows` is 0 (and score 0) when nothing qualifies.
EcSummary corpus_emotion_consistency(const std::vector<std::vector<std::size_t>>& conversations,
                                     std::size_t ell, EcWeighting weighting);

}  // namespace ercmc
