#include "ercmc/consistency.hpp"

#include <cmath>
#include <string>

#include "ercmc/error.hpp"

namespace ercmc {

EcWeighting parse_ec_weighting(std::string_view text) {
  if (text == "uniform") return EcWeighting::uniform;
  if (text == "proximal") return EcWeighting::proximal;
  throw ConfigError("unknown EC weighting '" + std::string(text) + "' (uniform|proximal)");
}

std::string_view to_string(EcWeighting weighting) {
  return weighting == EcWeighting::uniform ? "uniform" : "proximal";
}

std::vector<double> ec_weights(std::size_t ell, EcWeighting weighting) {
  if (ell == 0) throw ParameterError("EC window must be at least 1");
  std::vector<double> w(ell, 1.0 / static_cast<double>(ell));
  if (weighting == EcWeighting::uniform) return w;
  // exp(e^(ell-i)) overflows quickly; subtract the largest exponent first.
  const double top = std::exp(static_cast<double>(ell - 1));
  double total = 0.0;
  for (std::size_t i = 1; i <= ell; ++i) {
    w[i - 1] = std::exp(std::exp(static_cast<double>(ell - i)) - top);
    total += w[i - 1];
  }
  for (double& v : w) v /= total;
  return w;
}

double emotion_consistency(std::span<const std::size_t> labels, std::size_t start, std::size_t ell,
                           EcWeighting weighting) {
  if (start >= labels.size() || labels.size() - start - 1 < ell) {
    throw ContractError("utterance " + std::to_string(start) + " has fewer than " +
                        std::to_string(ell) + " followers");
  }
  const auto w = ec_weights(ell, weighting);
  double score = 0.0;
  for (std::size_t i = 1; i <= ell; ++i) {
    if (labels[start + i] == labels[start]) score += w[i - 1];
  }
  return 100.0 * score;
}

EcSummary corpus_emotion_consistency(const std::vector<std::vector<std::size_t>>& conversations,
                                     std::size_t ell, EcWeighting weighting) {
  EcSummary out;
  double total = 0.0;
  for (const auto& labels : conversations) {
    for (std::size_t i = 0; i + ell < labels.size(); ++i) {
      total += emotion_consistency(labels, i, ell, weighting);
      ++out.windows;
    }
  }
  if (out.windows) out.score = total / static_cast<double>(out.windows);
  return out;
}

}  // namespace ercmc
