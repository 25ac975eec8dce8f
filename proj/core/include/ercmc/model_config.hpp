#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>

namespace ercmc {

enum class PosMode { relative, sinusoidal, learned, none };

enum class ContextKind : std::uint8_t { historical = 0, speaker = 1, future = 2 };

inline constexpr std::array<ContextKind, 3> kAllContexts = {
    ContextKind::historical, ContextKind::speaker, ContextKind::future};

const char* to_string(PosMode mode);
PosMode parse_pos_mode(const std::string& text);
const char* to_string(ContextKind kind);

// Enabled context branches. raw = classifier on x_i alone, no branches.
struct ContextSet {
  bool historical = true;
  bool speaker = true;
  bool future = true;
  bool raw = false;

  bool has(ContextKind kind) const noexcept {
    switch (kind) {
      case ContextKind::historical: return historical;
      case ContextKind::speaker: return speaker;
      default: return future;
    }
  }
  std::size_t count() const noexcept {
    return static_cast<std::size_t>(historical) + speaker + future;
  }
  friend bool operator==(const ContextSet&, const ContextSet&) = default;
};

// "c,s,pf" style (any non-empty subset, any order) or "raw".
ContextSet parse_contexts(const std::string& text);
std::string to_string(const ContextSet& set);

struct ModelConfig {
  std::size_t d_m = 768;
  std::size_t n_h = 8;
  std::size_t window = 5;   // ℓ: local areas hold up to window+1 vectors
  std::size_t futures = 5;  // m
  std::size_t history = 2;  // k, used by futures generation only
  double dropout = 0.1;
  PosMode pos_mode = PosMode::relative;
  ContextSet contexts{};
  bool use_h = true;
  bool use_s = true;
  bool use_t = true;
  bool share_rp = false;
  std::size_t num_classes = 0;

  // Throws ConfigError on any inconsistent setting.
  void validate() const;
  std::size_t d_head() const noexcept { return d_m / n_h; }
  std::size_t composition_count() const noexcept {
    return static_cast<std::size_t>(use_h) + use_s + use_t;
  }
  bool needs_gate() const noexcept { return use_s || use_t; }
  // Relative distances are clipped to [-window, window].
  std::size_t relative_span() const noexcept { return 2 * window + 1; }
  std::size_t area_capacity(ContextKind kind) const noexcept {
    return kind == ContextKind::future ? futures + 1 : window + 1;
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

}  // namespace ercmc
