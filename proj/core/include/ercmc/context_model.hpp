#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "ercmc/model_config.hpp"
#include "ercmc/ops.hpp"
#include "ercmc/optimizer.hpp"

namespace ercmc {

// Model-side view of one conversation: embeddings, optional futures, speakers
// and labels, all in utterance order.
struct ConversationInputs {
  std::size_t length = 0;
  std::size_t dim = 0;
  std::vector<std::string> speakers;
  std::vector<float> embeddings;  // length × dim
  std::size_t futures_per_utterance = 0;
  std::vector<float> futures;  // length × m × dim, empty when futures are unused
  std::vector<std::optional<std::size_t>> labels;

  std::span<const float> embedding(std::size_t i) const {
    return std::span<const float>(embeddings).subspan(i * dim, dim);
  }
  std::span<const float> future(std::size_t i, std::size_t j) const {
    return std::span<const float>(futures).subspan((i * futures_per_utterance + j) * dim, dim);
  }
  // First `n` utterances only.
  ConversationInputs prefix(std::size_t n) const;
};

struct AreaSource {
  bool future = false;
  std::size_t index = 0;  // utterance index, or future slot when `future`
  friend bool operator==(const AreaSource&, const AreaSource&) = default;
};

template <typename T>
struct LocalArea {
  ContextKind kind = ContextKind::historical;
  Tensor<T> vectors;  // size × d_m, constant
  std::size_t target = 0;
  std::vector<AreaSource> sources;

  std::size_t size() const noexcept { return sources.size(); }
};

template <typename T>
struct AttentionHead {
  Tensor<T> w_q, w_k, w_v;  // d_m × d_k
};

template <typename T>
struct GruParams {
  Tensor<T> w_r, u_r, b_r;
  Tensor<T> w_z, u_z, b_z;
  Tensor<T> w_n, u_n, b_n;
};

template <typename T>
struct BranchParams {
  ContextKind kind = ContextKind::historical;
  std::vector<AttentionHead<T>> heads;
  Tensor<T> w_o;                 // d_m × d_m
  Tensor<T> ff1_w, ff1_b;        // d_m × 4d_m, 4d_m
  Tensor<T> ff2_w, ff2_b;        // 4d_m × d_m, d_m
  std::vector<Tensor<T>> rel_k;  // per head (one entry when shared): span × d_k
  std::vector<Tensor<T>> rel_v;
  Tensor<T> abs_pos;             // learned mode: capacity × d_m
  Tensor<T> w_s;                 // d_m × d_m, when the gate is needed
  std::optional<GruParams<T>> gru;
};

template <typename T>
struct FusionParams {
  Tensor<T> w_h, w_s, w_t;  // (c·d_m) × d_m, undefined when the composition is off
  Tensor<T> w_m, b_m;       // (u·d_m) × |Y| and |Y|; d_m × |Y| in raw mode
};

struct AttentionSettings {
  PosMode pos_mode = PosMode::relative;
  std::size_t clip = 5;
  bool share_rp = false;
  double dropout = 0.0;
  bool training = false;
};

// C_i, S_i and A_i for utterance i, in historical/speaker/future order,
// omitting disabled contexts.
template <typename T>
std::vector<LocalArea<T>> build_local_areas(const ConversationInputs& inputs, std::size_t i,
                                            std::size_t window, std::size_t m,
                                            const ContextSet& contexts);

// Per-position local-aware embeddings h_j (area size × d_m).
template <typename T>
Tensor<T> relpos_attention(Tape<T>& tape, const LocalArea<T>& area, const BranchParams<T>& params,
                           const AttentionSettings& settings, Rng& rng);

// Local state s (1 × d_m); zero when the area holds only its target.
template <typename T>
Tensor<T> state_gate(Tape<T>& tape, const Tensor<T>& h, std::size_t target, const Tensor<T>& w_s);

template <typename T>
Tensor<T> gru_step(Tape<T>& tape, const Tensor<T>& input, const Tensor<T>& state,
                   const GruParams<T>& gru);

// Sinusoidal absolute encodings for positions 0..n-1.
template <typename T>
Tensor<T> sinusoidal_positions(std::size_t n, std::size_t d_m);

struct Prediction {
  std::vector<double> probabilities;
  std::size_t label = 0;
};

// argmax with lowest-index tie-break.
std::size_t argmax(std::span<const double> values);

template <typename T>
class ContextModel {
 public:
  ContextModel(ModelConfig config, std::uint64_t seed);
  // Parameters are shared handles, so copies would alias; move only.
  ContextModel(const ContextModel&) = delete;
  ContextModel& operator=(const ContextModel&) = delete;
  ContextModel(ContextModel&&) noexcept = default;
  ContextModel& operator=(ContextModel&&) noexcept = default;

  const ModelConfig& config() const noexcept { return config_; }
  ParameterList<T>& parameters() noexcept { return params_; }
  const ParameterList<T>& parameters() const noexcept { return params_; }
  std::size_t parameter_count() const;
  const BranchParams<T>& branch(ContextKind kind) const;
  const FusionParams<T>& fusion() const noexcept { return fusion_; }

  std::vector<std::vector<T>> snapshot() const;
  void restore(const std::vector<std::vector<T>>& values);

  struct Output {
    Tensor<T> log_probs;  // length × |Y|
    Tensor<T> loss;       // mean NLL over labelled utterances; undefined if none
    std::size_t labelled = 0;
  };

  // Throws ConsistencyError if the inputs do not fit the configuration.
  void check_inputs(const ConversationInputs& inputs) const;

  Output forward(Tape<T>& tape, const ConversationInputs& inputs, bool training, Rng& rng) const;

  // Dropout off, nothing recorded.
  std::vector<Prediction> predict(const ConversationInputs& inputs) const;

 private:
  Tensor<T> make_param(const std::string& name, Shape shape, bool bias, Rng& rng);
  void build_branch(ContextKind kind, Rng& rng);

  ModelConfig config_;
  std::vector<BranchParams<T>> branches_;
  FusionParams<T> fusion_;
  ParameterList<T> params_;
};

extern template class ContextModel<float>;
extern template class ContextModel<double>;

}  // namespace ercmc
