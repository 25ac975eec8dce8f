#include "ercmc/context_model.hpp"

#include <algorithm>
#include <cmath>

namespace ercmc {

ConversationInputs ConversationInputs::prefix(std::size_t n) const {
  n = std::min(n, length);
  ConversationInputs out;
  out.length = n;
  out.dim = dim;
  out.speakers.assign(speakers.begin(), speakers.begin() + static_cast<std::ptrdiff_t>(n));
  out.embeddings.assign(embeddings.begin(),
                        embeddings.begin() + static_cast<std::ptrdiff_t>(n * dim));
  out.futures_per_utterance = futures_per_utterance;
  if (!futures.empty()) {
    out.futures.assign(futures.begin(), futures.begin() + static_cast<std::ptrdiff_t>(
                                                              n * futures_per_utterance * dim));
  }
  out.labels.assign(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(n));
  return out;
}

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

namespace {

template <typename T>
Tensor<T> rows_to_tensor(const ConversationInputs& inputs, std::size_t utterance,
                         const std::vector<AreaSource>& sources) {
  const std::size_t d = inputs.dim;
  std::vector<T> values;
  values.reserve(sources.size() * d);
  for (const auto& src : sources) {
    auto row = src.future ? inputs.future(utterance, src.index) : inputs.embedding(src.index);
    for (float v : row) values.push_back(static_cast<T>(v));
  }
  return Tensor<T>::from({sources.size(), d}, std::move(values));
}

// Clipped relative distance k - j mapped to [0, 2·clip].
ColumnIndex relative_index(std::size_t n, std::size_t clip) {
  ColumnIndex idx{n, n, std::vector<std::size_t>(n * n)};
  const auto c = static_cast<std::ptrdiff_t>(clip);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t k = 0; k < n; ++k) {
      const auto dist = std::clamp(static_cast<std::ptrdiff_t>(k) - static_cast<std::ptrdiff_t>(j), -c, c);
      idx.entries[j * n + k] = static_cast<std::size_t>(dist + c);
    }
  }
  return idx;
}

}  // namespace

template <typename T>
std::vector<LocalArea<T>> build_local_areas(const ConversationInputs& inputs, std::size_t i,
                                            std::size_t window, std::size_t m,
                                            const ContextSet& contexts) {
  if (i >= inputs.length) {
    throw IndexError("utterance " + std::to_string(i) + " outside conversation of " +
                     std::to_string(inputs.length));
  }
  std::vector<LocalArea<T>> areas;
  if (contexts.historical) {
    std::vector<AreaSource> src;
    for (std::size_t j = i - std::min(i, window); j <= i; ++j) src.push_back({false, j});
    auto vectors = rows_to_tensor<T>(inputs, i, src);
    const std::size_t target = src.size() - 1;
    areas.push_back({ContextKind::historical, std::move(vectors), target, std::move(src)});
  }
  if (contexts.speaker) {
    std::vector<AreaSource> src;
    for (std::size_t j = i; j-- > 0 && src.size() < window;) {
      if (inputs.speakers[j] == inputs.speakers[i]) src.push_back({false, j});
    }
    std::reverse(src.begin(), src.end());
    src.push_back({false, i});
    auto vectors = rows_to_tensor<T>(inputs, i, src);
    const std::size_t target = src.size() - 1;
    areas.push_back({ContextKind::speaker, std::move(vectors), target, std::move(src)});
  }
  if (contexts.future) {
    if (inputs.futures_per_utterance < m || inputs.futures.empty()) {
      throw CoverageError("future context needs " + std::to_string(m) +
                          " futures per utterance, inputs carry " +
                          std::to_string(inputs.futures.empty() ? 0 : inputs.futures_per_utterance));
    }
    std::vector<AreaSource> src{{false, i}};
    for (std::size_t j = 0; j < m; ++j) src.push_back({true, j});
    auto vectors = rows_to_tensor<T>(inputs, i, src);
    areas.push_back({ContextKind::future, std::move(vectors), 0, std::move(src)});
  }
  return areas;
}

template <typename T>
Tensor<T> sinusoidal_positions(std::size_t n, std::size_t d_m) {
  std::vector<T> values(n * d_m);
  for (std::size_t pos = 0; pos < n; ++pos) {
    for (std::size_t i = 0; i < d_m; ++i) {
      const double freq = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(d_m));
      const double angle = static_cast<double>(pos) * freq;
      values[pos * d_m + i] = static_cast<T>(i % 2 == 0 ? std::sin(angle) : std::cos(angle));
    }
  }
  return Tensor<T>::from({n, d_m}, std::move(values));
}

template <typename T>
Tensor<T> relpos_attention(Tape<T>& tape, const LocalArea<T>& area, const BranchParams<T>& params,
                           const AttentionSettings& settings, Rng& rng) {
  const std::size_t n = area.size();
  if (n == 0) throw ContractError("attention over an empty local area");
  Tensor<T> x = area.vectors;
  const std::size_t d_m = x.dim(1);

  if (settings.pos_mode == PosMode::sinusoidal) {
    x = ops::add(tape, x, sinusoidal_positions<T>(n, d_m));
  } else if (settings.pos_mode == PosMode::learned) {
    if (n > params.abs_pos.dim(0)) {
      throw DimensionError("local area of " + std::to_string(n) +
                           " exceeds learned position table of " +
                           std::to_string(params.abs_pos.dim(0)));
    }
    std::vector<std::size_t> positions(n);
    for (std::size_t p = 0; p < n; ++p) positions[p] = p;
    x = ops::add(tape, x, ops::select_rows(tape, params.abs_pos, positions));
  }

  const bool relative = settings.pos_mode == PosMode::relative;
  ColumnIndex rel;
  if (relative) rel = relative_index(n, settings.clip);
  const std::size_t span = 2 * settings.clip + 1;

  std::vector<Tensor<T>> heads;
  heads.reserve(params.heads.size());
  for (std::size_t p = 0; p < params.heads.size(); ++p) {
    const auto& head = params.heads[p];
    const T inv_sqrt_dk = T(1) / std::sqrt(static_cast<T>(head.w_k.dim(1)));
    auto q = ops::matmul(tape, x, head.w_q);
    auto k = ops::matmul(tape, x, head.w_k);
    auto v = ops::matmul(tape, x, head.w_v);
    auto scores = ops::matmul(tape, q, ops::transpose(tape, k));
    const std::size_t table = settings.share_rp ? 0 : p;
    if (relative) {
      auto by_distance = ops::matmul(tape, q, ops::transpose(tape, params.rel_k.at(table)));
      scores = ops::add(tape, scores, ops::gather_cols(tape, by_distance, rel));
    }
    scores = ops::affine(tape, scores, inv_sqrt_dk, T(0));
    auto alpha = ops::softmax_lastdim(tape, scores);
    auto out = ops::matmul(tape, alpha, v);
    if (relative) {
      auto pooled = ops::scatter_cols(tape, alpha, rel, span);
      out = ops::add(tape, out, ops::matmul(tape, pooled, params.rel_v.at(table)));
    }
    heads.push_back(std::move(out));
  }
  auto merged = ops::matmul(tape, ops::concat_lastdim<T>(tape, heads), params.w_o);
  auto inner = ops::relu(tape, ops::add_row(tape, ops::matmul(tape, merged, params.ff1_w), params.ff1_b));
  auto h = ops::add_row(tape, ops::matmul(tape, inner, params.ff2_w), params.ff2_b);
  return ops::dropout(tape, h, settings.dropout, settings.training, rng);
}

template <typename T>
Tensor<T> state_gate(Tape<T>& tape, const Tensor<T>& h, std::size_t target, const Tensor<T>& w_s) {
  const std::size_t n = h.dim(0);
  if (target >= n) throw IndexError("gate target outside local area");
  if (n == 1) return Tensor<T>::zeros({1, h.dim(1)});
  std::vector<std::size_t> others;
  others.reserve(n - 1);
  for (std::size_t j = 0; j < n; ++j) {
    if (j != target) others.push_back(j);
  }
  const std::size_t tgt[] = {target};
  auto context = ops::select_rows(tape, h, others);
  auto anchor = ops::select_rows(tape, h, std::span<const std::size_t>(tgt));
  auto scores = ops::matmul(tape, ops::matmul(tape, context, w_s), ops::transpose(tape, anchor));
  auto beta = ops::softmax_lastdim(tape, ops::tanh(tape, ops::transpose(tape, scores)));
  return ops::matmul(tape, beta, context);
}

template <typename T>
Tensor<T> gru_step(Tape<T>& tape, const Tensor<T>& input, const Tensor<T>& state,
                   const GruParams<T>& gru) {
  auto gate = [&](const Tensor<T>& w, const Tensor<T>& u, const Tensor<T>& b) {
    return ops::sigmoid(tape, ops::add_row(tape,
                                           ops::add(tape, ops::matmul(tape, input, w),
                                                    ops::matmul(tape, state, u)),
                                           b));
  };
  auto reset = gate(gru.w_r, gru.u_r, gru.b_r);
  auto update = gate(gru.w_z, gru.u_z, gru.b_z);
  auto recurrent = ops::mul(tape, reset, ops::matmul(tape, state, gru.u_n));
  auto candidate = ops::tanh(
      tape, ops::add_row(tape, ops::add(tape, ops::matmul(tape, input, gru.w_n), recurrent), gru.b_n));
  // (1 - z) ⊙ n + z ⊙ t_prev
  return ops::add(tape, candidate, ops::mul(tape, update, ops::sub(tape, state, candidate)));
}

template <typename T>
ContextModel<T>::ContextModel(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  Rng rng(seed);
  const std::size_t d = config_.d_m;
  const std::size_t classes = config_.num_classes;
  if (config_.contexts.raw) {
    fusion_.w_m = make_param("classifier.w", {d, classes}, false, rng);
    fusion_.b_m = make_param("classifier.b", {classes}, true, rng);
    return;
  }
  for (ContextKind kind : kAllContexts) {
    if (config_.contexts.has(kind)) build_branch(kind, rng);
  }
  const std::size_t width = config_.contexts.count() * d;
  if (config_.use_h) fusion_.w_h = make_param("fusion.w_h", {width, d}, false, rng);
  if (config_.use_s) fusion_.w_s = make_param("fusion.w_s", {width, d}, false, rng);
  if (config_.use_t) fusion_.w_t = make_param("fusion.w_t", {width, d}, false, rng);
  fusion_.w_m = make_param("classifier.w", {config_.composition_count() * d, classes}, false, rng);
  fusion_.b_m = make_param("classifier.b", {classes}, true, rng);
}

template <typename T>
Tensor<T> ContextModel<T>::make_param(const std::string& name, Shape shape, bool bias, Rng& rng) {
  auto t = Tensor<T>::zeros(shape, true);
  if (!bias) {
    const double fan_in = static_cast<double>(shape[0]);
    const double fan_out = static_cast<double>(shape.size() > 1 ? shape[1] : shape[0]);
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (T& v : t.mutable_data()) v = static_cast<T>(dist(rng));
  }
  params_.push_back({name, t});
  return t;
}

template <typename T>
void ContextModel<T>::build_branch(ContextKind kind, Rng& rng) {
  const std::size_t d = config_.d_m;
  const std::size_t dk = config_.d_head();
  const std::string prefix = to_string(kind);
  BranchParams<T> b;
  b.kind = kind;
  for (std::size_t p = 0; p < config_.n_h; ++p) {
    const std::string head = prefix + ".head" + std::to_string(p);
    AttentionHead<T> h;
    h.w_q = make_param(head + ".w_q", {d, dk}, false, rng);
    h.w_k = make_param(head + ".w_k", {d, dk}, false, rng);
    h.w_v = make_param(head + ".w_v", {d, dk}, false, rng);
    b.heads.push_back(std::move(h));
  }
  b.w_o = make_param(prefix + ".w_o", {d, d}, false, rng);
  b.ff1_w = make_param(prefix + ".ff1_w", {d, 4 * d}, false, rng);
  b.ff1_b = make_param(prefix + ".ff1_b", {4 * d}, true, rng);
  b.ff2_w = make_param(prefix + ".ff2_w", {4 * d, d}, false, rng);
  b.ff2_b = make_param(prefix + ".ff2_b", {d}, true, rng);
  if (config_.pos_mode == PosMode::relative) {
    const std::size_t tables = config_.share_rp ? 1 : config_.n_h;
    for (std::size_t p = 0; p < tables; ++p) {
      const std::string tag = config_.share_rp ? "" : std::to_string(p);
      b.rel_k.push_back(make_param(prefix + ".rel_k" + tag, {config_.relative_span(), dk}, false, rng));
      b.rel_v.push_back(make_param(prefix + ".rel_v" + tag, {config_.relative_span(), dk}, false, rng));
    }
  } else if (config_.pos_mode == PosMode::learned) {
    b.abs_pos = make_param(prefix + ".abs_pos", {config_.area_capacity(kind), d}, false, rng);
  }
  if (config_.needs_gate()) b.w_s = make_param(prefix + ".w_s", {d, d}, false, rng);
  if (config_.use_t) {
    GruParams<T> g;
    g.w_r = make_param(prefix + ".gru.w_r", {d, d}, false, rng);
    g.u_r = make_param(prefix + ".gru.u_r", {d, d}, false, rng);
    g.b_r = make_param(prefix + ".gru.b_r", {d}, true, rng);
    g.w_z = make_param(prefix + ".gru.w_z", {d, d}, false, rng);
    g.u_z = make_param(prefix + ".gru.u_z", {d, d}, false, rng);
    g.b_z = make_param(prefix + ".gru.b_z", {d}, true, rng);
    g.w_n = make_param(prefix + ".gru.w_n", {d, d}, false, rng);
    g.u_n = make_param(prefix + ".gru.u_n", {d, d}, false, rng);
    g.b_n = make_param(prefix + ".gru.b_n", {d}, true, rng);
    b.gru = std::move(g);
  }
  branches_.push_back(std::move(b));
}

template <typename T>
std::size_t ContextModel<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

template <typename T>
std::vector<std::vector<T>> ContextModel<T>::snapshot() const {
  std::vector<std::vector<T>> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.emplace_back(p.value.data().begin(), p.value.data().end());
  return out;
}

template <typename T>
void ContextModel<T>::restore(const std::vector<std::vector<T>>& values) {
  if (values.size() != params_.size()) throw ContractError("snapshot does not match model");
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto dst = params_[k].value.mutable_data();
    if (values[k].size() != dst.size()) throw ContractError("snapshot does not match model");
    std::copy(values[k].begin(), values[k].end(), dst.begin());
  }
}

template <typename T>
const BranchParams<T>& ContextModel<T>::branch(ContextKind kind) const {
  for (const auto& b : branches_) {
    if (b.kind == kind) return b;
  }
  throw ConfigError(std::string("context branch '") + to_string(kind) + "' is not enabled");
}

template <typename T>
void ContextModel<T>::check_inputs(const ConversationInputs& inputs) const {
  if (inputs.length == 0) throw ConsistencyError("conversation has no utterances");
  if (inputs.dim != config_.d_m) {
    throw ConsistencyError("embedding dim " + std::to_string(inputs.dim) +
                           " does not match model d_m " + std::to_string(config_.d_m));
  }
  if (inputs.embeddings.size() != inputs.length * inputs.dim ||
      inputs.speakers.size() != inputs.length || inputs.labels.size() != inputs.length) {
    throw ConsistencyError("conversation inputs are not aligned with its length");
  }
  if (config_.contexts.future) {
    if (inputs.futures.empty() || inputs.futures_per_utterance < config_.futures ||
        inputs.futures.size() != inputs.length * inputs.futures_per_utterance * inputs.dim) {
      throw CoverageError("future context enabled but the conversation lacks " +
                          std::to_string(config_.futures) + " futures per utterance");
    }
  }
  for (const auto& l : inputs.labels) {
    if (l && *l >= config_.num_classes) {
      throw VocabularyError("label index " + std::to_string(*l) + " outside " +
                            std::to_string(config_.num_classes) + " classes");
    }
  }
}

template <typename T>
typename ContextModel<T>::Output ContextModel<T>::forward(Tape<T>& tape,
                                                          const ConversationInputs& inputs,
                                                          bool training, Rng& rng) const {
  check_inputs(inputs);
  const std::size_t n = inputs.length;
  const std::size_t d = config_.d_m;
  const double rate = config_.dropout;

  std::vector<Tensor<T>> features;
  features.reserve(n);
  if (config_.contexts.raw) {
    for (std::size_t i = 0; i < n; ++i) {
      auto x = Tensor<T>::zeros({1, d});
      auto row = inputs.embedding(i);
      std::transform(row.begin(), row.end(), x.mutable_data().begin(),
                     [](float v) { return static_cast<T>(v); });
      features.push_back(ops::dropout(tape, x, rate, training, rng));
    }
  } else {
    AttentionSettings settings{config_.pos_mode, config_.window, config_.share_rp, rate, training};
    std::vector<Tensor<T>> tracked(branches_.size(), Tensor<T>::zeros({1, d}));
    for (std::size_t i = 0; i < n; ++i) {
      auto areas = build_local_areas<T>(inputs, i, config_.window, config_.futures, config_.contexts);
      std::vector<Tensor<T>> hs, ss, ts;
      for (std::size_t b = 0; b < branches_.size(); ++b) {
        const auto& params = branches_[b];
        const auto& area = areas[b];
        auto h_all = relpos_attention(tape, area, params, settings, rng);
        const std::size_t pick[] = {area.target};
        hs.push_back(ops::select_rows(tape, h_all, std::span<const std::size_t>(pick)));
        if (config_.needs_gate()) {
          auto s = state_gate(tape, h_all, area.target, params.w_s);
          if (config_.use_t) {
            tracked[b] = gru_step(tape, s, tracked[b], *params.gru);
            ts.push_back(tracked[b]);
          }
          ss.push_back(std::move(s));
        }
      }
      std::vector<Tensor<T>> parts;
      if (config_.use_h) parts.push_back(ops::matmul(tape, ops::concat_lastdim<T>(tape, hs), fusion_.w_h));
      if (config_.use_s) parts.push_back(ops::matmul(tape, ops::concat_lastdim<T>(tape, ss), fusion_.w_s));
      if (config_.use_t) parts.push_back(ops::matmul(tape, ops::concat_lastdim<T>(tape, ts), fusion_.w_t));
      auto f = parts.size() == 1 ? parts[0] : ops::concat_lastdim<T>(tape, parts);
      features.push_back(ops::dropout(tape, f, rate, training, rng));
    }
  }

  auto stacked = ops::concat_rows<T>(tape, features);
  auto logits = ops::add_row(tape, ops::matmul(tape, stacked, fusion_.w_m), fusion_.b_m);
  Output out;
  out.log_probs = ops::log_softmax_lastdim(tape, logits);

  std::vector<std::size_t> rows, targets;
  for (std::size_t i = 0; i < n; ++i) {
    if (inputs.labels[i]) {
      rows.push_back(i);
      targets.push_back(*inputs.labels[i]);
    }
  }
  out.labelled = rows.size();
  if (!rows.empty()) {
    auto picked = rows.size() == n ? out.log_probs : ops::select_rows(tape, out.log_probs, rows);
    out.loss = ops::nll_loss(tape, picked, targets);
  }
  return out;
}

template <typename T>
std::vector<Prediction> ContextModel<T>::predict(const ConversationInputs& inputs) const {
  Tape<T> tape;
  tape.set_enabled(false);
  Rng unused(0);
  auto out = forward(tape, inputs, false, unused);
  const std::size_t classes = config_.num_classes;
  std::vector<Prediction> preds(inputs.length);
  for (std::size_t i = 0; i < inputs.length; ++i) {
    auto& p = preds[i];
    p.probabilities.resize(classes);
    for (std::size_t c = 0; c < classes; ++c) {
      p.probabilities[c] = std::exp(static_cast<double>(out.log_probs.at(i, c)));
    }
    p.label = argmax(p.probabilities);
  }
  return preds;
}

#define ERCMC_INSTANTIATE_MODEL(T)                                                            \
  template std::vector<LocalArea<T>> build_local_areas<T>(const ConversationInputs&,          \
                                                          std::size_t, std::size_t,           \
                                                          std::size_t, const ContextSet&);    \
  template Tensor<T> relpos_attention(Tape<T>&, const LocalArea<T>&, const BranchParams<T>&,  \
                                      const AttentionSettings&, Rng&);                        \
  template Tensor<T> state_gate(Tape<T>&, const Tensor<T>&, std::size_t, const Tensor<T>&);   \
  template Tensor<T> gru_step(Tape<T>&, const Tensor<T>&, const Tensor<T>&,                   \
                              const GruParams<T>&);                                           \
  template Tensor<T> sinusoidal_positions<T>(std::size_t, std::size_t);                       \
  template class ContextModel<T>;

ERCMC_INSTANTIATE_MODEL(float)
ERCMC_INSTANTIATE_MODEL(double)

#undef ERCMC_INSTANTIATE_MODEL

}  // namespace ercmc
