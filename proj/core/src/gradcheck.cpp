#include "ercmc/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <utility>
#include <random>

namespace ercmc {

GradCheckResult check_gradients(ParameterList<double>& params,
                                const std::function<Tensor<double>(Tape<double>&)>& loss,
                                const GradCheckOptions& options) {
  Tape<double> tape;
  zero_grads(params);
  auto value = loss(tape);
  tape.backward(value);

  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (auto& p : params) {
    analytic.emplace_back(p.value.grad().begin(), p.value.grad().end());
  }

  Tape<double> probe;
  probe.set_enabled(false);
  KinkMonitor monitor;
  auto evaluate = [&](double& slot, double x) {
    slot = x;
    monitor.reset();
    const double v = loss(probe).item();
    return std::pair{v, monitor.signature()};
  };
  GradCheckResult result;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto w = params[k].value.mutable_data();
    for (std::size_t i = 0; i < w.size(); i += std::max<std::size_t>(options.stride, 1)) {
      const double saved = w[i];
      const auto centre = evaluate(w[i], saved).second;
      double h = options.step;
      double numeric = 0.0;
      bool reduced = false;
      while (true) {
        const auto [up, up_sig] = evaluate(w[i], saved + h);
        const auto [down, down_sig] = evaluate(w[i], saved - h);
        numeric = (up - down) / (2.0 * h);
        if (up_sig == centre && down_sig == centre) break;
        if (h * 0.5 < options.min_step) {
          ++result.unresolved_kinks;
          break;
        }
        h *= 0.5;
        reduced = true;
      }
      w[i] = saved;
      if (reduced) ++result.kink_rechecks;
      const double a = analytic[k][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), options.floor});
      const double rel = std::abs(a - numeric) / denom;
      ++result.coordinates;
      if (rel > result.max_rel_error || !std::isfinite(rel)) {
        result.max_rel_error = std::isfinite(rel) ? rel : INFINITY;
        result.worst_parameter = params[k].name;
        result.worst_index = i;
        result.worst_analytic = a;
        result.worst_numeric = numeric;
      }
    }
  }
  zero_grads(params);
  return result;
}

}  // namespace ercmc

namespace ercmc {
namespace {

using D = Tensor<double>;

D random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(numel(shape));
  for (double& x : v) x = u(rng);
  return D::from(std::move(shape), std::move(v), true);
}

// Values bounded away from zero, so relu's kink is never crossed.
D off_zero_tensor(Shape shape, Rng& rng) {
  auto t = random_tensor(std::move(shape), rng, 0.1, 1.0);
  std::bernoulli_distribution flip(0.5);
  for (double& x : t.mutable_data()) {
    if (flip(rng)) x = -x;
  }
  return t;
}

// Scalar probe: Σ out ⊙ R for a fixed random R, so no output direction
// cancels out.
D project(Tape<double>& tape, const D& out, const D& weights) {
  return ops::sum(tape, ops::mul(tape, out, weights));
}

D weights_like(const D& out, Rng& rng) {
  auto w = random_tensor(out.shape(), rng);
  w.set_requires_grad(false);
  return w;
}

struct Case {
  std::string name;
  ParameterList<double> params;
  std::function<D(Tape<double>&)> loss;
};

ParameterList<double> named(std::initializer_list<std::pair<const char*, D>> items) {
  ParameterList<double> out;
  for (const auto& [n, t] : items) out.push_back({n, t});
  return out;
}

template <typename F>
Case unary(std::string name, D a, Rng& rng, F f) {
  Tape<double> probe;
  probe.set_enabled(false);
  auto w = weights_like(f(probe, a), rng);
  return {std::move(name), named({{"a", a}}),
          [a, w, f](Tape<double>& t) { return project(t, f(t, a), w); }};
}

template <typename F>
Case binary(std::string name, D a, D b, Rng& rng, F f) {
  Tape<double> probe;
  probe.set_enabled(false);
  auto w = weights_like(f(probe, a, b), rng);
  return {std::move(name), named({{"a", a}, {"b", b}}),
          [a, b, w, f](Tape<double>& t) { return project(t, f(t, a, b), w); }};
}

ColumnIndex random_index(std::size_t rows, std::size_t cols, std::size_t width, Rng& rng) {
  ColumnIndex idx{rows, cols, {}};
  std::uniform_int_distribution<std::size_t> pick(0, width - 1);
  for (std::size_t i = 0; i < rows * cols; ++i) idx.entries.push_back(pick(rng));
  return idx;
}

}  // namespace

ConversationInputs random_conversation(std::size_t length, std::size_t d_m, std::size_t m,
                                       std::size_t num_classes, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  std::uniform_int_distribution<std::size_t> label(0, num_classes - 1);
  std::bernoulli_distribution same_speaker(0.4);
  ConversationInputs in;
  in.length = length;
  in.dim = d_m;
  in.futures_per_utterance = m;
  in.embeddings.resize(length * d_m);
  for (float& x : in.embeddings) x = u(rng);
  in.futures.resize(length * m * d_m);
  for (float& x : in.futures) x = u(rng);
  std::string speaker = "A";
  for (std::size_t i = 0; i < length; ++i) {
    if (i > 0 && !same_speaker(rng)) speaker = speaker == "A" ? "B" : "A";
    in.speakers.push_back(speaker);
    in.labels.emplace_back(label(rng));
  }
  return in;
}

std::vector<GradSuiteEntry> run_gradient_suite(std::uint64_t seed,
                                               const GradCheckOptions& options) {
  Rng rng(seed);
  std::vector<Case> cases;
  using T = Tape<double>;

  cases.push_back(binary("matmul", random_tensor({3, 4}, rng), random_tensor({4, 2}, rng), rng,
                         [](T& t, const D& a, const D& b) { return ops::matmul(t, a, b); }));
  cases.push_back(unary("transpose", random_tensor({3, 5}, rng), rng,
                        [](T& t, const D& a) { return ops::transpose(t, a); }));
  cases.push_back(binary("add", random_tensor({2, 3}, rng), random_tensor({2, 3}, rng), rng,
                         [](T& t, const D& a, const D& b) { return ops::add(t, a, b); }));
  cases.push_back(binary("sub", random_tensor({2, 3}, rng), random_tensor({2, 3}, rng), rng,
                         [](T& t, const D& a, const D& b) { return ops::sub(t, a, b); }));
  cases.push_back(binary("mul", random_tensor({2, 3}, rng), random_tensor({2, 3}, rng), rng,
                         [](T& t, const D& a, const D& b) { return ops::mul(t, a, b); }));
  cases.push_back(unary("affine", random_tensor({2, 3}, rng), rng,
                        [](T& t, const D& a) { return ops::affine(t, a, -1.7, 0.3); }));
  cases.push_back(binary("add_row", random_tensor({3, 4}, rng), random_tensor({4}, rng), rng,
                         [](T& t, const D& a, const D& b) { return ops::add_row(t, a, b); }));
  cases.push_back(unary("relu", off_zero_tensor({3, 4}, rng), rng,
                        [](T& t, const D& a) { return ops::relu(t, a); }));
  cases.push_back(unary("tanh", random_tensor({3, 4}, rng, -2.0, 2.0), rng,
                        [](T& t, const D& a) { return ops::tanh(t, a); }));
  cases.push_back(unary("sigmoid", random_tensor({3, 4}, rng, -3.0, 3.0), rng,
                        [](T& t, const D& a) { return ops::sigmoid(t, a); }));
  cases.push_back(unary("softmax", random_tensor({3, 5}, rng, -2.0, 2.0), rng,
                        [](T& t, const D& a) { return ops::softmax_lastdim(t, a); }));
  {
    auto mask = std::make_shared<std::vector<std::uint8_t>>(15, 1);
    (*mask)[1] = (*mask)[7] = (*mask)[8] = (*mask)[14] = 0;
    cases.push_back(unary("softmax_masked", random_tensor({3, 5}, rng, -2.0, 2.0), rng,
                          [mask](T& t, const D& a) {
                            return ops::softmax_lastdim(
                                t, a, std::span<const std::uint8_t>(*mask));
                          }));
  }
  cases.push_back(unary("log_softmax", random_tensor({3, 5}, rng, -2.0, 2.0), rng,
                        [](T& t, const D& a) { return ops::log_softmax_lastdim(t, a); }));
  cases.push_back(binary("concat_lastdim", random_tensor({2, 3}, rng), random_tensor({2, 2}, rng),
                         rng, [](T& t, const D& a, const D& b) {
                           const D parts[] = {a, b, a};
                           return ops::concat_lastdim(t, std::span<const D>(parts));
                         }));
  cases.push_back(binary("concat_rows", random_tensor({2, 3}, rng), random_tensor({1, 3}, rng),
                         rng, [](T& t, const D& a, const D& b) {
                           const D parts[] = {b, a, b};
                           return ops::concat_rows(t, std::span<const D>(parts));
                         }));
  cases.push_back(unary("select_rows", random_tensor({4, 3}, rng), rng, [](T& t, const D& a) {
    const std::size_t rows[] = {3, 0, 3, 1};
    return ops::select_rows(t, a, std::span<const std::size_t>(rows));
  }));
  {
    auto idx = std::make_shared<ColumnIndex>(random_index(3, 4, 5, rng));
    cases.push_back(unary("gather_cols", random_tensor({3, 5}, rng), rng,
                          [idx](T& t, const D& a) { return ops::gather_cols(t, a, *idx); }));
    cases.push_back(unary("scatter_cols", random_tensor({3, 4}, rng), rng,
                          [idx](T& t, const D& a) { return ops::scatter_cols(t, a, *idx, 5); }));
  }
  cases.push_back(unary("dropout", random_tensor({4, 6}, rng), rng, [](T& t, const D& a) {
    Rng fixed(7);
    return ops::dropout(t, a, 0.3, true, fixed);
  }));
  {
    auto a = random_tensor({4, 5}, rng, -2.0, 2.0);
    cases.push_back({"nll_loss", named({{"a", a}}), [a](T& t) {
                       const std::size_t targets[] = {1, 4, 0, 1};
                       return ops::nll_loss(t, ops::log_softmax_lastdim(t, a),
                                            std::span<const std::size_t>(targets));
                     }});
  }
  cases.push_back(unary("sum", random_tensor({2, 3}, rng), rng, [](T& t, const D& a) {
    return ops::sum(t, a);
  }));

  // Branch blocks and the composed model share one tiny configuration.
  ModelConfig cfg;
  cfg.d_m = 8;
  cfg.n_h = 2;
  cfg.window = 3;
  cfg.futures = 3;
  cfg.num_classes = 4;
  cfg.dropout = 0.1;
  const auto inputs = std::make_shared<ConversationInputs>(
      random_conversation(7, cfg.d_m, cfg.futures, cfg.num_classes, rng()));
  auto model = std::make_shared<ContextModel<double>>(cfg, rng());

  for (PosMode mode : {PosMode::relative, PosMode::learned, PosMode::sinusoidal}) {
    ModelConfig c = cfg;
    c.pos_mode = mode;
    auto m = std::make_shared<ContextModel<double>>(c, rng());
    const auto& branch = m->branch(ContextKind::historical);
    ParameterList<double> params;
    for (const auto& p : m->parameters()) {
      if (p.name.rfind("historical.", 0) == 0 && p.name.find(".w_s") == std::string::npos &&
          p.name.find(".gru.") == std::string::npos) {
        params.push_back(p);
      }
    }
    auto areas = build_local_areas<double>(*inputs, 5, c.window, c.futures, c.contexts);
    auto area = std::make_shared<LocalArea<double>>(areas.front());
    Tape<double> probe;
    probe.set_enabled(false);
    Rng r0(3);
    AttentionSettings settings{mode, c.window, c.share_rp, 0.0, false};
    auto w = weights_like(relpos_attention(probe, *area, branch, settings, r0), rng);
    cases.push_back({std::string("attention_") + to_string(mode), params,
                     [m, area, settings, w](T& t) {
                       Rng r(3);
                       return project(t,
                                      relpos_attention(t, *area, m->branch(ContextKind::historical),
                                                       settings, r),
                                      w);
                     }});
  }
  {
    auto h = random_tensor({5, 8}, rng);
    const auto& w_s = model->branch(ContextKind::speaker).w_s;
    auto probe_w = random_tensor({1, 8}, rng);
    probe_w.set_requires_grad(false);
    cases.push_back({"state_gate", named({{"h", h}, {"w_s", w_s}}),
                     [h, w_s, probe_w](T& t) { return project(t, state_gate(t, h, 4, w_s), probe_w); }});
  }
  {
    const auto& gru = *model->branch(ContextKind::historical).gru;
    auto x = random_tensor({1, 8}, rng);
    auto s = random_tensor({1, 8}, rng);
    auto probe_w = random_tensor({1, 8}, rng);
    probe_w.set_requires_grad(false);
    ParameterList<double> params = named({{"input", x}, {"state", s}});
    for (const auto& p : model->parameters()) {
      if (p.name.rfind("historical.gru.", 0) == 0) params.push_back(p);
    }
    cases.push_back({"gru_step", params, [x, s, gru, probe_w](T& t) {
                       return project(t, gru_step(t, x, s, gru), probe_w);
                     }});
  }
  cases.push_back({"context_model", model->parameters(), [model, inputs](T& t) {
                     Rng r(11);
                     return model->forward(t, *inputs, true, r).loss;
                   }});

  std::vector<GradSuiteEntry> out;
  for (auto& c : cases) out.push_back({c.name, check_gradients(c.params, c.loss, options)});
  return out;
}

}  // namespace ercmc
