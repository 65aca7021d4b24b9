#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "gcn/error.hpp"

namespace gcn {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Shape of a stacked LSTM character model.
struct ModelConfig {
  int vocab_size = 0;
  int aux_dim = 0;
  int hidden = 64;
  int layers = 2;

  int input_dim() const noexcept { return vocab_size + aux_dim; }
  bool operator==(const ModelConfig&) const = default;
};

/// One LSTM layer. The four gates are stacked row-wise in the order
/// g (cell input), i (input gate), f (forget gate), o (output gate), so
/// `input` is (4H x in), `recurrent` is (4H x H) and `bias` has 4H rows.
template <typename Scalar>
struct LayerWeights {
  enum Gate : int { G = 0, I = 1, F = 2, O = 3 };

  Matrix<Scalar> input;
  Matrix<Scalar> recurrent;
  Vector<Scalar> bias;

  int hidden() const { return static_cast<int>(recurrent.cols()); }
  int input_width() const { return static_cast<int>(input.cols()); }

  auto input_block(Gate g) { return input.middleRows(g * hidden(), hidden()); }
  auto input_block(Gate g) const { return input.middleRows(g * hidden(), hidden()); }
  auto recurrent_block(Gate g) { return recurrent.middleRows(g * hidden(), hidden()); }
  auto recurrent_block(Gate g) const { return recurrent.middleRows(g * hidden(), hidden()); }
  auto bias_block(Gate g) { return bias.segment(g * hidden(), hidden()); }
  auto bias_block(Gate g) const { return bias.segment(g * hidden(), hidden()); }

  static LayerWeights zeros(int hidden, int input_width) {
    return {Matrix<Scalar>::Zero(4 * hidden, input_width), Matrix<Scalar>::Zero(4 * hidden, hidden),
            Vector<Scalar>::Zero(4 * hidden)};
  }
};

template <typename Scalar>
struct OutputWeights {
  Matrix<Scalar> weight;  // V x H
  Vector<Scalar> bias;    // V
};

/// All trainable arrays. Gradients and RMSprop accumulators reuse this type.
template <typename Scalar>
struct ModelParameters {
  ModelConfig config;
  std::vector<LayerWeights<Scalar>> layers;
  OutputWeights<Scalar> output;

  static ModelParameters zeros(const ModelConfig& cfg) {
    if (cfg.hidden < 1 || cfg.layers < 1 || cfg.vocab_size < 1 || cfg.aux_dim < 0)
      throw ArgumentError("invalid model config");
    ModelParameters p;
    p.config = cfg;
    for (int l = 0; l < cfg.layers; ++l)
      p.layers.push_back(LayerWeights<Scalar>::zeros(cfg.hidden, l == 0 ? cfg.input_dim() : cfg.hidden));
    p.output.weight = Matrix<Scalar>::Zero(cfg.vocab_size, cfg.hidden);
    p.output.bias = Vector<Scalar>::Zero(cfg.vocab_size);
    return p;
  }

  ModelParameters zeros_like() const { return zeros(config); }

  /// Calls f(name, array) for every array in declaration order: per layer the
  /// twelve named gate blocks (W_gx, W_gh, b_g, W_ix, ...), then W_y, b_y.
  /// Arrays are Eigen blocks into the stacked storage.
  template <typename F>
  void visit_named(F&& f) {
    visit_named_impl(*this, f);
  }
  template <typename F>
  void visit_named(F&& f) const {
    visit_named_impl(*this, f);
  }

  /// Calls f(array) on each storage array (stacked gate matrices).
  template <typename F>
  void visit(F&& f) {
    for (auto& l : layers) {
      f(l.input);
      f(l.recurrent);
      f(l.bias);
    }
    f(output.weight);
    f(output.bias);
  }
  template <typename F>
  void visit(F&& f) const {
    for (const auto& l : layers) {
      f(l.input);
      f(l.recurrent);
      f(l.bias);
    }
    f(output.weight);
    f(output.bias);
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    visit([&](const auto& a) { n += static_cast<std::size_t>(a.size()); });
    return n;
  }

  template <typename To>
  ModelParameters<To> cast() const {
    ModelParameters<To> out;
    out.config = config;
    for (const auto& l : layers)
      out.layers.push_back({l.input.template cast<To>(), l.recurrent.template cast<To>(), l.bias.template cast<To>()});
    out.output = {output.weight.template cast<To>(), output.bias.template cast<To>()};
    return out;
  }

  bool operator==(const ModelParameters& o) const {
    if (!(config == o.config) || layers.size() != o.layers.size()) return false;
    for (std::size_t l = 0; l < layers.size(); ++l)
      if (layers[l].input != o.layers[l].input || layers[l].recurrent != o.layers[l].recurrent ||
          layers[l].bias != o.layers[l].bias)
        return false;
    return output.weight == o.output.weight && output.bias == o.output.bias;
  }

 private:
  template <typename Self, typename F>
  static void visit_named_impl(Self& self, F& f) {
    using W = LayerWeights<Scalar>;
    static constexpr const char* kGateNames[] = {"g", "i", "f", "o"};
    for (std::size_t l = 0; l < self.layers.size(); ++l) {
      auto& lw = self.layers[l];
      const std::string prefix = "layer" + std::to_string(l) + ".";
      for (int g = 0; g < 4; ++g) {
        auto gate = static_cast<typename W::Gate>(g);
        auto ix = lw.input_block(gate);
        auto ih = lw.recurrent_block(gate);
        auto b = lw.bias_block(gate);
        f(prefix + "W_" + kGateNames[g] + "x", ix);
        f(prefix + "W_" + kGateNames[g] + "h", ih);
        f(prefix + "b_" + kGateNames[g], b);
      }
    }
    f(std::string("W_y"), self.output.weight);
    f(std::string("b_y"), self.output.bias);
  }
};

template <typename Scalar>
using Gradients = ModelParameters<Scalar>;

/// Uniform initialization on [-scale, scale], arrays filled in storage order.
template <typename Scalar>
ModelParameters<Scalar> random_parameters(const ModelConfig& cfg, std::uint64_t seed, double scale = 0.08) {
  auto p = ModelParameters<Scalar>::zeros(cfg);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-scale, scale);
  p.visit([&](auto& a) {
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = static_cast<Scalar>(dist(rng));
  });
  return p;
}

/// Hidden and cell state of one layer for a batch of B independent streams (H x B).
template <typename Scalar>
struct LayerState {
  Matrix<Scalar> h;
  Matrix<Scalar> s;

  static LayerState zeros(int hidden, int batch) {
    return {Matrix<Scalar>::Zero(hidden, batch), Matrix<Scalar>::Zero(hidden, batch)};
  }
};

template <typename Scalar>
std::vector<LayerState<Scalar>> zero_states(const ModelConfig& cfg, int batch) {
  return std::vector<LayerState<Scalar>>(static_cast<std::size_t>(cfg.layers), LayerState<Scalar>::zeros(cfg.hidden, batch));
}

/// First-layer input for one time step over B streams: the character block of
/// the concatenated input, given as indices (one-hot), and the aux block (A x B).
template <typename Scalar>
struct InputBatch {
  std::vector<int> chars;
  Matrix<Scalar> aux;

  int batch() const { return static_cast<int>(chars.size()); }
};

// ---------------------------------------------------------------------------
// Elementwise pieces

template <typename Scalar>
Scalar logistic(Scalar x) {
  return Scalar(1) / (Scalar(1) + std::exp(-x));
}

/// Max-shifted softmax. Throws on non-finite input.
template <typename Derived>
Vector<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& z) {
  using S = typename Derived::Scalar;
  if (!z.allFinite()) throw NumericError("softmax input is not finite");
  const S m = z.maxCoeff();
  Vector<S> e = (z.array() - m).exp().matrix();
  return e / e.sum();
}

/// ln sum exp over a column, accumulated in at least double precision.
template <typename Derived,
          typename Acc = std::conditional_t<(sizeof(typename Derived::Scalar) > sizeof(double)),
                                            typename Derived::Scalar, double>>
Acc log_sum_exp(const Eigen::MatrixBase<Derived>& z) {
  const Acc m = static_cast<Acc>(z.maxCoeff());
  Acc acc = 0;
  for (Eigen::Index i = 0; i < z.size(); ++i) acc += std::exp(static_cast<Acc>(z(i)) - m);
  return m + std::log(acc);
}

namespace detail {

/// Applies the gate nonlinearities in place: tanh on the g rows, logistic on i, f, o.
template <typename Scalar>
void activate_gates(Matrix<Scalar>& a, int hidden) {
  a.topRows(hidden) = a.topRows(hidden).array().tanh();
  auto rest = a.bottomRows(3 * hidden);
  rest = (Scalar(1) + (-rest.array()).exp()).inverse();
}

/// Finishes one step from activated gates: s = g*i + s_prev*f, h = tanh(s)*o.
template <typename Scalar>
void cell_update(const Matrix<Scalar>& gates, const LayerState<Scalar>& prev, LayerState<Scalar>& next,
                 Matrix<Scalar>* tanh_s) {
  const int H = static_cast<int>(prev.h.rows());
  auto g = gates.middleRows(0, H).array();
  auto i = gates.middleRows(H, H).array();
  auto f = gates.middleRows(2 * H, H).array();
  auto o = gates.middleRows(3 * H, H).array();
  next.s = (g * i + prev.s.array() * f).matrix();
  Matrix<Scalar> c = next.s.array().tanh().matrix();
  next.h = (c.array() * o).matrix();
  if (tanh_s) *tanh_s = std::move(c);
}

template <typename Scalar>
void check_input(const ModelConfig& cfg, const InputBatch<Scalar>& in, int batch) {
  if (in.batch() != batch) throw ArgumentError("input batch width does not match state batch width");
  if (in.aux.rows() != cfg.aux_dim || in.aux.cols() != batch)
    throw ArgumentError("aux block is " + std::to_string(in.aux.rows()) + "x" + std::to_string(in.aux.cols()) +
                        ", expected " + std::to_string(cfg.aux_dim) + "x" + std::to_string(batch));
  for (int c : in.chars)
    if (c < 0 || c >= cfg.vocab_size) throw ArgumentError("character index " + std::to_string(c) + " out of range");
}

/// Pre-activations of the first layer: the one-hot block selects columns of the
/// input matrix; the aux block multiplies the trailing columns.
template <typename Scalar>
Matrix<Scalar> first_layer_preactivation(const LayerWeights<Scalar>& w, const InputBatch<Scalar>& in,
                                         const Matrix<Scalar>& h_prev) {
  Matrix<Scalar> a = w.recurrent * h_prev;
  for (int b = 0; b < in.batch(); ++b) a.col(b) += w.input.col(in.chars[static_cast<std::size_t>(b)]);
  if (in.aux.rows() > 0) a.noalias() += w.input.rightCols(in.aux.rows()) * in.aux;
  a.colwise() += w.bias;
  return a;
}

template <typename Scalar>
Matrix<Scalar> upper_layer_preactivation(const LayerWeights<Scalar>& w, const Matrix<Scalar>& x,
                                         const Matrix<Scalar>& h_prev) {
  Matrix<Scalar> a = w.recurrent * h_prev;
  a.noalias() += w.input * x;
  a.colwise() += w.bias;
  return a;
}

}  // namespace detail

/// One LSTM layer step on dense input x (in x B):
///   g = tanh(W_gx x + W_gh h + b_g), i/f/o = logistic(...),
///   s = g*i + s_prev*f, h = tanh(s)*o.
template <typename Scalar>
LayerState<Scalar> lstm_layer_step(const LayerWeights<Scalar>& w, const std::type_identity_t<Matrix<Scalar>>& x,
                                   const LayerState<Scalar>& prev) {
  const int H = w.hidden();
  if (x.rows() != w.input_width()) throw ArgumentError("input width does not match W_x columns");
  if (prev.h.rows() != H || prev.s.rows() != H || prev.h.cols() != x.cols() || prev.s.cols() != x.cols())
    throw ArgumentError("previous state does not match hidden size or batch");
  Matrix<Scalar> a = detail::upper_layer_preactivation(w, x, prev.h);
  detail::activate_gates(a, H);
  LayerState<Scalar> next;
  detail::cell_update(a, prev, next, static_cast<Matrix<Scalar>*>(nullptr));
  return next;
}

/// Activations kept by `stack_forward` for the backward pass.
template <typename Scalar>
struct ForwardCache {
  ModelConfig config;
  std::vector<InputBatch<Scalar>> inputs;
  std::vector<LayerState<Scalar>> init;
  // Indexed [layer][step].
  std::vector<std::vector<Matrix<Scalar>>> gates;
  std::vector<std::vector<Matrix<Scalar>>> cell;
  std::vector<std::vector<Matrix<Scalar>>> tanh_cell;
  std::vector<std::vector<Matrix<Scalar>>> hidden;
  std::vector<Matrix<Scalar>> logits;

  int steps() const { return static_cast<int>(inputs.size()); }
};

template <typename Scalar>
struct ForwardResult {
  std::vector<Matrix<Scalar>> logits;  // per step, V x B
  std::vector<LayerState<Scalar>> final_states;
  ForwardCache<Scalar> cache;
};

/// Advances every layer by one step in place and returns the logits (V x B).
template <typename Scalar>
Matrix<Scalar> forward_step(const ModelParameters<Scalar>& p, const InputBatch<Scalar>& in,
                            std::vector<LayerState<Scalar>>& states) {
  const auto& cfg = p.config;
  if (states.size() != p.layers.size()) throw ArgumentError("state count does not match layer count");
  const int B = static_cast<int>(states[0].h.cols());
  detail::check_input(cfg, in, B);
  const Matrix<Scalar>* below = nullptr;
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const auto& w = p.layers[l];
    Matrix<Scalar> a = l == 0 ? detail::first_layer_preactivation(w, in, states[l].h)
                              : detail::upper_layer_preactivation(w, *below, states[l].h);
    detail::activate_gates(a, cfg.hidden);
    LayerState<Scalar> next;
    detail::cell_update(a, states[l], next, static_cast<Matrix<Scalar>*>(nullptr));
    states[l] = std::move(next);
    below = &states[l].h;
  }
  Matrix<Scalar> z = p.output.weight * states.back().h;
  z.colwise() += p.output.bias;
  return z;
}

/// Runs the stack over a segment from `init`, returning per-step logits,
/// the final states (for carrying into the next segment) and a cache.
template <typename Scalar>
ForwardResult<Scalar> stack_forward(const ModelParameters<Scalar>& p, std::span<const InputBatch<Scalar>> inputs,
                                    std::span<const LayerState<Scalar>> init) {
  const auto& cfg = p.config;
  if (init.size() != p.layers.size()) throw ArgumentError("initial state count does not match layer count");
  const int B = static_cast<int>(init[0].h.cols());
  for (const auto& st : init)
    if (st.h.rows() != cfg.hidden || st.s.rows() != cfg.hidden || st.h.cols() != B || st.s.cols() != B)
      throw ArgumentError("initial state shape mismatch");
  for (const auto& in : inputs) detail::check_input(cfg, in, B);

  const auto L = p.layers.size();
  const auto T = inputs.size();
  ForwardResult<Scalar> r;
  auto& c = r.cache;
  c.config = cfg;
  c.inputs.assign(inputs.begin(), inputs.end());
  c.init.assign(init.begin(), init.end());
  c.gates.assign(L, {});
  c.cell.assign(L, {});
  c.tanh_cell.assign(L, {});
  c.hidden.assign(L, {});
  for (std::size_t l = 0; l < L; ++l) {
    c.gates[l].reserve(T);
    c.cell[l].reserve(T);
    c.tanh_cell[l].reserve(T);
    c.hidden[l].reserve(T);
  }

  std::vector<LayerState<Scalar>> states(init.begin(), init.end());
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t l = 0; l < L; ++l) {
      const auto& w = p.layers[l];
      Matrix<Scalar> a = l == 0 ? detail::first_layer_preactivation(w, inputs[t], states[l].h)
                                : detail::upper_layer_preactivation(w, states[l - 1].h, states[l].h);
      detail::activate_gates(a, cfg.hidden);
      LayerState<Scalar> next;
      Matrix<Scalar> tanh_s;
      detail::cell_update(a, states[l], next, &tanh_s);
      c.gates[l].push_back(std::move(a));
      c.cell[l].push_back(next.s);
      c.tanh_cell[l].push_back(std::move(tanh_s));
      c.hidden[l].push_back(next.h);
      states[l] = std::move(next);
    }
    Matrix<Scalar> z = p.output.weight * states.back().h;
    z.colwise() += p.output.bias;
    r.logits.push_back(z);
  }
  c.logits = r.logits;
  r.final_states = std::move(states);
  return r;
}

namespace detail {

template <typename Scalar, typename Acc>
Acc total_nll(std::span<const Matrix<Scalar>> logits, std::span<const std::vector<int>> targets) {
  if (logits.size() != targets.size()) throw ArgumentError("logits and targets differ in length");
  Acc total = 0;
  for (std::size_t t = 0; t < logits.size(); ++t) {
    const auto& z = logits[t];
    if (static_cast<Eigen::Index>(targets[t].size()) != z.cols()) throw ArgumentError("target batch width mismatch");
    if (!z.allFinite()) throw NumericError("non-finite logits at step " + std::to_string(t));
    for (Eigen::Index b = 0; b < z.cols(); ++b) {
      const int y = targets[t][static_cast<std::size_t>(b)];
      if (y < 0 || y >= z.rows()) throw ArgumentError("target index " + std::to_string(y) + " out of range");
      total += log_sum_exp<std::decay_t<decltype(z.col(b))>, Acc>(z.col(b)) - static_cast<Acc>(z(y, b));
    }
  }
  return total;
}

}  // namespace detail

/// Sum over steps and streams of -ln softmax(logits)[target], in nats.
/// `targets[t][b]` is the target for stream b at step t.
template <typename Scalar>
double sequence_nll(std::span<const Matrix<Scalar>> logits, std::span<const std::vector<int>> targets) {
  return static_cast<double>(detail::total_nll<Scalar, long double>(logits, targets));
}

/// Exact gradient of `sequence_nll` with respect to every parameter. The
/// segment's initial state is a constant: no gradient flows into it.
template <typename Scalar>
Gradients<Scalar> backward_bptt(const ModelParameters<Scalar>& p, const ForwardCache<Scalar>& cache,
                                std::span<const std::vector<int>> targets) {
  const auto& cfg = p.config;
  if (!(cache.config == cfg)) throw ArgumentError("forward cache was produced by a differently shaped model");
  const int T = cache.steps();
  if (static_cast<int>(targets.size()) != T) throw ArgumentError("targets do not match the cached segment length");
  auto grad = p.zeros_like();
  if (T == 0) return grad;

  const int H = cfg.hidden;
  const int L = cfg.layers;
  const int B = static_cast<int>(cache.init[0].h.cols());

  // Output layer; dH[t] is the gradient reaching the current layer's h at step t.
  std::vector<Matrix<Scalar>> dH(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) {
    const auto& z = cache.logits[static_cast<std::size_t>(t)];
    Matrix<Scalar> d(z.rows(), z.cols());
    for (int b = 0; b < B; ++b) {
      d.col(b) = softmax(z.col(b));
      const int y = targets[static_cast<std::size_t>(t)][static_cast<std::size_t>(b)];
      if (y < 0 || y >= cfg.vocab_size) throw ArgumentError("target index out of range");
      d(y, b) -= Scalar(1);
    }
    const auto& h_top = cache.hidden[static_cast<std::size_t>(L - 1)][static_cast<std::size_t>(t)];
    grad.output.weight.noalias() += d * h_top.transpose();
    grad.output.bias += d.rowwise().sum();
    dH[static_cast<std::size_t>(t)] = p.output.weight.transpose() * d;
  }

  for (int l = L - 1; l >= 0; --l) {
    const auto ul = static_cast<std::size_t>(l);
    const auto& w = p.layers[ul];
    auto& gw = grad.layers[ul];
    Matrix<Scalar> dh_next = Matrix<Scalar>::Zero(H, B);
    Matrix<Scalar> ds_next = Matrix<Scalar>::Zero(H, B);
    std::vector<Matrix<Scalar>> dX(l > 0 ? static_cast<std::size_t>(T) : 0);
    Matrix<Scalar> da(4 * H, B);

    for (int t = T - 1; t >= 0; --t) {
      const auto ut = static_cast<std::size_t>(t);
      const auto& gates = cache.gates[ul][ut];
      const auto& c = cache.tanh_cell[ul][ut];
      const Matrix<Scalar>& s_prev = t > 0 ? cache.cell[ul][ut - 1] : cache.init[ul].s;
      const Matrix<Scalar>& h_prev = t > 0 ? cache.hidden[ul][ut - 1] : cache.init[ul].h;
      auto g = gates.middleRows(0, H).array();
      auto i = gates.middleRows(H, H).array();
      auto f = gates.middleRows(2 * H, H).array();
      auto o = gates.middleRows(3 * H, H).array();

      Matrix<Scalar> dh = dH[ut] + dh_next;
      Matrix<Scalar> ds = (dh.array() * o * (Scalar(1) - c.array().square())).matrix() + ds_next;
      da.middleRows(0, H) = (ds.array() * i * (Scalar(1) - g.square())).matrix();
      da.middleRows(H, H) = (ds.array() * g * i * (Scalar(1) - i)).matrix();
      da.middleRows(2 * H, H) = (ds.array() * s_prev.array() * f * (Scalar(1) - f)).matrix();
      da.middleRows(3 * H, H) = (dh.array() * c.array() * o * (Scalar(1) - o)).matrix();
      ds_next = (ds.array() * f).matrix();

      gw.recurrent.noalias() += da * h_prev.transpose();
      gw.bias += da.rowwise().sum();
      if (l > 0) {
        gw.input.noalias() += da * cache.hidden[ul - 1][ut].transpose();
        dX[ut] = w.input.transpose() * da;
      } else {
        const auto& in = cache.inputs[ut];
        for (int b = 0; b < B; ++b) gw.input.col(in.chars[static_cast<std::size_t>(b)]) += da.col(b);
        if (cfg.aux_dim > 0) gw.input.rightCols(cfg.aux_dim).noalias() += da * in.aux.transpose();
      }
      dh_next = w.recurrent.transpose() * da;
    }
    if (l > 0) dH = std::move(dX);
  }
  return grad;
}

/// Elementwise clamp to [-bound, bound].
template <typename Scalar>
Gradients<Scalar> clip_gradients(Gradients<Scalar> g, double bound = 5.0) {
  if (!(bound > 0)) throw ArgumentError("clip bound must be positive");
  const auto b = static_cast<Scalar>(bound);
  g.visit([&](auto& a) { a = a.cwiseMax(-b).cwiseMin(b); });
  return g;
}

struct RmsPropHyper {
  double learning_rate = 2e-3;
  double decay = 0.95;
  double epsilon = 1e-8;
};

template <typename Scalar>
struct OptimizerState {
  ModelParameters<Scalar> mean_square;
  RmsPropHyper hyper;

  static OptimizerState for_model(const ModelParameters<Scalar>& p, RmsPropHyper h = {}) {
    return {p.zeros_like(), h};
  }
};

/// ms <- decay*ms + (1-decay)*g^2;  param <- param - lr*g/sqrt(ms+eps).
template <typename Scalar>
void rmsprop_update(ModelParameters<Scalar>& p, const Gradients<Scalar>& g, OptimizerState<Scalar>& o) {
  if (!(p.config == g.config) || !(p.config == o.mean_square.config))
    throw ArgumentError("parameter, gradient and optimizer shapes differ");
  const auto lr = static_cast<Scalar>(o.hyper.learning_rate);
  const auto decay = static_cast<Scalar>(o.hyper.decay);
  const auto eps = static_cast<Scalar>(o.hyper.epsilon);
  std::vector<Scalar*> params, squares;
  std::vector<const Scalar*> grads;
  std::vector<Eigen::Index> sizes;
  p.visit([&](auto& a) {
    params.push_back(a.data());
    sizes.push_back(a.size());
  });
  g.visit([&](const auto& a) { grads.push_back(a.data()); });
  o.mean_square.visit([&](auto& a) { squares.push_back(a.data()); });
  for (std::size_t k = 0; k < params.size(); ++k) {
    Eigen::Map<Eigen::Array<Scalar, Eigen::Dynamic, 1>> w(params[k], sizes[k]);
    Eigen::Map<Eigen::Array<Scalar, Eigen::Dynamic, 1>> ms(squares[k], sizes[k]);
    Eigen::Map<const Eigen::Array<Scalar, Eigen::Dynamic, 1>> d(grads[k], sizes[k]);
    ms = decay * ms + (Scalar(1) - decay) * d.square();
    w -= lr * d / (ms + eps).sqrt();
  }
}

namespace detail {

/// Loss of a segment without keeping activations.
template <typename Scalar, typename Acc>
Acc segment_loss(const ModelParameters<Scalar>& p, std::span<const InputBatch<Scalar>> inputs,
                 std::vector<LayerState<Scalar>> states, std::span<const std::vector<int>> targets) {
  Acc total = 0;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    const Matrix<Scalar> z = forward_step(p, inputs[t], states);
    total += total_nll<Scalar, Acc>(std::span<const Matrix<Scalar>>(&z, 1), targets.subspan(t, 1));
  }
  return total;
}

}  // namespace detail

/// Largest relative error between `backward_bptt` and central differences
/// (L(theta+eps) - L(theta-eps)) / 2eps, taken over every parameter element.
/// Relative error is |a - n| / max(|a|, |n|, 1e-12).
///
/// Differences are taken in double first. Double-precision losses carry
/// ~1e-10 absolute noise in the quotient, which cannot resolve gradient
/// elements near 1e-6, so any element not already agreeing to 1e-6 is
/// re-evaluated with long double losses and that estimate is used.
inline double grad_check(const ModelParameters<double>& p, std::span<const InputBatch<double>> inputs,
                         std::span<const std::vector<int>> targets, std::span<const LayerState<double>> init,
                         double epsilon = 1e-5, const Gradients<double>* analytic_override = nullptr) {
  using Wide = long double;
  const Gradients<double> analytic = analytic_override
                                         ? *analytic_override
                                         : backward_bptt(p, stack_forward(p, inputs, init).cache, targets);

  auto narrow = p;
  auto wide = p.cast<Wide>();
  std::vector<InputBatch<Wide>> wide_inputs;
  for (const auto& in : inputs) wide_inputs.push_back({in.chars, in.aux.template cast<Wide>()});
  std::vector<LayerState<double>> narrow_init(init.begin(), init.end());
  std::vector<LayerState<Wide>> wide_init;
  for (const auto& st : init) wide_init.push_back({st.h.template cast<Wide>(), st.s.template cast<Wide>()});

  std::vector<double*> narrow_params;
  std::vector<Wide*> wide_params;
  std::vector<const double*> grads;
  std::vector<Eigen::Index> sizes;
  narrow.visit([&](auto& a) {
    narrow_params.push_back(a.data());
    sizes.push_back(a.size());
  });
  wide.visit([&](auto& a) { wide_params.push_back(a.data()); });
  analytic.visit([&](const auto& a) { grads.push_back(a.data()); });

  auto rel = [](double a, double n) { return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-12}); };

  double worst = 0.0;
  for (std::size_t k = 0; k < narrow_params.size(); ++k) {
    for (Eigen::Index j = 0; j < sizes[k]; ++j) {
      const double a = grads[k][j];
      double& theta = narrow_params[k][j];
      const double saved = theta;
      theta = saved + epsilon;
      const double up = detail::segment_loss<double, double>(narrow, inputs, narrow_init, targets);
      theta = saved - epsilon;
      const double down = detail::segment_loss<double, double>(narrow, inputs, narrow_init, targets);
      theta = saved;
      double err = rel(a, (up - down) / (2 * epsilon));
      if (err > 1e-6) {
        Wide& wtheta = wide_params[k][j];
        const Wide wsaved = wtheta;
        const Wide eps = epsilon;
        wtheta = wsaved + eps;
        const Wide wup = detail::segment_loss<Wide, Wide>(wide, wide_inputs, wide_init, targets);
        wtheta = wsaved - eps;
        const Wide wdown = detail::segment_loss<Wide, Wide>(wide, wide_inputs, wide_init, targets);
        wtheta = wsaved;
        err = rel(a, static_cast<double>((wup - wdown) / (2 * eps)));
      }
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace gcn
