// SPDX-License-Identifier: Apache-2.0
#include "distad/dynamics.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>

#include "distad/error.hpp"

namespace distad {

namespace {

constexpr double kInputSimplexTolerance = 1e-6;

double sigmoid(double x) noexcept { return 1.0 / (1.0 + std::exp(-x)); }

struct LayerCache {
  Eigen::VectorXd i, f, g, o, c_prev, tanh_c;
};

struct StepCache {
  std::vector<LayerCache> layers;
};

void check_inputs(const ModelParams& params, std::span<const double> z,
                  std::span<const double> x) {
  const auto& dims = params.dims();
  if (z.size() != dims.bins) throw InvalidArgument("step: z_prev has wrong dimension");
  if (x.size() != dims.covariates) throw InvalidArgument("step: covariates have wrong width");
  double total = 0.0;
  for (double v : z) {
    if (!std::isfinite(v) || v < 0.0) throw InvalidArgument("step: z_prev must be a frequency vector");
    total += v;
  }
  if (std::abs(total - 1.0) > kInputSimplexTolerance) {
    throw InvalidArgument("step: z_prev is off the simplex");
  }
  for (double v : x) {
    if (!std::isfinite(v)) throw InvalidArgument("step: non-finite covariate");
  }
}

// Advances `state` in place and writes the projection pre-activation.
// `inputs`, when given, receives the concatenated [u; h_prev] of every layer.
void forward_step(const ModelParams& params, HiddenState& state, std::span<const double> z,
                  std::span<const double> x, Eigen::VectorXd& pre, StepCache* cache,
                  std::vector<Eigen::MatrixXd>* inputs, std::size_t column) {
  const auto& dims = params.dims();
  const auto H = static_cast<Eigen::Index>(dims.hidden);

  Eigen::VectorXd u(static_cast<Eigen::Index>(dims.bins + dims.covariates));
  for (std::size_t k = 0; k < dims.bins; ++k) u[static_cast<Eigen::Index>(k)] = z[k];
  for (std::size_t k = 0; k < dims.covariates; ++k) {
    u[static_cast<Eigen::Index>(dims.bins + k)] = x[k];
  }

  if (cache) cache->layers.resize(dims.layers);
  for (std::size_t l = 0; l < dims.layers; ++l) {
    Eigen::VectorXd in(u.size() + H);
    in << u, state.h[l];
    if (inputs) (*inputs)[l].col(static_cast<Eigen::Index>(column)) = in;
    const Eigen::VectorXd a = params.lstm_weights(l) * in + params.lstm_bias(l);
    Eigen::VectorXd i = a.segment(0, H).unaryExpr(&sigmoid);
    Eigen::VectorXd f = a.segment(H, H).unaryExpr(&sigmoid);
    Eigen::VectorXd g = a.segment(2 * H, H).array().tanh();
    Eigen::VectorXd o = a.segment(3 * H, H).unaryExpr(&sigmoid);
    Eigen::VectorXd c = f.cwiseProduct(state.c[l]) + i.cwiseProduct(g);
    Eigen::VectorXd tanh_c = c.array().tanh();
    Eigen::VectorXd h = o.cwiseProduct(tanh_c);
    if (cache) {
      auto& lc = cache->layers[l];
      lc.c_prev = std::move(state.c[l]);
      lc.i = std::move(i);
      lc.f = std::move(f);
      lc.g = std::move(g);
      lc.o = std::move(o);
      lc.tanh_c = tanh_c;
    }
    state.c[l] = std::move(c);
    state.h[l] = h;
    u = std::move(h);
  }
  pre = params.projection_weights() * u + params.projection_bias();
}

ConcentrationVector alpha_from_pre(const Eigen::VectorXd& pre) {
  std::vector<double> a(static_cast<std::size_t>(pre.size()));
  for (Eigen::Index k = 0; k < pre.size(); ++k) {
    a[static_cast<std::size_t>(k)] = softplus(pre[k]) + kAlphaFloor;
  }
  return ConcentrationVector(std::move(a));
}

void check_series_shape(const ModelParams& params, std::span<const BinnedObservation> obs,
                        std::span<const Covariates> cov) {
  if (obs.size() != cov.size()) {
    throw InvalidArgument("series: observations and covariates differ in length");
  }
  for (const auto& o : obs) {
    if (o.bin_count() != params.dims().bins) {
      throw InvalidArgument("series: observation has wrong number of bins");
    }
  }
}

std::vector<double> uniform_z(std::size_t d) {
  return std::vector<double>(d, 1.0 / static_cast<double>(d));
}

std::vector<double> initial_z(const BinnedObservation& first) {
  return first.is_missing() ? uniform_z(first.bin_count()) : first.frequencies();
}

std::uint64_t series_fingerprint(const TrainingSeries& s) {
  std::uint64_t h = mix64(s.observations.size());
  auto absorb = [&h](double v) { h = mix64(h ^ std::bit_cast<std::uint64_t>(v)); };
  for (const auto& o : s.observations) {
    h = mix64(h ^ static_cast<std::uint64_t>(o.kind()));
    for (auto c : o.counts()) h = mix64(h ^ c);
    for (double p : o.probs()) absorb(p);
  }
  for (const auto& x : s.covariates) {
    for (double v : x) absorb(v);
  }
  return h;
}

}  // namespace

double softplus(double x) noexcept { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double inverse_softplus(double y) {
  if (!(y > 0.0)) throw InvalidArgument("inverse_softplus: argument must be positive");
  return y > 30.0 ? y + std::log(-std::expm1(-y)) : std::log(std::expm1(y));
}

// ---------------------------------------------------------------------------
// ModelParams

ModelParams::ModelParams(ModelDims dims) : dims_(dims) {
  if (dims_.bins < 2 || dims_.hidden == 0 || dims_.layers == 0) {
    throw InvalidArgument("ModelParams: invalid dimensions");
  }
  std::size_t offset = 0;
  for (std::size_t l = 0; l < dims_.layers; ++l) {
    layer_offsets_.push_back(offset);
    offset += 4 * dims_.hidden * (input_width(l) + dims_.hidden) + 4 * dims_.hidden;
  }
  projection_offset_ = offset;
  offset += dims_.bins * dims_.hidden + dims_.bins;
  values_.assign(offset, 0.0);
}

ModelParams ModelParams::initialized(ModelDims dims, std::uint64_t seed) {
  ModelParams p(dims);
  Rng rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(dims.hidden));
  for (double& v : p.values_) v = bound * (2.0 * rng.uniform() - 1.0);
  const auto H = static_cast<Eigen::Index>(dims.hidden);
  for (std::size_t l = 0; l < dims.layers; ++l) {
    auto b = p.lstm_bias(l);
    b.setZero();
    b.segment(H, H).setOnes();
  }
  p.projection_bias().setZero();
  return p;
}

std::size_t ModelParams::input_width(std::size_t layer) const noexcept {
  return layer == 0 ? dims_.bins + dims_.covariates : dims_.hidden;
}

ModelParams::Block ModelParams::lstm_weights_block(std::size_t layer) const {
  const std::size_t b = layer_offsets_.at(layer);
  return {b, b + 4 * dims_.hidden * (input_width(layer) + dims_.hidden)};
}

ModelParams::Block ModelParams::lstm_bias_block(std::size_t layer) const {
  const std::size_t b = lstm_weights_block(layer).end;
  return {b, b + 4 * dims_.hidden};
}

ModelParams::Block ModelParams::projection_weights_block() const {
  return {projection_offset_, projection_offset_ + dims_.bins * dims_.hidden};
}

ModelParams::Block ModelParams::projection_bias_block() const {
  const std::size_t b = projection_weights_block().end;
  return {b, b + dims_.bins};
}

ModelParams::MatrixMap ModelParams::lstm_weights(std::size_t layer) {
  return MatrixMap(values_.data() + lstm_weights_block(layer).begin,
                   static_cast<Eigen::Index>(4 * dims_.hidden),
                   static_cast<Eigen::Index>(input_width(layer) + dims_.hidden));
}

ModelParams::ConstMatrixMap ModelParams::lstm_weights(std::size_t layer) const {
  return ConstMatrixMap(values_.data() + lstm_weights_block(layer).begin,
                        static_cast<Eigen::Index>(4 * dims_.hidden),
                        static_cast<Eigen::Index>(input_width(layer) + dims_.hidden));
}

ModelParams::VectorMap ModelParams::lstm_bias(std::size_t layer) {
  return VectorMap(values_.data() + lstm_bias_block(layer).begin,
                   static_cast<Eigen::Index>(4 * dims_.hidden));
}

ModelParams::ConstVectorMap ModelParams::lstm_bias(std::size_t layer) const {
  return ConstVectorMap(values_.data() + lstm_bias_block(layer).begin,
                        static_cast<Eigen::Index>(4 * dims_.hidden));
}

ModelParams::MatrixMap ModelParams::projection_weights() {
  return MatrixMap(values_.data() + projection_weights_block().begin,
                   static_cast<Eigen::Index>(dims_.bins), static_cast<Eigen::Index>(dims_.hidden));
}

ModelParams::ConstMatrixMap ModelParams::projection_weights() const {
  return ConstMatrixMap(values_.data() + projection_weights_block().begin,
                        static_cast<Eigen::Index>(dims_.bins),
                        static_cast<Eigen::Index>(dims_.hidden));
}

ModelParams::VectorMap ModelParams::projection_bias() {
  return VectorMap(values_.data() + projection_bias_block().begin,
                   static_cast<Eigen::Index>(dims_.bins));
}

ModelParams::ConstVectorMap ModelParams::projection_bias() const {
  return ConstVectorMap(values_.data() + projection_bias_block().begin,
                        static_cast<Eigen::Index>(dims_.bins));
}

bool ModelParams::all_finite() const noexcept {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

// ---------------------------------------------------------------------------
// HiddenState

HiddenState HiddenState::zeros(const ModelDims& dims) {
  HiddenState s;
  const auto H = static_cast<Eigen::Index>(dims.hidden);
  s.h.assign(dims.layers, Eigen::VectorXd::Zero(H));
  s.c.assign(dims.layers, Eigen::VectorXd::Zero(H));
  return s;
}

bool HiddenState::matches(const ModelDims& dims) const {
  if (h.size() != dims.layers || c.size() != dims.layers) return false;
  for (std::size_t l = 0; l < dims.layers; ++l) {
    if (static_cast<std::size_t>(h[l].size()) != dims.hidden ||
        static_cast<std::size_t>(c[l].size()) != dims.hidden) {
      return false;
    }
  }
  return true;
}

bool HiddenState::all_finite() const {
  for (const auto& v : h) {
    if (!v.allFinite()) return false;
  }
  for (const auto& v : c) {
    if (!v.allFinite()) return false;
  }
  return true;
}

bool operator==(const HiddenState& a, const HiddenState& b) {
  if (a.h.size() != b.h.size() || a.c.size() != b.c.size()) return false;
  for (std::size_t l = 0; l < a.h.size(); ++l) {
    if (a.h[l].size() != b.h[l].size() || a.h[l] != b.h[l]) return false;
    if (a.c[l].size() != b.c[l].size() || a.c[l] != b.c[l]) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Forward / backward

StepOutput step(const ModelParams& params, const HiddenState& state,
                std::span<const double> z_prev, std::span<const double> x) {
  check_inputs(params, z_prev, x);
  if (!state.matches(params.dims()) || !state.all_finite()) {
    throw InvalidArgument("step: hidden state does not match the model");
  }
  HiddenState next = state;
  Eigen::VectorXd pre;
  forward_step(params, next, z_prev, x, pre, nullptr, nullptr, 0);
  return {std::move(next), alpha_from_pre(pre)};
}

ConcentrationVector predict_alpha(const ModelParams& params, const HiddenState& state,
                                  std::span<const double> z_prev, std::span<const double> x) {
  return step(params, state, z_prev, x).alpha;
}

UnrollResult unroll_from(const ModelParams& params, std::span<const BinnedObservation> observations,
                         std::span<const Covariates> covariates, std::span<const double> z_before,
                         const HiddenState& h0) {
  check_series_shape(params, observations, covariates);
  if (!h0.matches(params.dims())) throw InvalidArgument("unroll: h0 does not match the model");
  UnrollResult r;
  r.final_state = h0;
  r.last_z.assign(z_before.begin(), z_before.end());
  r.step_loglik.reserve(observations.size());
  r.alphas.reserve(observations.size());
  Eigen::VectorXd pre;
  for (std::size_t t = 0; t < observations.size(); ++t) {
    check_inputs(params, r.last_z, covariates[t]);
    forward_step(params, r.final_state, r.last_z, covariates[t], pre, nullptr, nullptr, 0);
    ConcentrationVector alpha = alpha_from_pre(pre);
    const auto& obs = observations[t];
    if (obs.is_missing()) {
      r.step_loglik.push_back(std::numeric_limits<double>::quiet_NaN());
    } else {
      const double ll = observation_loglik(obs, alpha).value;
      r.step_loglik.push_back(ll);
      r.total_nll -= ll;
      r.last_z = obs.frequencies();
    }
    r.alphas.push_back(std::move(alpha));
  }
  return r;
}

UnrollResult unroll_loss(const ModelParams& params, const TrainingSeries& series,
                         const HiddenState& h0) {
  if (series.observations.size() < 2) throw InvalidArgument("unroll_loss: need at least 2 observations");
  if (series.covariates.size() != series.observations.size()) {
    throw InvalidArgument("unroll_loss: observations and covariates differ in length");
  }
  const auto z0 = initial_z(series.observations.front());
  return unroll_from(params, std::span(series.observations).subspan(1),
                     std::span(series.covariates).subspan(1), z0, h0);
}

GradientResult backward_from(const ModelParams& params,
                             std::span<const BinnedObservation> observations,
                             std::span<const Covariates> covariates,
                             std::span<const double> z_before, const HiddenState& h0) {
  check_series_shape(params, observations, covariates);
  if (!h0.matches(params.dims())) throw InvalidArgument("backward: h0 does not match the model");
  const auto& dims = params.dims();
  const auto H = static_cast<Eigen::Index>(dims.hidden);
  const auto d = static_cast<Eigen::Index>(dims.bins);
  const auto T = static_cast<Eigen::Index>(observations.size());

  GradientResult r{ModelParams(dims), 0.0, 0, h0, {}};
  std::vector<double> z(z_before.begin(), z_before.end());

  std::vector<Eigen::MatrixXd> inputs(dims.layers);
  std::vector<Eigen::MatrixXd> gate_grads(dims.layers);
  for (std::size_t l = 0; l < dims.layers; ++l) {
    inputs[l].resize(static_cast<Eigen::Index>(params.input_width(l)) + H, T);
    gate_grads[l].resize(4 * H, T);
  }
  Eigen::MatrixXd top_h(H, T);
  Eigen::MatrixXd pre_grads(d, T);
  std::vector<StepCache> caches(static_cast<std::size_t>(T));
  std::vector<Eigen::VectorXd> pres(static_cast<std::size_t>(T));

  HiddenState& state = r.final_state;
  for (Eigen::Index t = 0; t < T; ++t) {
    const auto ts = static_cast<std::size_t>(t);
    check_inputs(params, z, covariates[ts]);
    forward_step(params, state, z, covariates[ts], pres[ts], &caches[ts], &inputs,
                 static_cast<std::size_t>(t));
    top_h.col(t) = state.h.back();
    const auto& obs = observations[ts];
    if (obs.is_missing()) {
      pre_grads.col(t).setZero();
      continue;
    }
    const ConcentrationVector alpha = alpha_from_pre(pres[ts]);
    r.total_nll -= observation_loglik(obs, alpha).value;
    ++r.observed_steps;
    const std::vector<double> g = grad_alpha(obs, alpha);
    for (Eigen::Index k = 0; k < d; ++k) {
      // loss = -log L; d alpha / d pre = sigmoid(pre)
      pre_grads(k, t) = -g[static_cast<std::size_t>(k)] * sigmoid(pres[ts][k]);
    }
    z = obs.frequencies();
  }
  r.last_z = z;

  const auto Wp = params.projection_weights();
  std::vector<Eigen::VectorXd> dh_next(dims.layers, Eigen::VectorXd::Zero(H));
  std::vector<Eigen::VectorXd> dc_next(dims.layers, Eigen::VectorXd::Zero(H));
  Eigen::VectorXd da(4 * H);
  for (Eigen::Index t = T - 1; t >= 0; --t) {
    const auto& cache = caches[static_cast<std::size_t>(t)];
    Eigen::VectorXd dh = Wp.transpose() * pre_grads.col(t);
    for (std::size_t li = dims.layers; li-- > 0;) {
      const auto& lc = cache.layers[li];
      const Eigen::VectorXd dh_total = dh + dh_next[li];
      const Eigen::ArrayXd tc = lc.tanh_c.array();
      const Eigen::ArrayXd dc =
          dh_total.array() * lc.o.array() * (1.0 - tc * tc) + dc_next[li].array();
      da.segment(0, H) = (dc * lc.g.array() * lc.i.array() * (1.0 - lc.i.array())).matrix();
      da.segment(H, H) = (dc * lc.c_prev.array() * lc.f.array() * (1.0 - lc.f.array())).matrix();
      da.segment(2 * H, H) =
          (dc * lc.i.array() * (1.0 - lc.g.array() * lc.g.array())).matrix();
      da.segment(3 * H, H) =
          (dh_total.array() * tc * lc.o.array() * (1.0 - lc.o.array())).matrix();
      gate_grads[li].col(t) = da;
      const Eigen::VectorXd dinput = params.lstm_weights(li).transpose() * da;
      const auto in_w = static_cast<Eigen::Index>(params.input_width(li));
      dh_next[li] = dinput.tail(H);
      dc_next[li] = (dc * lc.f.array()).matrix();
      dh = dinput.head(in_w);
    }
  }

  auto& grad = r.gradient;
  for (std::size_t l = 0; l < dims.layers; ++l) {
    grad.lstm_weights(l).noalias() += gate_grads[l] * inputs[l].transpose();
    grad.lstm_bias(l) += gate_grads[l].rowwise().sum();
  }
  grad.projection_weights().noalias() += pre_grads * top_h.transpose();
  grad.projection_bias() += pre_grads.rowwise().sum();
  return r;
}

GradientResult backward(const ModelParams& params, const TrainingSeries& series,
                        const HiddenState& h0) {
  if (series.observations.size() < 2) throw InvalidArgument("backward: need at least 2 observations");
  if (series.covariates.size() != series.observations.size()) {
    throw InvalidArgument("backward: observations and covariates differ in length");
  }
  const auto z0 = initial_z(series.observations.front());
  return backward_from(params, std::span(series.observations).subspan(1),
                       std::span(series.covariates).subspan(1), z0, h0);
}

// ---------------------------------------------------------------------------
// Training

void TrainingConfig::validate() const {
  if (epochs <= 0 || !(learning_rate > 0.0) || !(clip_norm > 0.0) || !(projection_lr_scale > 0.0) ||
      batch_size == 0 || context_length == 0 || hidden == 0 || layers == 0) {
    throw InvalidArgument("TrainingConfig: all settings must be positive");
  }
}

ConcentrationVector fit_stationary_alpha(std::span<const BinnedObservation> observations) {
  std::vector<const BinnedObservation*> seen;
  for (const auto& o : observations) {
    if (!o.is_missing()) seen.push_back(&o);
  }
  if (seen.empty()) throw InvalidArgument("fit_stationary_alpha: no observations");
  const std::size_t d = seen.front()->bin_count();
  std::vector<double> mean(d, 0.0);
  for (const auto* o : seen) {
    const auto z = o->frequencies();
    for (std::size_t k = 0; k < d; ++k) mean[k] += z[k];
  }
  double total = 0.0;
  for (double& m : mean) {
    m = std::max(m / static_cast<double>(seen.size()), 1e-8);
    total += m;
  }
  for (double& m : mean) m /= total;

  // With single-sample observations only the mean is identified.
  const bool categorical_only = std::all_of(seen.begin(), seen.end(), [](const auto* o) {
    return o->kind() == BinnedObservation::Kind::finite && o->sample_count() == 1;
  });
  if (categorical_only) {
    std::vector<double> a(d);
    for (std::size_t k = 0; k < d; ++k) {
      a[k] = std::max(static_cast<double>(d) * mean[k], kAlphaFloor);
    }
    return ConcentrationVector(std::move(a));
  }

  // Zero probabilities are floored so that small alphas stay admissible.
  std::vector<std::vector<double>> log_probs;
  for (const auto* o : seen) {
    if (o->kind() != BinnedObservation::Kind::asymptotic) continue;
    std::vector<double> lp(d);
    for (std::size_t k = 0; k < d; ++k) lp[k] = std::log(std::max(o->probs()[k], 1e-300));
    log_probs.push_back(std::move(lp));
  }

  auto objective = [&](double log_a0) {
    const double a0 = std::exp(log_a0);
    std::vector<double> a(d);
    for (std::size_t k = 0; k < d; ++k) a[k] = std::max(a0 * mean[k], kAlphaFloor);
    const ConcentrationVector alpha(std::move(a));
    const DirichletScorer dir(alpha);
    double ll = 0.0;
    std::size_t next_log = 0;
    for (const auto* o : seen) {
      if (o->kind() == BinnedObservation::Kind::asymptotic) {
        ll += dir.score_log(log_probs[next_log++]);
      } else {
        ll += dirmult_logpmf(o->counts(), o->sample_count(), alpha).value;
      }
    }
    return ll;
  };

  // Golden-section search on log alpha0.
  double lo = std::log(0.5 * static_cast<double>(d)), hi = std::log(1e7);
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
  double f1 = objective(x1), f2 = objective(x2);
  for (int it = 0; it < 60; ++it) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + phi * (hi - lo);
      f2 = objective(x2);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - phi * (hi - lo);
      f1 = objective(x1);
    }
  }
  const double a0 = std::exp(0.5 * (lo + hi));
  std::vector<double> a(d);
  for (std::size_t k = 0; k < d; ++k) a[k] = std::max(a0 * mean[k], kAlphaFloor);
  return ConcentrationVector(std::move(a));
}

TrainResult train(const TrainingConfig& config, std::span<const TrainingSeries> corpus,
                  const EpochCallback& on_epoch) {
  config.validate();
  if (corpus.empty()) throw InvalidArgument("train: empty corpus");
  const auto& first = corpus.front();
  if (first.observations.empty() || first.covariates.empty()) {
    throw InvalidArgument("train: empty series");
  }
  ModelDims dims{first.observations.front().bin_count(), first.covariates.front().size(),
                 config.hidden, config.layers};
  for (const auto& s : corpus) {
    if (s.observations.size() < std::max<std::size_t>(2, config.context_length)) {
      throw InvalidArgument("train: every series must be at least one context length long");
    }
    if (s.covariates.size() != s.observations.size()) {
      throw InvalidArgument("train: observations and covariates differ in length");
    }
    for (const auto& o : s.observations) {
      if (o.bin_count() != dims.bins) throw InvalidArgument("train: series disagree on bin count");
    }
    for (const auto& x : s.covariates) {
      if (x.size() != dims.covariates) {
        throw InvalidArgument("train: series disagree on covariate width");
      }
    }
  }

  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<std::uint64_t> prints(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) prints[i] = series_fingerprint(corpus[i]);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return prints[a] < prints[b]; });

  ModelParams params = ModelParams::initialized(dims, config.seed);
  if (config.init_bias_from_data) {
    std::vector<BinnedObservation> pooled;
    for (std::size_t i : order) {
      pooled.insert(pooled.end(), corpus[i].observations.begin(), corpus[i].observations.end());
    }
    const ConcentrationVector a = fit_stationary_alpha(pooled);
    auto bias = params.projection_bias();
    for (std::size_t k = 0; k < dims.bins; ++k) {
      bias[static_cast<Eigen::Index>(k)] = inverse_softplus(std::max(a[k] - kAlphaFloor, 1e-4));
    }
  }

  const std::size_t P = params.size();
  std::vector<double> lr_scale(P, 1.0);
  for (auto block : {params.projection_weights_block(), params.projection_bias_block()}) {
    std::fill(lr_scale.begin() + static_cast<std::ptrdiff_t>(block.begin),
              lr_scale.begin() + static_cast<std::ptrdiff_t>(block.end), config.projection_lr_scale);
  }
  std::vector<double> m1(P, 0.0), m2(P, 0.0);
  constexpr double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
  long long adam_t = 0;

  TrainResult result{params, std::numeric_limits<double>::infinity(), 0, {}};
  const std::size_t ctx = config.context_length;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    double epoch_nll = 0.0;
    std::size_t epoch_steps = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      std::vector<HiddenState> states(stop - start, HiddenState::zeros(dims));
      std::vector<std::vector<double>> zs;
      std::size_t chunks = 0;
      for (std::size_t j = start; j < stop; ++j) {
        const auto& s = corpus[order[j]];
        zs.push_back(initial_z(s.observations.front()));
        chunks = std::max(chunks, (s.observations.size() - 1 + ctx - 1) / ctx);
      }
      for (std::size_t k = 0; k < chunks; ++k) {
        ModelParams grad(dims);
        double nll = 0.0;
        std::size_t steps = 0;
        for (std::size_t j = start; j < stop; ++j) {
          const auto& s = corpus[order[j]];
          const std::size_t b = 1 + k * ctx;
          if (b >= s.observations.size()) continue;
          const std::size_t e = std::min(s.observations.size(), b + ctx);
          auto r = backward_from(params, std::span(s.observations).subspan(b, e - b),
                                 std::span(s.covariates).subspan(b, e - b), zs[j - start],
                                 states[j - start]);
          auto gv = grad.values();
          const auto rv = r.gradient.values();
          for (std::size_t i = 0; i < P; ++i) gv[i] += rv[i];
          nll += r.total_nll;
          steps += r.observed_steps;
          states[j - start] = std::move(r.final_state);
          zs[j - start] = std::move(r.last_z);
        }
        if (steps == 0) continue;
        if (!std::isfinite(nll)) {
          throw TrainingDiverged("train: non-finite loss in epoch " + std::to_string(epoch), epoch);
        }
        epoch_nll += nll;
        epoch_steps += steps;

        auto gv = grad.values();
        double norm2 = 0.0;
        for (double& g : gv) {
          g /= static_cast<double>(steps);
          norm2 += g * g;
        }
        const double norm = std::sqrt(norm2);
        if (!std::isfinite(norm)) {
          throw TrainingDiverged("train: non-finite gradient in epoch " + std::to_string(epoch),
                                 epoch);
        }
        const double clip = norm > config.clip_norm ? config.clip_norm / norm : 1.0;
        ++adam_t;
        const double c1 = 1.0 - std::pow(beta1, static_cast<double>(adam_t));
        const double c2 = 1.0 - std::pow(beta2, static_cast<double>(adam_t));
        auto pv = params.values();
        for (std::size_t i = 0; i < P; ++i) {
          const double g = gv[i] * clip;
          m1[i] = beta1 * m1[i] + (1.0 - beta1) * g;
          m2[i] = beta2 * m2[i] + (1.0 - beta2) * g * g;
          pv[i] -= config.learning_rate * lr_scale[i] * (m1[i] / c1) /
                   (std::sqrt(m2[i] / c2) + adam_eps);
        }
      }
    }
    const double mean_nll = epoch_steps ? epoch_nll / static_cast<double>(epoch_steps) : 0.0;
    if (!params.all_finite() || !std::isfinite(mean_nll)) {
      throw TrainingDiverged("train: parameters diverged in epoch " + std::to_string(epoch), epoch);
    }
    result.epoch_losses.push_back(mean_nll);
    if (on_epoch) on_epoch(epoch, mean_nll);
    if (mean_nll < result.best_loss) {
      result.best_loss = mean_nll;
      result.best_epoch = epoch;
      result.params = params;
    }
  }
  return result;
}

std::vector<std::vector<double>> rollout(const ModelParams& params, const HiddenState& state,
                                         std::span<const double> z_prev,
                                         std::span<const Covariates> future_covariates,
                                         SamplingRegime regime, Rng& rng) {
  std::vector<std::vector<double>> path;
  path.reserve(future_covariates.size());
  HiddenState s = state;
  std::vector<double> z(z_prev.begin(), z_prev.end());
  for (const auto& x : future_covariates) {
    StepOutput out = step(params, s, z, x);
    if (regime.trials) {
      const auto m = dirmult_sample(*regime.trials, out.alpha, rng);
      const double n = static_cast<double>(*regime.trials);
      for (std::size_t k = 0; k < z.size(); ++k) z[k] = m[k] / n;
    } else {
      z = dirichlet_sample(out.alpha, rng);
    }
    path.push_back(z);
    s = std::move(out.state);
  }
  return path;
}

}  // namespace distad
