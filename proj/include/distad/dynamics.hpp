// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "distad/dist.hpp"
#include "distad/grid.hpp"
#include "distad/random.hpp"

namespace distad {

struct ModelDims {
  std::size_t bins = 0;        // d
  std::size_t covariates = 0;  // width of x_t
  std::size_t hidden = 40;
  std::size_t layers = 2;

  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

/// All trainable parameters, stored as one flat vector.
///
/// Layout: for each LSTM layer a (4H x (in + H)) weight matrix followed by a
/// 4H bias, gates ordered input, forget, cell, output; then the (d x H)
/// projection weights and d projection biases. The first layer's input is
/// [z_{t-1}; x_t]. The same type doubles as a gradient container.
class ModelParams {
 public:
  using MatrixMap = Eigen::Map<Eigen::MatrixXd>;
  using ConstMatrixMap = Eigen::Map<const Eigen::MatrixXd>;
  using VectorMap = Eigen::Map<Eigen::VectorXd>;
  using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;

  /// All-zero parameters.
  explicit ModelParams(ModelDims dims);

  /// Uniform(-1/sqrt(H), 1/sqrt(H)) weights, forget-gate bias 1, zero projection bias.
  static ModelParams initialized(ModelDims dims, std::uint64_t seed);

  const ModelDims& dims() const noexcept { return dims_; }
  std::size_t size() const noexcept { return values_.size(); }
  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }

  std::size_t input_width(std::size_t layer) const noexcept;

  MatrixMap lstm_weights(std::size_t layer);
  ConstMatrixMap lstm_weights(std::size_t layer) const;
  VectorMap lstm_bias(std::size_t layer);
  ConstVectorMap lstm_bias(std::size_t layer) const;
  MatrixMap projection_weights();
  ConstMatrixMap projection_weights() const;
  VectorMap projection_bias();
  ConstVectorMap projection_bias() const;

  /// Index range [begin, end) of a parameter block inside values().
  struct Block {
    std::size_t begin;
    std::size_t end;
  };
  Block lstm_weights_block(std::size_t layer) const;
  Block lstm_bias_block(std::size_t layer) const;
  Block projection_weights_block() const;
  Block projection_bias_block() const;

  bool all_finite() const noexcept;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;

 private:
  ModelDims dims_;
  std::vector<std::size_t> layer_offsets_;  // start of each layer's weights
  std::size_t projection_offset_ = 0;
  std::vector<double> values_;
};

/// Per-layer LSTM (h, c) vectors.
struct HiddenState {
  std::vector<Eigen::VectorXd> h;
  std::vector<Eigen::VectorXd> c;

  static HiddenState zeros(const ModelDims& dims);
  bool matches(const ModelDims& dims) const;
  bool all_finite() const;

  friend bool operator==(const HiddenState& a, const HiddenState& b);
};

using Covariates = std::vector<double>;

/// One series: observations z_0..z_T with their covariates x_0..x_T.
/// z_0 only conditions the first prediction.
struct TrainingSeries {
  std::vector<BinnedObservation> observations;
  std::vector<Covariates> covariates;
};

struct StepOutput {
  HiddenState state;
  ConcentrationVector alpha;
};

/// One recurrent step: h_t = r(h_{t-1}, z_{t-1}, x_t), alpha_t = softplus(W h_t + b) + floor.
StepOutput step(const ModelParams& params, const HiddenState& state,
                std::span<const double> z_prev, std::span<const double> x);

/// Same as the second element of step().
ConcentrationVector predict_alpha(const ModelParams& params, const HiddenState& state,
                                  std::span<const double> z_prev, std::span<const double> x);

struct UnrollResult {
  double total_nll = 0.0;
  /// log L_t for t = 1..T; NaN where the observation is missing.
  std::vector<double> step_loglik;
  std::vector<ConcentrationVector> alphas;
  HiddenState final_state;
  /// Model input after the last step (used to continue the sequence).
  std::vector<double> last_z;
};

/// Teacher-forced pass over the series; loss = -sum log L_t.
UnrollResult unroll_loss(const ModelParams& params, const TrainingSeries& series,
                         const HiddenState& h0);

struct GradientResult {
  ModelParams gradient;
  double total_nll = 0.0;
  std::size_t observed_steps = 0;
  HiddenState final_state;
  std::vector<double> last_z;
};

/// Gradient of unroll_loss().total_nll with respect to every parameter (BPTT).
GradientResult backward(const ModelParams& params, const TrainingSeries& series,
                        const HiddenState& h0);

/// Continues a sequence whose last model input was `z_before`: scores
/// observations[i] using covariates[i] for every i. Building block for
/// chunked training and streaming warm-up.
UnrollResult unroll_from(const ModelParams& params, std::span<const BinnedObservation> observations,
                         std::span<const Covariates> covariates, std::span<const double> z_before,
                         const HiddenState& h0);
GradientResult backward_from(const ModelParams& params,
                             std::span<const BinnedObservation> observations,
                             std::span<const Covariates> covariates,
                             std::span<const double> z_before, const HiddenState& h0);

struct TrainingConfig {
  int epochs = 100;
  double learning_rate = 1e-3;
  /// Multiplier on the learning rate of the projection layer.
  double projection_lr_scale = 1.0;
  double clip_norm = 10.0;
  std::size_t batch_size = 32;
  std::size_t context_length = 48;
  std::size_t hidden = 40;
  std::size_t layers = 2;
  std::uint64_t seed = 0;
  /// Start the projection bias at the stationary Dirichlet fit of the corpus.
  bool init_bias_from_data = true;

  void validate() const;
};

struct TrainResult {
  ModelParams params;
  double best_loss = 0.0;  // mean NLL per observed step
  int best_epoch = 0;
  std::vector<double> epoch_losses;
};

using EpochCallback = std::function<void(int epoch, double mean_nll)>;

/// Adam with global-norm clipping over stateful truncated BPTT: each series
/// is cut into consecutive chunks of `context_length` steps and the hidden
/// state is carried across chunk boundaries. Series are put in a canonical
/// content order first, so the result does not depend on corpus order.
TrainResult train(const TrainingConfig& config, std::span<const TrainingSeries> corpus,
                  const EpochCallback& on_epoch = {});

/// Regime of the predictive used when sampling.
struct SamplingRegime {
  /// nullopt: Dirichlet (asymptotic); otherwise Dir-Mult with n trials.
  std::optional<std::uint64_t> trials;
};

/// Ancestral sampling of one path z_{t+1..t+h}: each sampled frequency
/// vector is fed back as the next input.
std::vector<std::vector<double>> rollout(const ModelParams& params, const HiddenState& state,
                                         std::span<const double> z_prev,
                                         std::span<const Covariates> future_covariates,
                                         SamplingRegime regime, Rng& rng);

/// Stationary Dirichlet fit: alpha = alpha0 * mean frequency, alpha0 by
/// one-dimensional maximum likelihood over the given observations.
ConcentrationVector fit_stationary_alpha(std::span<const BinnedObservation> observations);

double softplus(double x) noexcept;
double inverse_softplus(double y);

}  // namespace distad
