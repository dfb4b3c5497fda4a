#pragma once

// Dense feed-forward value network with hand-written reverse mode.
// Everything is double precision.

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "aoirelay/rng.hpp"

namespace aoirelay {

enum class Activation : std::uint8_t { kRelu = 0, kIdentity = 1 };

struct Architecture {
  std::size_t input_dim = 1;
  std::vector<std::size_t> hidden_dims{80};
  std::size_t output_dim = 1;
  Activation hidden_activation = Activation::kRelu;
  Activation output_activation = Activation::kIdentity;

  void validate() const;
  bool operator==(const Architecture&) const = default;
};

// Row-major out x in weight matrix plus bias.
struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  double& w(std::size_t row, std::size_t col) { return weights[row * in + col]; }
  double w(std::size_t row, std::size_t col) const { return weights[row * in + col]; }
  bool operator==(const DenseLayer&) const = default;
};

struct QNetworkParams {
  Architecture arch;
  std::vector<DenseLayer> layers;

  std::size_t parameter_count() const;
  bool all_finite() const;
  bool operator==(const QNetworkParams&) const = default;
};

// Same shapes as the parameters it belongs to.
struct GradientSet {
  std::vector<DenseLayer> layers;

  static GradientSet zeros_like(const QNetworkParams& params);
  void set_zero();
  // this += scale * other
  void add_scaled(const GradientSet& other, double scale);
  bool is_zero() const;
};

QNetworkParams init_network(const Architecture& arch, Rng& rng);

std::vector<double> forward(const QNetworkParams& params, std::span<const double> input);

// Squared TD error for the selected action; `grad` is dloss/dpred already
// scaled by the importance weight.
struct LossTerm {
  double loss = 0.0;
  double grad = 0.0;
};
LossTerm weighted_td_loss(double pred_q, double target_y, double weight);

// Gradient of a scalar loss that depends on output unit `selected` only,
// given upstream = dloss/d(output[selected]).
GradientSet backward(const QNetworkParams& params, std::span<const double> input,
                     std::size_t selected, double upstream);

// Reusable scratch buffers for the batched training path.
class Workspace {
 public:
  explicit Workspace(const Architecture& arch);

  // Forward pass keeping activations; returns the output vector.
  std::span<const double> forward(const QNetworkParams& params, std::span<const double> input);
  // Adds scale * dloss/dtheta into `into`, using the activations from the
  // immediately preceding forward() call.
  void backward_accumulate(const QNetworkParams& params, std::span<const double> input,
                           std::size_t selected, double upstream, double scale,
                           GradientSet& into);

 private:
  std::vector<std::vector<double>> pre_;   // pre-activation per layer
  std::vector<std::vector<double>> post_;  // post-activation per layer
  std::vector<std::vector<double>> delta_;
};

// theta <- theta + mu * delta. `delta` carries the descent sign.
// Throws std::domain_error if the update would produce non-finite values.
void apply_update(QNetworkParams& params, const GradientSet& delta, double mu);

// Adaptive-moment variant of apply_update: `delta` is treated as the
// negative gradient.
class AdamOptimizer {
 public:
  AdamOptimizer(const QNetworkParams& params, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8);
  void apply(QNetworkParams& params, const GradientSet& delta, double mu);

 private:
  double beta1_, beta2_, eps_;
  long long t_ = 0;
  GradientSet m_, v_;
};

inline QNetworkParams clone_params(const QNetworkParams& params) { return params; }

struct GradCheckReport {
  std::size_t networks = 0;
  double max_rel_error = 0.0;  // ||analytic - numeric|| / max(||analytic||, ||numeric||)
};

// Compares backward() against central differences of the weighted TD loss on
// randomly shaped small networks.
GradCheckReport gradient_check(std::size_t networks, std::uint64_t seed, double h = 1e-6);

// Checkpoint container; the layout is described in docs/checkpoint_format.md.
void save_checkpoint(const QNetworkParams& params, std::ostream& out);
QNetworkParams load_checkpoint(std::istream& in);
void save_checkpoint(const QNetworkParams& params, const std::string& path);
QNetworkParams load_checkpoint(const std::string& path);

}  // namespace aoirelay
