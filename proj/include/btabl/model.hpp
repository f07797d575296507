#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "btabl/linalg.hpp"
#include "btabl/lobdata.hpp"

namespace btabl::model {

enum class Activation { identity, relu };

Activation parse_activation(const std::string& text);
const char* to_string(Activation a);

struct TablShape {
  std::size_t d = 40;
  std::size_t t = 10;
  std::size_t d_out = 3;
  std::size_t t_out = 1;
  Activation activation = Activation::identity;

  /// P = D'D + T^2 + TT' + D'T' + 1
  std::size_t param_count() const { return d_out * d + t * t + t * t_out + d_out * t_out + 1; }
  std::size_t outputs() const { return d_out * t_out; }
  void validate() const;
};

/// Parameters of one TABL layer. `lambda` is stored unconstrained; the
/// forward pass uses effective_lambda(), which is clamped to [0, 1].
struct TablParams {
  Matrix w1;  // D' x D
  Matrix w;   // T x T
  Matrix w2;  // T x T'
  Matrix b;   // D' x T'
  double lambda = 0.5;

  static TablParams zeros(const TablShape& shape);

  double effective_lambda() const;

  /// W1 row-major, then W, W2, B, lambda.
  std::vector<double> flatten() const;
  static TablParams unflatten(std::span<const double> flat, const TablShape& shape);
};

struct ForwardCache {
  Matrix x;
  Matrix x_bar;
  Matrix e;
  Matrix a;
  Matrix x_tilde;
  Matrix z;  // pre-activation X~ W2 + B
  Matrix y;
  std::vector<double> log_probs;
  double lambda_raw = 0.0;
  double lambda = 0.0;  // effective (clamped)
  Activation activation = Activation::identity;
};

struct ForwardResult {
  std::vector<double> logits;
  ForwardCache cache;
};

ForwardResult tabl_forward(const Matrix& x, const TablParams& params, const TablShape& shape);

std::vector<double> log_softmax(std::span<const double> logits);

struct LossResult {
  double loss = 0.0;
  std::vector<double> log_probs;
};

LossResult log_softmax_nll(std::span<const double> logits, int label);

struct TablGradient {
  std::vector<double> params;  // flattened like TablParams::flatten
  Matrix dx;                   // gradient with respect to the layer input
};

/// Backward pass of one TABL layer for an arbitrary upstream gradient on the
/// flattened output Y.
TablGradient tabl_backward(const ForwardCache& cache, std::span<const double> d_output,
                           const TablParams& params);

/// Exact gradient of -log p[label] with respect to the flattened parameters.
std::vector<double> tabl_backward_per_sample(const ForwardCache& cache, int label,
                                             const TablParams& params);

/// Plain bilinear layer Y = relu(U X V + B), stackable before the TABL head.
struct BilinearShape {
  std::size_t d = 0;
  std::size_t t = 0;
  std::size_t d_out = 0;
  std::size_t t_out = 0;

  std::size_t param_count() const { return d_out * d + t * t_out + d_out * t_out; }
};

/// Hidden bilinear layers followed by one TABL layer whose D' x T' output is
/// flattened row-major into the class logits.
struct Architecture {
  std::size_t d = 40;
  std::size_t t = 10;
  std::vector<std::pair<std::size_t, std::size_t>> hidden;  // (D', T') per hidden layer
  std::size_t d_out = 3;
  std::size_t t_out = 1;
  Activation activation = Activation::identity;

  std::vector<BilinearShape> hidden_shapes() const;
  TablShape tabl_shape() const;
  std::size_t param_count() const;
  std::size_t classes() const { return d_out * t_out; }
  void validate() const;
  bool operator==(const Architecture&) const = default;
};

Matrix dropout_mask(std::size_t rows, std::size_t cols, double rate, std::uint64_t seed);

class Network {
 public:
  explicit Network(Architecture arch);

  const Architecture& architecture() const { return arch_; }
  std::size_t param_count() const { return param_count_; }
  std::size_t classes() const { return arch_.classes(); }
  std::size_t tabl_offset() const { return tabl_offset_; }

  struct HiddenCache {
    Matrix x;
    Matrix xv;  // X V
    Matrix z;   // U X V + B
  };

  struct Pass {
    std::vector<HiddenCache> hidden;
    std::optional<Matrix> mask;  // dropout mask applied to the TABL input
    ForwardCache tabl;
    std::vector<double> logits;
    std::vector<double> log_probs;
  };

  /// Forward pass with a flat parameter vector. An optional dropout mask is
  /// multiplied into the input of the TABL layer.
  Pass forward(const Matrix& x, std::span<const double> theta,
               const Matrix* mask = nullptr) const;

  /// Per-sample NLL gradient, length param_count().
  std::vector<double> backward(const Pass& pass, int label, std::span<const double> theta) const;

  std::vector<double> probabilities(const Matrix& x, std::span<const double> theta,
                                    const Matrix* mask = nullptr) const;

  /// Random initialization for point-estimate training.
  std::vector<double> init_params(std::uint64_t seed) const;

  /// Shape of the TABL input (after hidden layers); dropout masks use it.
  std::pair<std::size_t, std::size_t> tabl_input_shape() const;

 private:
  Architecture arch_;
  std::vector<BilinearShape> hidden_;
  std::vector<std::size_t> hidden_offsets_;
  std::size_t tabl_offset_ = 0;
  std::size_t param_count_ = 0;
};

struct BatchResult {
  double mean_loss = 0.0;
  Matrix per_sample;  // M x P
  std::vector<double> mean_grad;
};

struct DropoutSpec {
  double rate = 0.0;
  std::uint64_t seed = 0;  // masks derive from (seed, sample position)
};

BatchResult batch_forward_backward(const Network& net,
                                   std::span<const lob::LobWindow* const> batch,
                                   std::span<const double> theta,
                                   const std::optional<DropoutSpec>& dropout = std::nullopt);

BatchResult batch_forward_backward(const Network& net, std::span<const lob::LobWindow> batch,
                                   std::span<const double> theta);

}  // namespace btabl::model
