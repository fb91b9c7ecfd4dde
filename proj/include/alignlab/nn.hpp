#pragma once

#include "alignlab/common.hpp"

#include <optional>
#include <string>
#include <vector>

namespace alignlab {

enum class Activation { kTanh, kLeakyRelu, kIdentity };
enum class OutputActivation { kIdentity, kTanh };
enum class OptimizerKind { kSgd, kRmsprop, kAdam };

// Dense MLP layout. Depth = hidden_widths.size() + 1 weight layers.
struct Architecture {
  int input_dim = 0;
  std::vector<int> hidden_widths;
  int output_dim = 0;
  Activation activation = Activation::kTanh;
  double leaky_slope = 0.2;  // used only with kLeakyRelu
  OutputActivation output_activation = OutputActivation::kIdentity;

  int depth() const { return static_cast<int>(hidden_widths.size()) + 1; }
  int num_layers() const { return depth(); }
  int fan_in(int layer) const;
  int fan_out(int layer) const;
  int param_count() const;
  void validate() const;

  bool operator==(const Architecture& o) const;
};

// Flat parameter order: per layer, weights row-major (out x in), then biases.
struct MlpNetwork {
  Architecture arch;
  Vec params;

  // Row-major view of layer weights inside the flat vector.
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                 Eigen::RowMajor>>
  weights(int layer) const;
  Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                           Eigen::RowMajor>>
  weights(int layer);
  Eigen::Map<const Vec> biases(int layer) const;
  Eigen::Map<Vec> biases(int layer);

  int param_offset(int layer) const;  // offset of layer's weight block
};

MlpNetwork make_network(const Architecture& arch, Rng& rng);
MlpNetwork make_zero_network(const Architecture& arch);

// Per-layer inputs and post-activation outputs kept for the backward pass.
// Matrices hold one sample per row.
struct ForwardTrace {
  std::vector<Mat> layer_inputs;   // size depth; layer_inputs[0] = X
  std::vector<Mat> pre_acts;       // size depth
  Mat output;                      // post output-activation
};

Mat forward(const MlpNetwork& net, const Mat& X);
Vec forward(const MlpNetwork& net, const Vec& x);
ForwardTrace forward_trace(const MlpNetwork& net, const Mat& X);

// Reverse-mode gradient w.r.t. all parameters, summed over rows of the
// traced batch. `grad_out` holds dLoss/dOutput per row. If `grad_in` is
// non-null it receives dLoss/dInput (same shape as the input batch).
Vec backward(const MlpNetwork& net, const ForwardTrace& trace,
             const Mat& grad_out, Mat* grad_in = nullptr);

// Single-sample convenience: returns the parameter gradient and, via
// grad_x, the gradient w.r.t. the input.
Vec backward(const MlpNetwork& net, const Vec& loss_grad_at_output,
             const Vec& x, Vec* grad_x = nullptr);

void clip_weights(MlpNetwork& net, double c);

// Product of layer spectral norms; an upper bound on the Lipschitz constant
// for slope-<=1 activations. Power iteration, 200 iterations, tol 1e-10.
double lipschitz_upper_bound(const MlpNetwork& net);

void checkpoint_save(const MlpNetwork& net, const std::string& path);
MlpNetwork checkpoint_load(const std::string& path);

struct OptimizerState {
  OptimizerKind kind = OptimizerKind::kRmsprop;
  double learning_rate = 5e-4;
  Vec acc1;  // rmsprop/adam second-moment accumulator
  Vec acc2;  // adam first-moment accumulator
  long step_count = 0;

  static OptimizerState make(OptimizerKind kind, double lr, int n_params);
  void step(Vec& params, const Vec& grad);
};

// Partition of a network into shared encoder layers (omega) and decoder
// layers (theta). encoder_layers + decoder_layers == arch.depth().
struct EncoderDecoderSplit {
  Architecture full;
  int encoder_layers = 0;
  int decoder_layers = 0;

  EncoderDecoderSplit(const Architecture& arch, int l1);
  Architecture encoder_arch() const;
  Architecture decoder_arch() const;
  int encoder_param_count() const;
  int decoder_param_count() const;
  // Splits a flat parameter vector of the full network into (omega, theta).
  std::pair<Vec, Vec> split(const Vec& full_params) const;
  Vec join(const Vec& omega, const Vec& theta) const;
};

std::string activation_name(Activation a, double slope);
std::string output_activation_name(OutputActivation a);

}  // namespace alignlab
