#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "xbar/data.hpp"
#include "xbar/tech.hpp"

namespace xbar {

enum class LayerKind { kDense, kConv };
enum class Activation { kNone, kRelu };

// Dense layers use in_features/out_features. Conv layers are stride-1,
// valid-padding, square kernels; their weights are stored as an
// (out_maps x patch_len) matrix with patch entries ordered channel-major,
// then kernel row, then kernel column — the same order flatten_kernels and
// the im2col forward use, so mapping a layer is a plain transpose.
struct LayerSpec {
  LayerKind kind = LayerKind::kDense;
  Activation activation = Activation::kNone;
  int in_features = 0, out_features = 0;          // dense
  int in_channels = 0, out_maps = 0;              // conv
  int in_h = 0, in_w = 0, kernel = 0;             // conv

  int out_h() const { return in_h - kernel + 1; }
  int out_w() const { return in_w - kernel + 1; }
  int patch_len() const { return in_channels * kernel * kernel; }
  int input_count() const {
    return kind == LayerKind::kDense ? in_features : in_channels * in_h * in_w;
  }
  int output_count() const {
    return kind == LayerKind::kDense ? out_features : out_maps * out_h() * out_w();
  }
  // columns of the flattened layer matrix = one per output neuron / feature map
  int logical_columns() const {
    return kind == LayerKind::kDense ? out_features : out_maps;
  }
  int logical_rows() const {
    return kind == LayerKind::kDense ? in_features : patch_len();
  }
};

struct NetworkSpec {
  std::vector<LayerSpec> layers;
  void validate() const;  // layer-to-layer dimension consistency, softmax head
  int input_count() const { return layers.front().input_count(); }
  int classes() const { return layers.back().output_count(); }
};

struct NetworkParams {
  NetworkSpec spec;
  std::vector<Eigen::MatrixXd> weights;  // dense: (out,in); conv: (out_maps, patch_len)
  std::vector<Eigen::VectorXd> biases;   // per output neuron / map
  void validate() const;
};

// He/Xavier gaussian init, deterministic per (seed, layer).
NetworkParams init_network(const NetworkSpec& spec, std::uint64_t seed);

// conv1 8 maps 3x3 -> conv2 16 maps 3x3 -> fc 128 relu -> fc 10,
// for 8x8 single-channel inputs (the desk-scale network).
NetworkSpec desk_network_spec();

// Per-layer record of a forward pass. outputs[l] is the layer's emitted
// activation (post-relu); conv vectors are map-major: map*(oh*ow) + y*ow + x.
struct ForwardTrace {
  std::vector<Eigen::VectorXd> inputs;   // what each layer consumed
  std::vector<Eigen::VectorXd> preact;   // z
  std::vector<Eigen::VectorXd> outputs;  // a = act(z)
  Eigen::VectorXd scores;                // final logits
};

ForwardTrace forward(const NetworkParams& params, const Eigen::VectorXd& input);

// Patch matrix (patch_len x out_h*out_w) for a conv layer's input; column
// order y*out_w + x, entries channel-major then kernel row then column.
Eigen::MatrixXd im2col(const LayerSpec& spec, const Eigen::VectorXd& input);

// dL/d(layer output) per layer; final layer's equals softmax - onehot.
using OutputGradients = std::vector<Eigen::VectorXd>;

struct Gradients {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
  OutputGradients outputs;  // the per-layer delta
  double loss = 0.0;
};

Gradients backward(const NetworkParams& params, const ForwardTrace& trace, int label);

Eigen::VectorXd softmax(const Eigen::VectorXd& logits);

struct TrainResult {
  NetworkParams params;
  std::vector<double> loss_curve;  // mean loss per epoch
  double train_accuracy = 0.0;
};

// Plain minibatch SGD, deterministic given seed (epoch-wise shuffles come
// from substream(seed, {kTraining, epoch})).
TrainResult train(const NetworkParams& start, const LabeledDataset& data,
                  const TrainingConfig& config, std::uint64_t seed);

using ForwardFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

// Fraction of argmax-correct predictions; forward_fn defaults to the clean
// forward when empty, and can be swapped for the crossbar forward.
double evaluate_accuracy(const NetworkParams& params, const LabeledDataset& split,
                         const ForwardFn& forward_fn = {});

// Versioned binary blob with shape metadata.
void save_params(const std::string& path, const NetworkParams& params);
NetworkParams load_params(const std::string& path);

}  // namespace xbar
