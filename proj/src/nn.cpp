#include "xbar/nn.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "xbar/errors.hpp"
#include "xbar/rng.hpp"

namespace xbar {

void NetworkSpec::validate() const {
  if (layers.empty()) throw ContractError("network has no layers");
  for (size_t l = 0; l < layers.size(); ++l) {
    const LayerSpec& s = layers[l];
    if (s.kind == LayerKind::kDense) {
      if (s.in_features < 1 || s.out_features < 1)
        throw ContractError("dense layer " + std::to_string(l) + " has empty dimensions");
    } else {
      if (s.in_channels < 1 || s.out_maps < 1 || s.kernel < 1)
        throw ContractError("conv layer " + std::to_string(l) + " has empty dimensions");
      if (s.out_h() < 1 || s.out_w() < 1)
        throw ContractError("conv layer " + std::to_string(l) + " kernel exceeds input");
    }
    if (l > 0 && layers[l - 1].output_count() != s.input_count())
      throw ContractError("layer " + std::to_string(l) + " input size " +
                          std::to_string(s.input_count()) + " does not match previous output " +
                          std::to_string(layers[l - 1].output_count()));
  }
  const LayerSpec& last = layers.back();
  if (last.kind != LayerKind::kDense || last.activation != Activation::kNone)
    throw ContractError("final layer must be dense with no activation (softmax-CE head)");
}

void NetworkParams::validate() const {
  spec.validate();
  if (weights.size() != spec.layers.size() || biases.size() != spec.layers.size())
    throw ContractError("params layer count mismatch");
  for (size_t l = 0; l < weights.size(); ++l) {
    const LayerSpec& s = spec.layers[l];
    long wr = s.kind == LayerKind::kDense ? s.out_features : s.out_maps;
    long wc = s.kind == LayerKind::kDense ? s.in_features : s.patch_len();
    if (weights[l].rows() != wr || weights[l].cols() != wc)
      throw ContractError("layer " + std::to_string(l) + " weight shape mismatch");
    if (biases[l].size() != wr)
      throw ContractError("layer " + std::to_string(l) + " bias shape mismatch");
    if (!weights[l].allFinite() || !biases[l].allFinite())
      throw ContractError("layer " + std::to_string(l) + " has non-finite parameters");
  }
}

NetworkParams init_network(const NetworkSpec& spec, std::uint64_t seed) {
  spec.validate();
  NetworkParams p;
  p.spec = spec;
  for (size_t l = 0; l < spec.layers.size(); ++l) {
    const LayerSpec& s = spec.layers[l];
    int rows = s.kind == LayerKind::kDense ? s.out_features : s.out_maps;
    int cols = s.kind == LayerKind::kDense ? s.in_features : s.patch_len();
    double fan_in = cols;
    double stddev = s.activation == Activation::kRelu ? std::sqrt(2.0 / fan_in)
                                                      : std::sqrt(1.0 / fan_in);
    Rng rng(substream(seed, {streams::kInit, static_cast<std::uint64_t>(l)}));
    Eigen::MatrixXd w(rows, cols);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) w(i, j) = rng.gaussian(0.0, stddev);
    p.weights.push_back(std::move(w));
    p.biases.push_back(Eigen::VectorXd::Zero(rows));
  }
  return p;
}

NetworkSpec desk_network_spec() {
  NetworkSpec spec;
  LayerSpec conv1;
  conv1.kind = LayerKind::kConv;
  conv1.activation = Activation::kRelu;
  conv1.in_channels = 1;
  conv1.out_maps = 8;
  conv1.in_h = conv1.in_w = 8;
  conv1.kernel = 3;

  LayerSpec conv2 = conv1;
  conv2.in_channels = 8;
  conv2.out_maps = 16;
  conv2.in_h = conv2.in_w = 6;

  LayerSpec fc1;
  fc1.kind = LayerKind::kDense;
  fc1.activation = Activation::kRelu;
  fc1.in_features = 256;
  fc1.out_features = 128;

  LayerSpec fc2;
  fc2.kind = LayerKind::kDense;
  fc2.activation = Activation::kNone;
  fc2.in_features = 128;
  fc2.out_features = 10;

  spec.layers = {conv1, conv2, fc1, fc2};
  spec.validate();
  return spec;
}

// im2col: column per output cell, patch entries channel-major then kernel
// row then kernel column (must stay in lockstep with flatten_kernels).
Eigen::MatrixXd im2col(const LayerSpec& s, const Eigen::VectorXd& input) {
  const int oh = s.out_h(), ow = s.out_w();
  Eigen::MatrixXd patches(s.patch_len(), oh * ow);
  for (int oy = 0; oy < oh; ++oy)
    for (int ox = 0; ox < ow; ++ox) {
      int cell = oy * ow + ox;
      int idx = 0;
      for (int ch = 0; ch < s.in_channels; ++ch)
        for (int ky = 0; ky < s.kernel; ++ky)
          for (int kx = 0; kx < s.kernel; ++kx)
            patches(idx++, cell) = input[ch * (s.in_h * s.in_w) + (oy + ky) * s.in_w + (ox + kx)];
    }
  return patches;
}

namespace {

Eigen::VectorXd layer_forward(const LayerSpec& s, const Eigen::MatrixXd& w,
                              const Eigen::VectorXd& b, const Eigen::VectorXd& in) {
  if (s.kind == LayerKind::kDense) return w * in + b;
  const int cells = s.out_h() * s.out_w();
  Eigen::MatrixXd z = w * im2col(s, in);  // out_maps x cells
  z.colwise() += b;
  Eigen::VectorXd flat(s.out_maps * cells);
  for (int m = 0; m < s.out_maps; ++m)
    for (int c = 0; c < cells; ++c) flat[m * cells + c] = z(m, c);
  return flat;
}

Eigen::VectorXd apply_activation(const LayerSpec& s, const Eigen::VectorXd& z) {
  if (s.activation == Activation::kRelu) return z.cwiseMax(0.0);
  return z;
}

}  // namespace

ForwardTrace forward(const NetworkParams& params, const Eigen::VectorXd& input) {
  if (input.size() != params.spec.input_count())
    throw ContractError("forward input size " + std::to_string(input.size()) +
                        " does not match network input " +
                        std::to_string(params.spec.input_count()));
  ForwardTrace t;
  Eigen::VectorXd a = input;
  for (size_t l = 0; l < params.spec.layers.size(); ++l) {
    const LayerSpec& s = params.spec.layers[l];
    t.inputs.push_back(a);
    Eigen::VectorXd z = layer_forward(s, params.weights[l], params.biases[l], a);
    a = apply_activation(s, z);
    t.preact.push_back(std::move(z));
    t.outputs.push_back(a);
  }
  t.scores = t.outputs.back();
  return t;
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  Eigen::VectorXd e = (logits.array() - logits.maxCoeff()).exp();
  return e / e.sum();
}

Gradients backward(const NetworkParams& params, const ForwardTrace& trace, int label) {
  const size_t n_layers = params.spec.layers.size();
  if (trace.outputs.size() != n_layers)
    throw ContractError("backward needs the trace of a matching forward call");
  if (label < 0 || label >= params.spec.classes())
    throw ContractError("label out of range");

  Gradients g;
  g.weights.resize(n_layers);
  g.biases.resize(n_layers);
  g.outputs.resize(n_layers);

  Eigen::VectorXd probs = softmax(trace.scores);
  g.loss = -std::log(std::max(probs[label], 1e-300));
  Eigen::VectorXd delta = probs;  // dL/d(output) of the final layer
  delta[label] -= 1.0;

  for (size_t li = n_layers; li-- > 0;) {
    const LayerSpec& s = params.spec.layers[li];
    g.outputs[li] = delta;
    Eigen::VectorXd dz = delta;
    if (s.activation == Activation::kRelu)
      dz = dz.cwiseProduct((trace.preact[li].array() > 0.0).cast<double>().matrix());

    if (s.kind == LayerKind::kDense) {
      g.weights[li] = dz * trace.inputs[li].transpose();
      g.biases[li] = dz;
      if (li > 0) delta = params.weights[li].transpose() * dz;
    } else {
      const int cells = s.out_h() * s.out_w();
      Eigen::MatrixXd dzm(s.out_maps, cells);
      for (int m = 0; m < s.out_maps; ++m)
        for (int c = 0; c < cells; ++c) dzm(m, c) = dz[m * cells + c];
      Eigen::MatrixXd patches = im2col(s, trace.inputs[li]);
      g.weights[li] = dzm * patches.transpose();
      g.biases[li] = dzm.rowwise().sum();
      if (li > 0) {
        // scatter patch-space gradients back onto the input layout
        Eigen::MatrixXd dpatch = params.weights[li].transpose() * dzm;  // patch_len x cells
        Eigen::VectorXd din = Eigen::VectorXd::Zero(s.input_count());
        for (int oy = 0; oy < s.out_h(); ++oy)
          for (int ox = 0; ox < s.out_w(); ++ox) {
            int cell = oy * s.out_w() + ox;
            int idx = 0;
            for (int ch = 0; ch < s.in_channels; ++ch)
              for (int ky = 0; ky < s.kernel; ++ky)
                for (int kx = 0; kx < s.kernel; ++kx)
                  din[ch * (s.in_h * s.in_w) + (oy + ky) * s.in_w + (ox + kx)] +=
                      dpatch(idx++, cell);
          }
        delta = std::move(din);
      }
    }
  }
  return g;
}

TrainResult train(const NetworkParams& start, const LabeledDataset& data,
                  const TrainingConfig& config, std::uint64_t seed) {
  start.validate();
  data.validate();
  if (data.count() < 1) throw ContractError("empty training set");
  config.validate();

  TrainResult res;
  res.params = start;
  std::vector<int> order(data.count());
  for (int i = 0; i < data.count(); ++i) order[i] = i;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Rng shuffle_rng(substream(seed, {streams::kTraining, static_cast<std::uint64_t>(epoch)}));
    shuffle_rng.shuffle(order);

    double epoch_loss = 0.0;
    for (int at = 0; at < data.count(); at += config.batch_size) {
      int take = std::min(config.batch_size, data.count() - at);
      std::vector<Eigen::MatrixXd> gw;
      std::vector<Eigen::VectorXd> gb;
      for (size_t l = 0; l < res.params.weights.size(); ++l) {
        gw.emplace_back(Eigen::MatrixXd::Zero(res.params.weights[l].rows(),
                                              res.params.weights[l].cols()));
        gb.emplace_back(Eigen::VectorXd::Zero(res.params.biases[l].size()));
      }
      for (int k = 0; k < take; ++k) {
        int idx = order[at + k];
        ForwardTrace t = forward(res.params, data.inputs.col(idx));
        Gradients g = backward(res.params, t, data.labels[idx]);
        for (size_t l = 0; l < gw.size(); ++l) {
          gw[l] += g.weights[l];
          gb[l] += g.biases[l];
        }
        epoch_loss += g.loss;
      }
      double step = config.learning_rate / take;
      for (size_t l = 0; l < gw.size(); ++l) {
        res.params.weights[l] -= step * gw[l];
        res.params.biases[l] -= step * gb[l];
      }
    }
    epoch_loss /= data.count();
    if (!std::isfinite(epoch_loss))
      throw NumericError("training diverged at epoch " + std::to_string(epoch));
    res.loss_curve.push_back(epoch_loss);
  }
  res.train_accuracy = evaluate_accuracy(res.params, data);
  return res;
}

double evaluate_accuracy(const NetworkParams& params, const LabeledDataset& split,
                         const ForwardFn& forward_fn) {
  if (split.count() < 1) throw ContractError("empty evaluation split");
  int correct = 0;
  for (int s = 0; s < split.count(); ++s) {
    Eigen::VectorXd scores =
        forward_fn ? forward_fn(split.inputs.col(s)) : forward(params, split.inputs.col(s)).scores;
    Eigen::Index best;
    scores.maxCoeff(&best);
    correct += (static_cast<int>(best) == split.labels[s]);
  }
  return static_cast<double>(correct) / split.count();
}

namespace {

constexpr char kParamsMagic[8] = {'X', 'B', 'N', 'P', '1', '\n', '\0', '\0'};

template <class T>
void put(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
void get(std::ifstream& in, T& v) {
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
}

}  // namespace

void save_params(const std::string& path, const NetworkParams& params) {
  params.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw MissingArtifactError("cannot write params file " + path);
  out.write(kParamsMagic, sizeof(kParamsMagic));
  std::int32_t n = static_cast<std::int32_t>(params.spec.layers.size());
  put(out, n);
  for (const LayerSpec& s : params.spec.layers) {
    std::int32_t fields[9] = {static_cast<std::int32_t>(s.kind),
                              static_cast<std::int32_t>(s.activation),
                              s.in_features,
                              s.out_features,
                              s.in_channels,
                              s.out_maps,
                              s.in_h,
                              s.in_w,
                              s.kernel};
    out.write(reinterpret_cast<const char*>(fields), sizeof(fields));
  }
  for (size_t l = 0; l < params.weights.size(); ++l) {
    std::int64_t rows = params.weights[l].rows(), cols = params.weights[l].cols();
    put(out, rows);
    put(out, cols);
    out.write(reinterpret_cast<const char*>(params.weights[l].data()),
              sizeof(double) * rows * cols);
    std::int64_t blen = params.biases[l].size();
    put(out, blen);
    out.write(reinterpret_cast<const char*>(params.biases[l].data()), sizeof(double) * blen);
  }
}

NetworkParams load_params(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifactError("params file not found: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kParamsMagic, sizeof(magic)) != 0)
    throw ConfigError("params file " + path + ": unrecognized format");

  NetworkParams p;
  std::int32_t n = 0;
  get(in, n);
  if (!in || n < 1 || n > 1024) throw ConfigError("params file " + path + ": bad layer count");
  for (std::int32_t l = 0; l < n; ++l) {
    std::int32_t fields[9];
    in.read(reinterpret_cast<char*>(fields), sizeof(fields));
    LayerSpec s;
    s.kind = static_cast<LayerKind>(fields[0]);
    s.activation = static_cast<Activation>(fields[1]);
    s.in_features = fields[2];
    s.out_features = fields[3];
    s.in_channels = fields[4];
    s.out_maps = fields[5];
    s.in_h = fields[6];
    s.in_w = fields[7];
    s.kernel = fields[8];
    p.spec.layers.push_back(s);
  }
  for (std::int32_t l = 0; l < n; ++l) {
    std::int64_t rows = 0, cols = 0, blen = 0;
    get(in, rows);
    get(in, cols);
    if (!in || rows < 1 || cols < 1 || rows * cols > (1ll << 28))
      throw ConfigError("params file " + path + ": bad weight shape");
    Eigen::MatrixXd w(rows, cols);
    in.read(reinterpret_cast<char*>(w.data()), sizeof(double) * rows * cols);
    get(in, blen);
    if (!in || blen != rows) throw ConfigError("params file " + path + ": bad bias length");
    Eigen::VectorXd b(blen);
    in.read(reinterpret_cast<char*>(b.data()), sizeof(double) * blen);
    if (!in) throw ConfigError("params file " + path + ": truncated");
    p.weights.push_back(std::move(w));
    p.biases.push_back(std::move(b));
  }
  p.validate();
  return p;
}

}  // namespace xbar
