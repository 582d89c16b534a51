#include "handfk/toynet.hpp"

#include "handfk/errors.hpp"

#include "binio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

namespace handfk {

namespace {

constexpr const char* kModule = "toynet";
constexpr char kMagic[8] = {'H', 'A', 'N', 'D', 'T', 'O', 'Y', '1'};

double sigmoid(double z) {
  if (z >= 0.0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

struct Activations {
  std::vector<Eigen::VectorXd> inputs;  // input of each layer
  Eigen::VectorXd logits;
};

Activations run(const ToyNet& net, const Eigen::VectorXd& x) {
  Activations act;
  Eigen::VectorXd a = x;
  const auto& layers = net.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    act.inputs.push_back(a);
    Eigen::VectorXd z = layers[l].weight * a + layers[l].bias;
    if (l + 1 < layers.size()) {
      a = z.cwiseMax(0.0);
    } else {
      act.logits = std::move(z);
    }
  }
  return act;
}

struct Squashed {
  PoseVector pose;
  ScaleVector scales;
  Eigen::VectorXd slope;  // d param / d logit
};

Squashed squash(const Eigen::VectorXd& logits, const KinematicTree& tree, ScaleMode mode) {
  Eigen::VectorXd lo, hi;
  output_bounds(tree, mode, lo, hi);
  const int p = tree.dof_count();
  const int k = tree.scale_count(mode);
  Squashed out{PoseVector{Eigen::VectorXd(p)}, ScaleVector{mode, Eigen::VectorXd(k)}, Eigen::VectorXd(p + k)};
  for (int i = 0; i < p + k; ++i) {
    const double sg = sigmoid(logits[i]);
    const double v = std::clamp(lo[i] + (hi[i] - lo[i]) * sg, lo[i], hi[i]);
    out.slope[i] = (hi[i] - lo[i]) * sg * (1.0 - sg);
    if (i < p) {
      out.pose.theta[i] = v;
    } else {
      out.scales.values[i - p] = v;
    }
  }
  return out;
}

void check_net(const ToyNet& net, const KinematicTree& tree) {
  if (net.layers().empty()) {
    throw ValidationError(kModule, "network has no layers");
  }
  const int want = tree.dof_count() + tree.scale_count(net.mode());
  if (net.output_size() != want) {
    throw ValidationError(
        kModule, "network outputs " + std::to_string(net.output_size()) + " values, tree and mode need " +
                     std::to_string(want));
  }
}

} // namespace

void output_bounds(const KinematicTree& tree, ScaleMode mode, Eigen::VectorXd& lo, Eigen::VectorXd& hi) {
  const int p = tree.dof_count();
  const int k = tree.scale_count(mode);
  lo.resize(p + k);
  hi.resize(p + k);
  for (int i = 0; i < p; ++i) {
    lo[i] = tree.dofs()[i].lo;
    hi[i] = tree.dofs()[i].hi;
  }
  lo.tail(k).setConstant(tree.scale_lo());
  hi.tail(k).setConstant(tree.scale_hi());
}

ToyNet::ToyNet(const KinematicTree& tree, ScaleMode mode, std::vector<int> hidden, std::uint64_t seed) : mode_(mode) {
  std::vector<int> sizes{3 * tree.joint_count()};
  for (int h : hidden) {
    if (h <= 0) {
      throw ValidationError(kModule, "hidden layer widths must be positive");
    }
    sizes.push_back(h);
  }
  sizes.push_back(tree.dof_count() + tree.scale_count(mode));

  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(sizes[l]));
    std::uniform_real_distribution<double> dist(-bound, bound);
    DenseLayer layer{Eigen::MatrixXd(sizes[l + 1], sizes[l]), Eigen::VectorXd::Zero(sizes[l + 1])};
    for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
      for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
        layer.weight(r, c) = dist(rng);
      }
    }
    layers_.push_back(std::move(layer));
  }

  // Output biases put the untrained net at the zero pose with unit scales.
  Eigen::VectorXd lo, hi;
  output_bounds(tree, mode, lo, hi);
  const int p = tree.dof_count();
  auto& bias = layers_.back().bias;
  for (Eigen::Index i = 0; i < bias.size(); ++i) {
    const double rest = i < p ? 0.0 : 1.0;
    const double frac = std::clamp((rest - lo[i]) / (hi[i] - lo[i]), 1e-6, 1.0 - 1e-6);
    bias[i] = std::log(frac / (1.0 - frac));
  }
}

ToyNet::ToyNet(ScaleMode mode, std::vector<DenseLayer> layers) : mode_(mode), layers_(std::move(layers)) {
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    if (layers_[l].bias.size() != layers_[l].weight.rows() ||
        (l > 0 && layers_[l].weight.cols() != layers_[l - 1].weight.rows())) {
      throw ValidationError(kModule, "layer " + std::to_string(l) + " does not chain with its neighbours");
    }
  }
}

std::vector<int> ToyNet::layer_sizes() const {
  std::vector<int> sizes;
  if (layers_.empty()) {
    return sizes;
  }
  sizes.push_back(input_size());
  for (const auto& l : layers_) {
    sizes.push_back(static_cast<int>(l.weight.rows()));
  }
  return sizes;
}

std::size_t ToyNet::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) {
    n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  }
  return n;
}

Eigen::VectorXd ToyNet::logits(const Eigen::VectorXd& features) const {
  if (features.size() != input_size()) {
    throw ValidationError(
        kModule, "expected " + std::to_string(input_size()) + " features, got " + std::to_string(features.size()));
  }
  return run(*this, features).logits;
}

bool ToyNet::operator==(const ToyNet& other) const {
  if (mode_ != other.mode_ || layers_.size() != other.layers_.size()) {
    return false;
  }
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& a = layers_[l];
    const auto& b = other.layers_[l];
    if (a.weight.rows() != b.weight.rows() || a.weight.cols() != b.weight.cols() || a.bias.size() != b.bias.size()) {
      return false;
    }
    if (std::memcmp(a.weight.data(), b.weight.data(), sizeof(double) * a.weight.size()) != 0 ||
        std::memcmp(a.bias.data(), b.bias.data(), sizeof(double) * a.bias.size()) != 0) {
      return false;
    }
  }
  return true;
}

std::vector<ToySample> make_toy_samples(std::span<const SynthSample> samples, double norm_mm) {
  if (!(norm_mm > 0.0)) {
    throw ValidationError(kModule, "norm_mm must be positive");
  }
  std::vector<ToySample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    const Eigen::Vector3d palm = s.clean.positions.col(0);
    ToySample t;
    t.target.positions = s.clean.positions.colwise() - palm;
    const Eigen::Matrix3Xd noisy = (s.joints.positions.colwise() - palm) / norm_mm;
    t.features = Eigen::Map<const Eigen::VectorXd>(noisy.data(), noisy.size());
    out.push_back(std::move(t));
  }
  return out;
}

Prediction predict(const ToyNet& net, const Eigen::VectorXd& features, const KinematicTree& tree) {
  check_net(net, tree);
  auto sq = squash(net.logits(features), tree, net.mode());
  Prediction p{std::move(sq.pose), std::move(sq.scales), {}};
  p.joints = forward(p.pose, p.scales, tree).joints;
  return p;
}

void check_train_config(const TrainConfig& cfg) {
  if (!(cfg.lr > 0.0)) {
    throw ValidationError(kModule, "learning rate must be positive");
  }
  if (!(cfg.momentum >= 0.0 && cfg.momentum < 1.0)) {
    throw ValidationError(kModule, "momentum must lie in [0, 1)");
  }
  if (cfg.epochs < 0) {
    throw ValidationError(kModule, "epochs must be non-negative");
  }
  if (cfg.batch_size <= 0) {
    throw ValidationError(kModule, "batch size must be positive");
  }
  if (!(cfg.norm_mm > 0.0)) {
    throw ValidationError(kModule, "norm_mm must be positive");
  }
}

NetGradients batch_gradients(
    const ToyNet& net, std::span<const ToySample> batch, const KinematicTree& tree, double norm_mm) {
  check_net(net, tree);
  if (batch.empty()) {
    throw ValidationError(kModule, "empty batch");
  }
  const auto& layers = net.layers();
  NetGradients g;
  for (const auto& l : layers) {
    g.layers.push_back({Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()), Eigen::VectorXd::Zero(l.bias.size())});
  }
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  const double inv_norm2 = 1.0 / (norm_mm * norm_mm);
  const int p = tree.dof_count();

  for (const auto& sample : batch) {
    if (sample.features.size() != net.input_size()) {
      throw ValidationError(kModule, "sample feature count does not match the network input");
    }
    const Activations act = run(net, sample.features);
    if (!act.logits.allFinite()) {
      // train() reports this with the epoch and batch
      g.loss = std::numeric_limits<double>::quiet_NaN();
      return g;
    }
    const Squashed sq = squash(act.logits, tree, net.mode());
    const LossGradients lg = loss_gradients(sq.pose, sq.scales, tree, sample.target);
    g.loss += lg.loss * inv_norm2 * inv_n;

    Eigen::VectorXd delta(act.logits.size());
    delta.head(p) = lg.theta;
    delta.tail(delta.size() - p) = lg.scale;
    delta = delta.cwiseProduct(sq.slope) * (inv_norm2 * inv_n);

    for (std::size_t l = layers.size(); l-- > 0;) {
      g.layers[l].weight.noalias() += delta * act.inputs[l].transpose();
      g.layers[l].bias += delta;
      if (l == 0) {
        break;
      }
      Eigen::VectorXd back = layers[l].weight.transpose() * delta;
      // inputs[l] is relu(z) of the layer below; its derivative is 1 where positive.
      delta = back.cwiseProduct((act.inputs[l].array() > 0.0).cast<double>().matrix());
    }
  }
  return g;
}

double batch_loss(const ToyNet& net, std::span<const ToySample> batch, const KinematicTree& tree, double norm_mm) {
  check_net(net, tree);
  double total = 0.0;
  for (const auto& sample : batch) {
    const Prediction pr = predict(net, sample.features, tree);
    total += 0.5 * (pr.joints.positions - sample.target.positions).squaredNorm();
  }
  return total / (norm_mm * norm_mm) / static_cast<double>(batch.size());
}

TrainResult train(
    const ToyNet& init, std::span<const ToySample> samples, const KinematicTree& tree, const TrainConfig& cfg) {
  check_train_config(cfg);
  check_net(init, tree);
  if (samples.empty()) {
    throw ValidationError(kModule, "training needs at least one sample");
  }
  TrainResult result{init, {}};
  ToyNet& net = result.net;
  std::vector<DenseLayer> velocity;
  for (const auto& l : net.layers()) {
    velocity.push_back({Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()), Eigen::VectorXd::Zero(l.bias.size())});
  }
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<ToySample> batch;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    int batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_index) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      batch.clear();
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(samples[order[i]]);
      }
      const NetGradients g = batch_gradients(net, batch, tree, cfg.norm_mm);
      if (!std::isfinite(g.loss)) {
        throw RuntimeFailure(
            kModule, "non-finite loss at epoch " + std::to_string(epoch) + " batch " + std::to_string(batch_index));
      }
      epoch_loss += g.loss * static_cast<double>(end - start);
      for (std::size_t l = 0; l < velocity.size(); ++l) {
        velocity[l].weight = cfg.momentum * velocity[l].weight - cfg.lr * g.layers[l].weight;
        velocity[l].bias = cfg.momentum * velocity[l].bias - cfg.lr * g.layers[l].bias;
        net.layers()[l].weight += velocity[l].weight;
        net.layers()[l].bias += velocity[l].bias;
      }
    }
    result.loss_history.push_back(epoch_loss / static_cast<double>(samples.size()));
  }
  return result;
}

double mean_joint_error(const ToyNet& net, std::span<const ToySample> samples, const KinematicTree& tree) {
  if (samples.empty()) {
    throw ValidationError(kModule, "no samples to evaluate");
  }
  double total = 0.0;
  long count = 0;
  for (const auto& s : samples) {
    const Prediction pr = predict(net, s.features, tree);
    total += (pr.joints.positions - s.target.positions).colwise().norm().sum();
    count += s.target.size();
  }
  return total / static_cast<double>(count);
}

void save_checkpoint(const ToyNet& net, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw RuntimeFailure(kModule, "cannot open '" + path + "' for writing");
  }
  out.write(kMagic, sizeof(kMagic));
  binio::put(out, static_cast<std::uint32_t>(net.mode()));
  binio::put(out, static_cast<std::uint32_t>(net.layers().size()));
  for (int s : net.layer_sizes()) {
    binio::put(out, static_cast<std::uint32_t>(s));
  }
  for (const auto& l : net.layers()) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) {
        binio::put(out, l.weight(r, c));
      }
    }
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) {
      binio::put(out, l.bias[r]);
    }
  }
  if (!out) {
    throw RuntimeFailure(kModule, path + ": write failed");
  }
}

ToyNet load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw RuntimeFailure(kModule, "cannot open '" + path + "'");
  }
  char magic[8];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(magic)) != 0) {
    throw ParseError(kModule, path + ": bad magic, not a checkpoint");
  }
  const auto mode = binio::get<std::uint32_t>(in, kModule, path);
  if (mode > static_cast<std::uint32_t>(ScaleMode::multi)) {
    throw ParseError(kModule, path + ": unknown scale mode " + std::to_string(mode));
  }
  const auto count = binio::get<std::uint32_t>(in, kModule, path);
  if (count == 0 || count > 64) {
    throw ParseError(kModule, path + ": implausible layer count " + std::to_string(count));
  }
  std::vector<int> sizes;
  for (std::uint32_t i = 0; i <= count; ++i) {
    const auto s = binio::get<std::uint32_t>(in, kModule, path);
    if (s == 0 || s > (1u << 20)) {
      throw ParseError(kModule, path + ": implausible layer size " + std::to_string(s));
    }
    sizes.push_back(static_cast<int>(s));
  }
  std::vector<DenseLayer> layers;
  for (std::uint32_t l = 0; l < count; ++l) {
    DenseLayer layer{Eigen::MatrixXd(sizes[l + 1], sizes[l]), Eigen::VectorXd(sizes[l + 1])};
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
        layer.weight(r, c) = binio::get<double>(in, kModule, path);
      }
    }
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) {
      layer.bias[r] = binio::get<double>(in, kModule, path);
    }
    layers.push_back(std::move(layer));
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw ParseError(kModule, path + ": trailing bytes");
  }
  return ToyNet(static_cast<ScaleMode>(mode), std::move(layers));
}

std::string format_loss_history(std::span<const double> history) {
  std::ostringstream out;
  out << "epoch loss\n";
  char buf[64];
  for (std::size_t e = 0; e < history.size(); ++e) {
    std::snprintf(buf, sizeof(buf), "%.9e", history[e]);
    out << e << " " << buf << "\n";
  }
  return out.str();
}

} // namespace handfk
