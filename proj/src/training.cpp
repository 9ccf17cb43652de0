#include "symnet/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "symnet/datasets.hpp"
#include "symnet/errors.hpp"

namespace symnet {

namespace {

template <typename T>
using MatT = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using VecT = Eigen::Matrix<T, Eigen::Dynamic, 1>;

void check_loss_compat(const Network& net, LossKind loss) {
  if (loss == LossKind::kBinaryCrossEntropy && net.output_dim() != 1)
    throw ConfigError("binary cross-entropy needs a single output unit");
  if (loss == LossKind::kCrossEntropy && net.output_dim() < 2)
    throw ConfigError("cross-entropy needs at least two output units");
}

template <typename T>
T softplus(T x) {
  return x > T(0) ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

template <typename T>
T sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  T e = std::exp(x);
  return e / (T(1) + e);
}

// Loss value and d(loss)/d(logits) for the mean over the batch.
template <typename T>
T loss_and_grad(const MatT<T>& logits, std::span<const int> labels, LossKind loss,
                MatT<T>* grad) {
  const Eigen::Index b = logits.rows();
  const T inv_b = T(1) / static_cast<T>(b);
  T total = T(0);
  if (grad) grad->resize(logits.rows(), logits.cols());
  if (loss == LossKind::kBinaryCrossEntropy) {
    for (Eigen::Index r = 0; r < b; ++r) {
      T y = static_cast<T>(labels[r]);
      T m = y * logits(r, 0);
      total += softplus(-m);
      if (grad) (*grad)(r, 0) = -y * sigmoid(-m) * inv_b;
    }
  } else {
    for (Eigen::Index r = 0; r < b; ++r) {
      T mx = logits.row(r).maxCoeff();
      T sum = T(0);
      for (Eigen::Index c = 0; c < logits.cols(); ++c) sum += std::exp(logits(r, c) - mx);
      T lse = mx + std::log(sum);
      total += lse - logits(r, labels[r]);
      if (grad) {
        for (Eigen::Index c = 0; c < logits.cols(); ++c) {
          T p = std::exp(logits(r, c) - lse);
          (*grad)(r, c) = (p - (c == labels[r] ? T(1) : T(0))) * inv_b;
        }
      }
    }
  }
  T mean = total * inv_b;
  if (!std::isfinite(static_cast<double>(mean))) throw NumericError("non-finite loss");
  return mean;
}

template <typename T>
GradientT<T> backprop_impl(const Network& net, const MatT<T>& inputs, std::span<const int> labels,
                           LossKind loss) {
  check_loss_compat(net, loss);
  if (inputs.cols() != net.input_dim()) throw ShapeError("batch width does not match network fan_in");
  if (static_cast<std::size_t>(inputs.rows()) != labels.size())
    throw ShapeError("batch rows and labels differ in length");
  const std::size_t L = net.num_layers();
  std::vector<MatT<T>> weights(L);
  std::vector<MatT<T>> pre(L);
  std::vector<MatT<T>> act(L + 1);
  act[0] = inputs;
  for (std::size_t i = 0; i < L; ++i) {
    const auto& l = net.layer(i);
    weights[i] = l.weights.template cast<T>();
    MatT<T> z = act[i] * weights[i].transpose();
    if (l.spec.has_bias) z.rowwise() += l.bias.template cast<T>().transpose();
    pre[i] = z;
    switch (l.spec.activation) {
      case Activation::kRelu:
        z = z.cwiseMax(T(0));
        break;
      case Activation::kSign:
        z = z.unaryExpr([](T v) { return sign_of(v); });
        break;
      case Activation::kLinear:
        break;
    }
    act[i + 1] = std::move(z);
  }

  GradientT<T> g;
  g.weights.resize(L);
  g.bias.resize(L);
  MatT<T> delta;
  g.loss = loss_and_grad<T>(act[L], labels, loss, &delta);

  for (std::size_t ii = L; ii-- > 0;) {
    const auto& l = net.layer(ii);
    // delta holds d(loss)/d(pre-activation) of layer ii here.
    if (l.spec.trainable) {
      MatT<T> gw = delta.transpose() * act[ii];
      if (l.spec.weights_binary) {
        for (Eigen::Index k = 0; k < gw.size(); ++k)
          if (std::abs(l.latent.data()[k]) > 1.0f) gw.data()[k] = T(0);
      }
      g.weights[ii] = std::move(gw);
      if (l.spec.has_bias) g.bias[ii] = delta.colwise().sum().transpose();
    } else {
      g.weights[ii] = MatT<T>::Zero(l.spec.fan_out, l.spec.fan_in);
      if (l.spec.has_bias) g.bias[ii] = VecT<T>::Zero(l.spec.fan_out);
    }
    if (ii == 0) break;
    MatT<T> da = delta * weights[ii];
    const auto& below = net.layer(ii - 1);
    const MatT<T>& z = pre[ii - 1];
    switch (below.spec.activation) {
      case Activation::kRelu:
        da = da.cwiseProduct(z.unaryExpr([](T v) { return v > T(0) ? T(1) : T(0); }));
        break;
      case Activation::kSign: {
        const T width = static_cast<T>(below.surrogate_width());
        da = da.cwiseProduct(z.unaryExpr([width](T v) { return std::abs(v) <= width ? T(1) / width : T(0); }));
        break;
      }
      case Activation::kLinear:
        break;
    }
    delta = std::move(da);
  }
  return g;
}

bool parameters_finite(const Network& net) {
  for (const auto& l : net.layers()) {
    if (!l.weights.allFinite()) return false;
    if (l.spec.has_bias && !l.bias.allFinite()) return false;
    if (l.spec.weights_binary && !l.latent.allFinite()) return false;
  }
  return true;
}

// Per-network optimizer state: one velocity buffer per trainable tensor.
struct Momentum {
  std::vector<Matrix> weights;
  std::vector<Vector> bias;

  explicit Momentum(const Network& net) {
    for (const auto& l : net.layers()) {
      weights.push_back(Matrix::Zero(l.spec.fan_out, l.spec.fan_in));
      bias.push_back(l.spec.has_bias ? Vector::Zero(l.spec.fan_out) : Vector());
    }
  }
};

template <typename M>
void momentum_step(M& param, M& velocity, const M& grad, float lr, float mu, bool nesterov) {
  if (mu == 0.0f) {
    param -= lr * grad;
    return;
  }
  velocity = mu * velocity + grad;
  if (nesterov) {
    param -= lr * (grad + mu * velocity);
  } else {
    param -= lr * velocity;
  }
}

void apply_gradient(Network& net, Momentum& state, const Gradient& g, const TrainConfig& cfg,
                    double lr) {
  const float flr = static_cast<float>(lr);
  const float mu = static_cast<float>(cfg.momentum);
  for (std::size_t i = 0; i < net.num_layers(); ++i) {
    auto& l = net.mutable_layer(i);
    if (!l.spec.trainable) continue;
    if (l.spec.weights_binary) {
      momentum_step(l.latent, state.weights[i], g.weights[i], flr, mu, cfg.nesterov);
    } else {
      momentum_step(l.weights, state.weights[i], g.weights[i], flr, mu, cfg.nesterov);
    }
    if (l.spec.has_bias) momentum_step(l.bias, state.bias[i], g.bias[i], flr, mu, cfg.nesterov);
  }
}

// Latent weights stay in [-1, 1]; binary weights follow their sign.
void clip_and_rebinarize(Network& net) {
  for (auto& l : net.mutable_layers()) {
    if (!l.spec.weights_binary || !l.spec.trainable) continue;
    l.latent = l.latent.cwiseMax(-1.0f).cwiseMin(1.0f);
    l.weights = l.latent.unaryExpr([](float v) { return sign_of(v); });
  }
}

void gather_batch(const Dataset& data, std::span<const std::size_t> idx, Matrix& x,
                  std::vector<int>& y) {
  x.resize(static_cast<Eigen::Index>(idx.size()), data.inputs.cols());
  y.resize(idx.size());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    x.row(static_cast<Eigen::Index>(r)) = data.inputs.row(static_cast<Eigen::Index>(idx[r]));
    y[r] = data.labels[idx[r]];
  }
}

// Shuffled minibatch stream for one network.
class BatchStream {
 public:
  BatchStream(std::size_t n, int batch_size, std::uint64_t seed)
      : order_(n), batch_(static_cast<std::size_t>(batch_size)), rng_(seed) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
  }
  void reshuffle() { std::shuffle(order_.begin(), order_.end(), rng_); }
  std::size_t num_batches() const { return (order_.size() + batch_ - 1) / batch_; }
  std::span<const std::size_t> batch(std::size_t k) const {
    std::size_t begin = k * batch_;
    std::size_t end = std::min(order_.size(), begin + batch_);
    return {order_.data() + begin, end - begin};
  }

 private:
  std::vector<std::size_t> order_;
  std::size_t batch_;
  Rng rng_;
};

void check_trainable_pair(const Network& net, const Dataset& data, const TrainConfig& cfg) {
  cfg.validate();
  data.validate();
  if (data.input_dim() != net.input_dim()) throw ShapeError("dataset width does not match network");
  check_loss_compat(net, cfg.loss);
  if ((cfg.loss == LossKind::kBinaryCrossEntropy) != data.signed_labels)
    throw ConfigError("loss kind does not match the dataset label kind");
  if (net.is_binary() && !net.has_latent()) throw MissingLatentError("binary network without latent weights");
}

void record_epoch(TrainTrace& trace, const Network& net, const Dataset& train, const Dataset* test,
                  double lr, double loss) {
  trace.train_error.push_back(train_error(net, train));
  trace.test_error.push_back(test ? train_error(net, *test) : std::numeric_limits<double>::quiet_NaN());
  trace.learning_rate.push_back(lr);
  trace.loss.push_back(loss);
}

// Flattened trainable parameters (latent for binary layers) in double.
VectorD trainable_vector(const Network& net) {
  std::size_t n = 0;
  for (const auto& l : net.layers()) {
    if (!l.spec.trainable) continue;
    n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
  }
  VectorD v(static_cast<Eigen::Index>(n));
  Eigen::Index at = 0;
  for (const auto& l : net.layers()) {
    if (!l.spec.trainable) continue;
    const Matrix& w = l.spec.weights_binary ? l.latent : l.weights;
    for (Eigen::Index k = 0; k < w.size(); ++k) v[at++] = w.data()[k];
    for (Eigen::Index k = 0; k < l.bias.size(); ++k) v[at++] = l.bias[k];
  }
  return v;
}

std::size_t closest_to_mean(const std::vector<Network>& replicas) {
  std::vector<VectorD> vs;
  vs.reserve(replicas.size());
  for (const auto& r : replicas) vs.push_back(trainable_vector(r));
  VectorD mean = VectorD::Zero(vs.front().size());
  for (const auto& v : vs) mean += v;
  mean /= static_cast<double>(vs.size());
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < vs.size(); ++a) {
    double d = (vs[a] - mean).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = a;
    }
  }
  return best;
}

// w_a <- w_a - c (w_a - mean), c = min(gamma, 1), over every trainable tensor.
void couple_replicas(std::vector<Network>& replicas, double gamma) {
  const float c = static_cast<float>(std::min(gamma, 1.0));
  const float inv_y = 1.0f / static_cast<float>(replicas.size());
  const std::size_t L = replicas.front().num_layers();
  for (std::size_t i = 0; i < L; ++i) {
    const auto& spec = replicas.front().layer(i).spec;
    if (!spec.trainable) continue;
    auto param = [&](Network& n) -> Matrix& {
      auto& l = n.mutable_layer(i);
      return spec.weights_binary ? l.latent : l.weights;
    };
    Matrix mean = Matrix::Zero(spec.fan_out, spec.fan_in);
    for (auto& r : replicas) mean += param(r);
    mean *= inv_y;
    for (auto& r : replicas) {
      Matrix& w = param(r);
      w -= c * (w - mean);
    }
    if (spec.has_bias) {
      Vector bmean = Vector::Zero(spec.fan_out);
      for (auto& r : replicas) bmean += r.layer(i).bias;
      bmean *= inv_y;
      for (auto& r : replicas) {
        Vector& b = r.mutable_layer(i).bias;
        b -= c * (b - bmean);
      }
    }
  }
}

}  // namespace

std::string_view to_string(LossKind k) {
  return k == LossKind::kCrossEntropy ? "cross_entropy" : "binary_cross_entropy";
}

std::string_view to_string(Schedule s) { return s == Schedule::kCosine ? "cosine" : "constant"; }

LossKind loss_from_string(std::string_view s) {
  if (s == "cross_entropy") return LossKind::kCrossEntropy;
  if (s == "binary_cross_entropy") return LossKind::kBinaryCrossEntropy;
  throw ConfigError("unknown loss '" + std::string(s) + "'");
}

Schedule schedule_from_string(std::string_view s) {
  if (s == "cosine") return Schedule::kCosine;
  if (s == "constant") return Schedule::kConstant;
  throw ConfigError("unknown schedule '" + std::string(s) + "'");
}

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(lr0 > 0.0) || !std::isfinite(lr0)) throw ConfigError("lr0 must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
}

double TrainConfig::learning_rate(int epoch) const {
  return schedule == Schedule::kCosine ? cosine_lr(lr0, epoch, epochs) : lr0;
}

void ReplicaConfig::validate() const {
  if (num_replicas < 2) throw ConfigError("RSGD needs at least two replicas");
  // gamma0 = 0 turns the coupling off entirely.
  if (!(gamma0 >= 0.0) || !(gamma1 >= 0.0)) throw ConfigError("gamma0 and gamma1 must be non-negative");
}

double ReplicaConfig::gamma(int epoch) const { return gamma0 * std::pow(1.0 + gamma1, epoch); }

void AdvConfig::validate() const {
  if (replication < 1) throw ConfigError("ADV replication R must be >= 1");
  if (!(zero_pixel_fraction >= 0.0 && zero_pixel_fraction <= 1.0))
    throw ConfigError("zero_pixel_fraction must lie in [0, 1]");
  pretrain.validate();
  finetune.validate();
}

double cosine_lr(double lr0, double t, double total) {
  if (total <= 0.0) return lr0;
  return lr0 * (1.0 + std::cos(std::numbers::pi * t / total)) / 2.0;
}

Gradient backprop(const Network& net, const Matrix& inputs, std::span<const int> labels,
                  LossKind loss) {
  return backprop_impl<float>(net, inputs, labels, loss);
}

GradientD backprop_double(const Network& net, const MatrixD& inputs, std::span<const int> labels,
                          LossKind loss) {
  return backprop_impl<double>(net, inputs, labels, loss);
}

double mean_loss(const Network& net, const Dataset& data, LossKind loss) {
  check_loss_compat(net, loss);
  Matrix logits = forward(net, data.inputs);
  return loss_and_grad<float>(logits, data.labels, loss, nullptr);
}

TrainResult sgd_train(Network net, const Dataset& train, const TrainConfig& cfg, const Dataset* test) {
  check_trainable_pair(net, train, cfg);
  TrainResult result;
  Momentum state(net);
  BatchStream stream(train.size(), cfg.batch_size, cfg.seed);
  Matrix x;
  std::vector<int> y;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cfg.learning_rate(epoch);
    stream.reshuffle();
    double loss_sum = 0.0;
    for (std::size_t k = 0; k < stream.num_batches(); ++k) {
      auto idx = stream.batch(k);
      gather_batch(train, idx, x, y);
      Gradient g = backprop(net, x, y, cfg.loss);
      loss_sum += static_cast<double>(g.loss) * static_cast<double>(idx.size());
      apply_gradient(net, state, g, cfg, lr);
      clip_and_rebinarize(net);
    }
    if (!parameters_finite(net)) throw DivergenceError(epoch, "non-finite parameters");
    record_epoch(result.trace, net, train, test, lr, loss_sum / static_cast<double>(train.size()));
  }
  result.final_train_error = train_error(net, train);
  result.net = std::move(net);
  return result;
}

TrainResult rsgd_train(const Network& tmpl, const Dataset& train, const TrainConfig& cfg,
                       const ReplicaConfig& rep, const Dataset* test) {
  check_trainable_pair(tmpl, train, cfg);
  rep.validate();
  const auto y_count = static_cast<std::size_t>(rep.num_replicas);
  std::vector<Network> replicas(y_count, tmpl);
  std::vector<Momentum> states;
  std::vector<BatchStream> streams;
  for (std::size_t a = 0; a < y_count; ++a) {
    states.emplace_back(tmpl);
    std::uint64_t s = rep.split_streams ? mix_seed(cfg.seed, a) : cfg.seed;
    streams.emplace_back(train.size(), cfg.batch_size, s);
  }
  TrainResult result;
  Matrix x;
  std::vector<int> labels;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cfg.learning_rate(epoch);
    const double gamma = rep.gamma(epoch);
    for (auto& s : streams) s.reshuffle();
    double loss_sum = 0.0;
    for (std::size_t k = 0; k < streams.front().num_batches(); ++k) {
      for (std::size_t a = 0; a < y_count; ++a) {
        auto idx = streams[a].batch(k);
        gather_batch(train, idx, x, labels);
        Gradient g = backprop(replicas[a], x, labels, cfg.loss);
        loss_sum += static_cast<double>(g.loss) * static_cast<double>(idx.size());
        apply_gradient(replicas[a], states[a], g, cfg, lr);
      }
      if (gamma > 0.0) couple_replicas(replicas, gamma);
      for (auto& r : replicas) clip_and_rebinarize(r);
    }
    for (const auto& r : replicas)
      if (!parameters_finite(r)) throw DivergenceError(epoch, "non-finite replica parameters");
    const auto& center = replicas[closest_to_mean(replicas)];
    record_epoch(result.trace, center, train, test, lr,
                 loss_sum / static_cast<double>(train.size() * y_count));
  }
  result.net = std::move(replicas[closest_to_mean(replicas)]);
  result.final_train_error = train_error(result.net, train);
  return result;
}

void elastic_coupling(std::vector<Network>& replicas, double gamma) {
  if (replicas.size() < 2) return;
  couple_replicas(replicas, gamma);
}

Dataset make_poisoned_dataset(const Dataset& data, const AdvConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  data.validate();
  const Eigen::Index p = data.inputs.rows();
  const Eigen::Index copies = cfg.replication + (cfg.keep_clean_copy ? 1 : 0);
  Dataset out;
  out.num_classes = data.num_classes;
  out.signed_labels = data.signed_labels;
  out.inputs.resize(p * copies, data.inputs.cols());
  out.labels.reserve(static_cast<std::size_t>(p * copies));
  Eigen::Index at = 0;
  if (cfg.keep_clean_copy) {
    out.inputs.topRows(p) = data.inputs;
    out.labels = data.labels;
    at = p;
  }
  for (int r = 0; r < cfg.replication; ++r) {
    Dataset copy = randomize_labels(data, mix_seed(seed, 2 * r));
    copy = zero_pixels(copy, cfg.zero_pixel_fraction, mix_seed(seed, 2 * r + 1));
    out.inputs.middleRows(at, p) = copy.inputs;
    out.labels.insert(out.labels.end(), copy.labels.begin(), copy.labels.end());
    at += p;
  }
  return out;
}

TrainResult adv_pretrain(const Network& init, const Dataset& data, const AdvConfig& cfg,
                         std::uint64_t seed) {
  Dataset poisoned = make_poisoned_dataset(data, cfg, seed);
  return sgd_train(init, poisoned, cfg.pretrain);
}

TrainResult adv_init_train(const Network& init, const Dataset& data, const AdvConfig& cfg,
                           std::uint64_t seed, const Dataset* test) {
  TrainResult stage1 = adv_pretrain(init, data, cfg, seed);
  TrainConfig fine = cfg.finetune;
  fine.momentum = 0.0;
  fine.nesterov = false;
  TrainResult stage2 = sgd_train(std::move(stage1.net), data, fine, test);
  TrainTrace trace = std::move(stage1.trace);
  // Stage-1 errors were measured on the poisoned set; keep them as recorded.
  trace.pretrain_epochs = static_cast<int>(trace.size());
  auto append = [](std::vector<double>& dst, const std::vector<double>& src) {
    dst.insert(dst.end(), src.begin(), src.end());
  };
  append(trace.train_error, stage2.trace.train_error);
  append(trace.test_error, stage2.trace.test_error);
  append(trace.learning_rate, stage2.trace.learning_rate);
  append(trace.loss, stage2.trace.loss);
  stage2.trace = std::move(trace);
  return stage2;
}

}  // namespace symnet
