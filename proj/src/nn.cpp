#include "wjdot/nn.hpp"

#include <cmath>
#include <string>

#include "wjdot/rng.hpp"

namespace wjdot::nn {

namespace {

MatrixXd xavier_matrix(std::size_t out, std::size_t in, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> dist(-bound, bound);
  MatrixXd w(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in));
  for (Eigen::Index c = 0; c < w.cols(); ++c)
    for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = dist(rng);
  return w;
}

void append(VectorXd& flat, Eigen::Index& pos, const MatrixXd& m) {
  flat.segment(pos, m.size()) = Eigen::Map<const VectorXd>(m.data(), m.size());
  pos += m.size();
}

void extract(const VectorXd& flat, Eigen::Index& pos, MatrixXd& m) {
  Eigen::Map<VectorXd>(m.data(), m.size()) = flat.segment(pos, m.size());
  pos += m.size();
}

void check_targets(const MatrixXd& probs, const MatrixXd& targets) {
  if (probs.rows() != targets.rows() || probs.cols() != targets.cols())
    throw DimensionError("targets are " + std::to_string(targets.rows()) + "x" +
                         std::to_string(targets.cols()) + ", predictions are " +
                         std::to_string(probs.rows()) + "x" + std::to_string(probs.cols()));
}

}  // namespace

MlpExtractor::MlpExtractor(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw DimensionError("extractor needs at least one layer");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    if (layer.weight.rows() == 0 || layer.weight.cols() == 0)
      throw DimensionError("layer " + std::to_string(l) + " has a zero dimension");
    if (layer.bias.size() != layer.weight.rows())
      throw DimensionError("layer " + std::to_string(l) + " bias size mismatch");
    if (l > 0 && layer.weight.cols() != layers_[l - 1].weight.rows())
      throw DimensionError("layer " + std::to_string(l) + " input does not match previous output");
  }
}

MlpExtractor MlpExtractor::xavier(std::span<const std::size_t> dims, std::uint64_t seed) {
  if (dims.size() < 2) throw DimensionError("extractor dims need input and output sizes");
  for (auto d : dims)
    if (d == 0) throw DimensionError("extractor dims must be positive");
  Rng rng = make_rng(seed, 0x6578);
  std::vector<DenseLayer> layers;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l)
    layers.push_back({xavier_matrix(dims[l + 1], dims[l], rng),
                      VectorXd::Zero(static_cast<Eigen::Index>(dims[l + 1]))});
  return MlpExtractor(std::move(layers));
}

std::size_t MlpExtractor::input_dim() const {
  return layers_.empty() ? 0 : static_cast<std::size_t>(layers_.front().weight.cols());
}

std::size_t MlpExtractor::output_dim() const {
  return layers_.empty() ? 0 : static_cast<std::size_t>(layers_.back().weight.rows());
}

std::vector<std::size_t> MlpExtractor::dims() const {
  std::vector<std::size_t> d;
  if (layers_.empty()) return d;
  d.push_back(input_dim());
  for (const auto& layer : layers_) d.push_back(static_cast<std::size_t>(layer.weight.rows()));
  return d;
}

MatrixXd MlpExtractor::embed(const MatrixXd& inputs) const {
  if (static_cast<std::size_t>(inputs.cols()) != input_dim())
    throw DimensionError("input dimension " + std::to_string(inputs.cols()) + ", extractor expects " +
                         std::to_string(input_dim()));
  MatrixXd h = inputs;
  for (const auto& layer : layers_) {
    MatrixXd a = h * layer.weight.transpose();
    a.rowwise() += layer.bias.transpose();
    h = a.array().tanh().matrix();
  }
  return h;
}

std::size_t MlpExtractor::num_parameters() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) n += static_cast<std::size_t>(layer.weight.size() + layer.bias.size());
  return n;
}

VectorXd MlpExtractor::parameters() const {
  VectorXd flat(static_cast<Eigen::Index>(num_parameters()));
  Eigen::Index pos = 0;
  for (const auto& layer : layers_) {
    append(flat, pos, layer.weight);
    append(flat, pos, layer.bias);
  }
  return flat;
}

void MlpExtractor::set_parameters(const VectorXd& flat) {
  if (static_cast<std::size_t>(flat.size()) != num_parameters())
    throw DimensionError("extractor expects " + std::to_string(num_parameters()) + " parameters");
  Eigen::Index pos = 0;
  for (auto& layer : layers_) {
    extract(flat, pos, layer.weight);
    MatrixXd b = layer.bias;
    extract(flat, pos, b);
    layer.bias = b;
  }
}

bool operator==(const MlpExtractor& x, const MlpExtractor& y) {
  return x.dims() == y.dims() && x.parameters() == y.parameters();
}

SoftmaxClassifier::SoftmaxClassifier(MatrixXd weight, VectorXd bias)
    : weight_(std::move(weight)), bias_(std::move(bias)) {
  if (weight_.rows() == 0 || weight_.cols() == 0)
    throw DimensionError("classifier has a zero dimension");
  if (bias_.size() != weight_.rows()) throw DimensionError("classifier bias size mismatch");
}

SoftmaxClassifier SoftmaxClassifier::xavier(std::size_t embedding_dim, std::size_t num_classes,
                                            std::uint64_t seed) {
  if (embedding_dim == 0 || num_classes == 0) throw DimensionError("classifier dims must be positive");
  Rng rng = make_rng(seed, 0x736d);
  return SoftmaxClassifier(xavier_matrix(num_classes, embedding_dim, rng),
                           VectorXd::Zero(static_cast<Eigen::Index>(num_classes)));
}

MatrixXd SoftmaxClassifier::logits(const MatrixXd& embeddings) const {
  if (embeddings.cols() != weight_.cols())
    throw DimensionError("embedding dimension " + std::to_string(embeddings.cols()) +
                         ", classifier expects " + std::to_string(weight_.cols()));
  MatrixXd z = embeddings * weight_.transpose();
  z.rowwise() += bias_.transpose();
  return z;
}

MatrixXd SoftmaxClassifier::predict_proba(const MatrixXd& embeddings) const {
  return softmax_rows(logits(embeddings));
}

std::vector<std::size_t> SoftmaxClassifier::predict(const MatrixXd& embeddings) const {
  const MatrixXd z = logits(embeddings);
  std::vector<std::size_t> out(static_cast<std::size_t>(z.rows()));
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    Eigen::Index k = 0;
    z.row(i).maxCoeff(&k);
    out[static_cast<std::size_t>(i)] = static_cast<std::size_t>(k);
  }
  return out;
}

std::size_t SoftmaxClassifier::num_parameters() const {
  return static_cast<std::size_t>(weight_.size() + bias_.size());
}

VectorXd SoftmaxClassifier::parameters() const {
  VectorXd flat(static_cast<Eigen::Index>(num_parameters()));
  Eigen::Index pos = 0;
  append(flat, pos, weight_);
  append(flat, pos, bias_);
  return flat;
}

void SoftmaxClassifier::set_parameters(const VectorXd& flat) {
  if (static_cast<std::size_t>(flat.size()) != num_parameters())
    throw DimensionError("classifier expects " + std::to_string(num_parameters()) + " parameters");
  Eigen::Index pos = 0;
  extract(flat, pos, weight_);
  MatrixXd b = bias_;
  extract(flat, pos, b);
  bias_ = b;
}

bool operator==(const SoftmaxClassifier& x, const SoftmaxClassifier& y) {
  return x.weight_.rows() == y.weight_.rows() && x.weight_.cols() == y.weight_.cols() &&
         x.parameters() == y.parameters();
}

MatrixXd softmax_rows(const MatrixXd& logits) {
  MatrixXd p(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    p.row(i) = (logits.row(i).array() - m).exp().matrix();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

ForwardResult forward(const MlpExtractor& g, const SoftmaxClassifier& f, const VectorXd& x) {
  const MatrixXd z = g.embed(x.transpose());
  const MatrixXd p = f.predict_proba(z);
  return {z.row(0).transpose(), p.row(0).transpose()};
}

double cross_entropy(const VectorXd& pred, const VectorXd& target) {
  if (pred.size() != target.size()) throw DimensionError("prediction and target sizes differ");
  return -(target.array() * pred.array().max(kLogFloor).log()).sum();
}

MatrixXd extract_embeddings(const MlpExtractor& g, const MatrixXd& inputs) { return g.embed(inputs); }

std::vector<VectorXd> extract_embeddings(const MlpExtractor& g, std::span<const VectorXd> inputs) {
  if (inputs.empty()) return {};
  const MatrixXd z = g.embed(stack_rows(inputs));
  std::vector<VectorXd> out;
  out.reserve(inputs.size());
  for (Eigen::Index i = 0; i < z.rows(); ++i) out.emplace_back(z.row(i).transpose());
  return out;
}

LabelLoss soft_target_loss(const MatrixXd& probs, const MatrixXd& targets, LabelCost cost) {
  check_targets(probs, targets);
  LabelLoss out;
  if (cost == LabelCost::kCrossEntropy) {
    const auto floored = probs.array().max(kLogFloor);
    out.value = -(targets.array() * floored.log()).sum();
    out.grad = (probs.array() >= kLogFloor).select(-targets.array() / probs.array(), 0.0).matrix();
  } else {
    const VectorXd r = targets.rowwise().sum();
    out.value = (r.array() * probs.rowwise().squaredNorm().array()).sum() -
                2.0 * (probs.array() * targets.array()).sum() + r.sum();
    out.grad = 2.0 * (probs.array().colwise() * r.array() - targets.array()).matrix();
  }
  return out;
}

MatrixXd softmax_backward(const MatrixXd& probs, const MatrixXd& grad_probs) {
  const VectorXd inner = (probs.array() * grad_probs.array()).rowwise().sum();
  return (probs.array() * (grad_probs.array().colwise() - inner.array())).matrix();
}

Gradients classifier_backward(const SoftmaxClassifier& f, const MatrixXd& embeddings,
                              const MatrixXd& targets, LabelCost cost) {
  const MatrixXd p = f.predict_proba(embeddings);
  const LabelLoss loss = soft_target_loss(p, targets, cost);
  const MatrixXd dlogits = softmax_backward(p, loss.grad);
  const MatrixXd dw = dlogits.transpose() * embeddings;
  const VectorXd db = dlogits.colwise().sum().transpose();
  Gradients out;
  out.loss = loss.value;
  out.classifier.resize(dw.size() + db.size());
  out.classifier << Eigen::Map<const VectorXd>(dw.data(), dw.size()), db;
  return out;
}

Gradients backward(const MlpExtractor& g, const SoftmaxClassifier& f, const MatrixXd& inputs,
                   const MatrixXd& targets, LabelCost cost) {
  if (static_cast<std::size_t>(inputs.cols()) != g.input_dim())
    throw DimensionError("input dimension mismatch");
  const auto& layers = g.layers();
  std::vector<MatrixXd> acts;  // acts[0] = inputs, acts[l+1] = tanh output of layer l
  acts.reserve(layers.size() + 1);
  acts.push_back(inputs);
  for (const auto& layer : layers) {
    MatrixXd a = acts.back() * layer.weight.transpose();
    a.rowwise() += layer.bias.transpose();
    acts.push_back(a.array().tanh().matrix());
  }
  const MatrixXd& z = acts.back();
  const MatrixXd p = f.predict_proba(z);
  const LabelLoss loss = soft_target_loss(p, targets, cost);
  const MatrixXd dlogits = softmax_backward(p, loss.grad);

  Gradients out;
  out.loss = loss.value;
  {
    const MatrixXd dw = dlogits.transpose() * z;
    const VectorXd db = dlogits.colwise().sum().transpose();
    out.classifier.resize(dw.size() + db.size());
    out.classifier << Eigen::Map<const VectorXd>(dw.data(), dw.size()), db;
  }

  out.extractor.resize(static_cast<Eigen::Index>(g.num_parameters()));
  // Layout offsets, filled back to front.
  std::vector<Eigen::Index> offset(layers.size());
  Eigen::Index pos = 0;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    offset[l] = pos;
    pos += layers[l].weight.size() + layers[l].bias.size();
  }
  MatrixXd dh = dlogits * f.weight();
  for (std::size_t l = layers.size(); l-- > 0;) {
    const MatrixXd da = (dh.array() * (1.0 - acts[l + 1].array().square())).matrix();
    const MatrixXd dw = da.transpose() * acts[l];
    const VectorXd db = da.colwise().sum().transpose();
    out.extractor.segment(offset[l], dw.size()) = Eigen::Map<const VectorXd>(dw.data(), dw.size());
    out.extractor.segment(offset[l] + dw.size(), db.size()) = db;
    if (l > 0) dh = da * layers[l].weight;
  }
  return out;
}

Adam::Adam(std::size_t num_parameters, AdamOptions options)
    : options_(options),
      m_(VectorXd::Zero(static_cast<Eigen::Index>(num_parameters))),
      v_(VectorXd::Zero(static_cast<Eigen::Index>(num_parameters))) {}

void Adam::step(VectorXd& params, const VectorXd& grad) {
  if (params.size() != m_.size() || grad.size() != m_.size())
    throw DimensionError("Adam state has " + std::to_string(m_.size()) + " parameters");
  ++steps_;
  m_ = options_.beta1 * m_ + (1.0 - options_.beta1) * grad;
  v_ = options_.beta2 * v_ + (1.0 - options_.beta2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(options_.beta1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(options_.beta2, static_cast<double>(steps_));
  params.array() -= options_.learning_rate * (m_.array() / c1) /
                    ((v_.array() / c2).sqrt() + options_.epsilon);
}

}  // namespace wjdot::nn
