#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "wjdot/core.hpp"

// Small feed-forward models with hand-written reverse-mode gradients.
//
// Batches are row-major in the statistical sense: one sample per row.
namespace wjdot::nn {

struct DenseLayer {
  MatrixXd weight;  // out x in
  VectorXd bias;    // out
};

// input -> tanh(W1 x + b1) -> ... -> tanh(WL h + bL) = embedding.
class MlpExtractor {
 public:
  MlpExtractor() = default;
  explicit MlpExtractor(std::vector<DenseLayer> layers);

  // dims = {d_in, hidden..., d_g}. Uniform Xavier weights, zero biases.
  static MlpExtractor xavier(std::span<const std::size_t> dims, std::uint64_t seed);

  std::size_t input_dim() const;
  std::size_t output_dim() const;
  std::vector<std::size_t> dims() const;
  const std::vector<DenseLayer>& layers() const { return layers_; }

  MatrixXd embed(const MatrixXd& inputs) const;

  std::size_t num_parameters() const;
  // Flat order: per layer, weight (column-major) then bias.
  VectorXd parameters() const;
  void set_parameters(const VectorXd& flat);

  friend bool operator==(const MlpExtractor& x, const MlpExtractor& y);

 private:
  std::vector<DenseLayer> layers_;
};

// softmax(W z + b). Used both for the source-trained classifier and for the
// adapted target classifier.
class SoftmaxClassifier {
 public:
  SoftmaxClassifier() = default;
  SoftmaxClassifier(MatrixXd weight, VectorXd bias);

  static SoftmaxClassifier xavier(std::size_t embedding_dim, std::size_t num_classes,
                                  std::uint64_t seed);

  std::size_t input_dim() const { return static_cast<std::size_t>(weight_.cols()); }
  std::size_t num_classes() const { return static_cast<std::size_t>(weight_.rows()); }
  const MatrixXd& weight() const { return weight_; }
  const VectorXd& bias() const { return bias_; }

  MatrixXd logits(const MatrixXd& embeddings) const;
  MatrixXd predict_proba(const MatrixXd& embeddings) const;
  std::vector<std::size_t> predict(const MatrixXd& embeddings) const;

  std::size_t num_parameters() const;
  VectorXd parameters() const;  // weight (column-major) then bias
  void set_parameters(const VectorXd& flat);

  friend bool operator==(const SoftmaxClassifier& x, const SoftmaxClassifier& y);

 private:
  MatrixXd weight_;
  VectorXd bias_;
};

// Row-wise, max-shifted.
MatrixXd softmax_rows(const MatrixXd& logits);

struct ForwardResult {
  VectorXd embedding;
  VectorXd probabilities;
};

ForwardResult forward(const MlpExtractor& g, const SoftmaxClassifier& f, const VectorXd& x);

// -log(max(pred[class], 1e-12)) for a one-hot target.
double cross_entropy(const VectorXd& pred, const VectorXd& target);

MatrixXd extract_embeddings(const MlpExtractor& g, const MatrixXd& inputs);
std::vector<VectorXd> extract_embeddings(const MlpExtractor& g, std::span<const VectorXd> inputs);

// Loss of predictions P against nonnegative soft targets Q (rows need not be
// normalised; a row of Q is the mass-weighted sum of the one-hot references
// that row is compared with).
//   cross entropy: -sum_tk Q_tk log max(P_tk, 1e-12)
//   squared L2:     sum_t r_t |p_t|^2 - 2 <p_t, Q_t> + r_t,  r_t = sum_k Q_tk
// The squared-L2 form equals sum over references of mass * |p_t - y|^2 for
// one-hot references y.
struct LabelLoss {
  double value = 0.0;
  MatrixXd grad;  // dL/dP
};

LabelLoss soft_target_loss(const MatrixXd& probs, const MatrixXd& targets, LabelCost cost);

// Pulls dL/dP back through a row-wise softmax to dL/dlogits.
MatrixXd softmax_backward(const MatrixXd& probs, const MatrixXd& grad_probs);

struct Gradients {
  double loss = 0.0;
  VectorXd extractor;   // same layout as MlpExtractor::parameters()
  VectorXd classifier;  // same layout as SoftmaxClassifier::parameters()
};

// Exact gradient of soft_target_loss(f(g(inputs)), targets) w.r.t. every
// parameter of g and f.
Gradients backward(const MlpExtractor& g, const SoftmaxClassifier& f, const MatrixXd& inputs,
                   const MatrixXd& targets, LabelCost cost = LabelCost::kCrossEntropy);

// Same, for a classifier on fixed embeddings. Gradients::extractor is empty.
Gradients classifier_backward(const SoftmaxClassifier& f, const MatrixXd& embeddings,
                              const MatrixXd& targets, LabelCost cost = LabelCost::kCrossEntropy);

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Adam {
 public:
  Adam(std::size_t num_parameters, AdamOptions options = {});

  void step(VectorXd& params, const VectorXd& grad);

  std::int64_t steps() const { return steps_; }
  const VectorXd& first_moment() const { return m_; }
  const VectorXd& second_moment() const { return v_; }
  const AdamOptions& options() const { return options_; }

 private:
  AdamOptions options_;
  VectorXd m_;
  VectorXd v_;
  std::int64_t steps_ = 0;
};

struct SiConfig {
  std::vector<std::size_t> hidden{64, 64};
  std::size_t embedding_dim = 32;
  int epochs = 200;
  std::size_t batch_size = 32;
  int patience = 20;  // epochs without validation improvement; <= 0 disables
  AdamOptions adam{};
  std::uint64_t seed = 0;
};

struct SiEpoch {
  int epoch = 0;
  double train_objective = 0.0;  // sum_j mean loss over source j
  double validation_loss = 0.0;  // same weighting on the held-out samples
  double validation_accuracy = 0.0;
};

struct SiModel {
  MlpExtractor extractor;
  SoftmaxClassifier classifier;
  std::vector<SiEpoch> history;  // entry 0 is the initialisation
  int best_epoch = 0;
};

// One sample of every class held out per source, when that class has at
// least two samples there. Returns (train, validation) with the same ids.
std::pair<std::vector<SourceDomain>, std::vector<SourceDomain>> split_validation(
    std::span<const SourceDomain> sources, std::uint64_t seed);

// Cross-entropy training of extractor + softmax on pooled sources, each
// source weighted by 1/N_j. Early stopping on the validation split; the
// returned parameters are those of the best validation epoch.
SiModel train_si(std::span<const SourceDomain> sources, const SiConfig& config);

// The objective above evaluated on a fixed set of domains.
double si_objective(const MlpExtractor& g, const SoftmaxClassifier& f,
                    std::span<const SourceDomain> sources);

}  // namespace wjdot::nn
