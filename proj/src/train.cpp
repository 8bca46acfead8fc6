#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "wjdot/nn.hpp"
#include "wjdot/rng.hpp"

namespace wjdot::nn {

namespace {

struct Batch {
  MatrixXd inputs;
  MatrixXd targets;  // one-hot rows scaled by 1/N_j
};

Batch weighted_batch(std::span<const SourceDomain> sources) {
  const PooledSamples pooled = pool(sources);
  Batch b{pooled.embeddings, pooled.labels};
  for (Eigen::Index i = 0; i < b.targets.rows(); ++i)
    b.targets.row(i) /= static_cast<double>(pooled.counts[pooled.owner[static_cast<std::size_t>(i)]]);
  return b;
}

double accuracy(const MlpExtractor& g, const SoftmaxClassifier& f, const Batch& batch) {
  if (batch.inputs.rows() == 0) return 0.0;
  const auto pred = f.predict(g.embed(batch.inputs));
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i)
    if (pred[i] == argmax(batch.targets.row(static_cast<Eigen::Index>(i)).transpose())) ++hits;
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

double weighted_loss(const MlpExtractor& g, const SoftmaxClassifier& f, const Batch& batch) {
  if (batch.inputs.rows() == 0) return 0.0;
  return soft_target_loss(f.predict_proba(g.embed(batch.inputs)), batch.targets,
                          LabelCost::kCrossEntropy)
      .value;
}

}  // namespace

std::pair<std::vector<SourceDomain>, std::vector<SourceDomain>> split_validation(
    std::span<const SourceDomain> sources, std::uint64_t seed) {
  std::vector<SourceDomain> train, validation;
  for (std::size_t j = 0; j < sources.size(); ++j) {
    const auto& src = sources[j];
    Rng rng = make_rng(seed, 0x76000 + j);
    SourceDomain tr{src.id, {}, src.group}, va{src.id, {}, src.group};
    const std::size_t k = src.num_classes();
    std::vector<std::vector<std::size_t>> by_class(k);
    for (std::size_t i = 0; i < src.size(); ++i) by_class[argmax(src.samples[i].label)].push_back(i);
    std::vector<bool> held(src.size(), false);
    for (const auto& members : by_class) {
      if (members.size() < 2) continue;
      std::uniform_int_distribution<std::size_t> pick(0, members.size() - 1);
      held[members[pick(rng)]] = true;
    }
    for (std::size_t i = 0; i < src.size(); ++i) (held[i] ? va : tr).samples.push_back(src.samples[i]);
    train.push_back(std::move(tr));
    validation.push_back(std::move(va));
  }
  return {std::move(train), std::move(validation)};
}

double si_objective(const MlpExtractor& g, const SoftmaxClassifier& f,
                    std::span<const SourceDomain> sources) {
  std::vector<SourceDomain> nonempty;
  for (const auto& s : sources)
    if (s.size() > 0) nonempty.push_back(s);
  if (nonempty.empty()) return 0.0;
  return weighted_loss(g, f, weighted_batch(nonempty));
}

SiModel train_si(std::span<const SourceDomain> sources, const SiConfig& config) {
  if (sources.empty()) throw DimensionError("no source domains");
  if (config.batch_size == 0) throw ConfigError("batch size must be positive");
  if (config.embedding_dim == 0) throw ConfigError("embedding dimension must be positive");
  std::set<std::size_t> classes;
  for (const auto& s : sources) {
    const auto report = validate_domain(s);
    if (!report.ok()) throw DimensionError("source '" + s.id + "': " + report.violations.front());
    if (s.dim() != sources.front().dim() || s.num_classes() != sources.front().num_classes())
      throw DimensionError("source '" + s.id + "' dimensions differ from the first source");
    for (const auto& sample : s.samples) classes.insert(argmax(sample.label));
  }
  if (classes.size() < 2) throw DimensionError("training needs at least two classes present");

  const std::size_t d_in = sources.front().dim();
  const std::size_t k = sources.front().num_classes();

  auto [train, validation] = split_validation(sources, config.seed);
  const Batch full_train = weighted_batch(train);
  std::vector<SourceDomain> val_nonempty;
  for (auto& v : validation)
    if (v.size() > 0) val_nonempty.push_back(std::move(v));
  const bool has_validation = !val_nonempty.empty();
  const Batch val = has_validation ? weighted_batch(val_nonempty) : Batch{};

  std::vector<std::size_t> dims{d_in};
  dims.insert(dims.end(), config.hidden.begin(), config.hidden.end());
  dims.push_back(config.embedding_dim);

  SiModel model;
  model.extractor = MlpExtractor::xavier(dims, mix_seed(config.seed, 1));
  model.classifier = SoftmaxClassifier::xavier(config.embedding_dim, k, mix_seed(config.seed, 2));

  MlpExtractor g = model.extractor;
  SoftmaxClassifier f = model.classifier;
  VectorXd theta_g = g.parameters(), theta_f = f.parameters();
  Adam adam_g(theta_g.size(), config.adam), adam_f(theta_f.size(), config.adam);

  auto record = [&](int epoch) {
    SiEpoch e;
    e.epoch = epoch;
    e.train_objective = weighted_loss(g, f, full_train);
    if (!std::isfinite(e.train_objective)) {
      std::ostringstream msg;
      msg << "non-finite training loss at epoch " << epoch << " (lr " << config.adam.learning_rate
          << ", " << full_train.inputs.rows() << " samples)";
      throw NumericError(msg.str());
    }
    if (has_validation) {
      e.validation_loss = weighted_loss(g, f, val);
      e.validation_accuracy = accuracy(g, f, val);
    } else {
      e.validation_loss = e.train_objective;
      e.validation_accuracy = accuracy(g, f, full_train);
    }
    model.history.push_back(e);
    return e.validation_loss;
  };

  double best = record(0);
  Rng rng = make_rng(config.seed, 3);
  const auto n = static_cast<std::size_t>(full_train.inputs.rows());
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), Eigen::Index{0});

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t stop = std::min(n, start + config.batch_size);
      const auto rows = static_cast<Eigen::Index>(stop - start);
      MatrixXd xb(rows, full_train.inputs.cols()), qb(rows, full_train.targets.cols());
      for (Eigen::Index r = 0; r < rows; ++r) {
        xb.row(r) = full_train.inputs.row(order[start + static_cast<std::size_t>(r)]);
        qb.row(r) = full_train.targets.row(order[start + static_cast<std::size_t>(r)]);
      }
      const Gradients grads = backward(g, f, xb, qb, LabelCost::kCrossEntropy);
      adam_g.step(theta_g, grads.extractor);
      adam_f.step(theta_f, grads.classifier);
      g.set_parameters(theta_g);
      f.set_parameters(theta_f);
    }
    const double loss = record(epoch);
    if (loss < best) {
      best = loss;
      model.best_epoch = epoch;
      model.extractor = g;
      model.classifier = f;
    } else if (config.patience > 0 && epoch - model.best_epoch >= config.patience) {
      break;
    }
  }
  return model;
}

}  // namespace wjdot::nn
