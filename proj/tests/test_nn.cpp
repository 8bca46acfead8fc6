#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "wjdot/nn.hpp"
#include "wjdot/rng.hpp"

using namespace wjdot;
using namespace wjdot::nn;

namespace {

std::vector<SourceDomain> blobs(std::uint64_t seed, std::size_t per_source, std::size_t sources) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 0.5);
  std::vector<SourceDomain> out;
  for (std::size_t j = 0; j < sources; ++j) {
    SourceDomain s{"s" + std::to_string(j), {}, Group::kA};
    for (std::size_t i = 0; i < per_source; ++i) {
      const std::size_t c = i % 2;
      VectorXd x(2);
      x << (c == 0 ? -2.0 : 2.0) + g(rng), g(rng);
      s.samples.push_back({x, one_hot(c, 2)});
    }
    out.push_back(std::move(s));
  }
  return out;
}

double accuracy(const MlpExtractor& g, const SoftmaxClassifier& f, const std::vector<SourceDomain>& d) {
  std::size_t ok = 0, n = 0;
  for (const auto& s : d)
    for (const auto& x : s.samples) {
      ok += argmax(forward(g, f, x.embedding).probabilities) == argmax(x.label);
      ++n;
    }
  return static_cast<double>(ok) / static_cast<double>(n);
}

}  // namespace

TEST_CASE("xavier initialisation") {
  const std::vector<std::size_t> dims{5, 7, 3};
  const auto a = MlpExtractor::xavier(dims, 42), b = MlpExtractor::xavier(dims, 42);
  CHECK(a == b);
  CHECK_FALSE(a == MlpExtractor::xavier(dims, 43));
  for (const auto& layer : a.layers()) {
    CHECK(layer.bias.isZero());
    const double limit = std::sqrt(6.0 / static_cast<double>(layer.weight.rows() + layer.weight.cols()));
    CHECK(layer.weight.cwiseAbs().maxCoeff() <= limit);
  }
  const auto f = SoftmaxClassifier::xavier(3, 4, 1);
  CHECK(f.bias().isZero());
  CHECK(f.weight().rows() == 4);
}

TEST_CASE("forward and softmax") {
  const std::vector<std::size_t> dims{3, 4, 2};
  MlpExtractor g = MlpExtractor::xavier(dims, 1);
  g.set_parameters(VectorXd::Zero(static_cast<Eigen::Index>(g.num_parameters())));
  SoftmaxClassifier f(MatrixXd::Zero(4, 2), VectorXd::Zero(4));
  VectorXd x(3);
  x << 1, -2, 3;
  const auto r = forward(g, f, x);
  CHECK(r.embedding.isZero());
  CHECK((r.probabilities - VectorXd::Constant(4, 0.25)).norm() < 1e-15);

  std::mt19937_64 rng(2);
  const MatrixXd z = oracle::random_matrix(5, 6, rng, -30.0, 30.0);
  const MatrixXd p = softmax_rows(z);
  CHECK((p.rowwise().sum() - VectorXd::Ones(5)).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((p.array() >= 0.0).all());
  const MatrixXd shifted = softmax_rows(z.array() + 123.0);
  CHECK((p - shifted).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(softmax_rows(MatrixXd::Constant(1, 3, 1e300)).allFinite());
}

TEST_CASE("cross_entropy examples") {
  CHECK(cross_entropy(one_hot(2, 4), one_hot(2, 4)) == 0.0);
  CHECK(cross_entropy(VectorXd::Constant(25, 1.0 / 25), one_hot(3, 25)) == doctest::Approx(std::log(25.0)));
  CHECK(cross_entropy(one_hot(0, 2), one_hot(1, 2)) == doctest::Approx(27.631021115928547));
}

TEST_CASE("softmax + cross entropy gradient closed form") {
  std::mt19937_64 rng(4);
  const MatrixXd z = oracle::random_matrix(1, 5, rng, -2.0, 2.0);
  const MatrixXd p = softmax_rows(z);
  const MatrixXd t = one_hot(3, 5).transpose();
  const auto loss = soft_target_loss(p, t, LabelCost::kCrossEntropy);
  const MatrixXd dz = softmax_backward(p, loss.grad);
  CHECK((dz - (p - t)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("dead units have zero gradient") {
  // A zero classifier weight column makes the loss independent of that
  // embedding coordinate, so the extractor rows feeding it get no gradient.
  const std::vector<std::size_t> dims{2, 3};
  MlpExtractor g = MlpExtractor::xavier(dims, 3);
  MatrixXd w = SoftmaxClassifier::xavier(3, 2, 4).weight();
  w.col(1).setZero();
  SoftmaxClassifier f(w, VectorXd::Zero(2));
  std::mt19937_64 rng(5);
  const MatrixXd x = oracle::random_matrix(4, 2, rng);
  MatrixXd t = MatrixXd::Zero(4, 2);
  t.col(0).setOnes();
  const auto grads = backward(g, f, x, t);
  // Layout: weight (3x2, column-major) then bias (3). Row 1 of the weight
  // is entries 1 and 4; bias entry 1 is 7.
  CHECK(grads.extractor[1] == 0.0);
  CHECK(grads.extractor[4] == 0.0);
  CHECK(grads.extractor[7] == 0.0);
}

TEST_CASE("gradients match central differences") {
  for (int trial = 0; trial < 6; ++trial) {
    std::mt19937_64 rng(100 + static_cast<std::uint64_t>(trial));
    const LabelCost cost = trial % 2 == 0 ? LabelCost::kCrossEntropy : LabelCost::kSquaredL2;
    const std::vector<std::size_t> dims{3, 5, 4};
    const auto g = MlpExtractor::xavier(dims, static_cast<std::uint64_t>(trial));
    const auto f = SoftmaxClassifier::xavier(4, 3, static_cast<std::uint64_t>(trial) + 7);
    const MatrixXd x = oracle::random_matrix(6, 3, rng, -1.0, 1.0);
    const MatrixXd q = oracle::random_matrix(6, 3, rng);
    const auto grads = backward(g, f, x, q, cost);

    auto loss_f = [&](const VectorXd& theta) {
      SoftmaxClassifier h = f;
      h.set_parameters(theta);
      return soft_target_loss(h.predict_proba(g.embed(x)), q, cost).value;
    };
    auto loss_g = [&](const VectorXd& theta) {
      MlpExtractor h = g;
      h.set_parameters(theta);
      return soft_target_loss(f.predict_proba(h.embed(x)), q, cost).value;
    };
    CHECK(oracle::relative_error(grads.classifier, oracle::central_gradient(loss_f, f.parameters())) < 1e-4);
    CHECK(oracle::relative_error(grads.extractor, oracle::central_gradient(loss_g, g.parameters())) < 1e-4);
    CHECK(grads.loss == doctest::Approx(loss_f(f.parameters())));

    const auto only_f = classifier_backward(f, g.embed(x), q, cost);
    CHECK((only_f.classifier - grads.classifier).norm() < 1e-12);
    CHECK(only_f.extractor.size() == 0);
  }
}

TEST_CASE("adam update") {
  Adam adam(2);
  VectorXd p = VectorXd::Zero(2), g(2);
  g << 1.0, -2.0;
  adam.step(p, g);
  // First step moves every coordinate by about lr against the gradient sign.
  CHECK(p[0] == doctest::Approx(-1e-3).epsilon(1e-6));
  CHECK(p[1] == doctest::Approx(1e-3).epsilon(1e-6));
  CHECK(adam.steps() == 1);
  CHECK_THROWS_AS(adam.step(p, VectorXd::Zero(3)), DimensionError);
}

TEST_CASE("extract_embeddings") {
  const std::vector<std::size_t> dims{3, 4, 2};
  const auto g = MlpExtractor::xavier(dims, 9);
  std::mt19937_64 rng(6);
  const MatrixXd x = oracle::random_matrix(5, 3, rng);
  const MatrixXd e1 = extract_embeddings(g, x), e2 = extract_embeddings(g, x);
  CHECK(e1 == e2);
  MatrixXd permuted = x;
  permuted.row(0).swap(permuted.row(4));
  const MatrixXd ep = extract_embeddings(g, permuted);
  CHECK(ep.row(0) == e1.row(4));
  CHECK(ep.row(4) == e1.row(0));
  CHECK(ep.row(2) == e1.row(2));
  MlpExtractor zero = g;
  zero.set_parameters(VectorXd::Zero(static_cast<Eigen::Index>(g.num_parameters())));
  CHECK(extract_embeddings(zero, x).isZero());
  CHECK_THROWS_AS(extract_embeddings(g, MatrixXd::Zero(2, 4)), DimensionError);
}

TEST_CASE("train_si with zero epochs returns the initialisation") {
  const auto data = blobs(1, 20, 2);
  SiConfig cfg;
  cfg.epochs = 0;
  cfg.hidden = {8};
  cfg.embedding_dim = 4;
  cfg.seed = 5;
  const auto model = train_si(data, cfg);
  const std::vector<std::size_t> dims{2, 8, 4};
  CHECK(model.extractor == MlpExtractor::xavier(dims, mix_seed(5, 1)));
  CHECK(model.classifier == SoftmaxClassifier::xavier(4, 2, mix_seed(5, 2)));
  CHECK(model.history.size() == 1);
  CHECK(model.best_epoch == 0);
}

TEST_CASE("train_si separates linearly separable blobs") {
  const auto data = blobs(2, 200, 2);
  MatrixXd x(400, 2);
  std::vector<int> y;
  Eigen::Index r = 0;
  for (const auto& s : data)
    for (const auto& p : s.samples) {
      x.row(r++) = p.embedding.transpose();
      y.push_back(static_cast<int>(argmax(p.label)));
    }
  REQUIRE(oracle::logistic_fit_accuracy(x, y) >= 0.99);

  SiConfig cfg;
  cfg.hidden = {16};
  cfg.embedding_dim = 8;
  cfg.epochs = 200;
  cfg.seed = 3;
  const auto model = train_si(data, cfg);
  CHECK(accuracy(model.extractor, model.classifier, data) >= 0.99);
  CHECK(model.history[static_cast<std::size_t>(model.best_epoch)].validation_loss <= model.history[0].validation_loss);
  CHECK(model.extractor.parameters().allFinite());
  CHECK(model.classifier.parameters().allFinite());
}

TEST_CASE("duplicating a source keeps the minimiser on symmetric data") {
  auto data = blobs(4, 60, 2);
  auto dup = data;
  SourceDomain copy = data[0];
  copy.id = "copy";
  dup.push_back(copy);
  SiConfig cfg;
  cfg.hidden = {16};
  cfg.embedding_dim = 8;
  cfg.epochs = 100;
  cfg.seed = 1;
  const auto a = train_si(data, cfg);
  const auto b = train_si(dup, cfg);
  // The objectives differ (three sources instead of two) ...
  CHECK(si_objective(a.extractor, a.classifier, dup) != doctest::Approx(si_objective(a.extractor, a.classifier, data)));
  // ... while the selected models perform the same.
  const double va = a.history[static_cast<std::size_t>(a.best_epoch)].validation_accuracy;
  const double vb = b.history[static_cast<std::size_t>(b.best_epoch)].validation_accuracy;
  CHECK(std::abs(va - vb) <= 0.02);
}

TEST_CASE("split_validation holds out one sample per class and source") {
  const auto data = blobs(5, 10, 3);
  const auto [train, val] = split_validation(data, 0);
  REQUIRE(train.size() == 3);
  for (std::size_t j = 0; j < 3; ++j) {
    CHECK(val[j].size() == 2);
    CHECK(train[j].size() == 8);
    CHECK(train[j].id == data[j].id);
  }
}
