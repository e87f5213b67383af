#include <doctest.h>

#include <cmath>
#include <vector>

#include "genesnn/data.hpp"
#include "genesnn/errors.hpp"
#include "genesnn/network.hpp"
#include "genesnn/rng.hpp"
#include "genesnn/training.hpp"

using namespace genesnn;

namespace {

NetworkSpec two_layer_mlp(int in_features, int hidden, int classes, int genes, int t_steps) {
  NetworkSpec net;
  net.input_channels = in_features;
  net.genes = genes;
  net.time_steps = t_steps;
  LayerSpec h;
  h.out_channels = hidden;
  LayerSpec r;
  r.out_channels = classes;
  net.layers = {h, r};
  return net;
}

EncodedBatch constant_input(const Tensor& x, int t_steps) {
  EncodedBatch b;
  for (int t = 0; t < t_steps; ++t) b.steps.push_back(x);
  return b;
}

Tensor uniform_batch(int n, int features, std::uint64_t seed) {
  RandomEngine rng(seed);
  Tensor x(n, features, 1, 1);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform();
  return x;
}

Phenotype random_phenotype(const NetworkSpec& net, std::uint64_t seed, double beta1 = 0.8,
                           double beta2 = 2.0, double g_scale = 0.6) {
  RandomEngine rng(mix_seed(seed, 0x6E0));
  Eigen::MatrixXd g(net.genes, net.genes);
  for (int i = 0; i < net.genes; ++i)
    for (int j = 0; j < net.genes; ++j) g(i, j) = g_scale * rng.normal();
  const Genotype genotype{beta1, beta2, GeneInteraction(g)};
  return sample_phenotype(net, genotype, seed);
}

double smoothed_loss(const NetworkSpec& net, const Phenotype& p, const EncodedBatch& batch,
                     const std::vector<int>& labels) {
  return cross_entropy_loss(forward(net, p, batch, SpikeMode::Smoothed, false).mean_logits,
                            labels);
}

}  // namespace

TEST_SUITE("training") {

TEST_CASE("cross entropy of uniform logits is ln(classes)") {
  Tensor logits(3, 10, 1, 1, 0.25);  // equal logits per row
  CHECK(cross_entropy_loss(logits, {0, 4, 9}) == doctest::Approx(std::log(10.0)).epsilon(1e-12));
}

TEST_CASE("cross entropy vanishes at a huge true-class margin") {
  Tensor logits(1, 4, 1, 1, 0.0);
  logits(0, 2, 0, 0) = 50.0;
  CHECK(cross_entropy_loss(logits, {2}) < 1e-6);
}

TEST_CASE("cross entropy is invariant to permuting rows with labels") {
  RandomEngine rng(3);
  Tensor logits(4, 5, 1, 1);
  for (std::size_t i = 0; i < logits.size(); ++i) logits[i] = rng.normal();
  const std::vector<int> labels{1, 0, 3, 2};

  Tensor permuted(4, 5, 1, 1);
  const int perm[4] = {2, 0, 3, 1};
  std::vector<int> permuted_labels(4);
  for (int i = 0; i < 4; ++i) {
    permuted_labels[i] = labels[perm[i]];
    for (int c = 0; c < 5; ++c) permuted(i, c, 0, 0) = logits(perm[i], c, 0, 0);
  }
  CHECK(cross_entropy_loss(logits, labels) ==
        doctest::Approx(cross_entropy_loss(permuted, permuted_labels)).epsilon(1e-14));
}

TEST_CASE("cross entropy rejects out-of-range labels") {
  Tensor logits(1, 3, 1, 1);
  CHECK_THROWS_AS(cross_entropy_loss(logits, {3}), std::out_of_range);
  CHECK_THROWS_AS(cross_entropy_loss(logits, {-1}), std::out_of_range);
}

TEST_CASE("zero input yields zero gradients everywhere") {
  const NetworkSpec net = two_layer_mlp(3, 5, 2, 2, 3);
  const Phenotype p = random_phenotype(net, 9);
  const EncodedBatch batch = constant_input(Tensor(2, 3, 1, 1, 0.0), 3);
  const ForwardResult fwd = forward(net, p, batch, SpikeMode::Binary, true);
  const GradientBundle grads = backward(net, p, fwd, {0, 1});
  for (const Tensor& d : grads.d_encodings) {
    for (std::size_t i = 0; i < d.size(); ++i) CHECK(d[i] == 0.0);
  }
  CHECK(grads.d_interaction.norm() == 0.0);
}

TEST_CASE("dG matches the hand derivation on a single g=1 linear layer") {
  // One dense readout, k = 1, g = 1, T = 1, one sample:
  // y_co = gamma * f_co * (e . x); dG = (dy . f)(x . e).
  NetworkSpec net;
  net.input_channels = 2;
  net.genes = 1;
  net.time_steps = 1;
  LayerSpec readout;
  readout.out_channels = 2;
  net.layers = {readout};

  const double e1 = 0.3, e2 = -0.5, f1 = 0.8, f2 = 0.2, gamma = 0.7;
  const double x1 = 1.0, x2 = 2.0;
  Phenotype p;
  p.interaction = GeneInteraction(Eigen::MatrixXd::Constant(1, 1, gamma));
  NeuronalEncoding ein{2, 1, 1, Tensor(2, 1, 1, 1)};
  ein.entries[0] = e1;
  ein.entries[1] = e2;
  NeuronalEncoding eout{2, 1, 1, Tensor(2, 1, 1, 1)};
  eout.entries[0] = f1;
  eout.entries[1] = f2;
  p.encodings = {ein, eout};

  Tensor x(1, 2, 1, 1);
  x(0, 0, 0, 0) = x1;
  x(0, 1, 0, 0) = x2;
  const EncodedBatch batch = constant_input(x, 1);
  const ForwardResult fwd = forward(net, p, batch, SpikeMode::Binary, true);
  const GradientBundle grads = backward(net, p, fwd, {0});

  const double ex = e1 * x1 + e2 * x2;
  const double y1 = gamma * f1 * ex, y2 = gamma * f2 * ex;
  const double z = std::exp(y1) + std::exp(y2);
  const double dy1 = std::exp(y1) / z - 1.0, dy2 = std::exp(y2) / z;
  CHECK(grads.d_interaction(0, 0) ==
        doctest::Approx((dy1 * f1 + dy2 * f2) * ex).epsilon(1e-12));
  CHECK(grads.d_encodings[0][0] == doctest::Approx(gamma * x1 * (dy1 * f1 + dy2 * f2)));
  CHECK(grads.d_encodings[0][1] == doctest::Approx(gamma * x2 * (dy1 * f1 + dy2 * f2)));
  CHECK(grads.d_encodings[1][0] == doctest::Approx(gamma * dy1 * ex));
  CHECK(grads.d_encodings[1][1] == doctest::Approx(gamma * dy2 * ex));
}

TEST_CASE("analytic gradients match finite differences on a random small net") {
  const NetworkSpec net = two_layer_mlp(4, 6, 3, 3, 2);
  const Phenotype p = random_phenotype(net, 17);
  const EncodedBatch batch = constant_input(uniform_batch(3, 4, 18), 2);
  const GradCheckReport report = grad_check(net, p, batch, {0, 1, 2});
  CAPTURE(report.worst_coordinate);
  CAPTURE(report.worst_analytic);
  CAPTURE(report.worst_numeric);
  CHECK(report.max_rel_error < 1e-4);
}

TEST_CASE("gradient check covers conv nets too") {
  NetworkSpec net;
  net.input_channels = 1;
  net.input_height = 5;
  net.input_width = 5;
  net.genes = 2;
  net.time_steps = 2;
  LayerSpec conv;
  conv.kind = LayerKind::Conv;
  conv.out_channels = 3;
  conv.kernel = 3;
  conv.stride = 2;
  LayerSpec readout;
  readout.out_channels = 2;
  net.layers = {conv, readout};

  const Phenotype p = random_phenotype(net, 23);
  RandomEngine rng(24);
  Tensor x(2, 1, 5, 5);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform();
  const GradCheckReport report = grad_check(net, p, constant_input(x, 2), {0, 1});
  CAPTURE(report.worst_coordinate);
  CHECK(report.max_rel_error < 1e-4);
}

TEST_CASE("transposing G in backward is caught by the checker (mutation test)") {
  const NetworkSpec net = two_layer_mlp(4, 6, 3, 3, 2);
  const Phenotype p = random_phenotype(net, 29);
  const EncodedBatch batch = constant_input(uniform_batch(3, 4, 30), 2);
  const GradCheckReport faulty = grad_check(net, p, batch, {0, 1, 2}, 1e-5, 0, 0, true);
  CHECK(faulty.max_rel_error > 1e-2);
}

TEST_CASE("grad check at the zero point has tiny absolute error") {
  const NetworkSpec net = two_layer_mlp(3, 4, 2, 2, 2);
  const Phenotype p = random_phenotype(net, 31);
  const EncodedBatch batch = constant_input(Tensor(2, 3, 1, 1, 0.0), 2);
  const GradCheckReport report = grad_check(net, p, batch, {0, 1});
  CHECK(report.max_abs_error < 1e-10);
}

TEST_CASE("grad check refuses oversized instances") {
  const NetworkSpec net = two_layer_mlp(400, 400, 10, 16, 1);  // > 10^4 parameters
  const Phenotype p = random_phenotype(net, 37);
  const EncodedBatch batch = constant_input(uniform_batch(1, 400, 38), 1);
  CHECK_THROWS_AS(grad_check(net, p, batch, {0}), std::invalid_argument);
}

TEST_CASE("shared encoding gradient is the sum of both layers' contributions") {
  // Independent route: finite-difference the loss w.r.t. each materialized
  // weight through a test-local forward, push dW into factors per layer with
  // plain loops, and compare the shared slot's sum against backward().
  const NetworkSpec net = two_layer_mlp(3, 4, 2, 2, 2);
  const Phenotype p = random_phenotype(net, 41);
  const Tensor x = uniform_batch(2, 3, 42);
  const std::vector<int> labels{0, 1};
  const LifConfig lif = net.layers[0].lif;

  Tensor w0 = materialize_weights(p.encodings[0], p.interaction, p.encodings[1]);
  Tensor w1 = materialize_weights(p.encodings[1], p.interaction, p.encodings[2]);

  const LayerShape in_shape{3, 1, 1}, hid_shape{4, 1, 1}, out_shape{2, 1, 1};
  auto manual_loss = [&](const Tensor& wa, const Tensor& wb) {
    Tensor u(2, 4, 1, 1, lif.v_reset), v(2, 2, 1, 1, 0.0);
    Tensor mean(2, 2, 1, 1, 0.0);
    for (int t = 0; t < net.time_steps; ++t) {
      const Tensor current = apply_layer(net.layers[0], wa, x, in_shape, hid_shape);
      Tensor s = Tensor::zeros_like(current);
      for (std::size_t i = 0; i < current.size(); ++i) {
        const double up = lif.tau * u[i] + current[i];
        s[i] = spike_value(up, lif, SpikeMode::Smoothed);
        u[i] = up * (1.0 - s[i]) + lif.v_reset * s[i];
      }
      v += apply_layer(net.layers[1], wb, s, hid_shape, out_shape);
      mean += v;
    }
    mean *= 1.0 / net.time_steps;
    return cross_entropy_loss(mean, labels);
  };

  const double h = 1e-6;
  Tensor dw0 = Tensor::zeros_like(w0), dw1 = Tensor::zeros_like(w1);
  for (std::size_t i = 0; i < w0.size(); ++i) {
    Tensor plus = w0, minus = w0;
    plus[i] += h;
    minus[i] -= h;
    dw0[i] = (manual_loss(plus, w1) - manual_loss(minus, w1)) / (2.0 * h);
  }
  for (std::size_t i = 0; i < w1.size(); ++i) {
    Tensor plus = w1, minus = w1;
    plus[i] += h;
    minus[i] -= h;
    dw1[i] = (manual_loss(w0, plus) - manual_loss(w0, minus)) / (2.0 * h);
  }

  // Factor pushes, one layer at a time (k = 1, so a single position).
  const int g = net.genes;
  auto push = [&](const Tensor& dw, const NeuronalEncoding& ein, const NeuronalEncoding& eout,
                  Tensor& dein, Tensor& deout) {
    for (int co = 0; co < eout.channels; ++co)
      for (int ci = 0; ci < ein.channels; ++ci)
        for (int a = 0; a < g; ++a)
          for (int b = 0; b < g; ++b) {
            dein(ci, 0, 0, a) +=
                dw(co, ci, 0, 0) * p.interaction.entries(a, b) * eout.entries(co, 0, 0, b);
            deout(co, 0, 0, b) +=
                dw(co, ci, 0, 0) * ein.entries(ci, 0, 0, a) * p.interaction.entries(a, b);
          }
  };
  Tensor from_layer0(4, 1, 1, g), from_layer1(4, 1, 1, g);
  {
    Tensor unused_in(3, 1, 1, g);
    push(dw0, p.encodings[0], p.encodings[1], unused_in, from_layer0);
  }
  {
    Tensor unused_out(2, 1, 1, g);
    push(dw1, p.encodings[1], p.encodings[2], from_layer1, unused_out);
  }

  const ForwardResult fwd =
      forward(net, p, constant_input(x, net.time_steps), SpikeMode::Smoothed, true);
  const GradientBundle grads = backward(net, p, fwd, labels);
  Tensor expected = from_layer0;
  expected += from_layer1;
  CHECK(max_abs_diff(grads.d_encodings[1], expected) < 1e-6);
  // And each single-layer contribution is genuinely nonzero.
  CHECK(from_layer0.squared_norm() > 0.0);
  CHECK(from_layer1.squared_norm() > 0.0);
}

TEST_CASE("sgd_step: eta = 0 leaves the phenotype unchanged") {
  const NetworkSpec net = two_layer_mlp(3, 4, 2, 2, 2);
  Phenotype p = random_phenotype(net, 47);
  const Phenotype before = p;
  const EncodedBatch batch = constant_input(uniform_batch(2, 3, 48), 2);
  const ForwardResult fwd = forward(net, p, batch, SpikeMode::Binary, true);
  const GradientBundle grads = backward(net, p, fwd, {0, 1});
  sgd_step(p, grads, 0.0);
  for (std::size_t s = 0; s < p.encodings.size(); ++s) {
    CHECK(max_abs_diff(p.encodings[s].entries, before.encodings[s].entries) == 0.0);
  }
  CHECK((p.interaction.entries - before.interaction.entries).norm() == 0.0);
}

TEST_CASE("one small SGD step does not increase the smooth-mode loss") {
  const NetworkSpec net = two_layer_mlp(4, 6, 3, 3, 2);
  Phenotype p = random_phenotype(net, 53);
  const EncodedBatch batch = constant_input(uniform_batch(4, 4, 54), 2);
  const std::vector<int> labels{0, 1, 2, 0};

  const double before = smoothed_loss(net, p, batch, labels);
  const ForwardResult fwd = forward(net, p, batch, SpikeMode::Smoothed, true);
  const GradientBundle grads = backward(net, p, fwd, labels);
  sgd_step(p, grads, 1e-4);
  CHECK(smoothed_loss(net, p, batch, labels) <= before + 1e-12);
}

TEST_CASE("two half steps equal one full step only for a frozen gradient") {
  const NetworkSpec net = two_layer_mlp(3, 4, 2, 2, 1);
  Phenotype a = random_phenotype(net, 59, 1.2, 3.0, 1.0);  // scale keeps gradients alive
  Phenotype b = a;
  const EncodedBatch batch = constant_input(uniform_batch(2, 3, 60), 1);
  const ForwardResult fwd = forward(net, a, batch, SpikeMode::Smoothed, true);
  const GradientBundle grads = backward(net, a, fwd, {0, 1});
  REQUIRE(grads.d_interaction.norm() > 0.0);

  sgd_step(a, grads, 0.2);
  sgd_step(b, grads, 0.1);
  sgd_step(b, grads, 0.1);  // same bundle: linear-update equality
  for (std::size_t s = 0; s < a.encodings.size(); ++s) {
    CHECK(max_abs_diff(a.encodings[s].entries, b.encodings[s].entries) < 1e-15);
  }

  // Recomputing the gradient between the half steps breaks the equality
  // through curvature.
  Phenotype c = random_phenotype(net, 59, 1.2, 3.0, 1.0);
  sgd_step(c, grads, 0.1);
  const ForwardResult fwd2 = forward(net, c, batch, SpikeMode::Smoothed, true);
  const GradientBundle grads2 = backward(net, c, fwd2, {0, 1});
  sgd_step(c, grads2, 0.1);
  double diff = 0.0;
  for (std::size_t s = 0; s < a.encodings.size(); ++s) {
    diff = std::max(diff, max_abs_diff(a.encodings[s].entries, c.encodings[s].entries));
  }
  CHECK(diff > 0.0);
}

TEST_CASE("training separable 2-class blobs reaches 95% within 50 epochs") {
  const Dataset data = make_blobs(2, 50, 4, 8.0, 1234);
  const NetworkSpec net = two_layer_mlp(4, 12, 2, 4, 4);
  Phenotype p = random_phenotype(net, 61, 0.5, 1.0, 0.5);
  TrainConfig cfg;
  cfg.learning_rate = 0.1;
  cfg.epochs = 50;
  cfg.batch_size = 16;
  cfg.seed = 62;
  const TrainResult result = train(net, p, data, cfg);
  REQUIRE(result.acc_history.size() == 50);
  CHECK(result.acc_history.back() >= 0.95);
}

TEST_CASE("epochs = 0 returns the phenotype unchanged") {
  const Dataset data = make_blobs(2, 20, 4, 6.0, 5);
  const NetworkSpec net = two_layer_mlp(4, 6, 2, 2, 2);
  Phenotype p = random_phenotype(net, 67);
  const Phenotype before = p;
  TrainConfig cfg;
  cfg.epochs = 0;
  const TrainResult result = train(net, p, data, cfg);
  CHECK(result.loss_history.empty());
  for (std::size_t s = 0; s < p.encodings.size(); ++s) {
    CHECK(max_abs_diff(p.encodings[s].entries, before.encodings[s].entries) == 0.0);
  }
}

TEST_CASE("training is deterministic given the seed") {
  const Dataset data = make_blobs(3, 20, 4, 6.0, 7);
  const NetworkSpec net = two_layer_mlp(4, 8, 3, 2, 2);
  TrainConfig cfg;
  cfg.learning_rate = 0.3;
  cfg.epochs = 5;
  cfg.batch_size = 8;
  cfg.seed = 99;

  Phenotype a = random_phenotype(net, 71);
  Phenotype b = random_phenotype(net, 71);
  const TrainResult ra = train(net, a, data, cfg);
  const TrainResult rb = train(net, b, data, cfg);
  REQUIRE(ra.loss_history.size() == rb.loss_history.size());
  for (std::size_t i = 0; i < ra.loss_history.size(); ++i) {
    CHECK(ra.loss_history[i] == rb.loss_history[i]);
  }
}

TEST_CASE("gradients are invariant to sample order within a batch") {
  const NetworkSpec net = two_layer_mlp(4, 6, 3, 2, 2);
  const Phenotype p = random_phenotype(net, 73);
  Tensor x = uniform_batch(4, 4, 74);
  const std::vector<int> labels{0, 1, 2, 1};

  Tensor x_rev(4, 4, 1, 1);
  std::vector<int> labels_rev(4);
  for (int i = 0; i < 4; ++i) {
    labels_rev[i] = labels[3 - i];
    for (int f = 0; f < 4; ++f) x_rev(i, f, 0, 0) = x(3 - i, f, 0, 0);
  }

  const ForwardResult fa = forward(net, p, constant_input(x, 2), SpikeMode::Binary, true);
  const ForwardResult fb = forward(net, p, constant_input(x_rev, 2), SpikeMode::Binary, true);
  const GradientBundle ga = backward(net, p, fa, labels);
  const GradientBundle gb = backward(net, p, fb, labels_rev);
  for (std::size_t s = 0; s < ga.d_encodings.size(); ++s) {
    CHECK(max_abs_diff(ga.d_encodings[s], gb.d_encodings[s]) < 1e-12);
  }
  CHECK((ga.d_interaction - gb.d_interaction).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("training aborts with a diagnostic when the loss diverges") {
  const Dataset data = make_blobs(2, 20, 4, 6.0, 11);
  const NetworkSpec net = two_layer_mlp(4, 6, 2, 2, 2);
  Phenotype p = random_phenotype(net, 79);
  p.encodings[0].entries[0] = 1e200;  // forces overflow in the readout
  p.interaction.entries(0, 0) = 1e200;
  TrainConfig cfg;
  cfg.epochs = 2;
  CHECK_THROWS_AS(train(net, p, data, cfg), NumericalError);
}

TEST_CASE("momentum and adam update paths run and change parameters") {
  const Dataset data = make_blobs(2, 20, 4, 6.0, 13);
  const NetworkSpec net = two_layer_mlp(4, 6, 2, 2, 2);
  for (Optimizer opt : {Optimizer::Momentum, Optimizer::Adam}) {
    Phenotype p = random_phenotype(net, 83);
    const Phenotype before = p;
    TrainConfig cfg;
    cfg.optimizer = opt;
    cfg.learning_rate = opt == Optimizer::Adam ? 0.01 : 0.1;
    cfg.epochs = 2;
    cfg.batch_size = 8;
    train(net, p, data, cfg);
    double moved = 0.0;
    for (std::size_t s = 0; s < p.encodings.size(); ++s) {
      moved += max_abs_diff(p.encodings[s].entries, before.encodings[s].entries);
    }
    CHECK(moved > 0.0);
  }
}

}  // TEST_SUITE
