#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <limits>

#include "genesnn/errors.hpp"
#include "genesnn/genome.hpp"
#include "genesnn/rng.hpp"

using namespace genesnn;

namespace {

// Independent oracle: contract the gene axis with plain nested loops.
Tensor brute_force_weights(const NeuronalEncoding& ein, const GeneInteraction& g,
                           const NeuronalEncoding& eout) {
  Tensor w(eout.channels, ein.channels, ein.kernel, ein.kernel);
  for (int co = 0; co < eout.channels; ++co)
    for (int ci = 0; ci < ein.channels; ++ci)
      for (int u = 0; u < ein.kernel; ++u)
        for (int v = 0; v < ein.kernel; ++v) {
          double acc = 0.0;
          for (int a = 0; a < g.genes(); ++a)
            for (int b = 0; b < g.genes(); ++b)
              acc += ein.entries(ci, u, v, a) * g.entries(a, b) * eout.entries(co, u, v, b);
          w(co, ci, u, v) = acc;
        }
  return w;
}

NeuronalEncoding constant_encoding(int channels, int kernel, int genes, double value) {
  NeuronalEncoding e;
  e.channels = channels;
  e.kernel = kernel;
  e.genes = genes;
  e.entries = Tensor(channels, kernel, kernel, genes, value);
  return e;
}

GeneInteraction random_interaction(int genes, std::uint64_t seed, double scale = 1.0) {
  RandomEngine rng(seed);
  Eigen::MatrixXd m(genes, genes);
  for (int i = 0; i < genes; ++i)
    for (int j = 0; j < genes; ++j) m(i, j) = scale * rng.normal();
  return GeneInteraction(m);
}

}  // namespace

TEST_SUITE("genome") {

TEST_CASE("sample_encoding respects the clamp bound for any seed") {
  for (std::uint64_t seed : {0ULL, 7ULL, 12345ULL}) {
    const NeuronalEncoding e = sample_encoding(1.0, 0.0001, 4, 3, 5, seed);
    for (std::size_t i = 0; i < e.entries.size(); ++i) {
      CHECK(e.entries[i] >= -0.0001);
      CHECK(e.entries[i] <= 0.0001);
    }
  }
}

TEST_CASE("sample_encoding matches the requested normal std (Monte Carlo)") {
  // With beta2 = 10 = 20 sigma the clamp is negligible.
  const NeuronalEncoding e = sample_encoding(0.5, 10.0, 1000, 1, 100, 99);
  REQUIRE(e.entries.size() == 100000);
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t i = 0; i < e.entries.size(); ++i) {
    sum += e.entries[i];
    sum_sq += e.entries[i] * e.entries[i];
  }
  const double n = static_cast<double>(e.entries.size());
  const double std_dev = std::sqrt(sum_sq / n - (sum / n) * (sum / n));
  CHECK(std_dev == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("sample_encoding is deterministic given the seed") {
  const NeuronalEncoding a = sample_encoding(0.8, 1.5, 3, 3, 4, 42);
  const NeuronalEncoding b = sample_encoding(0.8, 1.5, 3, 3, 4, 42);
  CHECK(max_abs_diff(a.entries, b.entries) == 0.0);
  const NeuronalEncoding c = sample_encoding(0.8, 1.5, 3, 3, 4, 43);
  CHECK(max_abs_diff(a.entries, c.entries) > 0.0);
}

TEST_CASE("sample_encoding validates arguments") {
  CHECK_THROWS_AS(sample_encoding(0.0, 1.0, 1, 1, 1, 0), std::invalid_argument);
  CHECK_THROWS_AS(sample_encoding(1.0, -1.0, 1, 1, 1, 0), std::invalid_argument);
  CHECK_THROWS_AS(sample_encoding(1.0, 1.0, 0, 1, 1, 0), std::invalid_argument);
  CHECK_THROWS_AS(sample_encoding(1.0, 1.0, 1, 1, 0, 0), std::invalid_argument);
}

TEST_CASE("materialize_weights: identity contraction and annihilation") {
  const NeuronalEncoding ones_in = constant_encoding(3, 2, 1, 1.0);
  const NeuronalEncoding ones_out = constant_encoding(5, 2, 1, 1.0);
  GeneInteraction scale(Eigen::MatrixXd::Constant(1, 1, 2.5));
  Tensor w = materialize_weights(ones_in, scale, ones_out);
  REQUIRE(w.shape() == std::array<int, 4>{5, 3, 2, 2});
  for (std::size_t i = 0; i < w.size(); ++i) CHECK(w[i] == doctest::Approx(2.5));

  GeneInteraction zero(Eigen::MatrixXd::Zero(4, 4));
  const NeuronalEncoding rin = sample_encoding(1.0, 3.0, 3, 2, 4, 1);
  const NeuronalEncoding rout = sample_encoding(1.0, 3.0, 5, 2, 4, 2);
  w = materialize_weights(rin, zero, rout);
  for (std::size_t i = 0; i < w.size(); ++i) CHECK(w[i] == 0.0);
}

TEST_CASE("materialize_weights matches the brute-force loop oracle") {
  // The worked 2x(1x1)x3 shape first.
  {
    const NeuronalEncoding ein = sample_encoding(1.0, 3.0, 2, 1, 3, 10);
    const NeuronalEncoding eout = sample_encoding(1.0, 3.0, 2, 1, 3, 11);
    const GeneInteraction g = random_interaction(3, 12);
    const Tensor got = materialize_weights(ein, g, eout);
    const Tensor want = brute_force_weights(ein, g, eout);
    CHECK(max_abs_diff(got, want) < 1e-12);
  }
  RandomEngine shape_rng(77);
  for (int trial = 0; trial < 25; ++trial) {
    const int genes = 1 + static_cast<int>(shape_rng.below(5));
    const int c_in = 1 + static_cast<int>(shape_rng.below(5));
    const int c_out = 1 + static_cast<int>(shape_rng.below(5));
    const int kernel = 1 + static_cast<int>(shape_rng.below(3));
    const NeuronalEncoding ein = sample_encoding(1.0, 3.0, c_in, kernel, genes, 100 + trial);
    const NeuronalEncoding eout = sample_encoding(1.0, 3.0, c_out, kernel, genes, 200 + trial);
    const GeneInteraction g = random_interaction(genes, 300 + trial);
    const Tensor got = materialize_weights(ein, g, eout);
    const Tensor want = brute_force_weights(ein, g, eout);
    CHECK(relative_frobenius(got, want, 1e-30) < 1e-10);
  }
}

TEST_CASE("materialize_weights rejects mismatched shapes") {
  const NeuronalEncoding a = sample_encoding(1.0, 1.0, 2, 1, 3, 0);
  const NeuronalEncoding b = sample_encoding(1.0, 1.0, 2, 1, 4, 0);
  const NeuronalEncoding c = sample_encoding(1.0, 1.0, 2, 2, 3, 0);
  const GeneInteraction g = GeneInteraction::identity(3);
  CHECK_THROWS_AS(materialize_weights(a, g, b), ShapeError);
  CHECK_THROWS_AS(materialize_weights(a, g, c), ShapeError);
}

TEST_CASE("genetic_param_count evaluates the closed form") {
  CHECK(genetic_param_count(150, 64, 128, 3) == 281700);
  CHECK(genetic_param_count(1, 1, 1, 1) == 3);
  CHECK(dense_param_count(64, 128, 3) == 73728);
  // Per-layer compression needs g << min(C_in k^2, C_out k^2); here it fails.
  CHECK(genetic_param_count(150, 64, 128, 3) > dense_param_count(64, 128, 3));
  CHECK_THROWS_AS(genetic_param_count(0, 1, 1, 1), std::invalid_argument);
}

TEST_CASE("genetic_param_count equals the stored reals of a triple") {
  RandomEngine rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const int genes = 1 + static_cast<int>(rng.below(8));
    const int c_in = 1 + static_cast<int>(rng.below(12));
    const int c_out = 1 + static_cast<int>(rng.below(12));
    const int kernel = 1 + 2 * static_cast<int>(rng.below(2));
    const NeuronalEncoding ein = sample_encoding(1.0, 2.0, c_in, kernel, genes, trial);
    const NeuronalEncoding eout = sample_encoding(1.0, 2.0, c_out, kernel, genes, trial + 50);
    const long long stored = static_cast<long long>(ein.entries.size()) +
                             static_cast<long long>(genes) * genes +
                             static_cast<long long>(eout.entries.size());
    CHECK(stored == genetic_param_count(genes, c_in, c_out, kernel));
  }
}

TEST_CASE("svd_construct reconstructs exactly at full rank") {
  RandomEngine rng(31);
  Eigen::MatrixXd a(4, 2), b(2, 5);
  for (int i = 0; i < a.size(); ++i) a.data()[i] = rng.normal();
  for (int i = 0; i < b.size(); ++i) b.data()[i] = rng.normal();
  const Eigen::MatrixXd w = a * b;  // rank 2
  const SvdFactors f = svd_construct(w, 2);
  const Eigen::MatrixXd recon =
      f.input_factor * f.interaction.entries * f.output_factor.transpose();
  CHECK((recon - w).norm() < 1e-8);

  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(3, 3);
  const SvdFactors fi = svd_construct(eye, 3);
  CHECK((fi.input_factor * fi.interaction.entries * fi.output_factor.transpose() - eye).norm() <
        1e-12);
}

TEST_CASE("svd_construct error equals the tail singular energy (Eckart-Young)") {
  RandomEngine rng(32);
  Eigen::MatrixXd w(6, 6);
  for (int i = 0; i < w.size(); ++i) w.data()[i] = rng.normal();
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(w);  // oracle route: singular values only
  const Eigen::VectorXd sv = svd.singularValues();

  const SvdFactors f = svd_construct(w, 2);
  const double err =
      (f.input_factor * f.interaction.entries * f.output_factor.transpose() - w).norm();
  double tail = 0.0;
  for (int i = 2; i < 6; ++i) tail += sv[i] * sv[i];
  CHECK(std::fabs(err - std::sqrt(tail)) < 1e-8);
}

TEST_CASE("svd_construct error is non-increasing in g") {
  RandomEngine rng(33);
  Eigen::MatrixXd w(7, 5);
  for (int i = 0; i < w.size(); ++i) w.data()[i] = rng.normal();
  double prev = std::numeric_limits<double>::infinity();
  for (int genes = 1; genes <= 5; ++genes) {
    const SvdFactors f = svd_construct(w, genes);
    const double err =
        (f.input_factor * f.interaction.entries * f.output_factor.transpose() - w).norm();
    CHECK(err <= prev + 1e-12);
    prev = err;
  }
}

TEST_CASE("svd_construct rejects g beyond min(m, n)") {
  CHECK_THROWS_AS(svd_construct(Eigen::MatrixXd::Identity(3, 4), 4), std::invalid_argument);
  CHECK_THROWS_AS(svd_construct(Eigen::MatrixXd::Identity(3, 4), 0), std::invalid_argument);
}

TEST_CASE("genotype flatten/unflatten round trip and layout") {
  Genotype s;
  s.beta1 = 0.7;
  s.beta2 = 1.9;
  s.interaction = random_interaction(3, 8);
  const std::vector<double> flat = genotype_flatten(s);
  REQUIRE(flat.size() == 11);
  CHECK(flat[0] == 0.7);
  CHECK(flat[1] == 1.9);
  CHECK(flat[2] == s.interaction.entries(0, 0));
  CHECK(flat[3] == s.interaction.entries(0, 1));  // row-major

  const Genotype back = genotype_unflatten(flat, 3);
  CHECK(back.beta1 == s.beta1);
  CHECK(back.beta2 == s.beta2);
  CHECK((back.interaction.entries - s.interaction.entries).norm() == 0.0);
}

TEST_CASE("genotype_unflatten validates length and repairs betas") {
  std::vector<double> v(6, 0.5);
  CHECK_NOTHROW(genotype_unflatten(v, 2));  // 2 + 4
  CHECK_THROWS_AS(genotype_unflatten(std::vector<double>(7, 0.5), 2), ShapeError);

  v[0] = -0.3;
  v[1] = 0.0;
  const Genotype repaired = genotype_unflatten(v, 2);
  CHECK(repaired.beta1 == doctest::Approx(0.3));
  CHECK(repaired.beta2 == doctest::Approx(1e-6));
}

TEST_CASE("GeneInteraction validates its matrix") {
  CHECK_THROWS_AS(GeneInteraction(Eigen::MatrixXd::Zero(2, 3)), std::invalid_argument);
  Eigen::MatrixXd bad = Eigen::MatrixXd::Zero(2, 2);
  bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(GeneInteraction{bad}, std::invalid_argument);
}

}  // TEST_SUITE
