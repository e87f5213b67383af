#include "genesnn/cma_es.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>

#include "genesnn/errors.hpp"

namespace genesnn {

CmaConstants cma_default_constants(int dim, int lambda_override) {
  if (dim < 1) throw std::invalid_argument("cma_default_constants: dim must be >= 1");
  CmaConstants k;
  const double n = dim;
  k.lambda = lambda_override > 0 ? lambda_override
                                 : 4 + static_cast<int>(std::floor(3.0 * std::log(n)));
  if (k.lambda < 2) k.lambda = 2;
  k.mu = k.lambda / 2;
  if (k.mu < 1) k.mu = 1;

  // Log-rank weights over the top mu, normalized to sum 1.
  k.weights.resize(k.mu);
  double sum = 0.0;
  for (int i = 0; i < k.mu; ++i) {
    k.weights[i] = std::log((k.lambda + 1) / 2.0) - std::log(i + 1.0);
    sum += k.weights[i];
  }
  double sum_sq = 0.0;
  for (double& w : k.weights) {
    w /= sum;
    sum_sq += w * w;
  }
  k.mu_eff = 1.0 / sum_sq;

  k.c_sigma = (k.mu_eff + 2.0) / (n + k.mu_eff + 5.0);
  k.d_sigma = 1.0 + 2.0 * std::max(0.0, std::sqrt((k.mu_eff - 1.0) / (n + 1.0)) - 1.0) + k.c_sigma;
  k.c_c = (4.0 + k.mu_eff / n) / (n + 4.0 + 2.0 * k.mu_eff / n);
  k.c_1 = 2.0 / ((n + 1.3) * (n + 1.3) + k.mu_eff);
  k.c_mu = std::min(1.0 - k.c_1, 2.0 * (k.mu_eff - 2.0 + 1.0 / k.mu_eff) /
                                     ((n + 2.0) * (n + 2.0) + k.mu_eff));
  k.chi_n = std::sqrt(n) * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));
  return k;
}

CmaEs::CmaEs(Eigen::VectorXd mean0, double sigma0, int lambda_override)
    : dim_(static_cast<int>(mean0.size())),
      constants_(cma_default_constants(dim_, lambda_override)),
      mean_(std::move(mean0)),
      sigma_(sigma0) {
  if (dim_ < 1) throw std::invalid_argument("CmaEs: dimension must be >= 1");
  if (!(sigma0 > 0.0)) throw std::invalid_argument("CmaEs: sigma0 must be > 0");
  p_sigma_ = Eigen::VectorXd::Zero(dim_);
  p_c_ = Eigen::VectorXd::Zero(dim_);
  cov_ = Eigen::MatrixXd::Identity(dim_, dim_);
  eigen_basis_ = Eigen::MatrixXd::Identity(dim_, dim_);
  eigen_scale_ = Eigen::VectorXd::Ones(dim_);
}

double CmaEs::min_eigenvalue() const {
  return eigen_scale_.minCoeff() * eigen_scale_.minCoeff();
}

double CmaEs::max_eigenvalue() const {
  return eigen_scale_.maxCoeff() * eigen_scale_.maxCoeff();
}

std::vector<Eigen::VectorXd> CmaEs::ask(RandomEngine& rng) {
  if (pending_ask_) throw StateError("CmaEs::ask called twice without tell");
  asked_.clear();
  asked_.reserve(constants_.lambda);
  for (int i = 0; i < constants_.lambda; ++i) {
    Eigen::VectorXd z(dim_);
    for (int d = 0; d < dim_; ++d) z[d] = rng.normal();
    asked_.push_back(mean_ + sigma_ * (eigen_basis_ * (eigen_scale_.asDiagonal() * z)));
  }
  pending_ask_ = true;
  return asked_;
}

void CmaEs::tell(const std::vector<Eigen::VectorXd>& candidates,
                 const std::vector<double>& fitnesses) {
  if (!pending_ask_) throw StateError("CmaEs::tell called without a matching ask");
  if (static_cast<int>(candidates.size()) != constants_.lambda ||
      fitnesses.size() != candidates.size()) {
    throw std::invalid_argument("CmaEs::tell: need exactly lambda candidate/fitness pairs");
  }
  pending_ask_ = false;
  asked_.clear();

  int nan_count = 0;
  for (double f : fitnesses) {
    if (std::isnan(f)) ++nan_count;
  }
  if (nan_count > 0) {
    std::cerr << "[cma-es] warning: " << nan_count << " NaN fitness value(s) at generation "
              << generation_ << " ranked worst\n";
  }

  // Ascending ranks; NaN sorts after everything, ties break by index.
  std::vector<int> order(candidates.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    const double fa = fitnesses[a], fb = fitnesses[b];
    if (std::isnan(fa)) return false;
    if (std::isnan(fb)) return true;
    return fa < fb;
  });

  const CmaConstants& k = constants_;
  const Eigen::VectorXd mean_old = mean_;
  mean_ = Eigen::VectorXd::Zero(dim_);
  for (int i = 0; i < k.mu; ++i) mean_ += k.weights[i] * candidates[order[i]];

  const Eigen::VectorXd y_w = (mean_ - mean_old) / sigma_;

  // C^{-1/2} y = B D^{-1} B^T y via the cached eigensystem.
  const Eigen::VectorXd c_inv_sqrt_y =
      eigen_basis_ * (eigen_scale_.cwiseInverse().asDiagonal() *
                      (eigen_basis_.transpose() * y_w));
  p_sigma_ = (1.0 - k.c_sigma) * p_sigma_ +
             std::sqrt(k.c_sigma * (2.0 - k.c_sigma) * k.mu_eff) * c_inv_sqrt_y;

  const double expected_decay =
      std::sqrt(1.0 - std::pow(1.0 - k.c_sigma, 2.0 * (generation_ + 1)));
  const bool h_sigma =
      p_sigma_.norm() / expected_decay < (1.4 + 2.0 / (dim_ + 1.0)) * k.chi_n;

  p_c_ = (1.0 - k.c_c) * p_c_ +
         (h_sigma ? std::sqrt(k.c_c * (2.0 - k.c_c) * k.mu_eff) : 0.0) * y_w;

  Eigen::MatrixXd rank_mu = Eigen::MatrixXd::Zero(dim_, dim_);
  for (int i = 0; i < k.mu; ++i) {
    const Eigen::VectorXd y = (candidates[order[i]] - mean_old) / sigma_;
    rank_mu.noalias() += k.weights[i] * y * y.transpose();
  }
  const double h_correction = h_sigma ? 0.0 : k.c_c * (2.0 - k.c_c);
  cov_ = (1.0 - k.c_1 - k.c_mu) * cov_ +
         k.c_1 * (p_c_ * p_c_.transpose() + h_correction * cov_) + k.c_mu * rank_mu;

  sigma_ *= std::exp((k.c_sigma / k.d_sigma) * (p_sigma_.norm() / k.chi_n - 1.0));
  ++generation_;

  const double refresh_every =
      std::ceil(1.0 / (10.0 * dim_ * (k.c_1 + k.c_mu)));
  if (generation_ - last_eigen_refresh_ >= std::max(1.0, refresh_every)) {
    refresh_eigensystem();
  }
}

void CmaEs::refresh_eigensystem() {
  cov_ = 0.5 * (cov_ + cov_.transpose());  // enforce symmetry before solving
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov_);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("CmaEs: eigendecomposition of C failed");
  }
  Eigen::VectorXd eigenvalues = solver.eigenvalues();
  const double max_eig = eigenvalues.maxCoeff();
  const double floor_eig = max_eig / 1e14;
  if (eigenvalues.minCoeff() < floor_eig) {
    // Re-condition: shifting C by a multiple of I keeps the eigenbasis.
    const double shift = floor_eig - eigenvalues.minCoeff();
    cov_ += shift * Eigen::MatrixXd::Identity(dim_, dim_);
    eigenvalues.array() += shift;
  }
  if (eigenvalues.minCoeff() <= 0.0) {
    throw NumericalError("CmaEs: covariance lost positive definiteness");
  }
  eigen_basis_ = solver.eigenvectors();
  eigen_scale_ = eigenvalues.cwiseSqrt();
  last_eigen_refresh_ = generation_;
}

namespace {

void write_vector(std::ostream& os, const Eigen::VectorXd& v) {
  os << v.size();
  os.precision(17);
  for (Eigen::Index i = 0; i < v.size(); ++i) os << ' ' << v[i];
  os << '\n';
}

Eigen::VectorXd read_vector(std::istream& is) {
  Eigen::Index n;
  if (!(is >> n)) throw ParseError("CmaEs state: truncated vector header");
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(is >> v[i])) throw ParseError("CmaEs state: truncated vector payload");
  }
  return v;
}

}  // namespace

std::string CmaEs::serialize() const {
  if (pending_ask_) throw StateError("CmaEs::serialize: pending ask; tell first");
  std::ostringstream os;
  os << "cma-state 1\n";
  os << dim_ << ' ' << generation_ << ' ' << last_eigen_refresh_ << '\n';
  os.precision(17);
  os << sigma_ << '\n';
  write_vector(os, mean_);
  write_vector(os, p_sigma_);
  write_vector(os, p_c_);
  Eigen::VectorXd flat(dim_ * dim_);
  for (int i = 0; i < dim_; ++i)
    for (int j = 0; j < dim_; ++j) flat[i * dim_ + j] = cov_(i, j);
  write_vector(os, flat);
  os << constants_.lambda << ' ' << constants_.mu << ' ' << constants_.mu_eff << ' '
     << constants_.c_sigma << ' ' << constants_.d_sigma << ' ' << constants_.c_c << ' '
     << constants_.c_1 << ' ' << constants_.c_mu << ' ' << constants_.chi_n << '\n';
  for (double w : constants_.weights) os << w << ' ';
  os << '\n';
  return os.str();
}

CmaEs CmaEs::deserialize(const std::string& text) {
  std::istringstream is(text);
  std::string tag;
  int version;
  if (!(is >> tag >> version) || tag != "cma-state" || version != 1) {
    throw ParseError("CmaEs state: bad header");
  }
  CmaEs es;
  if (!(is >> es.dim_ >> es.generation_ >> es.last_eigen_refresh_ >> es.sigma_)) {
    throw ParseError("CmaEs state: truncated scalars");
  }
  es.mean_ = read_vector(is);
  es.p_sigma_ = read_vector(is);
  es.p_c_ = read_vector(is);
  const Eigen::VectorXd flat = read_vector(is);
  if (flat.size() != static_cast<Eigen::Index>(es.dim_) * es.dim_) {
    throw ParseError("CmaEs state: covariance size mismatch");
  }
  es.cov_.resize(es.dim_, es.dim_);
  for (int i = 0; i < es.dim_; ++i)
    for (int j = 0; j < es.dim_; ++j) es.cov_(i, j) = flat[i * es.dim_ + j];
  CmaConstants& k = es.constants_;
  if (!(is >> k.lambda >> k.mu >> k.mu_eff >> k.c_sigma >> k.d_sigma >> k.c_c >> k.c_1 >>
        k.c_mu >> k.chi_n)) {
    throw ParseError("CmaEs state: truncated constants");
  }
  k.weights.resize(k.mu);
  for (int i = 0; i < k.mu; ++i) {
    if (!(is >> k.weights[i])) throw ParseError("CmaEs state: truncated weights");
  }
  es.eigen_basis_.resize(es.dim_, es.dim_);
  es.eigen_scale_.resize(es.dim_);
  es.last_eigen_refresh_ = es.generation_;
  es.refresh_eigensystem();
  return es;
}

EvolutionResult run_evolution(int genes, const CandidateEvaluator& evaluate,
                              const EvolutionConfig& cfg, CmaEs* resume_state) {
  if (cfg.generations < 1) throw std::invalid_argument("run_evolution: generations >= 1");
  const int dim = 2 + genes * genes;
  if (cfg.mean0.size() != dim) {
    throw ShapeError("run_evolution: mean0 has dimension " + std::to_string(cfg.mean0.size()) +
                     ", expected " + std::to_string(dim));
  }

  CmaEs local = resume_state ? *resume_state : CmaEs(cfg.mean0, cfg.sigma0, cfg.population);
  RandomEngine rng(mix_seed(cfg.seed, 0xC3A));

  EvolutionResult result;
  result.best_fitness = std::numeric_limits<double>::infinity();
  const int first_generation = static_cast<int>(local.generation());

  for (int gen = first_generation; gen < first_generation + cfg.generations; ++gen) {
    const std::vector<Eigen::VectorXd> candidates = local.ask(rng);
    const int lambda = static_cast<int>(candidates.size());

    std::vector<Genotype> decoded(lambda);
    for (int i = 0; i < lambda; ++i) {
      std::vector<double> flat(candidates[i].data(), candidates[i].data() + dim);
      decoded[i] = genotype_unflatten(flat, genes);
    }

    std::vector<double> fitnesses(lambda, std::numeric_limits<double>::quiet_NaN());
    auto eval_range = [&](int begin, int end) {
      for (int i = begin; i < end; ++i) {
        try {
          fitnesses[i] = evaluate(decoded[i], gen, i);
        } catch (const std::exception&) {
          fitnesses[i] = std::numeric_limits<double>::quiet_NaN();
        }
      }
    };
    if (cfg.workers <= 1) {
      eval_range(0, lambda);
    } else {
      const int workers = std::min(cfg.workers, lambda);
      std::vector<std::thread> pool;
      const int chunk = (lambda + workers - 1) / workers;
      for (int w = 0; w < workers; ++w) {
        const int begin = w * chunk, end = std::min(lambda, begin + chunk);
        if (begin < end) pool.emplace_back(eval_range, begin, end);
      }
      for (std::thread& th : pool) th.join();
    }

    for (int i = 0; i < lambda; ++i) {
      if (!std::isnan(fitnesses[i]) && fitnesses[i] < result.best_fitness) {
        result.best_fitness = fitnesses[i];
        result.best = decoded[i];
      }
    }

    local.tell(candidates, fitnesses);

    GenerationStats stats;
    stats.generation = gen;
    std::vector<double> finite;
    for (double f : fitnesses) {
      if (!std::isnan(f)) finite.push_back(f);
    }
    std::sort(finite.begin(), finite.end());
    stats.best_f = finite.empty() ? std::numeric_limits<double>::quiet_NaN() : finite.front();
    stats.median_f =
        finite.empty() ? std::numeric_limits<double>::quiet_NaN() : finite[finite.size() / 2];
    stats.sigma = local.sigma();
    stats.min_eig = local.min_eigenvalue();
    stats.max_eig = local.max_eigenvalue();
    stats.beta1_mean = repair_beta(local.mean()[0]);
    stats.beta2_mean = repair_beta(local.mean()[1]);
    result.history.push_back(stats);
  }
  if (resume_state) *resume_state = local;
  return result;
}

}  // namespace genesnn
