#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <vector>

#include "genesnn/genome.hpp"
#include "genesnn/rng.hpp"

namespace genesnn {

/// Strategy constants; defaults follow the standard recommendations for a
/// given dimension (lambda = 4 + floor(3 ln n), log-rank weights, etc.).
struct CmaConstants {
  int lambda = 0;
  int mu = 0;
  std::vector<double> weights;  // top-mu recombination weights, sum to 1
  double mu_eff = 0.0;
  double c_sigma = 0.0;
  double d_sigma = 0.0;
  double c_c = 0.0;
  double c_1 = 0.0;
  double c_mu = 0.0;
  double chi_n = 0.0;  // E||N(0, I_n)||
};

CmaConstants cma_default_constants(int dim, int lambda_override = 0);

/// Covariance matrix adaptation evolution strategy (minimization), ask/tell
/// style. One instance is strictly sequential; evaluate the asked candidates
/// however you like between ask and tell.
class CmaEs {
 public:
  CmaEs(Eigen::VectorXd mean0, double sigma0, int lambda_override = 0);

  /// Samples lambda candidates m + sigma * B D z. Throws StateError if called
  /// again before tell().
  std::vector<Eigen::VectorXd> ask(RandomEngine& rng);

  /// Ranks ascending (NaN ranked worst, with a warning), recombines the top
  /// mu, updates evolution paths, covariance and step size, and refreshes the
  /// eigensystem on its lazy schedule.
  void tell(const std::vector<Eigen::VectorXd>& candidates,
            const std::vector<double>& fitnesses);

  int dim() const { return dim_; }
  long generation() const { return generation_; }
  double sigma() const { return sigma_; }
  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::MatrixXd& covariance() const { return cov_; }
  const Eigen::VectorXd& p_sigma() const { return p_sigma_; }
  const Eigen::VectorXd& p_c() const { return p_c_; }
  double min_eigenvalue() const;
  double max_eigenvalue() const;

  /// Test hook: constants may be frozen to custom values before the first ask.
  CmaConstants& constants() { return constants_; }
  const CmaConstants& constants() const { return constants_; }

  // Resume support: full state with 17-significant-digit reals.
  std::string serialize() const;
  static CmaEs deserialize(const std::string& text);

 private:
  CmaEs() = default;
  void refresh_eigensystem();

  int dim_ = 0;
  CmaConstants constants_;
  Eigen::VectorXd mean_, p_sigma_, p_c_;
  Eigen::MatrixXd cov_;
  Eigen::MatrixXd eigen_basis_;    // B
  Eigen::VectorXd eigen_scale_;    // diag of D (sqrt of eigenvalues)
  double sigma_ = 0.0;
  long generation_ = 0;
  long last_eigen_refresh_ = 0;
  bool pending_ask_ = false;
  std::vector<Eigen::VectorXd> asked_;
};

struct GenerationStats {
  int generation = 0;
  double best_f = 0.0;
  double median_f = 0.0;
  double sigma = 0.0;
  double min_eig = 0.0;
  double max_eig = 0.0;
  double beta1_mean = 0.0;
  double beta2_mean = 0.0;
};

struct EvolutionConfig {
  int generations = 20;
  int population = 0;  // 0 -> default lambda
  double sigma0 = 0.3;
  std::uint64_t seed = 0;
  int workers = 1;
  Eigen::VectorXd mean0;  // dimension 2 + g^2
};

struct EvolutionResult {
  Genotype best;
  double best_fitness = 0.0;
  std::vector<GenerationStats> history;
};

/// Fitness to MINIMIZE for one decoded candidate. NaN (or a throw) ranks the
/// candidate worst and the run continues.
using CandidateEvaluator =
    std::function<double(const Genotype& candidate, int generation, int candidate_index)>;

/// ask -> decode (unflatten + beta repair) -> evaluate -> tell loop; tracks the
/// best-so-far genotype. Evaluations within a generation may run on
/// cfg.workers threads; results are reassociated by candidate index.
EvolutionResult run_evolution(int genes, const CandidateEvaluator& evaluate,
                              const EvolutionConfig& cfg,
                              CmaEs* resume_state = nullptr);

}  // namespace genesnn
