#pragma once

#include <optional>

#include <Eigen/Dense>

namespace persrep {

// Flattened float grid; shape compatibility is checked by element count.
using Grid = Eigen::VectorXd;

struct NoiseSchedule {
  Eigen::VectorXd alphas;
  Eigen::VectorXd sigmas;
  Eigen::VectorXd weights;

  int length() const { return static_cast<int>(alphas.size()); }
  void validate() const;
};

// T-step schedule derived from a linear variance ramp, unit loss weights.
NoiseSchedule default_noise_schedule(int steps = 1000);

class Denoiser {
 public:
  virtual ~Denoiser() = default;
  virtual Grid predict(const Grid& noisy, const Eigen::VectorXd& cond) const = 0;
};

// Denoiser with explicit parameters and a vector-Jacobian product, enough to
// chain analytic loss gradients through it.
class DifferentiableDenoiser : public Denoiser {
 public:
  virtual Eigen::VectorXd params() const = 0;
  virtual void set_params(const Eigen::VectorXd& theta) = 0;
  // Accumulates d(upstream . predict)/d(theta) into grad.
  virtual void accumulate_param_vjp(const Grid& noisy, const Eigen::VectorXd& cond,
                                    const Grid& upstream, Eigen::VectorXd& grad) const = 0;
};

// Reconstruction term on x plus lambda-weighted prior term on x_pr:
//   w_t  |d(a_t x + s_t eps, cond) - x|^2
// + lambda w_t' |d(a_t' x_pr + s_t' eps', cond_pr) - x_pr|^2
// recon_mask, when given, restricts the first residual to foreground elements
// (1 = keep, 0 = excluded from the residual).
double dreambooth_loss(const Denoiser& denoiser, const Grid& x, const Grid& x_pr,
                       const Eigen::VectorXd& cond, const Eigen::VectorXd& cond_pr, int t,
                       int t_prime, const Grid& eps, const Grid& eps_prime, double lambda,
                       const NoiseSchedule& schedule,
                       const std::optional<Grid>& recon_mask = std::nullopt);

// Same value plus analytic dLoss/dparams of the denoiser.
double dreambooth_loss_grad(const DifferentiableDenoiser& denoiser, const Grid& x,
                            const Grid& x_pr, const Eigen::VectorXd& cond,
                            const Eigen::VectorXd& cond_pr, int t, int t_prime, const Grid& eps,
                            const Grid& eps_prime, double lambda, const NoiseSchedule& schedule,
                            Eigen::VectorXd& grad_params,
                            const std::optional<Grid>& recon_mask = std::nullopt);

// Affine toy denoiser: predict = M noisy + C cond + b. Stands in for the
// learned generator at desk scale.
class LinearDenoiser : public DifferentiableDenoiser {
 public:
  LinearDenoiser(int grid_size, int cond_size, uint64_t seed);

  Grid predict(const Grid& noisy, const Eigen::VectorXd& cond) const override;
  Eigen::VectorXd params() const override;
  void set_params(const Eigen::VectorXd& theta) override;
  void accumulate_param_vjp(const Grid& noisy, const Eigen::VectorXd& cond, const Grid& upstream,
                            Eigen::VectorXd& grad) const override;

  int param_count() const { return static_cast<int>(m_.size() + c_.size() + b_.size()); }

 private:
  Eigen::MatrixXd m_;
  Eigen::MatrixXd c_;
  Eigen::VectorXd b_;
};

}  // namespace persrep
