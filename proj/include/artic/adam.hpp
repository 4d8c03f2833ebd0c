#pragma once

#include <Eigen/Core>

#include <cmath>
#include <stdexcept>

namespace artic {

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double lr_start = 0.005;
  double lr_end = 0.0005;
};

/// Adam with a learning rate decaying exponentially from lr_start to lr_end
/// over `total_steps` updates.
class Adam {
 public:
  Adam(Eigen::Index size, AdamOptions opts, int total_steps)
      : opts_(opts), total_steps_(total_steps), m_(Eigen::VectorXd::Zero(size)), v_(Eigen::VectorXd::Zero(size)) {
    if (total_steps < 0) throw std::invalid_argument("negative step count");
  }

  /// Starts a new lr schedule of `total_steps` updates while keeping the
  /// moment estimates and their bias-correction count.
  void restart_schedule(int total_steps) {
    if (total_steps < 0) throw std::invalid_argument("negative step count");
    total_steps_ = total_steps;
    schedule_pos_ = 0;
  }

  /// Learning rate used by update number k (0-based) of the current schedule.
  double lr(int k) const {
    if (total_steps_ <= 1) return opts_.lr_start;
    const double frac = static_cast<double>(k) / (total_steps_ - 1);
    return opts_.lr_start * std::pow(opts_.lr_end / opts_.lr_start, frac);
  }

  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
    const double rate = lr(schedule_pos_++);
    ++steps_;
    m_ = opts_.beta1 * m_ + (1.0 - opts_.beta1) * grad;
    v_ = opts_.beta2 * v_ + (1.0 - opts_.beta2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(opts_.beta1, steps_);
    const double c2 = 1.0 - std::pow(opts_.beta2, steps_);
    params.array() -= rate * (m_.array() / c1) / ((v_.array() / c2).sqrt() + opts_.eps);
  }

  int steps_taken() const { return steps_; }
  Eigen::Index size() const { return m_.size(); }
  const Eigen::VectorXd& first_moment() const { return m_; }
  const Eigen::VectorXd& second_moment() const { return v_; }

 private:
  AdamOptions opts_;
  int total_steps_;
  int steps_ = 0;
  int schedule_pos_ = 0;
  Eigen::VectorXd m_, v_;
};

}  // namespace artic
