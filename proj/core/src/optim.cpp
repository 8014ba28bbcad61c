#include "edgeorch/optim.hpp"

#include <cmath>

#include "edgeorch/errors.hpp"

namespace edgeorch::nn {

Adam::Adam(ParamStore& params, AdamConfig cfg) : params_(&params), cfg_(cfg) {
  if (!(cfg_.lr >= 0.0)) throw ConfigError("learning rate must be non-negative");
  if (!(cfg_.beta1 >= 0.0 && cfg_.beta1 < 1.0 && cfg_.beta2 >= 0.0 && cfg_.beta2 < 1.0))
    throw ConfigError("Adam betas must lie in [0, 1)");
  for (std::size_t i = 0; i < params.tensors(); ++i) {
    const auto& p = params.at(i).value;
    m_.push_back(Matrix::Zero(p.rows(), p.cols()));
    v_.push_back(Matrix::Zero(p.rows(), p.cols()));
  }
}

void Adam::step() {
  if (params_->tensors() != m_.size()) throw ContractViolation("parameter set changed under the optimizer");
  double clip = 1.0;
  if (cfg_.max_grad_norm > 0.0) {
    const double norm = params_->grad_norm();
    if (norm > cfg_.max_grad_norm) clip = cfg_.max_grad_norm / norm;
  }
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, double(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, double(t_));
  for (std::size_t i = 0; i < m_.size(); ++i) {
    auto& p = params_->at(i);
    const Matrix g = p.grad * clip;
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
    p.value.array() -= cfg_.lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + cfg_.eps);
    p.grad.setZero();
  }
}

}  // namespace edgeorch::nn
