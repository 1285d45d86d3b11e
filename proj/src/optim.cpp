#include "dvae/optim.hpp"

#include <cmath>

#include "dvae/error.hpp"

namespace dvae {

void AdamState::step(std::span<const std::span<double>> params, std::span<const std::span<const double>> grads) {
  if (params.size() != grads.size()) throw ShapeError("adam: tensor count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].size() != grads[i].size()) throw ShapeError("adam: tensor shape mismatch");
    for (double g : grads[i])
      if (!std::isfinite(g)) throw NumericError("adam: non-finite gradient", static_cast<int>(i / 2));
  }
  if (m_.empty()) {
    for (auto p : params) {
      m_.emplace_back(p.size(), 0.0);
      v_.emplace_back(p.size(), 0.0);
    }
  } else if (m_.size() != params.size()) {
    throw ShapeError("adam: parameter layout changed between steps");
  }

  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i];
    auto g = grads[i];
    auto& m = m_[i];
    auto& v = v_[i];
    if (m.size() != p.size()) throw ShapeError("adam: parameter layout changed between steps");
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g[j];
      v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      p[j] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

void adam_step(AdamState& state, Params& params, const Params& grads) {
  if (!(params.arch() == grads.arch())) throw ShapeError("adam: gradient architecture mismatch");
  auto p = params.tensors();
  auto g = grads.tensors();
  state.step(p, g);
}

double select_lr(std::span<const LrTrial> trials) {
  if (trials.empty()) throw Error("select_lr: empty grid");
  const LrTrial* best = nullptr;
  for (const auto& t : trials) {
    if (!std::isfinite(t.val_neg_bound)) continue;
    if (!best || t.val_neg_bound < best->val_neg_bound ||
        (t.val_neg_bound == best->val_neg_bound && t.lr < best->lr))
      best = &t;
  }
  if (!best) throw NumericError("select_lr: every learning rate diverged");
  return best->lr;
}

}  // namespace dvae
