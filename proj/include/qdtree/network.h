#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace qdtree {

// Probabilities over actions with illegal entries forced to exactly 0.
// Throws InvalidArgument when no action is legal.
std::vector<double> masked_softmax(std::span<const double> logits,
                                   const std::vector<bool>& legal);

// One recorded decision, as consumed by the policy update.
struct PolicySample {
  std::vector<double> features;
  std::vector<bool> legal;
  std::size_t action = 0;
  double old_log_prob = 0.0;
  double old_value = 0.0;
  double reward = 0.0;
};

struct LossWeights {
  double clip = 0.2;
  double value_coef = 0.5;
  double entropy_coef = 0.01;
  double policy_coef = 1.0;
};

struct LossTerms {
  double total = 0.0;
  double policy = 0.0;
  double value = 0.0;
  double entropy = 0.0;
};

// Two shared ReLU layers feeding a policy head (one logit per action) and a
// scalar value head. Parameters live in one flat vector.
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::size_t input_dim, std::size_t hidden, std::size_t actions,
      std::uint64_t seed);

  std::size_t input_dim() const { return in_; }
  std::size_t hidden_width() const { return hidden_; }
  std::size_t num_actions() const { return actions_; }
  std::size_t num_params() const { return params_.size(); }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }

  struct Output {
    std::vector<double> logits;
    double value = 0.0;
  };
  Output forward(std::span<const double> x) const;

  // Clipped-surrogate loss averaged over the batch, with its gradient with
  // respect to every parameter. Advantage is reward - old_value.
  LossTerms loss_and_gradient(std::span<const PolicySample> batch,
                              const LossWeights& weights,
                              std::vector<double>* grad) const;

  std::string to_json() const;
  static Mlp from_json(std::string_view text);

  bool operator==(const Mlp&) const = default;

 private:
  struct Layout {
    std::size_t w1, b1, w2, b2, wp, bp, wv, bv, total;
  };
  Layout layout() const;

  std::size_t in_ = 0;
  std::size_t hidden_ = 0;
  std::size_t actions_ = 0;
  std::vector<double> params_;
};

class Adam {
 public:
  explicit Adam(std::size_t n, double lr = 3e-4, double beta1 = 0.9,
                double beta2 = 0.999, double eps = 1e-8);
  void step(std::vector<double>& params, std::span<const double> grad);
  double learning_rate() const { return lr_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::uint64_t t_ = 0;
  std::vector<double> m_, v_;
};

}  // namespace qdtree
