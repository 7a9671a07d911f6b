#include "qdtree/network.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "json.hpp"
#include "qdtree/error.h"

namespace qdtree {

using json = nlohmann::json;

std::vector<double> masked_softmax(std::span<const double> logits,
                                   const std::vector<bool>& legal) {
  if (legal.size() != logits.size()) {
    throw InvalidArgument("mask length differs from logit count");
  }
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (legal[i]) top = std::max(top, logits[i]);
  }
  if (top == -std::numeric_limits<double>::infinity()) {
    throw InvalidArgument("masked softmax over no legal action");
  }
  std::vector<double> p(logits.size(), 0.0);
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (!legal[i]) continue;
    p[i] = std::exp(logits[i] - top);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

Mlp::Mlp(std::size_t input_dim, std::size_t hidden, std::size_t actions,
         std::uint64_t seed)
    : in_(input_dim), hidden_(hidden), actions_(actions) {
  if (input_dim == 0 || hidden == 0 || actions == 0) {
    throw InvalidArgument("network dimensions must be positive");
  }
  const Layout l = layout();
  params_.assign(l.total, 0.0);
  std::mt19937_64 rng(seed);
  auto fill = [&](std::size_t off, std::size_t count, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (std::size_t i = 0; i < count; ++i) params_[off + i] = dist(rng);
  };
  fill(l.w1, hidden_ * in_, in_);
  fill(l.w2, hidden_ * hidden_, hidden_);
  fill(l.wp, actions_ * hidden_, hidden_);
  fill(l.wv, hidden_, hidden_);
}

Mlp::Layout Mlp::layout() const {
  Layout l{};
  std::size_t off = 0;
  l.w1 = off; off += hidden_ * in_;
  l.b1 = off; off += hidden_;
  l.w2 = off; off += hidden_ * hidden_;
  l.b2 = off; off += hidden_;
  l.wp = off; off += actions_ * hidden_;
  l.bp = off; off += actions_;
  l.wv = off; off += hidden_;
  l.bv = off; off += 1;
  l.total = off;
  return l;
}

namespace {

struct Activations {
  std::vector<double> pre1, h1, pre2, h2, logits;
  double value = 0.0;
};

void affine(const double* w, const double* b, std::span<const double> x,
            std::size_t rows, std::vector<double>& out) {
  out.assign(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = b[r];
    const double* row = w + r * x.size();
    for (std::size_t c = 0; c < x.size(); ++c) acc += row[c] * x[c];
    out[r] = acc;
  }
}

std::vector<double> relu(const std::vector<double>& v) {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] > 0.0 ? v[i] : 0.0;
  return out;
}

}  // namespace

Mlp::Output Mlp::forward(std::span<const double> x) const {
  if (x.size() != in_) throw InvalidArgument("feature width mismatch");
  const Layout l = layout();
  const double* p = params_.data();
  std::vector<double> pre1, pre2, logits;
  affine(p + l.w1, p + l.b1, x, hidden_, pre1);
  const auto h1 = relu(pre1);
  affine(p + l.w2, p + l.b2, h1, hidden_, pre2);
  const auto h2 = relu(pre2);
  affine(p + l.wp, p + l.bp, h2, actions_, logits);
  std::vector<double> value;
  affine(p + l.wv, p + l.bv, h2, 1, value);
  return {std::move(logits), value[0]};
}

LossTerms Mlp::loss_and_gradient(std::span<const PolicySample> batch,
                                 const LossWeights& wts,
                                 std::vector<double>* grad) const {
  if (batch.empty()) throw InvalidArgument("empty policy batch");
  const Layout l = layout();
  const double* p = params_.data();
  if (grad) grad->assign(l.total, 0.0);
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  LossTerms terms;

  for (const auto& s : batch) {
    if (s.features.size() != in_ || s.legal.size() != actions_ || s.action >= actions_) {
      throw InvalidArgument("policy sample does not fit the network");
    }
    Activations a;
    affine(p + l.w1, p + l.b1, s.features, hidden_, a.pre1);
    a.h1 = relu(a.pre1);
    affine(p + l.w2, p + l.b2, a.h1, hidden_, a.pre2);
    a.h2 = relu(a.pre2);
    affine(p + l.wp, p + l.bp, a.h2, actions_, a.logits);
    std::vector<double> v;
    affine(p + l.wv, p + l.bv, a.h2, 1, v);
    a.value = v[0];

    const auto probs = masked_softmax(a.logits, s.legal);
    const double log_pa = std::log(probs[s.action]);
    const double ratio = std::exp(log_pa - s.old_log_prob);
    const double adv = s.reward - s.old_value;
    const double unclipped = ratio * adv;
    const double clipped =
        std::clamp(ratio, 1.0 - wts.clip, 1.0 + wts.clip) * adv;
    const bool active = unclipped <= clipped;
    const double policy_loss = -std::min(unclipped, clipped);

    double entropy = 0.0;
    for (std::size_t j = 0; j < actions_; ++j) {
      if (probs[j] > 0.0) entropy -= probs[j] * std::log(probs[j]);
    }
    const double value_err = a.value - s.reward;

    terms.policy += policy_loss * inv_n;
    terms.value += value_err * value_err * inv_n;
    terms.entropy += entropy * inv_n;
    if (!grad) continue;

    std::vector<double> dlogits(actions_, 0.0);
    const double dlogp = active ? -ratio * adv : 0.0;
    for (std::size_t j = 0; j < actions_; ++j) {
      if (!s.legal[j]) continue;
      double d = wts.policy_coef * dlogp * ((j == s.action ? 1.0 : 0.0) - probs[j]);
      if (probs[j] > 0.0) {
        d += wts.entropy_coef * probs[j] * (std::log(probs[j]) + entropy);
      }
      dlogits[j] = d * inv_n;
    }
    const double dvalue = wts.value_coef * 2.0 * value_err * inv_n;

    auto& g = *grad;
    std::vector<double> dh2(hidden_, 0.0);
    for (std::size_t j = 0; j < actions_; ++j) {
      g[l.bp + j] += dlogits[j];
      for (std::size_t k = 0; k < hidden_; ++k) {
        g[l.wp + j * hidden_ + k] += dlogits[j] * a.h2[k];
        dh2[k] += p[l.wp + j * hidden_ + k] * dlogits[j];
      }
    }
    g[l.bv] += dvalue;
    for (std::size_t k = 0; k < hidden_; ++k) {
      g[l.wv + k] += dvalue * a.h2[k];
      dh2[k] += p[l.wv + k] * dvalue;
      if (a.pre2[k] <= 0.0) dh2[k] = 0.0;
    }
    std::vector<double> dh1(hidden_, 0.0);
    for (std::size_t r = 0; r < hidden_; ++r) {
      if (dh2[r] == 0.0) continue;
      g[l.b2 + r] += dh2[r];
      for (std::size_t c = 0; c < hidden_; ++c) {
        g[l.w2 + r * hidden_ + c] += dh2[r] * a.h1[c];
        dh1[c] += p[l.w2 + r * hidden_ + c] * dh2[r];
      }
    }
    for (std::size_t r = 0; r < hidden_; ++r) {
      if (a.pre1[r] <= 0.0 || dh1[r] == 0.0) continue;
      g[l.b1 + r] += dh1[r];
      for (std::size_t c = 0; c < in_; ++c) {
        g[l.w1 + r * in_ + c] += dh1[r] * s.features[c];
      }
    }
  }
  terms.total = wts.policy_coef * terms.policy + wts.value_coef * terms.value -
                wts.entropy_coef * terms.entropy;
  return terms;
}

std::string Mlp::to_json() const {
  json j{{"input_dim", in_},
         {"hidden_width", hidden_},
         {"num_actions", actions_},
         {"layout", {"w1", "b1", "w2", "b2", "policy_w", "policy_b", "value_w", "value_b"}},
         {"params", params_}};
  return j.dump();
}

Mlp Mlp::from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  }
  try {
    Mlp m;
    m.in_ = j.at("input_dim").get<std::size_t>();
    m.hidden_ = j.at("hidden_width").get<std::size_t>();
    m.actions_ = j.at("num_actions").get<std::size_t>();
    m.params_ = j.at("params").get<std::vector<double>>();
    if (m.params_.size() != m.layout().total) {
      throw ParseError("checkpoint: parameter count does not match shapes");
    }
    return m;
  } catch (const json::exception& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  }
}

Adam::Adam(std::size_t n, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(n, 0.0), v_(n, 0.0) {}

void Adam::step(std::vector<double>& params, std::span<const double> grad) {
  if (params.size() != m_.size() || grad.size() != m_.size()) {
    throw InvalidArgument("optimizer state size mismatch");
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
    params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
  }
}

}  // namespace qdtree
