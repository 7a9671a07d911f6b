#include "qdtree/woodblock.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <deque>
#include <numeric>
#include <thread>

#include "json.hpp"
#include "qdtree/error.h"
#include "qdtree/skipcost.h"

namespace qdtree {

void RlConfig::validate() const {
  if (!(sample_ratio > 0.0 && sample_ratio <= 1.0)) {
    throw InvalidArgument("sample ratio must lie in (0, 1]");
  }
  if (min_block_size < 1) throw InvalidArgument("min block size must be >= 1");
  if (legal_threshold() < 1.0) {
    throw InvalidArgument("sample ratio times min block size must be >= 1");
  }
  if (episodes == 0 && timeout_s <= 0.0) {
    throw InvalidArgument("an episode or time budget is required");
  }
  if (timeout_s < 0.0) throw InvalidArgument("timeout must be non-negative");
  if (hidden_width == 0) throw InvalidArgument("hidden width must be positive");
  if (!(learning_rate > 0.0)) throw InvalidArgument("learning rate must be positive");
  if (clip < 0.0) throw InvalidArgument("clip must be non-negative");
  if (batch_episodes == 0) throw InvalidArgument("batch size must be positive");
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream,
                          std::uint64_t index) {
  // FNV-1a over the stream name, then splitmix64 finalization.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : stream) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(seed) ^ h) ^ index);
}

Featurizer::Featurizer(const Schema& schema, std::size_t num_advanced)
    : num_advanced_(num_advanced) {
  for (std::size_t c = 0; c < schema.size(); ++c) {
    const auto dom = static_cast<std::uint64_t>(schema.domain(c));
    if (schema.is_numeric(c)) {
      bits_.push_back(static_cast<int>(std::bit_width(dom)));
      mask_sizes_.push_back(0);
      width_ += 2 * static_cast<std::size_t>(bits_.back());
    } else {
      bits_.push_back(0);
      mask_sizes_.push_back(dom);
      width_ += dom;
    }
  }
  width_ += num_advanced_;
}

std::vector<double> Featurizer::encode(const SemanticDescription& desc) const {
  std::vector<double> out;
  out.reserve(width_);
  auto put = [&](std::uint64_t v, int bits) {
    for (int i = bits - 1; i >= 0; --i) out.push_back(static_cast<double>((v >> i) & 1u));
  };
  for (std::size_t c = 0; c < bits_.size(); ++c) {
    if (mask_sizes_[c] == 0) {
      put(static_cast<std::uint64_t>(desc.ranges[c].lo), bits_[c]);
      put(static_cast<std::uint64_t>(desc.ranges[c].hi), bits_[c]);
    } else {
      for (std::size_t v = 0; v < mask_sizes_[c]; ++v) {
        out.push_back(desc.masks[c].test(v) ? 1.0 : 0.0);
      }
    }
  }
  for (std::size_t i = 0; i < num_advanced_; ++i) {
    out.push_back(desc.adv.test(i) ? 1.0 : 0.0);
  }
  return out;
}

std::vector<bool> legal_actions(const QdTree& tree, NodeId node,
                                const Dataset& sample,
                                std::span<const RowId> rows,
                                std::span<const Cut> cuts,
                                const RlConfig& cfg) {
  std::vector<bool> mask(cuts.size(), false);
  const double threshold = cfg.legal_threshold();
  const auto& region = tree.node(node).region;
  for (std::size_t i = 0; i < cuts.size(); ++i) {
    try {
      (void)apply_cut(region, cuts[i], tree.schema());
    } catch (const DegenerateCut&) {
      continue;
    }
    std::size_t left = 0;
    for (RowId r : rows) left += cut_matches(cuts[i], sample.row(r)) ? 1 : 0;
    const std::size_t right = rows.size() - left;
    mask[i] = static_cast<double>(left) > threshold &&
              static_cast<double>(right) > threshold;
  }
  return mask;
}

double node_reward(const QdTree& tree, NodeId node, const Dataset& sample,
                   std::span<const RowId> rows, const Workload& w) {
  if (rows.empty() || w.size() == 0) return 0.0;
  const auto skipped = skipped_under_node(tree, node, sample, rows, w);
  return static_cast<double>(skipped) /
         (static_cast<double>(w.size()) * static_cast<double>(rows.size()));
}

EpisodeRecord run_episode(const Mlp& policy, const Dataset& sample,
                          const Workload& w, std::span<const Cut> cuts,
                          const RlConfig& cfg, std::mt19937_64& rng) {
  EpisodeRecord rec;
  rec.tree = QdTree(sample.schema(), w.advanced);
  const Featurizer feat(sample.schema(), w.advanced.size());

  std::vector<std::vector<RowId>> rows_of(1);
  rows_of[0].resize(sample.num_rows());
  std::iota(rows_of[0].begin(), rows_of[0].end(), RowId{0});
  std::vector<std::size_t> step_of;  // node id -> step index + 1

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::deque<NodeId> open{rec.tree.root()};
  while (!open.empty()) {
    const NodeId id = open.front();
    open.pop_front();
    const auto& rows = rows_of[static_cast<std::size_t>(id)];
    auto legal = legal_actions(rec.tree, id, sample, rows, cuts, cfg);
    if (std::none_of(legal.begin(), legal.end(), [](bool b) { return b; })) continue;

    PolicySample ps;
    ps.features = feat.encode(rec.tree.node(id).region);
    const auto out = policy.forward(ps.features);
    const auto probs = masked_softmax(out.logits, legal);
    const double u = unit(rng);
    double cum = 0.0;
    std::size_t action = cuts.size();
    for (std::size_t i = 0; i < probs.size(); ++i) {
      if (!legal[i]) continue;
      action = i;
      cum += probs[i];
      if (u < cum) break;
    }
    ps.action = action;
    ps.legal = std::move(legal);
    ps.old_log_prob = std::log(probs[action]);
    ps.old_value = out.value;

    std::vector<RowId> left, right;
    for (RowId r : rows) {
      (cut_matches(cuts[action], sample.row(r)) ? left : right).push_back(r);
    }
    rec.tree = std::move(rec.tree).split(id, cuts[action]);
    const auto& n = rec.tree.node(id);
    rows_of.resize(rec.tree.num_nodes());
    rows_of[static_cast<std::size_t>(n.left)] = std::move(left);
    rows_of[static_cast<std::size_t>(n.right)] = std::move(right);
    step_of.resize(rec.tree.num_nodes(), 0);
    rec.steps.push_back({id, std::move(ps)});
    step_of[static_cast<std::size_t>(id)] = rec.steps.size();
    open.push_back(n.left);
    open.push_back(n.right);
  }

  // Rewards bottom-up; children always carry larger ids than their parent.
  std::vector<std::uint64_t> skipped(rec.tree.num_nodes(), 0);
  for (std::size_t i = rec.tree.num_nodes(); i-- > 0;) {
    const auto& n = rec.tree.node(static_cast<NodeId>(i));
    if (n.is_leaf()) {
      skipped[i] = block_skipped(sample, rows_of[i], w, w.advanced);
    } else {
      skipped[i] = skipped[static_cast<std::size_t>(n.left)] +
                   skipped[static_cast<std::size_t>(n.right)];
    }
    if (i < step_of.size() && step_of[i] != 0) {
      rec.steps[step_of[i] - 1].sample.reward =
          static_cast<double>(skipped[i]) /
          (static_cast<double>(w.size()) * static_cast<double>(rows_of[i].size()));
    }
  }
  rec.sample_skipped = skipped[0];
  const double denom =
      static_cast<double>(w.size()) * static_cast<double>(sample.num_rows());
  rec.sample_access_fraction =
      denom > 0 ? 1.0 - static_cast<double>(rec.sample_skipped) / denom : 1.0;
  return rec;
}

LossTerms update_policy(Mlp& policy, Adam& optimizer,
                        std::span<const EpisodeRecord> batch,
                        const RlConfig& cfg) {
  std::vector<PolicySample> samples;
  for (const auto& ep : batch) {
    for (const auto& st : ep.steps) samples.push_back(st.sample);
  }
  if (samples.empty()) return {};
  const LossWeights weights{cfg.clip, cfg.value_coef, cfg.entropy_coef, 1.0};
  LossTerms terms;
  std::vector<double> grad;
  for (std::size_t epoch = 0; epoch < std::max<std::size_t>(1, cfg.update_epochs); ++epoch) {
    terms = policy.loss_and_gradient(samples, weights, &grad);
    const bool finite =
        std::isfinite(terms.total) &&
        std::all_of(grad.begin(), grad.end(), [](double g) { return std::isfinite(g); });
    if (!finite) {
      throw NonFiniteLoss("non-finite loss (policy=" + std::to_string(terms.policy) +
                          ", value=" + std::to_string(terms.value) +
                          ", entropy=" + std::to_string(terms.entropy) +
                          ", samples=" + std::to_string(samples.size()) + ")");
    }
    optimizer.step(policy.params(), grad);
  }
  return terms;
}

std::string curve_csv_header() {
  return "episode,elapsed_ms,best_access_fraction,episode_access_fraction\n";
}

std::string curve_csv_line(const CurvePoint& p) {
  using nlohmann::json;
  return std::to_string(p.episode) + ',' + json(p.elapsed_ms).dump() + ',' +
         json(p.best_access_fraction).dump() + ',' +
         json(p.episode_access_fraction).dump() + '\n';
}

std::vector<RowId> draw_sample(std::size_t num_rows, double ratio,
                               std::uint64_t seed) {
  if (num_rows == 0) throw EmptyDataset("cannot sample an empty dataset");
  const auto want = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(ratio * static_cast<double>(num_rows))),
      1, num_rows);
  std::vector<RowId> all(num_rows);
  std::iota(all.begin(), all.end(), RowId{0});
  if (want == num_rows) return all;
  std::mt19937_64 rng(seed);
  std::vector<RowId> out;
  out.reserve(want);
  std::sample(all.begin(), all.end(), std::back_inserter(out), want, rng);
  return out;
}

TrainResult train(const Dataset& data, const Workload& w,
                  std::span<const Cut> cuts, const RlConfig& cfg,
                  const TrainOptions& opts) {
  cfg.validate();
  if (data.num_rows() == 0) throw EmptyDataset("train: no rows");
  if (cuts.empty()) throw InvalidArgument("train: no candidate cuts");
  if (w.size() == 0) throw InvalidArgument("train: empty workload");

  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  auto elapsed_ms = [&] {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
  };

  TrainResult res;
  res.sample_rows = draw_sample(data.num_rows(), cfg.sample_ratio,
                                derive_seed(cfg.seed, "sample"));
  const Dataset sample = data.subset(res.sample_rows);
  const Featurizer feat(data.schema(), w.advanced.size());
  Mlp policy = opts.initial_policy
                   ? *opts.initial_policy
                   : Mlp(feat.width(), cfg.hidden_width, cuts.size(),
                         derive_seed(cfg.seed, "init"));
  if (policy.input_dim() != feat.width() || policy.num_actions() != cuts.size()) {
    throw InvalidArgument("initial policy does not match the features or cut set");
  }
  Adam optimizer(policy.num_params(), cfg.learning_rate);
  const double denom =
      static_cast<double>(w.size()) * static_cast<double>(sample.num_rows());

  bool have_best = false;
  double best_fraction = 1.0;
  std::size_t episode = 0;
  const unsigned workers = std::max(1u, cfg.workers);
  for (;;) {
    if (cfg.episodes > 0 && episode >= cfg.episodes) break;
    if (cfg.timeout_s > 0.0 && elapsed_ms() >= cfg.timeout_s * 1000.0) break;
    std::size_t wave = cfg.batch_episodes;
    if (cfg.episodes > 0) wave = std::min(wave, cfg.episodes - episode);

    std::vector<EpisodeRecord> batch(wave);
    auto rollout = [&](std::size_t k) {
      std::mt19937_64 rng(derive_seed(cfg.seed, "episode", episode + k));
      batch[k] = run_episode(policy, sample, w, cuts, cfg, rng);
    };
    if (workers == 1 || wave == 1) {
      for (std::size_t k = 0; k < wave; ++k) rollout(k);
    } else {
      std::vector<std::thread> pool;
      for (unsigned t = 0; t < std::min<std::size_t>(workers, wave); ++t) {
        pool.emplace_back([&, t] {
          for (std::size_t k = t; k < wave; k += workers) rollout(k);
        });
      }
      for (auto& th : pool) th.join();
    }

    for (std::size_t k = 0; k < wave; ++k) {
      auto& ep = batch[k];
      const double score = opts.score ? opts.score(ep.tree)
                                      : static_cast<double>(ep.sample_skipped);
      if (!have_best || score > res.best_score) {
        have_best = true;
        res.best = ep.tree;
        res.best_score = score;
        res.best_sample_skipped = ep.sample_skipped;
        best_fraction = denom > 0 ? 1.0 - static_cast<double>(ep.sample_skipped) / denom : 1.0;
      }
      CurvePoint pt{episode + k + 1, elapsed_ms(), best_fraction,
                    ep.sample_access_fraction};
      res.curve.push_back(pt);
      if (opts.on_episode) opts.on_episode(pt);
    }
    episode += wave;
    if (cfg.learn) update_policy(policy, optimizer, batch, cfg);
  }
  res.episodes_run = episode;
  res.policy = std::move(policy);
  return res;
}

}  // namespace qdtree
