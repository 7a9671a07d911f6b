#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "qdtree/model.h"
#include "qdtree/network.h"
#include "qdtree/tree.h"

namespace qdtree {

struct RlConfig {
  double sample_ratio = 0.1;
  std::size_t min_block_size = 1;
  std::size_t episodes = 500;
  double timeout_s = 0.0;  // 0 = no wall-clock limit
  std::size_t hidden_width = 64;
  double learning_rate = 3e-4;
  double clip = 0.2;
  double entropy_coef = 0.01;
  double value_coef = 0.5;
  std::size_t batch_episodes = 8;
  std::size_t update_epochs = 1;
  // When false every episode samples from the initial policy.
  bool learn = true;
  std::uint64_t seed = 0;
  unsigned workers = 1;

  // Throws InvalidArgument for an unusable configuration.
  void validate() const;
  // Legal cuts leave strictly more than this many sample rows per side.
  double legal_threshold() const {
    return sample_ratio * static_cast<double>(min_block_size);
  }
};

// Deterministic 64-bit seed for a named sub-stream of `seed`.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream,
                          std::uint64_t index = 0);

// Binary encoding of a node's cut-derived description: for each numeric
// column, lo and hi in bit_width(|Dom|) bits each; then every categorical
// mask; then the advanced-cut bits.
class Featurizer {
 public:
  Featurizer(const Schema& schema, std::size_t num_advanced);
  std::size_t width() const { return width_; }
  std::vector<double> encode(const SemanticDescription& desc) const;

 private:
  std::vector<std::size_t> mask_sizes_;  // per column; 0 for numeric
  std::size_t num_advanced_;
  std::vector<int> bits_;  // per column; 0 for categorical
  std::size_t width_ = 0;
};

// mask[i] is true iff cut i is non-degenerate on the node and leaves more
// than s*b of the node's sample rows on each side.
std::vector<bool> legal_actions(const QdTree& tree, NodeId node,
                                const Dataset& sample,
                                std::span<const RowId> rows,
                                std::span<const Cut> cuts,
                                const RlConfig& cfg);

// S(n) / (|W| * |rows|) for the subtree under `node`.
double node_reward(const QdTree& tree, NodeId node, const Dataset& sample,
                   std::span<const RowId> rows, const Workload& w);

struct EpisodeStep {
  NodeId node = 0;
  PolicySample sample;
};

struct EpisodeRecord {
  std::vector<EpisodeStep> steps;
  QdTree tree;
  std::uint64_t sample_skipped = 0;  // C(T) on the sample
  double sample_access_fraction = 1.0;
};

// One rollout: a FIFO queue of open nodes starting at the root. Nodes with
// no legal cut close as leaves; others sample a legal cut from the policy.
EpisodeRecord run_episode(const Mlp& policy, const Dataset& sample,
                          const Workload& w, std::span<const Cut> cuts,
                          const RlConfig& cfg, std::mt19937_64& rng);

// Runs cfg.update_epochs Adam steps of the clipped-surrogate loss on every
// step of the batch. Throws NonFiniteLoss.
LossTerms update_policy(Mlp& policy, Adam& optimizer,
                        std::span<const EpisodeRecord> batch,
                        const RlConfig& cfg);

struct CurvePoint {
  std::size_t episode = 0;
  double elapsed_ms = 0.0;
  double best_access_fraction = 1.0;
  double episode_access_fraction = 1.0;
};

std::string curve_csv_header();
std::string curve_csv_line(const CurvePoint& p);

struct TrainOptions {
  // Replaces C(T) on the sample as the best-tree score when set.
  std::function<double(const QdTree&)> score;
  // Called once per finished episode, in episode order.
  std::function<void(const CurvePoint&)> on_episode;
  // Starting policy; a fresh seeded network otherwise.
  std::optional<Mlp> initial_policy;
};

struct TrainResult {
  QdTree best;  // unfrozen; freeze on the full dataset before use
  double best_score = 0.0;
  std::uint64_t best_sample_skipped = 0;
  std::vector<CurvePoint> curve;
  Mlp policy;
  std::size_t episodes_run = 0;
  std::vector<RowId> sample_rows;
};

TrainResult train(const Dataset& data, const Workload& w,
                  std::span<const Cut> cuts, const RlConfig& cfg,
                  const TrainOptions& opts = {});

// Uniform sample without replacement of round(s*|V|) rows (at least one),
// in ascending row order.
std::vector<RowId> draw_sample(std::size_t num_rows, double ratio,
                               std::uint64_t seed);

}  // namespace qdtree
