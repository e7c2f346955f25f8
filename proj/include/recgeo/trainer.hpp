#pragma once

#include "recgeo/embedding_matrix.hpp"
#include "recgeo/ingest.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

namespace recgeo {

struct TrainConfig {
  Index embed_dim = 64;
  Index hidden_dim = 64;
  bool normalize_candidates = true;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 0.0;
  int epochs = 100;
  Index batch_size = 128;
  std::uint64_t seed = 0;
  Index rho_sample = 512;
  Index rho_m = 10;
  int early_stop_patience = 10;  // epochs without NDCG@10 gain; 0 disables
  Index max_history = 50;        // longest prefix fed to the encoder

  void validate() const;
};

enum class InitMode { from_matrix, random };

/// One next-item prediction: the encoder sees `prefix`, the label is `target`.
struct Example {
  std::vector<ItemId> prefix;
  ItemId target = 0;
};

/// Leave-one-out split: each sequence's last item is the validation target
/// for its full prefix; every earlier position t >= 1 yields a training
/// example (q_0..q_{t-1}) -> q_t. Prefixes keep at most `max_history` items.
struct SplitData {
  std::vector<Example> train;
  std::vector<Example> valid;
  Index num_items = 0;
};

SplitData leave_one_out(const InteractionLog& log, Index max_history);

/// Trainable tensors. Gradients and optimizer moments reuse the same layout.
struct Parameters {
  Matrix embeddings;  // items x d
  Matrix w1;          // hidden x d
  Vector b1;          // hidden
  Matrix w2;          // d x hidden
  Vector b2;          // d

  static Parameters zeros_like(const Parameters& p);
  bool all_finite() const;
};

struct Model {
  Parameters params;
  Parameters first_moment;
  Parameters second_moment;
  long step = 0;

  Index num_items() const noexcept { return params.embeddings.rows(); }
  Index embed_dim() const noexcept { return params.embeddings.cols(); }
  EmbeddingMatrix embeddings() const { return EmbeddingMatrix(params.embeddings); }
};

/// from_matrix copies `init` into the embedding table; random draws it from
/// U(-1/sqrt(d), 1/sqrt(d)) and only uses init.rows(). The encoder weights are
/// always drawn from the seed; biases start at zero.
Model init_model(const EmbeddingMatrix& init, const TrainConfig& cfg, InitMode mode);

/// h = W2 tanh(W1 mean(e_q) + b1) + b2.
Vector encode(const Parameters& params, std::span<const ItemId> sequence);

/// s = E h, or with normalization s_i = <e_i / |e_i|, h> (0 for zero rows).
Vector logits(const Parameters& params, const Vector& h, bool normalize);

struct LossAndGrads {
  double loss = 0.0;  // batch mean cross-entropy
  Parameters grads;
};

/// Throws NumericalError (epoch/batch = -1) naming the first example whose loss is not finite.
LossAndGrads loss_and_grads(const Parameters& params, std::span<const Example> batch,
                            bool normalize);

/// One AdamW step with decoupled weight decay.
void adam_step(Model& model, const Parameters& grads, const TrainConfig& cfg);

struct RankingMetrics {
  Index n = 0;
  double hit_rate = 0.0;
  double ndcg = 0.0;
};

/// 1-based rank of `target`; equal scores rank the smaller item id first.
Index rank_of(const Vector& scores, ItemId target);

/// HR@N and NDCG@N (gain 1/log2(rank+1)) from 1-based ranks.
RankingMetrics ranking_metrics(std::span<const Index> ranks, Index n);

std::vector<RankingMetrics> evaluate(const Parameters& params, std::span<const Example> examples,
                                     bool normalize, std::span<const Index> cutoffs);

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;
  double rho = 0.0;
  double hr5 = 0.0;
  double ndcg5 = 0.0;
  double hr10 = 0.0;
  double ndcg10 = 0.0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct MetricsTrace {
  std::vector<EpochRecord> records;
  int best_epoch = 0;
  bool stopped_early = false;
  nlohmann::json metadata;
};

/// Mean effective coherence over `examples` under the current parameters.
double mean_coherence(const Parameters& params, std::span<const Example> examples, bool normalize,
                      Index m);

/// Trains in place. Batch order is shuffled by a generator seeded from cfg.seed,
/// so identical inputs give bit-identical traces.
MetricsTrace train(Model& model, const SplitData& data, const TrainConfig& cfg);

void write_trace_csv(const MetricsTrace& trace, std::ostream& out);
nlohmann::json to_json(const MetricsTrace& trace);

/// Directory of EMB1 tensors plus checkpoint.json.
std::vector<std::filesystem::path> save_checkpoint(const Model& model, bool normalize,
                                                   const std::filesystem::path& dir);
struct Checkpoint {
  Model model;
  bool normalize = true;
};
Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace recgeo
