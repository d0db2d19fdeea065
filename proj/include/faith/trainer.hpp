#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "faith/dataset.hpp"
#include "faith/metrics.hpp"
#include "faith/model.hpp"
#include "faith/tensor.hpp"

#include "json.hpp"

namespace faith {

struct TrainConfig {
  // Desk-scale schedule; the reference full-scale run is 170 epochs with
  // 20 warmup and decay every 50.
  int epochs = 10;
  int warmup_epochs = 2;
  int decay_interval = 5;
  double decay_factor = 0.1;
  double lr_transformer = 1e-3;  // encoder, decoder, frequency branch, head
  double lr_backbone = 1e-4;     // spatial backbone convs
  int batch_size = 40;
  double sam_rho = 0.05;
  std::uint64_t seed = 1;

  void validate() const;
  nlohmann::ordered_json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct LrPair {
  double transformer = 0.0;
  double backbone = 0.0;
};

// Linear warmup to the base rates over warmup_epochs, then step decay by
// decay_factor every decay_interval epochs. Throws on epoch out of range.
LrPair lr_at(const TrainConfig& c, int epoch);

struct ParamGroup {
  std::vector<Tensor> params;
  double lr = 0.0;
};

// Transformer-and-everything-else vs. spatial backbone, with the two rates.
std::vector<ParamGroup> param_groups(const FaithModel& model, const LrPair& lrs);

// One sharpness-aware update: g = dL(w); climb to w + rho*g/|g|; descend by
// the gradient taken there. loss_fn must rebuild the loss graph from the
// current parameter values on every call. Returns the loss at the unperturbed
// point. rho <= 0 (or |g| = 0) degenerates to a plain gradient step. Throws
// on non-finite gradients.
double sam_step(const std::vector<ParamGroup>& groups, const std::function<Tensor()>& loss_fn,
                double rho);

// Deterministic one-epoch batch plan: per-length buckets shuffled with `rng`,
// then drawn round-robin across lengths so every batch mixes all available
// sequence lengths. Indexes into `records`; every record appears exactly once.
std::vector<std::vector<int>> stratified_batches(const std::vector<SampleRecord>& records,
                                                 int batch_size, std::mt19937_64& rng);

struct EpochLog {
  int epoch = 0;
  LrPair lrs;
  double train_loss = 0.0;
  MetricsReport val;

  nlohmann::ordered_json to_json() const;  // the JSONL line
};

// Resume cursor carried inside checkpoints: the next epoch to run and the
// best validation full-accuracy seen so far.
struct TrainState {
  int next_epoch = 0;
  int best_epoch = -1;
  double best_val_full = -1.0;

  nlohmann::ordered_json to_json() const;
  static TrainState from_json(const nlohmann::json& j);
};

struct TrainResult {
  TrainState state;
  std::vector<EpochLog> logs;
  std::string best_checkpoint;
  std::string last_checkpoint;
};

// The training loop: stratified minibatches, one SAM step per batch,
// validation metrics per epoch, best-by-validation-full-accuracy retention.
// Appends one JSON line per epoch to <out_dir>/train_log.jsonl and writes
// best.ckpt / last.ckpt there. Passing the TrainState recovered from
// last.ckpt continues the run bit-for-bit as if it had never stopped.
TrainResult train_loop(FaithModel& model, const std::vector<SampleRecord>& train_records,
                       const std::vector<SampleRecord>& val_records, const ImageCache& images,
                       const TrainConfig& config, const std::string& out_dir,
                       TrainState start = {});

}  // namespace faith
