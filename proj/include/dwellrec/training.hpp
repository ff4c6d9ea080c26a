#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dwellrec/model.hpp"
#include "dwellrec/preprocess.hpp"

namespace dwellrec {

struct TrainConfig {
  std::size_t epochs = 6;
  std::size_t batch_size = 256;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t seed = 0;
  bool shuffle = true;

  AdamConfig adam() const { return {lr, beta1, beta2, eps}; }
};

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double mean_loss = 0.0;
  double seconds = 0.0;
  std::string checkpoint_path;
};

struct TrainLog {
  std::vector<EpochStats> epochs;
};

// Packs examples into left-padded batches. Shuffle order is a deterministic
// function of (seed, epoch); the final short batch is kept. Items and dwell
// buckets are shifted into model index space (padding slot 0).
std::vector<Batch> make_batches(std::span<const Example> examples, std::size_t batch_size,
                                std::size_t max_len, std::uint64_t seed, std::size_t epoch,
                                bool shuffle = true);

// Called after each epoch with the 1-based epoch number and current params.
using EpochCallback = std::function<void(std::size_t, const ModelParams&)>;

// Mini-batch training: forward, backward, one Adam step per parameter per
// batch. When checkpoint_dir is nonempty an `epoch_<n>.ckpt` is written after
// each epoch. Aborts with NumericError (epoch, batch, parameter stats) when
// the loss goes non-finite. Fully deterministic for a fixed seed.
TrainLog train(ModelParams& params, std::span<const Example> examples, const TrainConfig& config,
               const std::string& checkpoint_dir = "", std::uint64_t vocab_hash = 0,
               const EpochCallback& after_epoch = {});

void save_trainlog_csv(const TrainLog& log, const std::string& path);

}  // namespace dwellrec
