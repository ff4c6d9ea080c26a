#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dwellrec/evaluation.hpp"
#include "dwellrec/model.hpp"
#include "dwellrec/preprocess.hpp"
#include "dwellrec/synth.hpp"
#include "dwellrec/training.hpp"

namespace dwellrec {

struct GridSpec {
  std::vector<std::size_t> dt_em_sizes{4, 8, 16, 32};
  std::vector<std::size_t> dt_rnn_sizes{4, 8, 16, 32, 64, 128};
};

struct DtSizes {
  std::size_t dt_em_size = 0;
  std::size_t dt_rnn_size = 0;
};

// Shared protocol knobs for the studies. The IT-RNN-side sizes stay fixed
// while the dwell-path sizes vary.
struct StudyConfig {
  std::size_t item_em_size = 128;
  std::size_t it_rnn_size = 128;
  std::size_t max_len = 15;
  std::int32_t dwell_cap = 3600;
  TrainConfig train;
  std::size_t k = 20;
};

// Vocab + augmented example sets for one train/eval split: vocab from the
// training sessions, unseen items dropped from the eval side, both augmented.
struct SplitData {
  Vocab vocab;
  std::vector<Example> train;
  std::vector<Example> eval;
};

SplitData prepare_split(std::span<const Session> train_sessions,
                        std::span<const Session> eval_sessions, std::int32_t dwell_cap);

// Per-epoch evaluation reports alongside the training log; `best` indexes
// the epoch with maximal recall (earliest on ties).
struct TrainedEval {
  TrainLog log;
  std::vector<EvalReport> reports;
  std::size_t best = 0;
};

TrainedEval train_and_evaluate(ModelParams& params, std::span<const Example> train_examples,
                               std::span<const Example> eval_examples, const TrainConfig& config,
                               std::size_t k = 20, const std::string& checkpoint_dir = "",
                               std::uint64_t vocab_hash = 0);

struct GridRow {
  DtSizes sizes;
  double recall = 0.0;
  double mrr = 0.0;
  std::size_t best_epoch = 0;
  std::size_t param_count = 0;
  std::uint64_t seed = 0;  // per-cell training seed derived from the base seed
};

// Trains one DT-RNN per grid cell and ranks the cells by validation
// Recall@k (ties: MRR@k, then fewer parameters). Cell seeds derive from the
// base seed and the cell's sizes, so results do not depend on enumeration
// order.
std::vector<GridRow> grid_search(const GridSpec& grid, std::span<const Session> train_sessions,
                                 std::span<const Session> val_sessions, const StudyConfig& cfg);

struct FoldStudyResult {
  std::vector<DtSizes> configs;
  std::vector<std::vector<double>> recall;  // [fold][config]
  std::vector<double> averages;             // per config
  std::vector<std::size_t> fold_winners;    // per fold, index into configs
  std::size_t winner = 0;                   // argmax of averages
};

// Trains every config on every fold and reports the per-fold Recall@k
// matrix, the per-config fold averages, and the average-based winner.
FoldStudyResult fold_study(std::span<const DtSizes> configs, std::span<const Fold> folds,
                           const StudyConfig& cfg);

// Executes the pipeline declared in a JSON config file ("full", "grid",
// "folds", "synth" or "histogram"), writing reports, logs, checkpoints and a
// manifest of input digests into the output directory. Returns the output
// directory. Throws ConfigError naming the config path on malformed input.
std::string run_experiment(const std::string& config_path);
std::string run_experiment(const std::string& config_path, const std::string& out_dir_override,
                           const std::vector<std::pair<std::string, std::string>>& overrides);

}  // namespace dwellrec
