// dwellrec: session-based next-item recommendation with GRU networks and a
// dwell-time extension. Subcommands cover the data pipeline (ingest,
// preprocess, histogram, synth), model work (train, eval, compare) and the
// experiment drivers (grid, folds, run).

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dwellrec/errors.hpp"
#include "dwellrec/evaluation.hpp"
#include "dwellrec/experiments.hpp"
#include "dwellrec/model.hpp"
#include "dwellrec/preprocess.hpp"
#include "dwellrec/rng.hpp"
#include "dwellrec/synth.hpp"
#include "dwellrec/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dwellrec;

namespace {

struct CommonPipelineArgs {
  std::string config_path;
  std::string out_dir;
  bool has_seed = false;
  std::uint64_t seed = 0;
};

// remaining CLI tokens of the form --key=value (dotted keys address nested
// config entries, e.g. --train.epochs=3)
std::vector<std::pair<std::string, std::string>> collect_overrides(
    const std::vector<std::string>& extras) {
  std::vector<std::pair<std::string, std::string>> overrides;
  for (const std::string& tok : extras) {
    std::string body = tok;
    if (body.rfind("--", 0) == 0) body = body.substr(2);
    const auto eq = body.find('=');
    if (body.empty() || eq == std::string::npos || eq == 0) {
      throw ConfigError("unrecognized argument '" + tok + "' (expected --key=value)");
    }
    overrides.emplace_back(body.substr(0, eq), body.substr(eq + 1));
  }
  return overrides;
}

void run_pipeline_command(const CommonPipelineArgs& args, const char* forced_pipeline,
                          std::vector<std::pair<std::string, std::string>> overrides) {
  if (forced_pipeline) overrides.emplace_back("pipeline", std::string(forced_pipeline));
  if (args.has_seed) overrides.emplace_back("seed", std::to_string(args.seed));
  const std::string out = run_experiment(args.config_path, args.out_dir, overrides);
  std::cout << json{{"out_dir", out}}.dump() << "\n";
}

CLI::App* add_pipeline_subcommand(CLI::App& app, CommonPipelineArgs& args, const char* name,
                                  const char* description) {
  CLI::App* cmd = app.add_subcommand(name, description);
  cmd->add_option("--config", args.config_path, "experiment config (JSON)")->required();
  cmd->add_option("--out-dir", args.out_dir, "output directory (overrides config)");
  cmd->add_option("--seed", args.seed, "global seed override")
      ->each([&args](const std::string&) { args.has_seed = true; });
  cmd->allow_extras();  // --key=value config overrides
  return cmd;
}

json session_stats(const std::vector<Session>& sessions) {
  std::size_t clicks = 0;
  std::unordered_set<std::int64_t> items;
  std::int64_t first_day = 0, last_day = 0;
  for (std::size_t i = 0; i < sessions.size(); ++i) {
    clicks += sessions[i].length();
    for (const Click& c : sessions[i].clicks) items.insert(c.item_id);
    const std::int64_t d = session_day(sessions[i]);
    if (i == 0) {
      first_day = last_day = d;
    } else {
      first_day = std::min(first_day, d);
      last_day = std::max(last_day, d);
    }
  }
  return json{{"sessions", sessions.size()},
              {"clicks", clicks},
              {"items", items.size()},
              {"first_day", first_day},
              {"last_day", last_day},
              {"avg_session_length",
               sessions.empty() ? 0.0
                                : static_cast<double>(clicks) / static_cast<double>(sessions.size())}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"session-based next-item recommendation with dwell-time features"};
  app.require_subcommand(1);

  // ---- ingest ----
  std::string in_path;
  bool lenient = false;
  CLI::App* ingest = app.add_subcommand("ingest", "parse a click log and report statistics");
  ingest->add_option("--input", in_path, "click CSV file")->required();
  ingest->add_flag("--lenient", lenient, "skip malformed lines instead of aborting");

  // ---- preprocess ----
  std::string pp_input, pp_out_dir;
  std::int32_t dwell_cap = 3600;
  std::size_t min_len = 2, min_support = 5, max_len = 16;
  bool pp_lenient = false, pp_last_prefix_only = false;
  CLI::App* preprocess =
      app.add_subcommand("preprocess", "filter, split, and augment a click log");
  preprocess->add_option("--input", pp_input, "click CSV file")->required();
  preprocess->add_option("--out-dir", pp_out_dir, "output directory")->required();
  preprocess->add_option("--dwell-cap", dwell_cap, "dwell bucket cap in seconds");
  preprocess->add_option("--min-len", min_len, "minimum session length");
  preprocess->add_option("--min-support", min_support, "minimum item click count");
  preprocess->add_option("--max-len", max_len, "maximum session length");
  preprocess->add_flag("--lenient", pp_lenient, "skip malformed lines");
  preprocess->add_flag("--last-prefix-only", pp_last_prefix_only,
                       "keep only the longest prefix per test session");

  // ---- train ----
  std::string tr_examples, tr_vocab, tr_model = "itrnn", tr_out_dir;
  TrainConfig train_cfg;
  std::size_t item_em_size = 128, it_rnn_size = 128, dt_em_size = 16, dt_rnn_size = 8,
              model_max_len = 15;
  bool no_shuffle = false;
  CLI::App* train_cmd = app.add_subcommand("train", "train a model on processed examples");
  train_cmd->add_option("--examples", tr_examples, "training examples file")->required();
  train_cmd->add_option("--vocab", tr_vocab, "vocab file")->required();
  train_cmd->add_option("--model", tr_model, "itrnn or dtrnn");
  train_cmd->add_option("--out-dir", tr_out_dir, "checkpoint/log directory")->required();
  train_cmd->add_option("--epochs", train_cfg.epochs, "training epochs");
  train_cmd->add_option("--batch-size", train_cfg.batch_size, "mini-batch size");
  train_cmd->add_option("--lr", train_cfg.lr, "Adam learning rate");
  train_cmd->add_option("--beta1", train_cfg.beta1, "Adam beta1");
  train_cmd->add_option("--beta2", train_cfg.beta2, "Adam beta2");
  train_cmd->add_option("--eps", train_cfg.eps, "Adam epsilon");
  train_cmd->add_option("--seed", train_cfg.seed, "training seed");
  train_cmd->add_flag("--no-shuffle", no_shuffle, "disable epoch shuffling");
  train_cmd->add_option("--item-em-size", item_em_size, "item embedding size");
  train_cmd->add_option("--it-rnn-size", it_rnn_size, "item GRU size");
  train_cmd->add_option("--dt-em-size", dt_em_size, "dwell embedding size (dtrnn)");
  train_cmd->add_option("--dt-rnn-size", dt_rnn_size, "dwell GRU size (dtrnn)");
  train_cmd->add_option("--max-len", model_max_len, "padded sequence length");

  // ---- eval ----
  std::string ev_checkpoint, ev_examples, ev_vocab, ev_out_csv, ev_out_json;
  std::size_t ev_k = 20, ev_batch = 256, ev_epoch = 0;
  bool ev_last_prefix_only = false;
  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on examples");
  eval_cmd->add_option("--checkpoint", ev_checkpoint, "checkpoint file")->required();
  eval_cmd->add_option("--examples", ev_examples, "evaluation examples file")->required();
  eval_cmd->add_option("--vocab", ev_vocab, "vocab file (consistency check)");
  eval_cmd->add_option("--k", ev_k, "cutoff for Recall@k / MRR@k");
  eval_cmd->add_option("--batch-size", ev_batch, "evaluation batch size");
  eval_cmd->add_option("--epoch", ev_epoch, "epoch tag for the report");
  eval_cmd->add_option("--out-csv", ev_out_csv, "per-example report CSV");
  eval_cmd->add_option("--out-json", ev_out_json, "aggregate JSON");
  eval_cmd->add_flag("--last-prefix-only", ev_last_prefix_only,
                     "evaluate only the longest prefix per session");

  // ---- histogram ----
  std::string hg_input, hg_output;
  std::int32_t hg_cap = 3600;
  bool hg_no_filter = false, hg_lenient = false;
  CLI::App* histogram_cmd =
      app.add_subcommand("histogram", "dwell-time histogram of a click log");
  histogram_cmd->add_option("--input", hg_input, "click CSV file")->required();
  histogram_cmd->add_option("--output", hg_output, "histogram CSV")->required();
  histogram_cmd->add_option("--dwell-cap", hg_cap, "dwell bucket cap in seconds");
  histogram_cmd->add_flag("--no-filter", hg_no_filter, "skip the preprocessing filter");
  histogram_cmd->add_flag("--lenient", hg_lenient, "skip malformed lines");

  // ---- compare ----
  std::string cp_a, cp_b, cp_out;
  std::size_t cp_k = 20;
  CLI::App* compare_cmd = app.add_subcommand(
      "compare", "Wilcoxon signed-rank test between two evaluation reports");
  compare_cmd->add_option("--a", cp_a, "first report CSV")->required();
  compare_cmd->add_option("--b", cp_b, "second report CSV")->required();
  compare_cmd->add_option("--k", cp_k, "reciprocal-rank cutoff");
  compare_cmd->add_option("--out", cp_out, "result JSON file");

  // ---- config-driven pipelines ----
  CommonPipelineArgs grid_args, folds_args, synth_args, run_args;
  add_pipeline_subcommand(app, grid_args, "grid", "dwell-parameter grid search");
  add_pipeline_subcommand(app, folds_args, "folds", "fold-based model selection study");
  add_pipeline_subcommand(app, synth_args, "synth", "generate a synthetic click log");
  add_pipeline_subcommand(app, run_args, "run", "run the pipeline declared in a config");

  try {
    app.parse(argc, argv);

    if (*ingest) {
      ParseStats stats;
      const auto clicks = parse_clicks_file(
          in_path, lenient ? ParseMode::lenient : ParseMode::strict, &stats);
      json out = session_stats(build_sessions(clicks));
      out["skipped_lines"] = stats.skipped;
      std::cout << out.dump(2) << "\n";
    } else if (*preprocess) {
      const auto clicks = parse_clicks_file(
          pp_input, pp_lenient ? ParseMode::lenient : ParseMode::strict);
      const auto filtered =
          filter_dataset(build_sessions(clicks), {min_len, min_support, max_len});
      SplitSpec split = temporal_split(filtered);
      SplitData data = prepare_split(split.train, split.heldout, dwell_cap);
      if (pp_last_prefix_only) data.eval = last_prefix_only(data.eval);
      fs::create_directories(pp_out_dir);
      save_vocab(data.vocab, pp_out_dir + "/vocab.tsv");
      save_examples(data.train, pp_out_dir + "/train.examples");
      save_examples(data.eval, pp_out_dir + "/test.examples");
      std::cout << json{{"train_sessions", split.train.size()},
                        {"test_sessions", split.heldout.size()},
                        {"train_examples", data.train.size()},
                        {"test_examples", data.eval.size()},
                        {"items", data.vocab.size()},
                        {"boundary_day", split.boundary_day}}
                       .dump(2)
                << "\n";
    } else if (*train_cmd) {
      const Vocab vocab = load_vocab(tr_vocab);
      const auto examples = load_examples(tr_examples);
      train_cfg.shuffle = !no_shuffle;
      const ModelKind kind = model_kind_from_string(tr_model);
      ModelParams params =
          kind == ModelKind::it_rnn
              ? init_params(config_for_vocab(vocab, item_em_size, it_rnn_size, model_max_len),
                            train_cfg.seed)
              : init_params(dt_config_for_vocab(vocab, item_em_size, it_rnn_size, dt_em_size,
                                                dt_rnn_size, model_max_len),
                            train_cfg.seed);
      fs::create_directories(tr_out_dir);
      const TrainLog log =
          train(params, examples, train_cfg, tr_out_dir, vocab_fingerprint(vocab));
      save_trainlog_csv(log, tr_out_dir + "/trainlog.csv");
      std::cout << json{{"epochs", log.epochs.size()},
                        {"final_loss", log.epochs.back().mean_loss},
                        {"out_dir", tr_out_dir}}
                       .dump(2)
                << "\n";
    } else if (*eval_cmd) {
      const Checkpoint ckpt = load_checkpoint(ev_checkpoint);
      if (!ev_vocab.empty()) {
        const Vocab vocab = load_vocab(ev_vocab);
        if (vocab_fingerprint(vocab) != ckpt.vocab_hash) {
          throw ConfigError("vocab file does not match the checkpoint's vocab hash");
        }
      }
      auto examples = load_examples(ev_examples);
      if (ev_last_prefix_only) examples = last_prefix_only(examples);
      const EvalReport report = evaluate(ckpt.params, examples, ev_k, ev_batch, ev_epoch);
      if (!ev_out_csv.empty()) save_eval_csv(report, ev_out_csv);
      if (!ev_out_json.empty()) save_eval_json(report, ev_out_json);
      std::cout << json{{"recall_at_20", report.recall},
                        {"mrr_at_20", report.mrr},
                        {"n", report.n},
                        {"epoch", report.epoch}}
                       .dump(2)
                << "\n";
    } else if (*histogram_cmd) {
      const auto clicks = parse_clicks_file(
          hg_input, hg_lenient ? ParseMode::lenient : ParseMode::strict);
      auto sessions = build_sessions(clicks);
      if (!hg_no_filter) sessions = filter_dataset(sessions);
      const auto hist = dwell_histogram(sessions, hg_cap);
      save_histogram_csv(hist, hg_output);
      std::cout << json{{"buckets", hist.size()}, {"output", hg_output}}.dump() << "\n";
    } else if (*compare_cmd) {
      const EvalReport a = load_eval_csv(cp_a);
      const EvalReport b = load_eval_csv(cp_b);
      if (a.outcomes.size() != b.outcomes.size()) {
        throw ConfigError("reports cover different example counts");
      }
      for (std::size_t i = 0; i < a.outcomes.size(); ++i) {
        if (a.outcomes[i].session_id != b.outcomes[i].session_id ||
            a.outcomes[i].target != b.outcomes[i].target) {
          throw ConfigError("reports are not aligned at row " + std::to_string(i + 1));
        }
      }
      const auto rr_a = reciprocal_ranks_at_k(a, cp_k);
      const auto rr_b = reciprocal_ranks_at_k(b, cp_k);
      const WilcoxonResult res = wilcoxon_signed_rank(rr_a, rr_b);
      const json out{
          {"n_effective", res.n_effective},
          {"w", res.w},
          {"p_two_sided", res.p_two_sided},
          {"method", res.method == WilcoxonMethod::exact ? "exact" : "normal-approximation"}};
      if (!cp_out.empty()) {
        std::ofstream f(cp_out);
        f << out.dump(2) << "\n";
      }
      std::cout << out.dump(2) << "\n";
    } else if (*app.get_subcommand("grid")) {
      run_pipeline_command(grid_args, "grid",
                           collect_overrides(app.get_subcommand("grid")->remaining()));
    } else if (*app.get_subcommand("folds")) {
      run_pipeline_command(folds_args, "folds",
                           collect_overrides(app.get_subcommand("folds")->remaining()));
    } else if (*app.get_subcommand("synth")) {
      run_pipeline_command(synth_args, "synth",
                           collect_overrides(app.get_subcommand("synth")->remaining()));
    } else if (*app.get_subcommand("run")) {
      run_pipeline_command(run_args, nullptr,
                           collect_overrides(app.get_subcommand("run")->remaining()));
    }
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << json{{"error", e.what()}}.dump() << "\n";
    return 1;
  }
  return 0;
}
