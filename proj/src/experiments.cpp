#include "dwellrec/experiments.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dwellrec/errors.hpp"
#include "dwellrec/rng.hpp"

namespace dwellrec {

namespace fs = std::filesystem;
using nlohmann::json;

SplitData prepare_split(std::span<const Session> train_sessions,
                        std::span<const Session> eval_sessions, std::int32_t dwell_cap) {
  if (train_sessions.empty()) throw ConfigError("prepare_split: empty training split");
  SplitData data;
  data.vocab = build_vocab(train_sessions, dwell_cap);
  data.train = augment_all(train_sessions, data.vocab, dwell_cap);
  const std::vector<Session> kept = filter_unseen(eval_sessions, item_set(train_sessions));
  data.eval = augment_all(kept, data.vocab, dwell_cap);
  return data;
}

TrainedEval train_and_evaluate(ModelParams& params, std::span<const Example> train_examples,
                               std::span<const Example> eval_examples, const TrainConfig& config,
                               std::size_t k, const std::string& checkpoint_dir,
                               std::uint64_t vocab_hash) {
  if (eval_examples.empty()) throw ConfigError("train_and_evaluate: empty evaluation set");
  TrainedEval result;
  result.log = train(params, train_examples, config, checkpoint_dir, vocab_hash,
                     [&](std::size_t epoch, const ModelParams& p) {
                       result.reports.push_back(
                           evaluate(p, eval_examples, k, config.batch_size, epoch));
                     });
  for (std::size_t i = 1; i < result.reports.size(); ++i) {
    if (result.reports[i].recall > result.reports[result.best].recall) result.best = i;
  }
  return result;
}

namespace {

std::uint64_t sizes_salt(const DtSizes& s) {
  return derive_seed(static_cast<std::uint64_t>(s.dt_em_size), s.dt_rnn_size);
}

double run_cell(const DtSizes& sizes, const SplitData& data, const StudyConfig& cfg,
                std::uint64_t seed, double* mrr_out, std::size_t* best_epoch_out,
                std::size_t* param_count_out) {
  const DtRnnConfig model_cfg =
      dt_config_for_vocab(data.vocab, cfg.item_em_size, cfg.it_rnn_size, sizes.dt_em_size,
                          sizes.dt_rnn_size, cfg.max_len);
  ModelParams params = init_params(model_cfg, seed);
  TrainConfig tc = cfg.train;
  tc.seed = seed;
  const TrainedEval res = train_and_evaluate(params, data.train, data.eval, tc, cfg.k);
  const EvalReport& best = res.reports[res.best];
  if (mrr_out) *mrr_out = best.mrr;
  if (best_epoch_out) *best_epoch_out = best.epoch;
  if (param_count_out) *param_count_out = params.parameter_count();
  return best.recall;
}

}  // namespace

std::vector<GridRow> grid_search(const GridSpec& grid, std::span<const Session> train_sessions,
                                 std::span<const Session> val_sessions, const StudyConfig& cfg) {
  if (grid.dt_em_sizes.empty() || grid.dt_rnn_sizes.empty()) {
    throw ConfigError("grid_search: empty grid");
  }
  if (train_sessions.empty() || val_sessions.empty()) {
    throw ConfigError("grid_search: empty train or validation split");
  }
  const SplitData data = prepare_split(train_sessions, val_sessions, cfg.dwell_cap);

  std::vector<GridRow> rows;
  for (std::size_t em : grid.dt_em_sizes) {
    for (std::size_t rnn : grid.dt_rnn_sizes) {
      GridRow row;
      row.sizes = {em, rnn};
      row.seed = derive_seed(cfg.train.seed, sizes_salt(row.sizes));
      row.recall =
          run_cell(row.sizes, data, cfg, row.seed, &row.mrr, &row.best_epoch, &row.param_count);
      rows.push_back(row);
    }
  }
  std::sort(rows.begin(), rows.end(), [](const GridRow& a, const GridRow& b) {
    if (a.recall != b.recall) return a.recall > b.recall;
    if (a.mrr != b.mrr) return a.mrr > b.mrr;
    if (a.param_count != b.param_count) return a.param_count < b.param_count;
    if (a.sizes.dt_em_size != b.sizes.dt_em_size) return a.sizes.dt_em_size < b.sizes.dt_em_size;
    return a.sizes.dt_rnn_size < b.sizes.dt_rnn_size;
  });
  return rows;
}

FoldStudyResult fold_study(std::span<const DtSizes> configs, std::span<const Fold> folds,
                           const StudyConfig& cfg) {
  if (configs.empty() || folds.empty()) throw ConfigError("fold_study: nothing to run");
  FoldStudyResult result;
  result.configs.assign(configs.begin(), configs.end());
  result.recall.assign(folds.size(), std::vector<double>(configs.size(), 0.0));

  for (std::size_t f = 0; f < folds.size(); ++f) {
    const SplitData data = prepare_split(folds[f].train, folds[f].val, cfg.dwell_cap);
    for (std::size_t c = 0; c < configs.size(); ++c) {
      const std::uint64_t seed = derive_seed(cfg.train.seed, f, sizes_salt(configs[c]));
      result.recall[f][c] = run_cell(configs[c], data, cfg, seed, nullptr, nullptr, nullptr);
    }
    std::size_t winner = 0;
    for (std::size_t c = 1; c < configs.size(); ++c) {
      if (result.recall[f][c] > result.recall[f][winner]) winner = c;
    }
    result.fold_winners.push_back(winner);
  }

  result.averages.resize(configs.size());
  for (std::size_t c = 0; c < configs.size(); ++c) {
    std::vector<double> column;
    column.reserve(folds.size());
    for (std::size_t f = 0; f < folds.size(); ++f) column.push_back(result.recall[f][c]);
    result.averages[c] = fold_average(column);
  }
  for (std::size_t c = 1; c < configs.size(); ++c) {
    if (result.averages[c] > result.averages[result.winner]) result.winner = c;
  }
  return result;
}

namespace {

// ---- JSON config plumbing ----------------------------------------------

struct ConfigCtx {
  std::string path;  // config file path, for error messages

  [[noreturn]] void fail(const std::string& msg) const {
    throw ConfigError(path + ": " + msg);
  }
};

const json& require_key(const json& j, const char* key, const ConfigCtx& ctx) {
  const auto it = j.find(key);
  if (it == j.end()) ctx.fail(std::string("missing key '") + key + "'");
  return *it;
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  const auto it = j.find(key);
  if (it == j.end()) return fallback;
  return it->get<T>();
}

TrainConfig train_config_from(const json& j, std::uint64_t seed) {
  TrainConfig tc;
  if (j.contains("train")) {
    const json& t = j["train"];
    tc.epochs = get_or<std::size_t>(t, "epochs", tc.epochs);
    tc.batch_size = get_or<std::size_t>(t, "batch_size", tc.batch_size);
    tc.lr = get_or<double>(t, "lr", tc.lr);
    tc.beta1 = get_or<double>(t, "beta1", tc.beta1);
    tc.beta2 = get_or<double>(t, "beta2", tc.beta2);
    tc.eps = get_or<double>(t, "eps", tc.eps);
    tc.shuffle = get_or<bool>(t, "shuffle", tc.shuffle);
  }
  tc.seed = seed;
  return tc;
}

FilterParams filter_params_from(const json& j) {
  FilterParams fp;
  if (j.contains("preprocess")) {
    const json& p = j["preprocess"];
    fp.min_len = get_or<std::size_t>(p, "min_len", fp.min_len);
    fp.min_support = get_or<std::size_t>(p, "min_support", fp.min_support);
    fp.max_len = get_or<std::size_t>(p, "max_len", fp.max_len);
  }
  return fp;
}

std::int32_t dwell_cap_from(const json& j) {
  if (j.contains("preprocess")) return get_or<std::int32_t>(j["preprocess"], "dwell_cap", 3600);
  return 3600;
}

SynthSpec synth_spec_from(const json& s, std::uint64_t seed, const ConfigCtx& ctx) {
  SynthSpec spec;
  spec.seed = seed;
  spec.num_items = get_or<std::size_t>(s, "num_items", spec.num_items);
  spec.num_sessions = get_or<std::size_t>(s, "num_sessions", spec.num_sessions);
  spec.days = get_or<std::size_t>(s, "days", spec.days);
  spec.signal = get_or<double>(s, "signal", spec.signal);
  spec.branching = get_or<std::size_t>(s, "branching", spec.branching);
  if (s.contains("dwell_short")) {
    const auto range = s["dwell_short"].get<std::vector<std::int32_t>>();
    if (range.size() != 2) ctx.fail("synth.dwell_short must be [lo, hi]");
    spec.dwell_short_lo = range[0];
    spec.dwell_short_hi = range[1];
  }
  if (s.contains("dwell_long")) {
    const auto range = s["dwell_long"].get<std::vector<std::int32_t>>();
    if (range.size() != 2) ctx.fail("synth.dwell_long must be [lo, hi]");
    spec.dwell_long_lo = range[0];
    spec.dwell_long_hi = range[1];
  }
  if (s.contains("session_len")) {
    const auto range = s["session_len"].get<std::vector<std::size_t>>();
    if (range.size() != 2) ctx.fail("synth.session_len must be [lo, hi]");
    spec.min_session_len = range[0];
    spec.max_session_len = range[1];
  }
  if (s.contains("signal_by_day")) {
    spec.signal_by_day = s["signal_by_day"].get<std::vector<double>>();
  }
  if (s.contains("seed")) spec.seed = s["seed"].get<std::uint64_t>();
  return spec;
}

std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open input for digest: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string bytes = buf.str();
  char hex[19];
  std::snprintf(hex, sizeof(hex), "0x%016llx",
                static_cast<unsigned long long>(fnv1a64(bytes)));
  return hex;
}

void write_json_file(const json& j, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

struct LoadedCorpus {
  std::vector<Session> sessions;
  std::string clicks_path;  // the file actually read or written
};

// Resolves the click source: an existing file under "clicks", or a corpus
// generated from the "synth" block into the output directory.
LoadedCorpus load_corpus(const json& config, const ConfigCtx& ctx, const fs::path& out_dir,
                         std::uint64_t seed) {
  LoadedCorpus corpus;
  if (config.contains("clicks")) {
    corpus.clicks_path = config["clicks"].get<std::string>();
    if (!fs::exists(corpus.clicks_path)) {
      ctx.fail("clicks file does not exist: " + corpus.clicks_path);
    }
  } else if (config.contains("synth")) {
    const SynthSpec spec = synth_spec_from(config["synth"], seed, ctx);
    corpus.clicks_path = (out_dir / "clicks.csv").string();
    synth_generate_csv(spec, corpus.clicks_path);
  } else {
    ctx.fail("need either 'clicks' or 'synth'");
  }
  const bool lenient =
      config.contains("preprocess") && get_or<bool>(config["preprocess"], "lenient", false);
  corpus.sessions = build_sessions(
      parse_clicks_file(corpus.clicks_path, lenient ? ParseMode::lenient : ParseMode::strict));
  return corpus;
}

json eval_aggregate(const EvalReport& r) {
  return json{{"recall_at_20", r.recall}, {"mrr_at_20", r.mrr}, {"n", r.n}, {"epoch", r.epoch}};
}

void run_full_pipeline(const json& config, const ConfigCtx& ctx, const fs::path& out_dir,
                       std::uint64_t seed, json& manifest) {
  const LoadedCorpus corpus = load_corpus(config, ctx, out_dir, seed);
  manifest["inputs"][corpus.clicks_path] = file_digest(corpus.clicks_path);

  const std::vector<Session> filtered = filter_dataset(corpus.sessions, filter_params_from(config));
  SplitSpec split = temporal_split(filtered);
  const std::int32_t cap = dwell_cap_from(config);
  SplitData data = prepare_split(split.train, split.heldout, cap);

  const json& eval_cfg = config.contains("eval") ? config["eval"] : json::object();
  const auto k = get_or<std::size_t>(eval_cfg, "k", 20);
  if (get_or<bool>(eval_cfg, "last_prefix_only", false)) {
    data.eval = last_prefix_only(data.eval);
  }

  save_vocab(data.vocab, (out_dir / "vocab.tsv").string());
  save_examples(data.train, (out_dir / "train.examples").string());
  save_examples(data.eval, (out_dir / "test.examples").string());
  const std::uint64_t vhash = vocab_fingerprint(data.vocab);

  const json& model_cfg = config.contains("model") ? config["model"] : json::object();
  const std::string kind_str = get_or<std::string>(model_cfg, "kind", "both");
  const auto item_em = get_or<std::size_t>(model_cfg, "item_em_size", 128);
  const auto it_rnn = get_or<std::size_t>(model_cfg, "it_rnn_size", 128);
  const auto dt_em = get_or<std::size_t>(model_cfg, "dt_em_size", 16);
  const auto dt_rnn = get_or<std::size_t>(model_cfg, "dt_rnn_size", 8);

  std::vector<ModelKind> kinds;
  if (kind_str == "both") {
    kinds = {ModelKind::it_rnn, ModelKind::dt_rnn};
  } else {
    kinds = {model_kind_from_string(kind_str)};
  }

  std::vector<EvalReport> best_reports;
  for (ModelKind kind : kinds) {
    const std::string name = to_string(kind);
    const fs::path model_dir = out_dir / name;
    fs::create_directories(model_dir);

    ModelParams params =
        kind == ModelKind::it_rnn
            ? init_params(config_for_vocab(data.vocab, item_em, it_rnn), derive_seed(seed, fnv1a64(name)))
            : init_params(dt_config_for_vocab(data.vocab, item_em, it_rnn, dt_em, dt_rnn),
                          derive_seed(seed, fnv1a64(name)));
    TrainConfig tc = train_config_from(config, derive_seed(seed, fnv1a64(name)));
    const TrainedEval res =
        train_and_evaluate(params, data.train, data.eval, tc, k, model_dir.string(), vhash);

    save_trainlog_csv(res.log, (model_dir / "trainlog.csv").string());
    const EvalReport& best = res.reports[res.best];
    save_eval_csv(best, (model_dir / "report.csv").string());
    save_eval_json(best, (model_dir / "aggregate.json").string());
    json epochs = json::array();
    for (const EvalReport& r : res.reports) epochs.push_back(eval_aggregate(r));
    write_json_file(json{{"model", name}, {"epochs", epochs}, {"best_epoch", best.epoch}},
                    model_dir / "epochs.json");
    best_reports.push_back(best);
  }

  if (best_reports.size() == 2) {
    const std::vector<double> rr_a = reciprocal_ranks_at_k(best_reports[1], k);  // dt_rnn
    const std::vector<double> rr_b = reciprocal_ranks_at_k(best_reports[0], k);  // it_rnn
    const WilcoxonResult w = wilcoxon_signed_rank(rr_a, rr_b);
    write_json_file(
        json{{"a", "dt_rnn"},
             {"b", "it_rnn"},
             {"n_effective", w.n_effective},
             {"w", w.w},
             {"p_two_sided", w.p_two_sided},
             {"method", w.method == WilcoxonMethod::exact ? "exact" : "normal-approximation"},
             {"recall_a", best_reports[1].recall},
             {"recall_b", best_reports[0].recall}},
        out_dir / "compare.json");
  }
}

void run_grid_pipeline(const json& config, const ConfigCtx& ctx, const fs::path& out_dir,
                       std::uint64_t seed, json& manifest) {
  const LoadedCorpus corpus = load_corpus(config, ctx, out_dir, seed);
  manifest["inputs"][corpus.clicks_path] = file_digest(corpus.clicks_path);

  const std::vector<Session> filtered = filter_dataset(corpus.sessions, filter_params_from(config));
  const SplitSpec test_split = temporal_split(filtered);
  const SplitSpec val_split = temporal_split(test_split.train);

  GridSpec grid;
  if (config.contains("grid")) {
    const json& g = config["grid"];
    grid.dt_em_sizes = get_or<std::vector<std::size_t>>(g, "dt_em_sizes", grid.dt_em_sizes);
    grid.dt_rnn_sizes = get_or<std::vector<std::size_t>>(g, "dt_rnn_sizes", grid.dt_rnn_sizes);
  }

  StudyConfig study;
  const json& model_cfg = config.contains("model") ? config["model"] : json::object();
  study.item_em_size = get_or<std::size_t>(model_cfg, "item_em_size", 128);
  study.it_rnn_size = get_or<std::size_t>(model_cfg, "it_rnn_size", 128);
  study.dwell_cap = dwell_cap_from(config);
  study.train = train_config_from(config, seed);
  study.k = config.contains("eval") ? get_or<std::size_t>(config["eval"], "k", 20) : 20;

  const std::vector<GridRow> rows = grid_search(grid, val_split.train, val_split.heldout, study);

  std::ofstream csv(out_dir / "grid.csv");
  if (!csv) throw IoError("cannot write grid.csv");
  csv << "dt_em_size,dt_rnn_size,recall_at_k,mrr_at_k,best_epoch,param_count,seed\n";
  json rows_json = json::array();
  for (const GridRow& r : rows) {
    char buf[64];
    csv << r.sizes.dt_em_size << ',' << r.sizes.dt_rnn_size << ',';
    std::snprintf(buf, sizeof(buf), "%.17g", r.recall);
    csv << buf << ',';
    std::snprintf(buf, sizeof(buf), "%.17g", r.mrr);
    csv << buf << ',' << r.best_epoch << ',' << r.param_count << ',' << r.seed << '\n';
    rows_json.push_back(json{{"dt_em_size", r.sizes.dt_em_size},
                             {"dt_rnn_size", r.sizes.dt_rnn_size},
                             {"recall_at_k", r.recall},
                             {"mrr_at_k", r.mrr},
                             {"best_epoch", r.best_epoch},
                             {"param_count", r.param_count},
                             {"seed", r.seed}});
  }
  write_json_file(json{{"k", study.k}, {"rows", rows_json}}, out_dir / "grid.json");
}

void run_folds_pipeline(const json& config, const ConfigCtx& ctx, const fs::path& out_dir,
                        std::uint64_t seed, json& manifest) {
  const LoadedCorpus corpus = load_corpus(config, ctx, out_dir, seed);
  manifest["inputs"][corpus.clicks_path] = file_digest(corpus.clicks_path);

  const std::vector<Session> filtered = filter_dataset(corpus.sessions, filter_params_from(config));
  const SplitSpec test_split = temporal_split(filtered);

  const json& folds_cfg = require_key(config, "folds", ctx);
  const auto n_folds = get_or<std::size_t>(folds_cfg, "n", 6);
  std::vector<DtSizes> configs;
  for (const json& c : require_key(folds_cfg, "configs", ctx)) {
    configs.push_back({c.at("dt_em_size").get<std::size_t>(),
                       c.at("dt_rnn_size").get<std::size_t>()});
  }

  StudyConfig study;
  const json& model_cfg = config.contains("model") ? config["model"] : json::object();
  study.item_em_size = get_or<std::size_t>(model_cfg, "item_em_size", 128);
  study.it_rnn_size = get_or<std::size_t>(model_cfg, "it_rnn_size", 128);
  study.dwell_cap = dwell_cap_from(config);
  study.train = train_config_from(config, seed);
  study.k = config.contains("eval") ? get_or<std::size_t>(config["eval"], "k", 20) : 20;

  const std::vector<Fold> folds = make_folds(test_split.train, n_folds);
  const FoldStudyResult result = fold_study(configs, folds, study);

  // each config also trains on the full training split and scores on the
  // held-out test day, the quantity the fold averages are meant to predict
  std::vector<double> test_recall(configs.size());
  {
    const SplitData data = prepare_split(test_split.train, test_split.heldout, study.dwell_cap);
    for (std::size_t c = 0; c < configs.size(); ++c) {
      const std::uint64_t cell_seed =
          derive_seed(study.train.seed, 0xf1a1u, sizes_salt(configs[c]));
      test_recall[c] = run_cell(configs[c], data, study, cell_seed, nullptr, nullptr, nullptr);
    }
  }

  std::ofstream csv(out_dir / "folds.csv");
  if (!csv) throw IoError("cannot write folds.csv");
  csv << "fold,val_day";
  for (const DtSizes& c : configs) csv << ",em" << c.dt_em_size << "_rnn" << c.dt_rnn_size;
  csv << '\n';
  char buf[64];
  for (std::size_t f = 0; f < folds.size(); ++f) {
    csv << (f + 1) << ',' << folds[f].val_day;
    for (std::size_t c = 0; c < configs.size(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", result.recall[f][c]);
      csv << ',' << buf;
    }
    csv << '\n';
  }

  json configs_json = json::array();
  for (std::size_t c = 0; c < configs.size(); ++c) {
    configs_json.push_back(json{{"dt_em_size", configs[c].dt_em_size},
                                {"dt_rnn_size", configs[c].dt_rnn_size},
                                {"fold_average", result.averages[c]},
                                {"test_recall_at_k", test_recall[c]}});
  }
  write_json_file(json{{"k", study.k},
                       {"configs", configs_json},
                       {"recall_matrix", result.recall},
                       {"fold_winners", result.fold_winners},
                       {"winner", result.winner}},
                  out_dir / "folds.json");
}

void run_histogram_pipeline(const json& config, const ConfigCtx& ctx, const fs::path& out_dir,
                            std::uint64_t seed, json& manifest) {
  const LoadedCorpus corpus = load_corpus(config, ctx, out_dir, seed);
  manifest["inputs"][corpus.clicks_path] = file_digest(corpus.clicks_path);
  const std::vector<Session> filtered = filter_dataset(corpus.sessions, filter_params_from(config));
  const auto hist = dwell_histogram(filtered, dwell_cap_from(config));
  save_histogram_csv(hist, (out_dir / "histogram.csv").string());
}

void apply_override(json& config, const std::string& key, const std::string& value,
                    const ConfigCtx& ctx) {
  json* node = &config;
  std::size_t pos = 0;
  while (true) {
    const std::size_t dot = key.find('.', pos);
    const std::string part = key.substr(pos, dot == std::string::npos ? dot : dot - pos);
    if (part.empty()) ctx.fail("bad override key '" + key + "'");
    if (dot == std::string::npos) {
      const json parsed = json::parse(value, nullptr, false);
      (*node)[part] = parsed.is_discarded() ? json(value) : parsed;
      return;
    }
    node = &(*node)[part];
    pos = dot + 1;
  }
}

}  // namespace

std::string run_experiment(const std::string& config_path) {
  return run_experiment(config_path, "", {});
}

std::string run_experiment(const std::string& config_path, const std::string& out_dir_override,
                           const std::vector<std::pair<std::string, std::string>>& overrides) {
  ConfigCtx ctx{config_path};
  std::ifstream in(config_path);
  if (!in) throw ConfigError("cannot open config file: " + config_path);
  json config = json::parse(in, nullptr, false);
  if (config.is_discarded()) ctx.fail("malformed JSON");

  for (const auto& [key, value] : overrides) apply_override(config, key, value, ctx);

  const std::string pipeline = require_key(config, "pipeline", ctx).get<std::string>();
  const auto seed = get_or<std::uint64_t>(config, "seed", 1);
  const fs::path out_dir =
      out_dir_override.empty() ? fs::path(get_or<std::string>(config, "out_dir", "artifacts"))
                               : fs::path(out_dir_override);
  fs::create_directories(out_dir);

  json manifest;
  manifest["config"] = config;
  manifest["seed"] = seed;
  manifest["inputs"] = json::object();

  if (pipeline == "full") {
    run_full_pipeline(config, ctx, out_dir, seed, manifest);
  } else if (pipeline == "grid") {
    run_grid_pipeline(config, ctx, out_dir, seed, manifest);
  } else if (pipeline == "folds") {
    run_folds_pipeline(config, ctx, out_dir, seed, manifest);
  } else if (pipeline == "synth") {
    const SynthSpec spec = synth_spec_from(require_key(config, "synth", ctx), seed, ctx);
    const std::string path = (out_dir / "clicks.csv").string();
    synth_generate_csv(spec, path);
    manifest["inputs"][path] = file_digest(path);
  } else if (pipeline == "histogram") {
    run_histogram_pipeline(config, ctx, out_dir, seed, manifest);
  } else {
    ctx.fail("unknown pipeline '" + pipeline + "'");
  }

  write_json_file(manifest, out_dir / "manifest.json");
  return out_dir.string();
}

}  // namespace dwellrec
