#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <filesystem>
#include <optional>

#include "dwellrec/clicks.hpp"
#include "dwellrec/evaluation.hpp"
#include "dwellrec/experiments.hpp"
#include "dwellrec/model.hpp"
#include "dwellrec/preprocess.hpp"
#include "dwellrec/synth.hpp"
#include "dwellrec/training.hpp"

namespace py = pybind11;
using namespace dwellrec;

namespace {

SynthSpec spec_from_kwargs(std::size_t num_items, std::size_t num_sessions, std::size_t days,
                           double signal, std::size_t branching, std::uint64_t seed,
                           std::pair<int, int> dwell_short, std::pair<int, int> dwell_long,
                           std::pair<int, int> session_len,
                           const std::vector<double>& signal_by_day) {
  SynthSpec spec;
  spec.num_items = num_items;
  spec.num_sessions = num_sessions;
  spec.days = days;
  spec.signal = signal;
  spec.branching = branching;
  spec.seed = seed;
  spec.dwell_short_lo = dwell_short.first;
  spec.dwell_short_hi = dwell_short.second;
  spec.dwell_long_lo = dwell_long.first;
  spec.dwell_long_hi = dwell_long.second;
  spec.min_session_len = static_cast<std::size_t>(session_len.first);
  spec.max_session_len = static_cast<std::size_t>(session_len.second);
  spec.signal_by_day = signal_by_day;
  return spec;
}

py::dict report_to_dict(const EvalReport& report) {
  py::dict out;
  out["recall_at_20"] = report.recall;
  out["mrr_at_20"] = report.mrr;
  out["n"] = report.n;
  out["epoch"] = report.epoch;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "session-based next-item recommendation with dwell-time features";

  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<IndexError>(m, "IndexErrorDwellrec", PyExc_IndexError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  // ---- timestamps and dwell ----
  m.def("parse_iso8601_ms", [](const std::string& s) { return parse_iso8601_ms(s); },
        py::arg("timestamp"), "ISO-8601 (YYYY-MM-DDTHH:MM:SS.mmmZ) to epoch milliseconds");
  m.def("format_iso8601_ms", &format_iso8601_ms, py::arg("epoch_ms"));
  m.def(
      "compute_dwell",
      [](const std::vector<std::int64_t>& timestamps_ms, std::int32_t cap_seconds) {
        Session s;
        s.session_id = 0;
        for (std::int64_t t : timestamps_ms) s.clicks.push_back({0, t, 0, ""});
        return compute_dwell(s, cap_seconds);
      },
      py::arg("timestamps_ms"), py::arg("cap_seconds") = 3600,
      "dwell buckets (rounded seconds, clamped) for a timestamp sequence");

  // ---- metrics ----
  m.def(
      "rank_of_target",
      [](const std::vector<double>& probs, std::size_t target,
         std::optional<std::size_t> excluded) { return rank_of_target(probs, target, excluded); },
      py::arg("probs"), py::arg("target"), py::arg("excluded") = std::nullopt);
  m.def(
      "recall_at_k",
      [](const std::vector<std::uint32_t>& ranks, std::size_t k) { return recall_at_k(ranks, k); },
      py::arg("ranks"), py::arg("k") = 20);
  m.def(
      "mrr_at_k",
      [](const std::vector<std::uint32_t>& ranks, std::size_t k) { return mrr_at_k(ranks, k); },
      py::arg("ranks"), py::arg("k") = 20);
  m.def(
      "fold_average",
      [](const std::vector<double>& recalls) { return fold_average(recalls); },
      py::arg("recalls"));
  m.def(
      "wilcoxon_signed_rank",
      [](const std::vector<double>& a, const std::vector<double>& b) {
        const WilcoxonResult res = wilcoxon_signed_rank(a, b);
        py::dict out;
        out["n_effective"] = res.n_effective;
        out["w"] = res.w;
        out["p_two_sided"] = res.p_two_sided;
        out["method"] =
            res.method == WilcoxonMethod::exact ? "exact" : "normal-approximation";
        return out;
      },
      py::arg("a"), py::arg("b"));

  // ---- synthetic corpora ----
  m.def("synth_generate_csv",
        [](const std::string& path, std::size_t num_items, std::size_t num_sessions,
           std::size_t days, double signal, std::size_t branching, std::uint64_t seed,
           std::pair<int, int> dwell_short, std::pair<int, int> dwell_long,
           std::pair<int, int> session_len, const std::vector<double>& signal_by_day) {
          synth_generate_csv(spec_from_kwargs(num_items, num_sessions, days, signal, branching,
                                              seed, dwell_short, dwell_long, session_len,
                                              signal_by_day),
                             path);
        },
        py::arg("path"), py::arg("num_items") = 200, py::arg("num_sessions") = 20000,
        py::arg("days") = 8, py::arg("signal") = 0.9, py::arg("branching") = 4,
        py::arg("seed") = 1, py::arg("dwell_short") = std::pair<int, int>{1, 5},
        py::arg("dwell_long") = std::pair<int, int>{30, 40},
        py::arg("session_len") = std::pair<int, int>{2, 16},
        py::arg("signal_by_day") = std::vector<double>{});

  // ---- pipeline stages ----
  m.def(
      "preprocess_clicks",
      [](const std::string& input, const std::string& out_dir, std::int32_t dwell_cap,
         std::size_t min_len, std::size_t min_support, std::size_t max_len, bool lenient,
         bool keep_last_prefix_only) {
        const auto clicks =
            parse_clicks_file(input, lenient ? ParseMode::lenient : ParseMode::strict);
        const auto filtered =
            filter_dataset(build_sessions(clicks), {min_len, min_support, max_len});
        SplitSpec split = temporal_split(filtered);
        SplitData data = prepare_split(split.train, split.heldout, dwell_cap);
        if (keep_last_prefix_only) data.eval = last_prefix_only(data.eval);
        std::filesystem::create_directories(out_dir);
        save_vocab(data.vocab, out_dir + "/vocab.tsv");
        save_examples(data.train, out_dir + "/train.examples");
        save_examples(data.eval, out_dir + "/test.examples");
        py::dict out;
        out["train_sessions"] = split.train.size();
        out["test_sessions"] = split.heldout.size();
        out["train_examples"] = data.train.size();
        out["test_examples"] = data.eval.size();
        out["items"] = data.vocab.size();
        return out;
      },
      py::arg("input"), py::arg("out_dir"), py::arg("dwell_cap") = 3600, py::arg("min_len") = 2,
      py::arg("min_support") = 5, py::arg("max_len") = 16, py::arg("lenient") = false,
      py::arg("last_prefix_only") = false);

  m.def(
      "train_model",
      [](const std::string& examples_path, const std::string& vocab_path, const std::string& kind,
         const std::string& out_dir, std::size_t epochs, std::size_t batch_size, double lr,
         std::uint64_t seed, std::size_t item_em_size, std::size_t it_rnn_size,
         std::size_t dt_em_size, std::size_t dt_rnn_size, std::size_t max_len) {
        const Vocab vocab = load_vocab(vocab_path);
        const auto examples = load_examples(examples_path);
        TrainConfig tc;
        tc.epochs = epochs;
        tc.batch_size = batch_size;
        tc.lr = lr;
        tc.seed = seed;
        const ModelKind mk = model_kind_from_string(kind);
        ModelParams params =
            mk == ModelKind::it_rnn
                ? init_params(config_for_vocab(vocab, item_em_size, it_rnn_size, max_len), seed)
                : init_params(dt_config_for_vocab(vocab, item_em_size, it_rnn_size, dt_em_size,
                                                  dt_rnn_size, max_len),
                              seed);
        std::filesystem::create_directories(out_dir);
        const TrainLog log = train(params, examples, tc, out_dir, vocab_fingerprint(vocab));
        save_trainlog_csv(log, out_dir + "/trainlog.csv");
        py::list losses;
        for (const EpochStats& e : log.epochs) losses.append(e.mean_loss);
        py::dict out;
        out["epoch_losses"] = losses;
        out["out_dir"] = out_dir;
        return out;
      },
      py::arg("examples"), py::arg("vocab"), py::arg("kind"), py::arg("out_dir"),
      py::arg("epochs") = 6, py::arg("batch_size") = 256, py::arg("lr") = 1e-3,
      py::arg("seed") = 0, py::arg("item_em_size") = 128, py::arg("it_rnn_size") = 128,
      py::arg("dt_em_size") = 16, py::arg("dt_rnn_size") = 8, py::arg("max_len") = 15);

  m.def(
      "evaluate_checkpoint",
      [](const std::string& checkpoint, const std::string& examples_path, std::size_t k,
         bool keep_last_prefix_only, const std::string& out_csv, const std::string& out_json) {
        const Checkpoint ckpt = load_checkpoint(checkpoint);
        auto examples = load_examples(examples_path);
        if (keep_last_prefix_only) examples = last_prefix_only(examples);
        const EvalReport report = evaluate(ckpt.params, examples, k);
        if (!out_csv.empty()) save_eval_csv(report, out_csv);
        if (!out_json.empty()) save_eval_json(report, out_json);
        return report_to_dict(report);
      },
      py::arg("checkpoint"), py::arg("examples"), py::arg("k") = 20,
      py::arg("last_prefix_only") = false, py::arg("out_csv") = "", py::arg("out_json") = "");

  m.def(
      "run_experiment",
      [](const std::string& config_path, const std::string& out_dir,
         const std::map<std::string, std::string>& overrides) {
        std::vector<std::pair<std::string, std::string>> pairs(overrides.begin(),
                                                               overrides.end());
        return run_experiment(config_path, out_dir, pairs);
      },
      py::arg("config"), py::arg("out_dir") = "",
      py::arg("overrides") = std::map<std::string, std::string>{});
}
