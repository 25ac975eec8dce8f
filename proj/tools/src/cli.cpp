#include "ercmc/cli.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <nlohmann/json.hpp>
#include <ostream>
#include <sstream>

#include "ercmc/checkpoint.hpp"
#include "ercmc/consistency.hpp"
#include "ercmc/dataset.hpp"
#include "ercmc/embedding_store.hpp"
#include "ercmc/error.hpp"
#include "ercmc/futures.hpp"
#include "ercmc/gradcheck.hpp"
#include "ercmc/io_util.hpp"
#include "ercmc/report.hpp"
#include "ercmc/trainer.hpp"

namespace ercmc {
namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

Json config_json(const std::vector<std::pair<std::string, std::string>>& entries) {
  Json out = Json::object();
  for (const auto& [k, v] : entries) out[k] = v;
  return out;
}

void write_json(const fs::path& path, const Json& value) {
  write_atomically(path, [&](std::ostream& out) { out << value.dump(2) << '\n'; });
}

bool is_path_key(const std::string& key) {
  return key.rfind("data.", 0) == 0 || key.rfind("embeddings.", 0) == 0 ||
         key.rfind("futures.", 0) == 0;
}

// File keys in a config file are relative to the file itself; --set values are
// taken as given.
RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides) {
  RunConfig cfg = RunConfig::load(path);
  const fs::path base = fs::path(path).parent_path();
  for (const auto& [key, value] : cfg.entries()) {
    if (is_path_key(key) && !value.empty() && fs::path(value).is_relative()) {
      cfg.set(key, (base / value).lexically_normal().string());
    }
  }
  for (const auto& assignment : overrides) cfg.set(assignment);
  cfg.validate();
  return cfg;
}

LabelVocabulary training_vocabulary(const RunConfig& cfg) {
  if (!cfg.vocab.empty()) return LabelVocabulary::read(cfg.vocab);
  if (cfg.train.data.empty()) throw ConfigError("data.train is not set");
  auto vocab = load_corpus(cfg.train.data).vocabulary;
  if (vocab.size() == 0) throw ConsistencyError("training corpus has no labels");
  return vocab;
}

Json trace_json(const TrainTrace& trace, const RunConfig& cfg, double seconds) {
  Json epochs = Json::array();
  for (const auto& e : trace.epochs) {
    Json rec;
    rec["epoch"] = e.epoch;
    rec["train_loss"] = e.train_loss;
    rec["train_accuracy"] = e.train_accuracy;
    rec["dev_metric"] = e.dev_metric ? Json(*e.dev_metric) : Json(nullptr);
    rec["steps"] = e.steps;
    epochs.push_back(std::move(rec));
  }
  Json out;
  out["epochs"] = std::move(epochs);
  out["best_epoch"] = trace.best_epoch ? Json(*trace.best_epoch) : Json(nullptr);
  out["best_dev_metric"] = trace.best_dev_metric ? Json(*trace.best_dev_metric) : Json(nullptr);
  out["headline_metric"] = to_string(cfg.training.metric);
  out["seconds"] = seconds;
  out["config"] = config_json(cfg.entries());
  return out;
}

template <typename T>
void run_training(RunConfig cfg, const fs::path& out_dir, std::ostream& out) {
  const auto vocab = training_vocabulary(cfg);
  cfg.model.num_classes = vocab.size();
  cfg.model.validate();
  auto train_split = load_split(cfg.train, cfg.model, &vocab);
  std::optional<LoadedSplit> dev;
  if (!cfg.dev.data.empty()) dev.emplace(load_split(cfg.dev, cfg.model, &vocab));

  ContextModel<T> model(cfg.model, cfg.training.seed);
  out << "parameters " << model.parameter_count() << "\n";
  TrainHooks hooks;
  hooks.on_epoch = [&](const EpochRecord& e) {
    out << "epoch " << e.epoch << " loss " << std::setprecision(6) << e.train_loss << " train_acc "
        << e.train_accuracy;
    if (e.dev_metric) out << " dev " << *e.dev_metric;
    out << "\n";
  };
  const auto started = std::chrono::steady_clock::now();
  auto trace = train(model, train_split.split, dev ? &dev->split : nullptr, vocab, cfg.training, hooks);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  round_to_checkpoint_precision(model);

  fs::create_directories(out_dir);
  write_checkpoint(out_dir / "model.erck", make_checkpoint(model, vocab, cfg));
  write_json(out_dir / "trace.json", trace_json(trace, cfg, seconds));
  write_atomically(out_dir / "config.txt", [&](std::ostream& o) { o << cfg.to_text(); });
  write_atomically(out_dir / "labels.txt", [&](std::ostream& o) {
    for (const auto& l : vocab.labels()) o << l << "\n";
  });
  if (trace.best_epoch) out << "best epoch " << *trace.best_epoch << " dev " << *trace.best_dev_metric << "\n";
  out << "wrote " << (out_dir / "model.erck").string() << "\n";
}

template <typename T>
void run_evaluation(const Checkpoint& ck, RunConfig cfg, const std::string& split_name,
                    const fs::path& out_dir, std::ostream& out) {
  auto model = restore_model<T>(ck);
  cfg.model = model.config();
  const auto& vocab = ck.vocabulary;
  auto split = load_split(cfg.split(split_name), cfg.model, &vocab);
  const auto excluded = excluded_class(cfg.training, vocab);
  auto report = evaluate(model, split.split, vocab, cfg.training.metric, excluded, default_eval_threads());
  report.split = split_name;

  fs::create_directories(out_dir);
  auto entries = cfg.entries();
  write_atomically(out_dir / ("report." + split_name + ".json"),
                   [&](std::ostream& o) { o << eval_report_json(report, vocab, entries) << '\n'; });
  write_atomically(out_dir / ("predictions." + split_name + ".jsonl"),
                   [&](std::ostream& o) { write_predictions(o, report.predictions, vocab); });
  out << split_name << " " << to_string(report.headline) << " " << std::setprecision(6)
      << report.headline_value << " accuracy " << report.metrics.accuracy << " utterances "
      << report.predictions.size() << "\n";
}

// Label sequences per conversation of `corpus`, read from predictions or gold.
std::vector<std::vector<std::size_t>> ec_sequences(const Corpus& corpus,
                                                   const LabelVocabulary& vocab,
                                                   const std::vector<PredictionRecord>& records,
                                                   bool use_gold) {
  std::map<std::string, std::size_t> ids;
  auto id_of = [&](const std::string& name) {
    return ids.emplace(name, ids.size()).first->second;
  };
  for (const auto& l : vocab.labels()) id_of(l);
  std::vector<std::vector<std::optional<std::size_t>>> seqs(corpus.size());
  for (std::size_t c = 0; c < corpus.size(); ++c) seqs[c].resize(corpus[c].size());
  for (const auto& r : records) {
    const auto conv = corpus.find_conversation(r.conversation);
    if (!conv || r.index >= corpus[*conv].size()) {
      throw ConsistencyError("prediction for " + r.conversation + "[" + std::to_string(r.index) +
                             "] does not exist in the corpus");
    }
    if (use_gold) {
      if (!r.gold) continue;
      seqs[*conv][r.index] = id_of(*r.gold);
    } else {
      seqs[*conv][r.index] = id_of(r.pred);
    }
  }
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t c = 0; c < corpus.size(); ++c) {
    std::vector<std::size_t> labels;
    for (std::size_t i = 0; i < seqs[c].size(); ++i) {
      if (!seqs[c][i]) {
        throw ConsistencyError("no " + std::string(use_gold ? "gold label" : "prediction") + " for " +
                               corpus[c].id + "[" + std::to_string(i) + "]");
      }
      labels.push_back(*seqs[c][i]);
    }
    out.push_back(std::move(labels));
  }
  return out;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const ParameterError*>(&e)) {
    return kExitConfig;
  }
  if (dynamic_cast<const NumericError*>(&e)) return kExitNumeric;
  if (dynamic_cast<const Error*>(&e)) return kExitData;
  return kExitFailure;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-context emotion recognition in conversations"};
  app.name("ercmc");
  app.require_subcommand(1);

  // train
  std::string train_config, train_out;
  std::vector<std::string> train_sets;
  auto* train_cmd = app.add_subcommand("train", "Train a model and write checkpoint and trace");
  train_cmd->add_option("--config", train_config, "key=value config file")->required();
  train_cmd->add_option("--set", train_sets, "override one key=value")->allow_extra_args(false);
  train_cmd->add_option("--out", train_out, "output directory")->required();

  // eval
  std::string eval_checkpoint, eval_split = "test", eval_out;
  std::vector<std::string> eval_sets;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a split");
  eval_cmd->add_option("--checkpoint", eval_checkpoint, "ERCK file")->required();
  eval_cmd->add_option("--split", eval_split, "split to evaluate")
      ->check(CLI::IsMember({"train", "dev", "test"}));
  eval_cmd->add_option("--set", eval_sets, "override a file location")->allow_extra_args(false);
  eval_cmd->add_option("--out", eval_out, "output directory")->required();

  // analyze-ec
  std::string ec_predictions, ec_data, ec_weighting = "uniform", ec_source = "pred", ec_out;
  std::size_t ec_window = 5;
  auto* ec_cmd = app.add_subcommand("analyze-ec", "Emotion consistency of predicted or gold labels");
  ec_cmd->add_option("--predictions", ec_predictions, "predictions JSONL from eval")->required();
  ec_cmd->add_option("--data", ec_data, "corpus JSONL")->required();
  ec_cmd->add_option("--window", ec_window, "followers per local area")->check(CLI::PositiveNumber);
  ec_cmd->add_option("--weighting", ec_weighting)->check(CLI::IsMember({"uniform", "proximal"}));
  ec_cmd->add_option("--source", ec_source)->check(CLI::IsMember({"pred", "gold"}));
  ec_cmd->add_option("--out", ec_out, "report path (stdout when omitted)");

  // mock-encode
  std::string enc_data, enc_out;
  std::uint32_t enc_dim = 768;
  std::uint64_t enc_seed = 7;
  auto* enc_cmd = app.add_subcommand("mock-encode", "Hash-based stand-in utterance encoder");
  enc_cmd->add_option("--data", enc_data, "corpus JSONL")->required();
  enc_cmd->add_option("--dim", enc_dim)->check(CLI::PositiveNumber);
  enc_cmd->add_option("--seed", enc_seed);
  enc_cmd->add_option("--out", enc_out, "ERCE output")->required();

  // mock-futures
  std::string fut_data, fut_embeddings, fut_out;
  std::size_t fut_m = 5, fut_k = 2;
  std::uint64_t fut_seed = 7;
  auto* fut_cmd = app.add_subcommand("mock-futures", "Retrieval stand-in for generated futures");
  fut_cmd->add_option("--data", fut_data, "corpus JSONL")->required();
  fut_cmd->add_option("--embeddings", fut_embeddings, "base ERCE for the corpus")->required();
  fut_cmd->add_option("--m", fut_m, "futures per utterance")->check(CLI::PositiveNumber);
  fut_cmd->add_option("--k", fut_k, "history utterances in the query");
  fut_cmd->add_option("--seed", fut_seed);
  fut_cmd->add_option("--out", fut_out, "ERCE output")->required();

  // gradcheck
  std::uint64_t gc_seed = 42;
  double gc_threshold = 1e-4;
  auto* gc_cmd = app.add_subcommand("gradcheck", "Finite-difference check of every primitive and the model");
  gc_cmd->add_option("--seed", gc_seed);
  gc_cmd->add_option("--threshold", gc_threshold, "maximum relative error");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*train_cmd) {
      auto cfg = load_run_config(train_config, train_sets);
      if (cfg.training.precision == 32) {
        run_training<float>(std::move(cfg), train_out, out);
      } else {
        run_training<double>(std::move(cfg), train_out, out);
      }
    } else if (*eval_cmd) {
      const auto ck = read_checkpoint(fs::path(eval_checkpoint));
      auto cfg = ck.run_config();
      for (const auto& assignment : eval_sets) cfg.set(assignment);
      if (cfg.training.precision == 32) {
        run_evaluation<float>(ck, std::move(cfg), eval_split, eval_out, out);
      } else {
        run_evaluation<double>(ck, std::move(cfg), eval_split, eval_out, out);
      }
    } else if (*ec_cmd) {
      const auto weighting = parse_ec_weighting(ec_weighting);
      const auto loaded = load_corpus(ec_data);
      const auto records = read_predictions(fs::path(ec_predictions));
      const auto seqs = ec_sequences(loaded.corpus, loaded.vocabulary, records, ec_source == "gold");
      const auto summary = corpus_emotion_consistency(seqs, ec_window, weighting);
      Json report;
      report["window"] = ec_window;
      report["weighting"] = std::string(to_string(weighting));
      report["source"] = ec_source;
      report["windows"] = summary.windows;
      report["score"] = summary.windows ? Json(summary.score) : Json(nullptr);
      report["predictions"] = ec_predictions;
      report["data"] = ec_data;
      if (summary.windows == 0) {
        err << "warning: no utterance has " << ec_window << " followers; EC report is empty\n";
      }
      if (ec_out.empty()) {
        out << report.dump(2) << "\n";
      } else {
        write_json(ec_out, report);
        out << "EC " << (summary.windows ? std::to_string(summary.score) : "n/a") << " over "
            << summary.windows << " windows\n";
      }
    } else if (*enc_cmd) {
      const auto loaded = load_corpus(enc_data);
      const auto store = mock_encode(loaded.corpus, enc_dim, enc_seed);
      write_embeddings(fs::path(enc_out), store);
      Json manifest;
      manifest["encoder"] = "mock-trigram";
      manifest["dim"] = enc_dim;
      manifest["seed"] = enc_seed;
      manifest["rows"] = store.rows();
      manifest["corpus_sha256"] = sha256_file(enc_data);
      write_manifest(enc_out, manifest.dump(2));
      out << "wrote " << store.rows() << " rows of dim " << enc_dim << " to " << enc_out << "\n";
    } else if (*fut_cmd) {
      const auto loaded = load_corpus(fut_data);
      const auto base = read_embeddings(fs::path(fut_embeddings));
      verify_manifest(fut_embeddings, fut_data);
      base.check_bound(loaded.corpus, fut_embeddings);
      const auto store = build_mock_futures(loaded.corpus, base, fut_m, fut_k, fut_seed);
      write_embeddings(fs::path(fut_out), store);
      Json manifest;
      manifest["generator"] = "mock-retrieval";
      manifest["m"] = fut_m;
      manifest["k"] = fut_k;
      manifest["seed"] = fut_seed;
      manifest["dim"] = store.dim();
      manifest["rows"] = store.rows();
      manifest["corpus_sha256"] = sha256_file(fut_data);
      write_manifest(fut_out, manifest.dump(2));
      out << "wrote " << store.rows() << " future rows (m=" << fut_m << ") to " << fut_out << "\n";
    } else if (*gc_cmd) {
      GradCheckOptions options;
      const auto suite = run_gradient_suite(gc_seed, options);
      bool ok = true;
      for (const auto& entry : suite) {
        const bool pass = entry.result.max_rel_error < gc_threshold;
        ok = ok && pass;
        out << (pass ? "ok   " : "FAIL ") << std::left << std::setw(24) << entry.name
            << std::scientific << std::setprecision(3) << entry.result.max_rel_error
            << std::defaultfloat << " (" << entry.result.coordinates << " coords)\n";
      }
      if (!ok) {
        err << "gradient check failed above " << gc_threshold << "\n";
        return kExitNumeric;
      }
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return kExitOk;
}

}  // namespace ercmc
