#pragma once

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "v7w/baselines/logreg.hpp"
#include "v7w/datamodel/corpus_io.hpp"
#include "v7w/datamodel/splits.hpp"
#include "v7w/datamodel/stats.hpp"
#include "v7w/error.hpp"
#include "v7w/evalkit/heatmap.hpp"
#include "v7w/evalkit/report.hpp"
#include "v7w/featurestore.hpp"
#include "v7w/qamodel/gradcheck_fixture.hpp"
#include "v7w/qamodel/train.hpp"
#include "v7w/synth.hpp"

namespace v7w::cli {

namespace fs = std::filesystem;

struct Widths {
  std::size_t embed = 512;
  std::size_t hidden = 512;
  std::size_t att_dim = 512;
  friend bool operator==(const Widths&, const Widths&) = default;
};

inline std::optional<Widths> preset_widths(std::string_view name) {
  if (name == "full") return Widths{512, 512, 512};
  if (name == "micro") return Widths{8, 8, 8};
  return std::nullopt;
}

struct RunConfig {
  std::string command;
  std::string corpus;
  std::string features;
  std::string out;
  std::string checkpoint;
  std::string vocab;
  std::string embeddings;
  std::uint64_t splits_seed = 0;
  qamodel::AttentionMode mode = qamodel::AttentionMode::learned;
  TaskFilter task = TaskFilter::both;
  std::size_t epochs = 10;
  std::size_t batch = 128;
  double lr = 1e-4;
  std::uint64_t seed = 0;
  double clip = 0.0;
  std::string preset = "full";
  Widths widths;
  std::size_t count = 64;
  bool planted = true;
  std::string predictor = "lstm";
  std::string split;  // empty: train for `train`, test otherwise
  std::size_t min_count = 1;
  std::size_t limit = 0;
  bool blur = false;
  std::size_t upsample = 1;
  std::size_t clusters = 5000;
  baselines::Ablation ablation = baselines::Ablation::question_image;

  std::string effective_split() const {
    if (!split.empty()) return split;
    return command == "train" ? "train" : "test";
  }

  /// Resolved settings as sorted key=value lines, copied into every output.
  std::vector<std::string> echo() const {
    std::map<std::string, std::string> kv;
    kv["command"] = command;
    kv["corpus"] = corpus;
    kv["features"] = features;
    kv["out"] = out;
    kv["checkpoint"] = checkpoint;
    kv["vocab"] = vocab;
    kv["embeddings"] = embeddings;
    kv["splits-seed"] = std::to_string(splits_seed);
    kv["mode"] = std::string(qamodel::to_string(mode));
    kv["task"] = std::string(to_string(task));
    kv["epochs"] = std::to_string(epochs);
    kv["batch"] = std::to_string(batch);
    std::ostringstream lr_text;
    lr_text << std::setprecision(17) << lr;
    kv["lr"] = lr_text.str();
    kv["seed"] = std::to_string(seed);
    std::ostringstream clip_text;
    clip_text << std::setprecision(17) << clip;
    kv["clip"] = clip_text.str();
    kv["preset"] = preset;
    kv["embed"] = std::to_string(widths.embed);
    kv["hidden"] = std::to_string(widths.hidden);
    kv["att-dim"] = std::to_string(widths.att_dim);
    kv["count"] = std::to_string(count);
    kv["planted"] = planted ? "true" : "false";
    kv["predictor"] = predictor;
    kv["split"] = effective_split();
    kv["min-count"] = std::to_string(min_count);
    kv["limit"] = std::to_string(limit);
    kv["blur"] = blur ? "true" : "false";
    kv["upsample"] = std::to_string(upsample);
    kv["clusters"] = std::to_string(clusters);
    kv["ablation"] = std::string(baselines::to_string(ablation));
    std::vector<std::string> lines;
    for (const auto& [k, v] : kv) lines.push_back(k + "=" + v);
    return lines;
  }

  nlohmann::json echo_json() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& line : echo()) {
      const auto eq = line.find('=');
      j[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return j;
  }
};

inline const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {"synth", "split", "train", "eval", "gradcheck", "stats", "heatmap"};
  return names;
}

/// Thrown by parse_config for --help; carries the text to print.
struct HelpRequested {
  std::string text;
};

inline void build_app(CLI::App& app, RunConfig& cfg, std::string& mode, std::string& task, std::string& ablation,
                      std::size_t& embed, std::size_t& hidden, std::size_t& att_dim) {
  app.add_option("command", cfg.command, "synth | split | train | eval | gradcheck | stats | heatmap")
      ->check(CLI::IsMember(command_names()));
  app.set_config("--config", "", "key=value settings file; command-line flags take precedence");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.add_option("--corpus", cfg.corpus, "corpus file");
  app.add_option("--features", cfg.features, "directory of <image_id>.v7wf feature packs");
  app.add_option("--out", cfg.out, "output directory");
  app.add_option("--checkpoint", cfg.checkpoint, "model checkpoint (eval, heatmap)");
  app.add_option("--vocab", cfg.vocab, "vocabulary file; defaults to vocab.txt beside the checkpoint");
  app.add_option("--embeddings", cfg.embeddings, "word embedding table for the logreg predictor");
  app.add_option("--splits-seed", cfg.splits_seed, "seed of the 50/20/30 split");
  app.add_option("--mode", mode, "attention mode")->check(CLI::IsMember({"learned", "uniform"}));
  app.add_option("--task", task, "record kinds used")->check(CLI::IsMember({"telling", "pointing", "both"}));
  app.add_option("--epochs", cfg.epochs, "training epochs");
  app.add_option("--batch", cfg.batch, "mini-batch size")->check(CLI::PositiveNumber);
  app.add_option("--lr", cfg.lr, "Adam learning rate")->check(CLI::NonNegativeNumber);
  app.add_option("--seed", cfg.seed, "seed for initialization, shuffling and synthesis");
  app.add_option("--clip", cfg.clip, "global gradient-norm clip, 0 disables")->check(CLI::NonNegativeNumber);
  app.add_option("--preset", cfg.preset, "model widths: full (512) or micro (8)")->check(CLI::IsMember({"full", "micro"}));
  app.add_option("--embed", embed, "embedding width")->check(CLI::PositiveNumber);
  app.add_option("--hidden", hidden, "LSTM width")->check(CLI::PositiveNumber);
  app.add_option("--att-dim", att_dim, "attention hidden width")->check(CLI::PositiveNumber);
  app.add_option("--count", cfg.count, "synthetic record count")->check(CLI::PositiveNumber);
  app.add_flag("--planted,!--no-planted", cfg.planted, "plant a recoverable class signal in synthetic packs");
  app.add_option("--predictor", cfg.predictor, "lstm | gold | logreg")->check(CLI::IsMember({"lstm", "gold", "logreg"}));
  app.add_option("--split", cfg.split, "train | val | test | all")->check(CLI::IsMember({"train", "val", "test", "all"}));
  app.add_option("--min-count", cfg.min_count, "vocabulary frequency threshold")->check(CLI::PositiveNumber);
  app.add_option("--limit", cfg.limit, "at most this many records (0 = no limit)");
  app.add_flag("--blur", cfg.blur, "blur exported heatmaps");
  app.add_option("--upsample", cfg.upsample, "heatmap nearest-neighbor upsampling factor")->check(CLI::PositiveNumber);
  app.add_option("--clusters", cfg.clusters, "logreg class cap and k-means K")->check(CLI::PositiveNumber);
  app.add_option("--ablation", ablation, "logreg input: question+image | question | image")
      ->check(CLI::IsMember({"question+image", "question", "image"}));
}

/// Flags override config-file values, which override defaults.  Width
/// flags either all come from one preset or are all given explicitly;
/// anything mixed is a ValidationError.
inline RunConfig parse_config(const std::vector<std::string>& args) {
  RunConfig cfg;
  std::string mode = "learned", task = "both", ablation = "question+image";
  std::size_t embed = 0, hidden = 0, att_dim = 0;
  CLI::App app("Attention-LSTM visual QA toolkit", "v7w");
  build_app(app, cfg, mode, task, ablation, embed, hidden, att_dim);
  if (args.empty()) throw UsageError("no command given\n" + app.help());
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    throw HelpRequested{app.help()};
  } catch (const CLI::ParseError& e) {
    throw UsageError(std::string(e.what()) + "\n" + app.help());
  }
  if (cfg.command.empty()) throw UsageError("no command given\n" + app.help());
  cfg.mode = mode == "uniform" ? qamodel::AttentionMode::uniform : qamodel::AttentionMode::learned;
  cfg.task = *parse_task(task);
  cfg.ablation = *baselines::parse_ablation(ablation);

  const Widths preset = *preset_widths(cfg.preset);
  const bool preset_given = app.count("--preset") > 0;
  const std::array<std::pair<const char*, std::size_t*>, 3> flags = {
      {{"--embed", &embed}, {"--hidden", &hidden}, {"--att-dim", &att_dim}}};
  const std::array<std::size_t, 3> from_preset = {preset.embed, preset.hidden, preset.att_dim};
  std::size_t explicit_count = 0;
  for (const auto& [name, v] : flags) explicit_count += app.count(name) > 0 ? 1 : 0;
  cfg.widths = preset;
  if (explicit_count > 0) {
    for (std::size_t i = 0; i < flags.size(); ++i) {
      const auto& [name, v] = flags[i];
      const bool given = app.count(name) > 0;
      if (given && *v != from_preset[i] && (preset_given || explicit_count < flags.size())) {
        throw ValidationError(std::string("width ") + name + "=" + std::to_string(*v) + " conflicts with preset " +
                              cfg.preset + " (" + std::to_string(from_preset[i]) +
                              "); give --preset alone or all of --embed, --hidden, --att-dim");
      }
    }
    cfg.widths = {embed ? embed : preset.embed, hidden ? hidden : preset.hidden, att_dim ? att_dim : preset.att_dim};
    if (!preset_given && explicit_count == flags.size()) cfg.preset = "custom";
  }
  return cfg;
}

inline RunConfig parse_config(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return parse_config(args);
}

// ---------------------------------------------------------------------------

namespace detail {

inline void require(const std::string& value, const char* flag, const std::string& command) {
  if (value.empty()) throw UsageError(std::string(flag) + " is required for " + command);
}

inline void require_existing(const std::string& path, const char* flag, const std::string& command) {
  require(path, flag, command);
  if (!fs::exists(path)) throw UsageError(std::string(flag) + " " + path + " does not exist");
}

inline fs::path out_dir(const RunConfig& cfg) {
  require(cfg.out, "--out", cfg.command);
  fs::create_directories(cfg.out);
  return fs::path(cfg.out);
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw StorageError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw StorageError("write failed for " + path.string());
}

inline std::string comment_block(const RunConfig& cfg) {
  std::string s;
  for (const auto& line : cfg.echo()) s += "# " + line + "\n";
  return s;
}

inline std::string timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

inline std::vector<QARecord> select_records(const Corpus& corpus, const RunConfig& cfg, const std::string& split) {
  std::vector<QARecord> out;
  std::optional<SplitAssignment> splits;
  if (split != "all") splits = make_splits(corpus, cfg.splits_seed);
  const auto wanted = parse_split(split);
  for (const auto& rec : corpus.records) {
    if (!task_accepts(cfg.task, rec.kind)) continue;
    if (splits && splits->of(rec.qa_id) != *wanted) continue;
    out.push_back(rec);
    if (cfg.limit && out.size() == cfg.limit) break;
  }
  return out;
}

inline PackLookup store_lookup(const FeatureStore& store) {
  return [&store](const std::string& id) -> const FeaturePack& { return store.get(id); };
}

inline std::string vocab_path(const RunConfig& cfg) {
  if (!cfg.vocab.empty()) return cfg.vocab;
  return (fs::path(cfg.checkpoint).parent_path() / "vocab.txt").string();
}

inline std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

}  // namespace detail

inline int cmd_synth(const RunConfig& cfg, std::ostream& out) {
  const fs::path dir = detail::out_dir(cfg);
  const Corpus corpus = synth_corpus({cfg.count, cfg.seed, cfg.task});
  nlohmann::json doc = corpus_to_json(corpus);
  doc["config"] = cfg.echo_json();
  detail::write_text(dir / "corpus.json", doc.dump(2) + "\n");
  fs::create_directories(dir / "features");
  FeatureStore store(dir / "features");
  for (const auto& rec : corpus.records) store.put(synth_pack_for(rec, cfg.seed, cfg.planted));
  detail::write_text(dir / "features" / "synth.cfg", detail::comment_block(cfg));
  out << "wrote " << corpus.records.size() << " records to " << (dir / "corpus.json").string() << "\n";
  return 0;
}

inline int cmd_split(const RunConfig& cfg, std::ostream& out) {
  detail::require_existing(cfg.corpus, "--corpus", cfg.command);
  const Corpus corpus = parse_corpus(cfg.corpus);
  const SplitAssignment s = make_splits(corpus, cfg.splits_seed);
  const fs::path dir = detail::out_dir(cfg);
  write_splits(s, (dir / "splits.tsv").string(), cfg.echo());
  out << "train " << s.count(Split::train) << " val " << s.count(Split::val) << " test " << s.count(Split::test)
      << "\n";
  return 0;
}

inline int cmd_train(const RunConfig& cfg, std::ostream& out) {
  detail::require_existing(cfg.corpus, "--corpus", cfg.command);
  detail::require_existing(cfg.features, "--features", cfg.command);
  const fs::path dir = detail::out_dir(cfg);
  const Corpus corpus = parse_corpus(cfg.corpus);
  const auto records = detail::select_records(corpus, cfg, cfg.effective_split());
  if (records.empty()) throw ValidationError("no training records selected");
  FeatureStore store(cfg.features);
  const Vocabulary vocab = build_vocab(records, cfg.min_count);

  const FeatureDims dims = store.get(records.front().image_id).dims();
  qamodel::ModelConfig mc;
  mc.feature_dim = dims.global;
  mc.cells = dims.cells;
  mc.channels = dims.channels;
  mc.embed = cfg.widths.embed;
  mc.hidden = cfg.widths.hidden;
  mc.att_dim = cfg.widths.att_dim;
  mc.vocab = vocab.size();
  mc.validate();
  qamodel::ModelParams params = qamodel::init_params(mc, cfg.seed);

  std::vector<qamodel::Example> examples;
  for (const auto& rec : records) examples.push_back(qamodel::make_example(rec, store.get(rec.image_id), vocab));

  qamodel::TrainConfig tc;
  tc.epochs = cfg.epochs;
  tc.batch_size = cfg.batch;
  tc.adam.learning_rate = cfg.lr;
  tc.seed = cfg.seed;
  tc.clip_norm = cfg.clip;
  tc.mode = cfg.mode;

  std::ofstream log(dir / "train.log", std::ios::trunc);
  log << detail::timestamp() << " start " << examples.size() << " examples\n";
  const auto result = qamodel::train(examples, params, tc, [&](std::size_t epoch, double loss) {
    log << detail::timestamp() << " epoch " << epoch + 1 << " loss " << detail::fmt(loss) << "\n";
    return true;
  });
  log << detail::timestamp() << " done\n";

  qamodel::save_checkpoint(params, (dir / "model.v7wm").string());
  detail::write_text(dir / "model.cfg", detail::comment_block(cfg));
  vocab.save((dir / "vocab.txt").string());
  std::string curve = detail::comment_block(cfg) + "epoch\tloss\n";
  for (std::size_t e = 0; e < result.epoch_loss.size(); ++e)
    curve += std::to_string(e + 1) + "\t" + detail::fmt(result.epoch_loss[e]) + "\n";
  detail::write_text(dir / "loss_curve.tsv", curve);

  std::size_t correct = 0;
  for (const auto& rec : records)
    correct += qamodel::predict_mc(rec, store.get(rec.image_id), params, vocab, cfg.mode).index == rec.answer_position;
  nlohmann::json summary = {{"config", cfg.echo_json()},
                            {"examples", examples.size()},
                            {"steps", result.steps},
                            {"final_loss", result.epoch_loss.empty() ? 0.0 : result.epoch_loss.back()},
                            {"training_accuracy", static_cast<double>(correct) / static_cast<double>(records.size())}};
  detail::write_text(dir / "train_summary.json", summary.dump(2) + "\n");
  out << "trained on " << examples.size() << " records, final loss "
      << detail::fmt(result.epoch_loss.empty() ? 0.0 : result.epoch_loss.back()) << ", training accuracy "
      << detail::fmt(summary["training_accuracy"].get<double>()) << "\n";
  return 0;
}

inline int cmd_eval(const RunConfig& cfg, std::ostream& out) {
  detail::require_existing(cfg.corpus, "--corpus", cfg.command);
  const Corpus corpus = parse_corpus(cfg.corpus);
  const auto records = detail::select_records(corpus, cfg, cfg.effective_split());
  std::vector<evalkit::EvalReport> reports;

  if (cfg.predictor == "gold") {
    reports.push_back(evalkit::evaluate(records, [](const QARecord& r) { return r.answer_position; }, "gold"));
  } else if (cfg.predictor == "lstm") {
    detail::require_existing(cfg.features, "--features", cfg.command);
    detail::require_existing(cfg.checkpoint, "--checkpoint", cfg.command);
    FeatureStore store(cfg.features);
    const Vocabulary vocab = Vocabulary::load(detail::vocab_path(cfg));
    const auto params = qamodel::load_checkpoint(cfg.checkpoint);
    const std::string name = cfg.mode == qamodel::AttentionMode::learned ? "lstm-att" : "lstm";
    reports.push_back(evalkit::evaluate(records, [&](const QARecord& r) {
      return qamodel::predict_mc(r, store.get(r.image_id), params, vocab, cfg.mode).index;
    }, name));
  } else {
    detail::require_existing(cfg.features, "--features", cfg.command);
    FeatureStore store(cfg.features);
    const auto lookup = detail::store_lookup(store);
    RunConfig train_cfg = cfg;
    train_cfg.limit = 0;
    const auto training = detail::select_records(corpus, train_cfg, "train");
    baselines::WordEmbeddingTable table;
    if (!cfg.embeddings.empty()) {
      table = baselines::WordEmbeddingTable::load(cfg.embeddings);
    } else {
      table = baselines::WordEmbeddingTable::fallback(build_vocab(training).tokens(), cfg.seed);
    }
    baselines::LogRegConfig lc;
    lc.max_classes = cfg.clusters;
    lc.epochs = cfg.epochs;
    lc.batch_size = cfg.batch;
    lc.adam.learning_rate = cfg.lr;
    lc.seed = cfg.seed;
    lc.ablation = cfg.ablation;
    std::map<QAKind, baselines::LogRegModel> models;
    for (QAKind kind : {QAKind::telling, QAKind::pointing}) {
      if (!task_accepts(cfg.task, kind)) continue;
      bool any = false;
      for (const auto& r : training) any |= r.kind == kind;
      if (any) models.emplace(kind, baselines::logreg_train(training, lookup, table, kind, lc));
    }
    const std::string name = "logreg-" + std::string(baselines::to_string(cfg.ablation));
    reports.push_back(evalkit::evaluate(records, [&](const QARecord& r) {
      auto it = models.find(r.kind);
      if (it == models.end()) throw DomainError("no " + std::string(to_string(r.kind)) + " training records");
      return baselines::logreg_predict(r, store.get(r.image_id), it->second, table);
    }, name));
  }

  nlohmann::json doc = evalkit::to_json(reports);
  doc["config"] = cfg.echo_json();
  if (!cfg.out.empty()) detail::write_text(detail::out_dir(cfg) / "eval_report.json", doc.dump(2) + "\n");
  for (const auto& rep : reports) {
    out << rep.method << ": overall " << detail::fmt(rep.overall.accuracy()) << " (" << rep.overall.correct << "/"
        << rep.overall.total << ")";
    if (!rep.errors.empty()) out << ", " << rep.errors.size() << " errors";
    out << "\n";
  }
  return 0;
}

inline int cmd_gradcheck(const RunConfig& cfg, std::ostream& out) {
  const qamodel::MicroCheck mc = qamodel::make_micro_check(cfg.seed);
  const auto rep = qamodel::run_micro_gradcheck(mc, cfg.mode);
  std::ostringstream text;
  auto line = [&](const char* label, const GradCheckResult& r) {
    text << label << "\tmax_relative_error=" << detail::fmt(r.max_relative_error) << "\tworst=" << r.worst_entry
         << "\tentries=" << r.entries_checked << "\n";
  };
  line("telling", rep.telling);
  line("pointing", rep.pointing);
  line("combined", rep.combined);
  const bool ok = rep.max_relative_error() < 1e-4;
  text << (ok ? "PASS" : "FAIL") << " max relative error " << detail::fmt(rep.max_relative_error()) << " (limit 1e-4)\n";
  out << text.str();
  if (!cfg.out.empty()) detail::write_text(detail::out_dir(cfg) / "gradcheck.txt", detail::comment_block(cfg) + text.str());
  if (!ok) throw NumericsError("gradient check failed");
  return 0;
}

inline int cmd_stats(const RunConfig& cfg, std::ostream& out) {
  detail::require_existing(cfg.corpus, "--corpus", cfg.command);
  const Corpus corpus = parse_corpus(cfg.corpus);
  RunConfig all = cfg;
  all.limit = 0;
  const auto records = detail::select_records(corpus, all, "all");
  const auto training = detail::select_records(corpus, all, "train");
  nlohmann::json doc;
  doc["config"] = cfg.echo_json();
  doc["corpus"] = to_json(corpus_stats(std::span<const QARecord>(records)));
  nlohmann::json bins = nlohmann::json::object();
  for (const auto& [upper, names] : object_frequency_bins(training)) bins[std::to_string(upper)] = names;
  doc["object_frequency_bins"] = bins;
  const std::string text = doc.dump(2) + "\n";
  if (!cfg.out.empty()) detail::write_text(detail::out_dir(cfg) / "stats.json", text);
  out << text;
  return 0;
}

inline int cmd_heatmap(const RunConfig& cfg, std::ostream& out) {
  detail::require_existing(cfg.corpus, "--corpus", cfg.command);
  detail::require_existing(cfg.features, "--features", cfg.command);
  detail::require_existing(cfg.checkpoint, "--checkpoint", cfg.command);
  const fs::path dir = detail::out_dir(cfg);
  const Corpus corpus = parse_corpus(cfg.corpus);
  const auto records = detail::select_records(corpus, cfg, cfg.effective_split());
  FeatureStore store(cfg.features);
  const Vocabulary vocab = Vocabulary::load(detail::vocab_path(cfg));
  const auto params = qamodel::load_checkpoint(cfg.checkpoint);
  fs::create_directories(dir / "heatmaps");

  std::vector<evalkit::HeatMap> maps_specific, maps_any;
  std::vector<std::vector<BoundingBox>> boxes_specific, boxes_any;
  for (const auto& rec : records) {
    const ImageInfo* image = corpus.find_image(rec.image_id);
    const auto state = qamodel::encode(store.get(rec.image_id), qamodel::question_indices(rec, vocab), params, cfg.mode);
    const auto hm = evalkit::attention_heatmap(state.trace, image->width, image->height);
    evalkit::export_heatmap_image(hm, (dir / "heatmaps" / (rec.qa_id + ".pgm")).string(), cfg.blur, cfg.upsample,
                                  cfg.echo());
    auto specific = evalkit::answer_boxes(rec, evalkit::BoxVariant::specific);
    auto any = evalkit::answer_boxes(rec, evalkit::BoxVariant::any_mentioned);
    if (!specific.empty()) {
      maps_specific.push_back(hm);
      boxes_specific.push_back(std::move(specific));
    }
    if (!any.empty()) {
      maps_any.push_back(hm);
      boxes_any.push_back(std::move(any));
    }
  }
  auto to_j = [](const evalkit::PeakInBoxReport& r) {
    return nlohmann::json{{"hits", r.hits}, {"records", r.total}, {"rate", r.rate},
                          {"mean_box_area_fraction", r.mean_box_area_fraction}};
  };
  const auto rs = evalkit::peak_in_box_rate(maps_specific, boxes_specific);
  const auto ra = evalkit::peak_in_box_rate(maps_any, boxes_any);
  nlohmann::json doc = {{"config", cfg.echo_json()},
                        {"heatmaps", records.size()},
                        {"peak_in_answer_box", to_j(rs)},
                        {"peak_in_any_mentioned_box", to_j(ra)}};
  detail::write_text(dir / "peak_in_box.json", doc.dump(2) + "\n");
  out << "exported " << records.size() << " heatmaps; peak in answer box " << detail::fmt(rs.rate)
      << ", in any mentioned box " << detail::fmt(ra.rate) << "\n";
  return 0;
}

inline int run(const RunConfig& cfg, std::ostream& out) {
  if (cfg.command == "synth") return cmd_synth(cfg, out);
  if (cfg.command == "split") return cmd_split(cfg, out);
  if (cfg.command == "train") return cmd_train(cfg, out);
  if (cfg.command == "eval") return cmd_eval(cfg, out);
  if (cfg.command == "gradcheck") return cmd_gradcheck(cfg, out);
  if (cfg.command == "stats") return cmd_stats(cfg, out);
  if (cfg.command == "heatmap") return cmd_heatmap(cfg, out);
  throw UsageError("unknown command " + cfg.command);
}

/// 1 usage, 2 validation (including parse, format and storage failures),
/// 3 numerics.
inline int exit_code(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::usage: return 1;
    case ErrorKind::numerics: return 3;
    default: return 2;
  }
}

inline int main_entry(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  try {
    return run(parse_config(argc, argv), out);
  } catch (const HelpRequested& h) {
    out << h.text;
    return 0;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code(e);
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace v7w::cli
