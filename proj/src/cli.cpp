#include "ptl/cli.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <chrono>
#include <fstream>
#include <optional>
#include <set>

#include "ptl/checkpoint.hpp"
#include "ptl/dataset.hpp"
#include "ptl/error.hpp"
#include "ptl/gradcheck.hpp"
#include "ptl/random.hpp"
#include "ptl/training.hpp"

namespace ptl {

namespace fs = std::filesystem;

namespace {

using KeySet = std::set<std::string, std::less<>>;

struct CommonFlags {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  bool force = false;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool out_required) {
  cmd->add_option("--config", f.config_path, "key=value config file");
  cmd->add_option("--set", f.overrides, "override one key, e.g. --set train.epochs=5")->take_all();
  auto* out = cmd->add_option("--out", f.out_dir, "output directory");
  if (out_required) out->required();
  cmd->add_option("--seed", f.seed, "run seed");
  cmd->add_flag("--force", f.force, "write into a non-empty output directory");
}

std::string fmt_double(double v) { return fmt::format("{}", v); }

// ---- config assembly -----------------------------------------------------------

KeyValues data_defaults() {
  KeyValues kv;
  kv.set("data.source", "synth");
  kv.set("data.classes", join(synth_class_names(), ","));
  kv.set("data.per_class", "10");
  kv.set("data.test_per_class", "10");
  kv.set("data.cloud_points", "256");
  kv.set("data.sigma", "0.02");
  kv.set("data.seed", "0");
  kv.set("data.dir", "");
  kv.set("data.mesh_points", "1024");
  kv.set("data.eval", "test");
  return kv;
}

KeyValues train_defaults() {
  const TrainConfig t;
  KeyValues kv;
  kv.set("seed", "0");
  kv.set("train.epochs", std::to_string(t.epochs));
  kv.set("train.batch_size", std::to_string(t.batch_size));
  kv.set("train.points", std::to_string(t.points));
  kv.set("train.lr", fmt_double(t.adam.lr));
  kv.set("train.beta1", fmt_double(t.adam.beta1));
  kv.set("train.beta2", fmt_double(t.adam.beta2));
  kv.set("train.eps", fmt_double(t.adam.eps));
  kv.set("train.freeze_backbone", "false");
  kv.set("train.eval_every", std::to_string(t.eval_every));
  kv.set("train.random_start", "true");
  kv.set("train.log_wall_time", "false");
  return kv;
}

KeyValues model_defaults() {
  KeyValues kv;
  ModelConfig{}.write_to(kv);
  // Derived from the training set unless given explicitly.
  KeyValues out;
  for (const auto& [k, v] : kv.entries()) {
    if (k != "model.num_classes") out.set(k, v);
  }
  return out;
}

KeySet keys_of(const KeyValues& kv) {
  KeySet out;
  for (const auto& [k, v] : kv.entries()) out.insert(k);
  return out;
}

KeyValues assemble(KeyValues defaults, KeySet allowed, const CommonFlags& flags,
                   const std::vector<std::pair<std::string, std::string>>& flag_keys) {
  for (const auto& [k, v] : defaults.entries()) allowed.insert(k);
  for (const auto& [k, v] : flag_keys) allowed.insert(k);
  if (!flags.config_path.empty()) defaults.merge(KeyValues::load(flags.config_path));
  for (const auto& o : flags.overrides) defaults.apply_override(o);
  if (flags.seed) defaults.set("seed", std::to_string(*flags.seed));
  for (const auto& [k, v] : flag_keys) {
    if (!v.empty()) defaults.set(k, v);
  }
  defaults.reject_unknown(allowed);
  return defaults;
}

void prepare_out_dir(const fs::path& dir, bool force) {
  if (fs::exists(dir)) {
    if (!fs::is_directory(dir)) throw ConfigError("output path exists and is not a directory: " + dir.string());
    if (!fs::is_empty(dir) && !force) {
      throw ConfigError("output directory " + dir.string() + " is not empty (pass --force to write into it)");
    }
  }
  fs::create_directories(dir);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed: " + path.string());
}

void echo_config(const fs::path& dir, const KeyValues& kv, std::ostream& err) {
  write_text(dir / "config.txt", kv.to_text());
  err << "effective config written to " << (dir / "config.txt").string() << "\n";
}

TrainConfig read_train_config(const KeyValues& kv) {
  TrainConfig t;
  auto count = [&](std::string_view key, std::size_t fallback) {
    const auto v = kv.get_int(key, static_cast<std::int64_t>(fallback));
    if (v < 0) throw ConfigError(std::string(key) + " must be non-negative");
    return static_cast<std::size_t>(v);
  };
  t.epochs = count("train.epochs", t.epochs);
  t.batch_size = count("train.batch_size", t.batch_size);
  t.points = count("train.points", t.points);
  t.adam.lr = kv.get_double("train.lr", t.adam.lr);
  t.adam.beta1 = kv.get_double("train.beta1", t.adam.beta1);
  t.adam.beta2 = kv.get_double("train.beta2", t.adam.beta2);
  t.adam.eps = kv.get_double("train.eps", t.adam.eps);
  t.seed = kv.get_u64("seed", 0);
  t.freeze_backbone = kv.get_bool("train.freeze_backbone", false);
  t.eval_every = count("train.eval_every", t.eval_every);
  t.random_start = kv.get_bool("train.random_start", true);
  t.log_wall_time = kv.get_bool("train.log_wall_time", false);
  return t;
}

// ---- data ------------------------------------------------------------------------

struct Data {
  Dataset train;
  std::optional<Dataset> eval;
  std::string tag;
};

Data load_data(const KeyValues& kv, bool want_train, Split eval_split) {
  Data d;
  const std::string source = kv.get_string("data.source", "synth");
  const std::string eval_mode = kv.get_string("data.eval", "test");
  if (eval_mode != "test" && eval_mode != "train") {
    throw ConfigError("data.eval must be test or train, got '" + eval_mode + "'");
  }
  const std::uint64_t data_seed = kv.get_u64("data.seed", 0);
  if (source == "synth") {
    SynthSpec spec;
    for (const auto& name : kv.get_list("data.classes", {})) spec.classes.push_back(synth_class_id(name));
    spec.points = static_cast<std::size_t>(kv.get_int("data.cloud_points", 256));
    spec.sigma = kv.get_double("data.sigma", 0.02);
    spec.seed = data_seed;
    const auto per = kv.get_int("data.per_class", 10);
    const auto test_per = kv.get_int("data.test_per_class", 10);
    if (per < 1 || test_per < 1) throw ConfigError("data.per_class and data.test_per_class must be >= 1");
    if (spec.points < 1) throw ConfigError("data.cloud_points must be >= 1");
    d.tag = "synth:" + kv.get_string("data.classes", "");
    if (want_train) {
      spec.per_class = static_cast<std::size_t>(per);
      d.train = make_synth_dataset(spec, Split::train);
    }
    if (!want_train || eval_mode == "test") {
      spec.per_class = static_cast<std::size_t>(eval_split == Split::train ? per : test_per);
      d.eval = make_synth_dataset(spec, eval_split);
    }
  } else if (source == "dir") {
    const std::string dir = kv.get_string("data.dir", "");
    if (dir.empty()) throw ConfigError("data.source=dir needs data.dir");
    if (!fs::is_directory(dir)) throw ConfigError("dataset directory not found: " + dir);
    const auto mesh_points = kv.get_int("data.mesh_points", 1024);
    if (mesh_points < 1) throw ConfigError("data.mesh_points must be >= 1");
    d.tag = "dir:" + fs::path(dir).filename().string();
    if (want_train) d.train = load_dataset_dir(dir, Split::train, static_cast<std::size_t>(mesh_points), data_seed);
    if (!want_train || eval_mode == "test") {
      d.eval = load_dataset_dir(dir, eval_split, static_cast<std::size_t>(mesh_points), data_seed);
    }
  } else {
    throw ConfigError("data.source must be synth or dir, got '" + source + "'");
  }
  if (want_train && d.eval && d.eval->class_names != d.train.class_names) {
    throw ShapeError("training set has " + std::to_string(d.train.num_classes()) +
                     " classes, evaluation set has " + std::to_string(d.eval->num_classes()));
  }
  return d;
}

// ---- reporting ---------------------------------------------------------------------

void report_labels(std::ostream& err, std::string_view role, const Dataset& ds) {
  const auto counts = ds.label_counts();
  std::string line = fmt::format("{} set: {} examples;", role, ds.items.size());
  for (std::size_t c = 0; c < counts.size(); ++c) line += fmt::format(" {}={}", ds.class_names[c], counts[c]);
  err << line << "\n";
}

void report_labels(std::ostream& err, const Data& d) {
  if (!d.train.items.empty()) report_labels(err, "train", d.train);
  if (d.eval) report_labels(err, split_name(d.eval->split), *d.eval);
}

std::string confusion_text(const MetricsReport& r, const std::vector<std::string>& names) {
  std::size_t w = 5;
  for (const auto& n : names) w = std::max(w, n.size());
  std::string out = fmt::format("confusion (rows: label, columns: prediction)\n{:>{}}", "", w);
  for (const auto& n : names) out += fmt::format(" {:>{}}", n, w);
  out += "\n";
  for (std::size_t a = 0; a < r.num_classes; ++a) {
    out += fmt::format("{:>{}}", names[a], w);
    for (std::size_t b = 0; b < r.num_classes; ++b) out += fmt::format(" {:>{}}", r.confusion[a][b], w);
    out += "\n";
  }
  return out;
}

void print_epoch(std::ostream& out, const EpochRecord& r) {
  out << fmt::format("epoch {:>4}  loss {:.6f}  train_acc {:.2f}  eval_acc {:.2f}  macro_f1 {:.2f}\n",
                     r.epoch, r.train_loss, r.train_acc, r.eval_acc, r.macro_f1);
}

void write_run(const fs::path& dir, const TrainResult& result, const ModelParams& final_params,
               const Data& data, std::uint64_t seed, std::ostream& out) {
  result.history.write_csv(dir / "history.csv");
  const std::uint64_t epochs = result.history.records.empty() ? 0 : result.history.records.back().epoch;
  save_checkpoint(dir / "final.ptck", {final_params, {epochs, seed, data.tag}, data.train.class_names});
  save_checkpoint(dir / "best.ptck",
                  {result.best_params, {result.best_epoch, seed, data.tag}, data.train.class_names});
  if (!result.history.records.empty()) {
    const auto& last = result.history.records.back();
    out << fmt::format("final: eval_acc {} macro_f1 {}  best: eval_acc {} at epoch {}\n",
                       format_percent(last.eval_acc), format_percent(last.macro_f1),
                       format_percent(result.best_eval_acc), result.best_epoch);
  }
}

// ---- commands ------------------------------------------------------------------------

int cmd_preprocess(const CommonFlags& flags, const std::string& input,
                   std::optional<std::size_t> points, bool skip_bad, std::ostream& out,
                   std::ostream& err) {
  KeyValues defaults;
  defaults.set("seed", "0");
  defaults.set("preprocess.points", "1024");
  const KeyValues kv =
      assemble(defaults, {}, flags,
               {{"preprocess.input", input},
                {"preprocess.points", points ? std::to_string(*points) : std::string()}});
  const fs::path in_dir = kv.get_string("preprocess.input", "");
  if (in_dir.empty() || !fs::is_directory(in_dir)) throw ConfigError("input directory not found: " + in_dir.string());
  const auto n = kv.get_int("preprocess.points", 1024);
  if (n < 1) throw ConfigError("preprocess.points must be >= 1");
  const std::uint64_t seed = kv.get_u64("seed", 0);

  std::vector<fs::path> class_dirs, files;
  for (const auto& e : fs::directory_iterator(in_dir)) {
    if (e.is_directory()) class_dirs.push_back(e.path());
  }
  std::sort(class_dirs.begin(), class_dirs.end());
  if (class_dirs.empty()) throw ConfigError("no class directories under " + in_dir.string());
  for (const auto& c : class_dirs) {
    for (const auto& e : fs::recursive_directory_iterator(c)) {
      if (e.is_regular_file() && e.path().extension() == ".off") files.push_back(e.path());
    }
  }
  std::sort(files.begin(), files.end());

  const fs::path out_dir = flags.out_dir;
  prepare_out_dir(out_dir, flags.force);
  echo_config(out_dir, kv, err);

  std::string manifest = "file,class,points\n";
  std::string errors = "file,error\n";
  std::size_t failed = 0;
  for (const auto& file : files) {
    const std::string rel = fs::relative(file, in_dir).generic_string();
    const std::string cls = fs::relative(file, in_dir).begin()->string();
    try {
      const auto label = static_cast<std::uint32_t>(
          std::find_if(class_dirs.begin(), class_dirs.end(),
                       [&](const fs::path& p) { return p.filename() == cls; }) -
          class_dirs.begin());
      PointCloud cloud;
      cloud.label = label;
      cloud.positions = normalize_cloud(
          sample_mesh_surface(read_off(file), static_cast<std::size_t>(n), derive_seed(seed, {stable_hash(rel)})));
      fs::path target = out_dir / fs::path(rel).replace_extension(".pcld");
      fs::create_directories(target.parent_path());
      write_pcld(target, cloud);
      manifest += fmt::format("{},{},{}\n", fs::path(rel).replace_extension(".pcld").generic_string(), cls, n);
    } catch (const Error& e) {
      ++failed;
      std::string msg = e.what();
      std::replace(msg.begin(), msg.end(), ',', ';');
      std::replace(msg.begin(), msg.end(), '\n', ' ');
      errors += rel + "," + msg + "\n";
      err << "failed: " << rel << ": " << e.what() << "\n";
    }
  }
  write_text(out_dir / "manifest.csv", manifest);
  write_text(out_dir / "errors.csv", errors);
  out << fmt::format("preprocessed {} of {} files into {}\n", files.size() - failed, files.size(),
                     out_dir.string());
  if (failed > 0 && !skip_bad) {
    err << failed << " file(s) failed; see errors.csv (pass --skip-bad to accept)\n";
    return kExitRuntime;
  }
  return kExitOk;
}

KeySet model_keys() {
  KeySet keys = keys_of(model_defaults());
  keys.insert("model.num_classes");
  return keys;
}

int cmd_train(const CommonFlags& flags, std::ostream& out, std::ostream& err) {
  KeyValues defaults = data_defaults();
  defaults.merge(train_defaults());
  defaults.merge(model_defaults());
  const KeyValues kv = assemble(defaults, model_keys(), flags, {});
  const TrainConfig tc = read_train_config(kv);
  tc.validate();
  {
    KeyValues probe = kv;  // validate model keys before touching data
    if (!probe.contains("model.num_classes")) probe.set("model.num_classes", "2");
    ModelConfig::read_from(probe);
  }
  const Data data = load_data(kv, true, Split::test);
  report_labels(err, data);
  const fs::path out_dir = flags.out_dir;
  prepare_out_dir(out_dir, flags.force);
  echo_config(out_dir, kv, err);

  KeyValues model_kv = kv;
  if (!model_kv.contains("model.num_classes")) {
    model_kv.set("model.num_classes", std::to_string(data.train.num_classes()));
  }
  const ModelConfig mc = ModelConfig::read_from(model_kv);
  const TrainResult result = train_loop(mc, data.train, data.eval ? &*data.eval : nullptr, tc,
                                        [&](const EpochRecord& r) {
                                          print_epoch(out, r);
                                          return true;
                                        });
  write_run(out_dir, result, result.final_params, data, tc.seed, out);
  return kExitOk;
}

int cmd_finetune(const CommonFlags& flags, const std::string& from, const std::string& baseline,
                 std::ostream& out, std::ostream& err) {
  KeyValues defaults = data_defaults();
  defaults.merge(train_defaults());
  defaults.set("finetune.threshold", "80");
  const KeyValues kv = assemble(defaults, model_keys(), flags,
                                {{"finetune.from", from}, {"finetune.baseline", baseline}});
  const TrainConfig tc = read_train_config(kv);
  tc.validate(true);
  const std::string from_path = kv.get_string("finetune.from", "");
  if (from_path.empty()) throw ConfigError("finetune needs --from <checkpoint>");
  const std::string baseline_path = kv.get_string("finetune.baseline", "");
  const double threshold = kv.get_double("finetune.threshold", 80.0);
  const Checkpoint source = load_checkpoint(from_path);
  {
    // model.* keys may ride along from a training config but cannot change the architecture.
    KeyValues stored;
    source.params.config.write_to(stored);
    for (const auto& [k, v] : kv.entries()) {
      if (k.starts_with("model.") && k != "model.num_classes" && stored.get(k) != v) {
        throw ConfigError(k + "=" + v + " does not match the checkpoint (" + stored.get(k).value_or("") + ")");
      }
    }
  }
  std::optional<RunHistory> base;
  if (!baseline_path.empty()) base = RunHistory::read_csv(baseline_path);

  const Data data = load_data(kv, true, Split::test);
  report_labels(err, data);
  const fs::path out_dir = flags.out_dir;
  prepare_out_dir(out_dir, flags.force);
  echo_config(out_dir, kv, err);

  const TrainResult result = finetune(source, data.train, data.eval ? &*data.eval : nullptr, tc,
                                      [&](const EpochRecord& r) {
                                        print_epoch(out, r);
                                        return true;
                                      });
  write_run(out_dir, result, result.final_params, data, tc.seed, out);
  if (base && !result.history.records.empty()) {
    const std::string table = compare_runs({summarize_run("Fine Tuning", result.history, threshold),
                                            summarize_run("Retraining", *base, threshold)},
                                           threshold);
    write_text(out_dir / "comparison.md", table);
    out << table;
  }
  return kExitOk;
}

int cmd_eval(const CommonFlags& flags, const std::string& checkpoint, std::ostream& out,
             std::ostream& err) {
  KeyValues defaults = data_defaults();
  defaults.set("eval.split", "test");
  defaults.set("eval.batch_size", "16");
  // Training and fine-tuning keys are accepted so a run's config.txt can be reused.
  KeySet ignored = model_keys();
  ignored.insert("eval.points");
  for (const auto& k : keys_of(train_defaults())) ignored.insert(k);
  ignored.insert({"finetune.from", "finetune.baseline", "finetune.threshold"});
  KeyValues kv = assemble(defaults, ignored, flags, {{"eval.checkpoint", checkpoint}});
  // A reused training config evaluates at the resolution it trained at.
  if (!kv.contains("eval.points")) kv.set("eval.points", kv.get_string("train.points", "256"));
  const std::string ck_path = kv.get_string("eval.checkpoint", "");
  if (ck_path.empty()) throw ConfigError("eval needs --checkpoint <file>");
  const std::string split = kv.get_string("eval.split", "test");
  if (split != "test" && split != "train") throw ConfigError("eval.split must be test or train");
  const auto points = kv.get_int("eval.points", 256);
  const auto batch = kv.get_int("eval.batch_size", 16);
  if (points < 1 || batch < 1) throw ConfigError("eval.points and eval.batch_size must be >= 1");
  const Checkpoint ck = load_checkpoint(ck_path);

  const Data data = load_data(kv, false, split == "test" ? Split::test : Split::train);
  report_labels(err, data);
  const Dataset& ds = *data.eval;
  if (ds.num_classes() != ck.params.config.num_classes) {
    throw ShapeError("checkpoint has " + std::to_string(ck.params.config.num_classes) +
                     " classes, dataset has " + std::to_string(ds.num_classes()));
  }
  const fs::path out_dir = flags.out_dir;
  prepare_out_dir(out_dir, flags.force);
  echo_config(out_dir, kv, err);

  std::vector<std::uint32_t> preds;
  const MetricsReport r = evaluate(ck.params, ds, static_cast<std::size_t>(points),
                                   static_cast<std::size_t>(batch), &preds);

  out << fmt::format("examples {}\naccuracy {}\nmacro_f1 {}\n", r.total, format_percent(r.accuracy),
                     format_percent(r.macro_f1));
  out << confusion_text(r, ds.class_names);

  write_text(out_dir / "metrics.csv",
             fmt::format("metric,value\nexamples,{}\ncorrect,{}\naccuracy,{:.9g}\nmacro_f1,{:.9g}\n", r.total,
                         r.correct, r.accuracy, r.macro_f1));
  std::string per_class = "class,support,precision,recall,f1\n";
  std::string confusion = "label";
  for (const auto& n : ds.class_names) confusion += "," + n;
  confusion += "\n";
  for (std::size_t c = 0; c < r.num_classes; ++c) {
    per_class += fmt::format("{},{},{:.9g},{:.9g},{:.9g}\n", ds.class_names[c], r.support[c],
                             100.0 * r.precision[c], 100.0 * r.recall[c], 100.0 * r.f1[c]);
    confusion += ds.class_names[c];
    for (auto v : r.confusion[c]) confusion += "," + std::to_string(v);
    confusion += "\n";
  }
  std::string predictions = "index,label,prediction\n";
  for (std::size_t i = 0; i < preds.size(); ++i) {
    predictions += fmt::format("{},{},{}\n", i, ds.items[i].label, preds[i]);
  }
  write_text(out_dir / "per_class.csv", per_class);
  write_text(out_dir / "confusion.csv", confusion);
  write_text(out_dir / "predictions.csv", predictions);
  return kExitOk;
}

int cmd_gradcheck(std::size_t seeds, const std::string& fault, double eps, const std::string& out_dir,
                  bool force, std::ostream& out, std::ostream& err) {
  static const KeySet kOps = {"matmul", "linear", "add", "sub", "mul", "relu", "scale", "softmax",
                              "reduce_sum", "reduce_mean", "reduce_max", "gather_rows", "reshape",
                              "concat_rows", "cross_entropy"};
  if (!fault.empty() && !kOps.contains(fault)) throw ConfigError("--inject-fault: unknown op '" + fault + "'");
  if (!(eps > 0.0)) throw ConfigError("--eps must be > 0");
  KeyValues kv;
  kv.set("gradcheck.seeds", std::to_string(seeds));
  kv.set("gradcheck.eps", fmt_double(eps));
  kv.set("gradcheck.inject_fault", fault);
  if (!out_dir.empty()) {
    prepare_out_dir(out_dir, force);
    echo_config(out_dir, kv, err);
  }
  constexpr double kTolerance = 1e-4;
  const auto t0 = std::chrono::steady_clock::now();
  const auto checks = run_gradcheck_suite(seeds, fault, eps);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  std::string csv = "component,max_rel_error,compared,skipped,status\n";
  out << fmt::format("{:<32} {:>13} {:>9} {:>8}  status\n", "component", "max_rel_error", "compared",
                     "skipped");
  std::size_t failures = 0;
  for (const auto& c : checks) {
    const bool ok = c.worst.max_relative_error < kTolerance && c.worst.compared > 0;
    failures += !ok;
    const char* status = ok ? "ok" : "FAIL";
    out << fmt::format("{:<32} {:>13.3e} {:>9} {:>8}  {}\n", c.name, c.worst.max_relative_error,
                       c.worst.compared, c.worst.skipped, status);
    csv += fmt::format("{},{:.9g},{},{},{}\n", c.name, c.worst.max_relative_error, c.worst.compared,
                       c.worst.skipped, status);
  }
  out << fmt::format("{} of {} components within {:g} over {} seeds ({:.1f} s)\n", checks.size() - failures,
                     checks.size(), kTolerance, seeds, seconds);
  if (!out_dir.empty()) write_text(fs::path(out_dir) / "gradcheck.csv", csv);
  return failures ? kExitRuntime : kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Point transformer classification toolkit"};
  app.require_subcommand(1);

  CommonFlags pre_flags, train_flags, ft_flags, eval_flags;
  std::string input, from, baseline, checkpoint, fault, gc_out;
  std::optional<std::size_t> pre_points;
  std::size_t seeds = 10;
  double eps = 1e-5;
  bool skip_bad = false, gc_force = false;

  auto* pre = app.add_subcommand("preprocess", "sample OFF meshes into PCLD point clouds");
  add_common(pre, pre_flags, true);
  pre->add_option("--input", input, "directory of class folders with OFF meshes");
  pre->add_option("--points", pre_points, "points per cloud (default 1024)");
  pre->add_flag("--skip-bad", skip_bad, "exit 0 even if some files fail");

  auto* train = app.add_subcommand("train", "train a model from scratch");
  add_common(train, train_flags, true);

  auto* ft = app.add_subcommand("finetune", "fine-tune a checkpoint on a new dataset");
  add_common(ft, ft_flags, true);
  ft->add_option("--from", from, "source checkpoint");
  ft->add_option("--baseline", baseline, "history.csv of a from-scratch run to compare against");

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common(ev, eval_flags, true);
  ev->add_option("--checkpoint", checkpoint, "checkpoint to evaluate");

  auto* gc = app.add_subcommand("gradcheck", "compare analytic gradients with finite differences");
  gc->add_option("--seeds", seeds, "number of seeds");
  gc->add_option("--inject-fault", fault, "negate the backward pass of this op");
  gc->add_option("--eps", eps, "finite-difference step");
  gc->add_option("--out", gc_out, "optional report directory");
  gc->add_flag("--force", gc_force, "write into a non-empty output directory");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*pre) return cmd_preprocess(pre_flags, input, pre_points, skip_bad, out, err);
    if (*train) return cmd_train(train_flags, out, err);
    if (*ft) return cmd_finetune(ft_flags, from, baseline, out, err);
    if (*ev) return cmd_eval(eval_flags, checkpoint, out, err);
    if (*gc) return cmd_gradcheck(seeds, fault, eps, gc_out, gc_force, out, err);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const ShapeError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitValidation;
}

}  // namespace ptl
