#include "asformer/cli.hpp"

#include "asformer/checkpoint.hpp"
#include "asformer/data_io.hpp"
#include "asformer/errors.hpp"
#include "asformer/metrics.hpp"
#include "asformer/synthetic.hpp"

#include "CLI11.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>

namespace asformer::cli {

RunConfig RunConfig::from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig rc;
  try {
    if (doc.contains("num_blocks")) rc.model.num_blocks = doc["num_blocks"].get<int>();
    if (doc.contains("num_decoders")) rc.model.num_decoders = doc["num_decoders"].get<int>();
    if (doc.contains("feature_dim")) {
      rc.model.feature_dim = doc["feature_dim"].get<int>();
      rc.feature_dim_set = true;
    }
    if (doc.contains("model_dim")) rc.model.model_dim = doc["model_dim"].get<int>();
    if (doc.contains("num_classes")) {
      rc.model.num_classes = doc["num_classes"].get<int>();
      rc.num_classes_set = true;
    }
    if (doc.contains("input_dropout")) rc.model.input_dropout = doc["input_dropout"].get<double>();
    if (doc.contains("alpha_decay")) rc.model.alpha_decay = doc["alpha_decay"].get<double>();
    if (doc.contains("lambda")) rc.model.lambda = doc["lambda"].get<double>();
    if (doc.contains("epochs")) rc.epochs = doc["epochs"].get<int>();
    if (doc.contains("learning_rate")) rc.learning_rate = doc["learning_rate"].get<double>();
    if (doc.contains("seed")) rc.seed = doc["seed"].get<std::uint64_t>();
    if (doc.contains("manifest")) rc.manifest = doc["manifest"].get<std::string>();
    if (doc.contains("class_map")) rc.class_map = doc["class_map"].get<std::string>();
    if (doc.contains("out_dir")) rc.out_dir = doc["out_dir"].get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config field has the wrong type: ") + e.what());
  }
  return rc;
}

nlohmann::json RunConfig::to_json() const {
  return {
      {"num_blocks", model.num_blocks},
      {"num_decoders", model.num_decoders},
      {"feature_dim", model.feature_dim},
      {"model_dim", model.model_dim},
      {"num_classes", model.num_classes},
      {"input_dropout", model.input_dropout},
      {"alpha_decay", model.alpha_decay},
      {"lambda", model.lambda},
      {"epochs", epochs},
      {"learning_rate", learning_rate},
      {"seed", seed},
      {"manifest", manifest.generic_string()},
      {"class_map", class_map.generic_string()},
      {"out_dir", out_dir.generic_string()},
  };
}

MemoryReport attention_memory_report(Index frames, int blocks, int model_dim, std::uint64_t seed) {
  if (frames < 2) throw ConfigError("bench-attn needs T >= 2, got " + std::to_string(frames));
  if (blocks < 1 || blocks > kMaxBlocks) {
    throw ConfigError("bench-attn needs 1 <= J <= " + std::to_string(kMaxBlocks) + ", got " +
                      std::to_string(blocks));
  }
  ModelConfig config;
  config.num_blocks = blocks;
  config.num_decoders = 0;
  config.feature_dim = model_dim;
  config.model_dim = model_dim;
  config.num_classes = 2;
  const Model model(config, seed);

  std::mt19937_64 rng(seed + 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix features(frames, model_dim);
  for (Index i = 0; i < features.size(); ++i) features.data()[i] = normal(rng);

  AttentionProbe probe;
  Tape tape = Tape::inference();
  ForwardOptions options;
  options.probe = &probe;
  model.forward(tape, Tensor::constant(std::move(features)), options);

  MemoryReport report;
  report.frames = frames;
  report.blocks = blocks;
  for (const AttentionTrace& trace : probe.encoder_blocks) {
    LayerMemory layer;
    layer.block = trace.block;
    layer.window = trace.window;
    layer.counted = trace.scores;
    layer.closed_form = window_score_count(frames, window_schedule(trace.block, blocks));
    report.hierarchical_total += layer.counted;
    report.closed_form_total += layer.closed_form;
    report.layers.push_back(layer);
  }
  const auto t = static_cast<std::uint64_t>(frames);
  report.full_total = static_cast<std::uint64_t>(blocks) * t * t;
  report.ratio = static_cast<double>(report.full_total) / static_cast<double>(report.hierarchical_total);
  report.epsilon = 2.0 - static_cast<double>(report.hierarchical_total) /
                             (std::ldexp(1.0, blocks) * static_cast<double>(frames));
  return report;
}

void write_memory_report_csv(std::ostream& out, const MemoryReport& r) {
  out << "block,window,counted_scores,closed_form_scores,full_scores\n";
  const auto t = static_cast<std::uint64_t>(r.frames);
  for (const auto& l : r.layers) {
    out << l.block << ',' << l.window << ',' << l.counted << ',' << l.closed_form << ',' << t * t
        << '\n';
  }
  out << "total,," << r.hierarchical_total << ',' << r.closed_form_total << ',' << r.full_total
      << '\n';
}

std::vector<double> minmax_normalize(const std::vector<double>& row, Index anchor, Index half) {
  const Index frames = static_cast<Index>(row.size());
  const Index lo = std::max<Index>(0, anchor - half);
  const Index hi = std::min<Index>(frames - 1, anchor + half);
  std::vector<double> out(row.size(), 0.0);
  if (lo > hi) return out;
  double mn = row[static_cast<std::size_t>(lo)];
  double mx = mn;
  for (Index j = lo; j <= hi; ++j) {
    mn = std::min(mn, row[static_cast<std::size_t>(j)]);
    mx = std::max(mx, row[static_cast<std::size_t>(j)]);
  }
  if (mx == mn) return out;
  for (Index j = lo; j <= hi; ++j) {
    out[static_cast<std::size_t>(j)] = (row[static_cast<std::size_t>(j)] - mn) / (mx - mn);
  }
  return out;
}

namespace {

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + dir.string() + ": " + ec.message());
}

void require_file(const fs::path& path, const std::string& what) {
  if (!fs::is_regular_file(path)) throw ConfigError(what + " not found: " + path.string());
}

nlohmann::json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config not found: " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
}

struct GlobalFlags {
  std::string config;
  std::uint64_t seed = 0;
  std::string out;
};

// Options shared by every subcommand; CLI11 "fallthrough" lets them appear
// before or after the subcommand name.
struct Flags {
  GlobalFlags global;
  CLI::Option* config_opt = nullptr;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* out_opt = nullptr;
};

int cmd_train(const Flags& flags, const RunConfig& overrides_in, const CLI::App& sub,
              std::ostream& out, std::ostream& err) {
  RunConfig rc;
  if (flags.config_opt->count() > 0) {
    const fs::path config_path = flags.global.config;
    rc = RunConfig::from_json(read_json_file(config_path));
    // Data paths inside a config file are relative to that file.
    for (fs::path* p : {&rc.manifest, &rc.class_map}) {
      if (!p->empty() && p->is_relative()) *p = config_path.parent_path() / *p;
    }
  }
  if (flags.seed_opt->count() > 0) rc.seed = flags.global.seed;
  if (flags.out_opt->count() > 0) rc.out_dir = flags.global.out;

  const RunConfig& o = overrides_in;
  auto set = [&sub](const char* name) { return sub.get_option(name)->count() > 0; };
  if (set("--manifest")) rc.manifest = o.manifest;
  if (set("--class-map")) rc.class_map = o.class_map;
  if (set("--epochs")) rc.epochs = o.epochs;
  if (set("--lr")) rc.learning_rate = o.learning_rate;
  if (set("--blocks")) rc.model.num_blocks = o.model.num_blocks;
  if (set("--decoders")) rc.model.num_decoders = o.model.num_decoders;
  if (set("--dim")) rc.model.model_dim = o.model.model_dim;
  if (set("--dropout")) rc.model.input_dropout = o.model.input_dropout;
  if (set("--alpha-decay")) rc.model.alpha_decay = o.model.alpha_decay;
  if (set("--lambda")) rc.model.lambda = o.model.lambda;
  if (set("--feature-dim")) {
    rc.model.feature_dim = o.model.feature_dim;
    rc.feature_dim_set = true;
  }

  if (rc.manifest.empty()) throw ConfigError("train needs --manifest");
  require_file(rc.manifest, "manifest");
  if (rc.class_map.empty()) rc.class_map = rc.manifest.parent_path() / "mapping.txt";
  require_file(rc.class_map, "class map");
  if (rc.epochs < 0) throw ConfigError("epochs must be >= 0");

  const ClassMap classes = ClassMap::load(rc.class_map);
  const Dataset data = load_dataset(rc.manifest, classes);
  if (data.empty()) throw DataError("manifest " + rc.manifest.string() + " lists no sequences");
  if (rc.num_classes_set && rc.model.num_classes != classes.size()) {
    throw ConfigError("num_classes " + std::to_string(rc.model.num_classes) +
                      " disagrees with class map size " + std::to_string(classes.size()));
  }
  rc.model.num_classes = classes.size();
  if (!rc.feature_dim_set) rc.model.feature_dim = static_cast<int>(data.front().features.cols());
  rc.model.validate();
  check_dataset(data, rc.model);

  Model model(rc.model, rc.seed);
  TrainOptions opts;
  opts.epochs = rc.epochs;
  opts.adam.learning_rate = rc.learning_rate;
  opts.seed = rc.seed ^ 0x9e3779b97f4a7c15ULL;
  opts.on_epoch = [&err, &rc](const EpochRecord& r) {
    err << "epoch " << r.epoch << "/" << rc.epochs << " loss " << r.total_loss << " acc "
        << r.train_acc << "\n";
  };
  const auto log = fit(model, data, opts);

  ensure_dir(rc.out_dir);
  save_checkpoint(rc.out_dir / "model.ckpt", model);
  {
    std::ofstream f(rc.out_dir / "train_log.csv");
    write_training_log(f, log);
  }
  {
    std::ofstream f(rc.out_dir / "config.json");
    f << rc.to_json().dump(2) << '\n';
  }
  out << "trained " << model.parameter_count() << " parameters on " << data.size()
      << " sequences for " << rc.epochs << " epochs; wrote " << (rc.out_dir / "model.ckpt").string()
      << "\n";
  return 0;
}

struct PredictArgs {
  std::string checkpoint;
  std::vector<std::string> features;
  std::string manifest;
  std::string class_map;
  bool all_stages = false;
};

int cmd_predict(const Flags& flags, const PredictArgs& a, std::ostream& out) {
  require_file(a.checkpoint, "checkpoint");
  require_file(a.class_map, "class map");
  const Model model = load_checkpoint(a.checkpoint);
  const ClassMap classes = ClassMap::load(a.class_map);
  if (classes.size() != model.config().num_classes) {
    throw DimensionError("class map has " + std::to_string(classes.size()) +
                         " classes, checkpoint has " + std::to_string(model.config().num_classes));
  }
  std::vector<fs::path> inputs(a.features.begin(), a.features.end());
  if (!a.manifest.empty()) {
    require_file(a.manifest, "manifest");
    for (const auto& e : load_manifest(a.manifest)) inputs.push_back(e.features);
  }
  if (inputs.empty()) throw ConfigError("predict needs --features or --manifest");
  const fs::path out_dir = flags.global.out.empty() ? fs::path("out") : fs::path(flags.global.out);
  ensure_dir(out_dir);

  for (const auto& path : inputs) {
    const Matrix features = load_features(path);
    if (features.cols() != model.config().feature_dim) {
      throw DimensionError("feature dimension mismatch: " + path.string() + " has D=" +
                           std::to_string(features.cols()) + ", checkpoint expects D=" +
                           std::to_string(model.config().feature_dim));
    }
    const std::string video = path.stem().string();
    const auto stages = predict_all_stages(model, features);
    write_labels(out_dir / (video + ".txt"), stages.back(), classes);
    if (a.all_stages) {
      for (std::size_t s = 0; s < stages.size(); ++s) {
        const std::string stage = s == 0 ? "encoder" : "decoder" + std::to_string(s);
        write_labels(out_dir / (video + "." + stage + ".txt"), stages[s], classes);
      }
    }
    out << "predicted " << video << " (" << features.rows() << " frames)\n";
  }
  return 0;
}

struct EvalArgs {
  std::vector<std::string> pred;
  std::vector<std::string> gt;
  std::string manifest;
  std::string pred_dir;
  std::string class_map;
};

void print_report_row(std::ostream& out, const std::string& video, const metrics::EvalReport& r) {
  out << video << ',' << r.accuracy << ',' << r.edit << ',' << r.f1[0] << ',' << r.f1[1] << ','
      << r.f1[2] << '\n';
}

int cmd_eval(const Flags& flags, const EvalArgs& a, std::ostream& out) {
  require_file(a.class_map, "class map");
  const ClassMap classes = ClassMap::load(a.class_map);
  std::vector<std::pair<std::string, std::pair<fs::path, fs::path>>> pairs;
  if (a.pred.size() != a.gt.size()) {
    throw ConfigError("eval needs as many --pred as --gt files");
  }
  for (std::size_t i = 0; i < a.pred.size(); ++i) {
    pairs.push_back({fs::path(a.gt[i]).stem().string(), {a.pred[i], a.gt[i]}});
  }
  if (!a.manifest.empty()) {
    if (a.pred_dir.empty()) throw ConfigError("eval --manifest needs --pred-dir");
    require_file(a.manifest, "manifest");
    for (const auto& e : load_manifest(a.manifest)) {
      pairs.push_back({e.video(), {fs::path(a.pred_dir) / (e.video() + ".txt"), e.labels}});
    }
  }
  if (pairs.empty()) throw ConfigError("eval needs --pred/--gt pairs or --manifest with --pred-dir");

  metrics::ReportAccumulator acc;
  std::ostringstream csv;
  csv << std::setprecision(10);
  csv << "video,acc,edit,f1@10,f1@25,f1@50\n";
  for (const auto& [video, files] : pairs) {
    require_file(files.first, "prediction file");
    require_file(files.second, "ground-truth file");
    const auto gt = load_labels(files.second, classes);
    const auto pred = load_labels(files.first, classes);
    if (pred.size() != gt.size()) {
      throw DataError("length mismatch for " + video + ": prediction has " +
                      std::to_string(pred.size()) + " frames, ground truth " +
                      std::to_string(gt.size()));
    }
    const auto report = metrics::evaluate(pred, gt);
    acc.add(report);
    print_report_row(csv, video, report);
  }
  const auto summary = acc.summary();
  print_report_row(csv, "all", summary);

  out << std::fixed << std::setprecision(2);
  out << "videos:  " << acc.videos() << "\n";
  out << "Acc:     " << summary.accuracy << "\n";
  out << "Edit:    " << summary.edit << "\n";
  out << "F1@10:   " << summary.f1[0] << "\n";
  out << "F1@25:   " << summary.f1[1] << "\n";
  out << "F1@50:   " << summary.f1[2] << "\n";
  out << std::defaultfloat;

  const fs::path out_dir = flags.global.out.empty() ? fs::path("out") : fs::path(flags.global.out);
  ensure_dir(out_dir);
  std::ofstream f(out_dir / "report.csv");
  f << csv.str();
  return 0;
}

int cmd_bench(const Flags& flags, long long frames, int blocks, int dim, std::ostream& out) {
  if (frames < 2 || blocks < 1) {
    throw ConfigError("bench-attn needs T >= 2 and J >= 1");
  }
  const MemoryReport r = attention_memory_report(frames, blocks, dim, flags.global.seed);
  if (r.hierarchical_total != r.closed_form_total) {
    throw InternalError("instrumented score count " + std::to_string(r.hierarchical_total) +
                        " disagrees with closed form " + std::to_string(r.closed_form_total));
  }
  out << "T=" << r.frames << " J=" << r.blocks << "\n";
  out << std::setw(6) << "block" << std::setw(10) << "window" << std::setw(16) << "scores" << "\n";
  for (const auto& l : r.layers) {
    out << std::setw(6) << l.block << std::setw(10) << l.window << std::setw(16) << l.counted << "\n";
  }
  out << "hierarchical total: " << r.hierarchical_total << " (closed form " << r.closed_form_total
      << ")\n";
  out << "bound 2*2^J*T:      " << 2ULL * (1ULL << blocks) * static_cast<std::uint64_t>(frames)
      << "\n";
  out << "full J*T^2:         " << r.full_total << "\n";
  out << "ratio:              " << r.ratio << "\n";
  out << "epsilon:            " << r.epsilon << "\n";
  const fs::path out_dir = flags.global.out.empty() ? fs::path("out") : fs::path(flags.global.out);
  ensure_dir(out_dir);
  std::ofstream f(out_dir / "memory_report.csv");
  write_memory_report_csv(f, r);
  return 0;
}

int cmd_dump(const Flags& flags, const std::string& checkpoint, const std::string& features_path,
             long long frame, std::ostream& out) {
  require_file(checkpoint, "checkpoint");
  const Model model = load_checkpoint(checkpoint);
  const Matrix features = load_features(features_path);
  if (features.cols() != model.config().feature_dim) {
    throw DimensionError("feature dimension mismatch: " + features_path + " has D=" +
                         std::to_string(features.cols()) + ", checkpoint expects D=" +
                         std::to_string(model.config().feature_dim));
  }
  if (frame < 0 || frame >= features.rows()) {
    throw ConfigError("anchor frame " + std::to_string(frame) + " outside [0, " +
                      std::to_string(features.rows()) + ")");
  }
  AttentionProbe probe;
  probe.anchor_frame = frame;
  Tape tape = Tape::inference();
  ForwardOptions options;
  options.probe = &probe;
  model.forward(tape, Tensor::constant(features), options);

  const fs::path out_dir = flags.global.out.empty() ? fs::path("out") : fs::path(flags.global.out);
  ensure_dir(out_dir);
  for (const AttentionTrace& trace : probe.encoder_blocks) {
    double total = 0.0;
    for (double w : trace.anchor_row) total += w;
    if (std::abs(total - 1.0) > 1e-6) {
      throw InternalError("attention row of block " + std::to_string(trace.block) + " sums to " +
                          std::to_string(total));
    }
    const auto normalized = minmax_normalize(trace.anchor_row, frame, trace.window / 2);
    std::ofstream f(out_dir / ("attention_block" + std::to_string(trace.block) + ".csv"));
    f << std::setprecision(10) << "frame,weight,normalized\n";
    for (std::size_t j = 0; j < normalized.size(); ++j) {
      f << j << ',' << trace.anchor_row[j] << ',' << normalized[j] << '\n';
    }
  }
  out << "wrote " << probe.encoder_blocks.size() << " attention rows for frame " << frame << " to "
      << out_dir.string() << "\n";
  return 0;
}

struct SynthArgs {
  int sequences = 10;
  long long min_frames = 200;
  long long max_frames = 400;
  int classes = 5;
  int feature_dim = 32;
  int min_len = 20;
  int max_len = 80;
  double noise = -1.0;  // negative: tune for ~90% frame-level Bayes accuracy
  std::uint64_t stream = 0;
};

int cmd_gen_synth(const Flags& flags, const SynthArgs& a, std::ostream& out) {
  SyntheticSpec spec = SyntheticSpec::tuned(a.classes, a.feature_dim, flags.global.seed);
  spec.min_len = a.min_len;
  spec.max_len = a.max_len;
  if (a.noise >= 0.0) spec.noise_sigma = a.noise;
  const Dataset data = generate_synthetic(spec, a.sequences, a.min_frames, a.max_frames, a.stream);

  const fs::path root = flags.global.out.empty() ? fs::path("synthetic") : fs::path(flags.global.out);
  ensure_dir(root / "features");
  ensure_dir(root / "labels");
  std::vector<std::string> names;
  for (int c = 0; c < a.classes; ++c) names.push_back("action" + std::to_string(c));
  const ClassMap classes(names);
  classes.save(root / "mapping.txt");

  std::vector<ManifestEntry> entries;
  for (const auto& seq : data) {
    ManifestEntry e{root / "features" / (seq.name + ".asff"), root / "labels" / (seq.name + ".txt")};
    write_features(e.features, seq.features);
    write_labels(e.labels, seq.labels, classes);
    entries.push_back(e);
  }
  write_manifest(root / "manifest.json", entries);
  out << "wrote " << data.size() << " sequences (C=" << a.classes << ", D=" << a.feature_dim
      << ", noise_sigma=" << spec.noise_sigma << ") to " << root.string() << "\n";
  return 0;
}

int cmd_convert(const std::string& input, const std::string& output, bool transpose,
                std::ostream& out) {
  std::ifstream in(input);
  if (!in) throw ConfigError("text feature file not found: " + input);
  Matrix m = features_from_text(in);
  if (transpose) m = Matrix(m.transpose());
  write_features(fs::path(output), m);
  out << "wrote " << m.rows() << "x" << m.cols() << " features to " << output << "\n";
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"ASFormer temporal action segmentation"};
  app.require_subcommand(1);
  app.fallthrough();

  Flags flags;
  flags.config_opt = app.add_option("--config", flags.global.config, "JSON run configuration");
  flags.seed_opt = app.add_option("--seed", flags.global.seed, "Random seed");
  flags.out_opt = app.add_option("--out", flags.global.out, "Output directory");

  RunConfig train_args;
  auto* train = app.add_subcommand("train", "Train a model on a manifest");
  train->add_option("--manifest", train_args.manifest, "Dataset manifest (JSON)");
  train->add_option("--class-map", train_args.class_map, "Class map file");
  train->add_option("--epochs", train_args.epochs, "Training epochs");
  train->add_option("--lr", train_args.learning_rate, "Adam learning rate");
  train->add_option("--blocks", train_args.model.num_blocks, "Blocks per encoder/decoder (J)");
  train->add_option("--decoders", train_args.model.num_decoders, "Number of decoders");
  train->add_option("--dim", train_args.model.model_dim, "Model dimension");
  train->add_option("--feature-dim", train_args.model.feature_dim, "Input feature dimension");
  train->add_option("--dropout", train_args.model.input_dropout, "Input channel dropout rate");
  train->add_option("--alpha-decay", train_args.model.alpha_decay, "Decoder alpha decay");
  train->add_option("--lambda", train_args.model.lambda, "Smoothing loss weight");

  PredictArgs predict_args;
  auto* predict = app.add_subcommand("predict", "Predict per-frame labels");
  predict->add_option("--checkpoint", predict_args.checkpoint)->required();
  predict->add_option("--features", predict_args.features, "Feature file(s)");
  predict->add_option("--manifest", predict_args.manifest, "Predict every manifest entry");
  predict->add_option("--class-map", predict_args.class_map)->required();
  predict->add_flag("--all-stages", predict_args.all_stages, "Also write one file per stage");

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "Score predictions: Acc, Edit, F1@{10,25,50}");
  eval->add_option("--pred", eval_args.pred, "Predicted label file(s)");
  eval->add_option("--gt", eval_args.gt, "Ground-truth label file(s)");
  eval->add_option("--manifest", eval_args.manifest, "Ground truth from a manifest");
  eval->add_option("--pred-dir", eval_args.pred_dir, "Directory of <video>.txt predictions");
  eval->add_option("--class-map", eval_args.class_map)->required();

  long long bench_frames = 5000;
  int bench_blocks = 9;
  int bench_dim = 8;
  auto* bench = app.add_subcommand("bench-attn", "Count attention scores vs full attention");
  bench->add_option("-T,--frames", bench_frames, "Sequence length");
  bench->add_option("-J,--blocks", bench_blocks, "Number of blocks");
  bench->add_option("--dim", bench_dim, "Model dimension of the probe network");

  std::string dump_checkpoint, dump_features;
  long long dump_frame = 0;
  auto* dump = app.add_subcommand("dump-attn", "Export anchor-frame attention per encoder block");
  dump->add_option("--checkpoint", dump_checkpoint)->required();
  dump->add_option("--features", dump_features)->required();
  dump->add_option("--frame", dump_frame, "Anchor frame")->required();

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("gen-synth", "Write a synthetic dataset with manifest");
  synth->add_option("--sequences", synth_args.sequences);
  synth->add_option("--min-frames", synth_args.min_frames);
  synth->add_option("--max-frames", synth_args.max_frames);
  synth->add_option("--classes", synth_args.classes);
  synth->add_option("--feature-dim", synth_args.feature_dim);
  synth->add_option("--min-len", synth_args.min_len);
  synth->add_option("--max-len", synth_args.max_len);
  synth->add_option("--noise", synth_args.noise, "Noise sigma (default: tuned)");
  synth->add_option("--stream", synth_args.stream, "Sequence stream (use another for held-out data)");

  std::string convert_in, convert_out;
  bool convert_transpose = false;
  auto* convert = app.add_subcommand("convert-features", "Convert text features to the binary format");
  convert->add_option("--input", convert_in)->required();
  convert->add_option("--output", convert_out)->required();
  convert->add_flag("--transpose", convert_transpose, "Input is D rows of T values");

  std::vector<std::string> argv_storage;
  argv_storage.push_back("asformer");
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : argv_storage) argv.push_back(s.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : static_cast<int>(ErrorKind::kConfig);
  }

  try {
    if (*train) return cmd_train(flags, train_args, *train, out, err);
    if (*predict) return cmd_predict(flags, predict_args, out);
    if (*eval) return cmd_eval(flags, eval_args, out);
    if (*bench) return cmd_bench(flags, bench_frames, bench_blocks, bench_dim, out);
    if (*dump) return cmd_dump(flags, dump_checkpoint, dump_features, dump_frame, out);
    if (*synth) return cmd_gen_synth(flags, synth_args, out);
    if (*convert) return cmd_convert(convert_in, convert_out, convert_transpose, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return static_cast<int>(ErrorKind::kInternal);
  }
  return static_cast<int>(ErrorKind::kConfig);
}

}  // namespace asformer::cli
