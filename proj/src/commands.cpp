#include "sten/commands.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "sten/checkpoint.hpp"
#include "sten/errors.hpp"

namespace sten {

namespace {

namespace fs = std::filesystem;

void make_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << text;
  out.flush();
  if (!out) throw IoError("write failure on " + path);
}

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

}  // namespace

SynthResult cmd_gen_data(const GenDataArgs& args) {
  if (args.out_dir.empty()) throw UsageError("gen-data requires an output directory");
  args.synth.validate();
  SynthResult result = synth_generate(args.synth);

  make_dir(args.out_dir);
  const fs::path out(args.out_dir);
  write_tsv((out / "train.tsv").string(), result.train);
  write_tsv((out / "test.tsv").string(), result.test);

  std::ostringstream m;
  m << "command = gen-data\n";
  m << "seed = " << args.synth.seed << "\n";
  m << "n_users = " << args.synth.n_users << "\n";
  m << "n_items = " << args.synth.n_items << "\n";
  m << "n_categories = " << args.synth.n_categories << "\n";
  m << "n_train = " << args.synth.n_train << "\n";
  m << "n_test = " << args.synth.n_test << "\n";
  m << "base_ctr = " << fmt(args.synth.base_ctr) << "\n";
  m << "shuffle_periods = " << (args.synth.shuffle_periods ? 1 : 0) << "\n";
  m << "bias = " << fmt(result.bias) << "\n";
  m << "realized_ctr = " << fmt(result.realized_ctr) << "\n";
  m << "train_file = train.tsv\n";
  m << "test_file = test.tsv\n";
  write_text((out / "manifest.txt").string(), m.str());
  return result;
}

Ablation parse_ablation(const std::string& spec) {
  Ablation ab{false, false, false};
  std::istringstream is(spec);
  std::string name;
  while (std::getline(is, name, ',')) {
    if (name == "stpro") ab.stpro = true;
    else if (name == "stpre") ab.stpre = true;
    else if (name == "stta") ab.stta = true;
    else throw UsageError("unknown ablation name '" + name + "'; valid: stpro, stpre, stta");
  }
  return ab;
}

TrainResult cmd_train(const TrainArgs& args) {
  if (args.data_path.empty()) throw UsageError("train requires --data");
  if (args.out_dir.empty()) throw UsageError("train requires --out");
  if (args.baseline && !args.ablation.empty()) {
    throw UsageError("--baseline and --ablation are mutually exclusive");
  }

  RunConfig rc;
  if (!args.config_path.empty()) apply_config_file(rc, args.config_path);
  if (args.seed) rc.train.seed = *args.seed;
  if (args.total_steps) rc.train.total_steps = *args.total_steps;
  if (args.warmup_steps) rc.train.warmup_steps = *args.warmup_steps;
  if (args.batch_size) rc.train.batch_size = *args.batch_size;
  if (args.eval_interval) rc.train.eval_interval = *args.eval_interval;
  if (args.baseline) {
    rc.model.ablation = Ablation{false, false, false};
  } else if (!args.ablation.empty()) {
    rc.model.ablation = parse_ablation(args.ablation);
  }
  rc.validate();

  ParseResult data = parse_tsv(args.data_path);
  std::vector<Sample> val;
  if (!args.val_path.empty()) val = parse_tsv(args.val_path).samples;
  if (data.samples.size() < 2) {
    throw ConfigError(args.data_path + ": training needs at least 2 samples");
  }

  make_dir(args.out_dir);
  const fs::path out(args.out_dir);
  write_text((out / "config.txt").string(), run_config_text(rc));

  StENModel model(rc.model, rc.train.seed);
  TrainResult result;
  {
    std::ofstream metrics((out / "metrics.log").string(), std::ios::binary | std::ios::trunc);
    if (!metrics) throw IoError("cannot write " + (out / "metrics.log").string());
    result = train_loop(model, data.samples, val, rc.train, &metrics);
    if (!metrics) throw IoError("write failure on " + (out / "metrics.log").string());
  }
  save_checkpoint((out / "model.ckpt").string(), model);

  std::ostringstream m;
  m << "command = train\n";
  m << "data = " << args.data_path << "\n";
  if (!args.val_path.empty()) m << "val = " << args.val_path << "\n";
  m << "n_train_samples = " << data.samples.size() << "\n";
  m << "seed = " << rc.train.seed << "\n";
  m << "steps = " << result.steps << "\n";
  m << "final_loss = " << fmt(result.final_loss) << "\n";
  m << "ablation_stpro = " << (rc.model.ablation.stpro ? 1 : 0) << "\n";
  m << "ablation_stpre = " << (rc.model.ablation.stpre ? 1 : 0) << "\n";
  m << "ablation_stta = " << (rc.model.ablation.stta ? 1 : 0) << "\n";
  m << "checkpoint = model.ckpt\n";
  m << "metrics = metrics.log\n";
  write_text((out / "manifest.txt").string(), m.str());
  return result;
}

EvalReport cmd_eval(const EvalArgs& args) {
  StENModel model = load_checkpoint(args.checkpoint_path);
  ParseResult data = parse_tsv(args.data_path);
  EvalReport report = evaluate_model(model, data.samples);
  if (!args.base_checkpoint_path.empty()) {
    StENModel base = load_checkpoint(args.base_checkpoint_path);
    EvalReport base_report = evaluate_model(base, data.samples);
    report.relaimpr_vs_base = relaimpr(report.auc, base_report.auc);
  }
  return report;
}

void cmd_predict(const PredictArgs& args) {
  StENModel model = load_checkpoint(args.checkpoint_path);
  std::vector<Sample> samples = parse_tsv_strict(args.input_path);
  std::vector<double> scores = model.predict(samples);

  const std::string tmp = args.output_path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp);
    char buf[64];
    for (double s : scores) {
      std::snprintf(buf, sizeof(buf), "%.17g\n", s);
      out << buf;
    }
    out.flush();
    if (!out) throw IoError("write failure on " + tmp);
  }
  if (std::rename(tmp.c_str(), args.output_path.c_str()) != 0) {
    throw IoError("cannot move " + tmp + " to " + args.output_path);
  }
}

}  // namespace sten
