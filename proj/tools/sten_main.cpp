#include <cstdint>
#include <functional>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "sten/commands.hpp"
#include "sten/errors.hpp"
#include "sten/runtime.hpp"

namespace {

// Exit codes: 0 success, 1 usage, 2 I/O, 3 validation or runtime failure.
int dispatch(const std::function<void()>& body) {
  try {
    body();
    return 0;
  } catch (const sten::UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const sten::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const sten::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace

int main(int argc, char** argv) {
  sten::tune_allocator();
  CLI::App app{"Spatiotemporal CTR laboratory: data generation, training, evaluation, scoring"};
  app.require_subcommand(1);

  sten::GenDataArgs gen;
  CLI::App* cmd_gen = app.add_subcommand("gen-data", "Generate a synthetic impression log");
  cmd_gen->add_option("--out", gen.out_dir, "Output directory")->required();
  cmd_gen->add_option("--seed", gen.synth.seed, "Generator seed");
  cmd_gen->add_option("--n-train", gen.synth.n_train, "Training samples");
  cmd_gen->add_option("--n-test", gen.synth.n_test, "Test samples");
  cmd_gen->add_option("--n-users", gen.synth.n_users, "Simulated users");
  cmd_gen->add_option("--n-items", gen.synth.n_items, "Catalog size");
  cmd_gen->add_option("--n-categories", gen.synth.n_categories, "Category count");
  cmd_gen->add_option("--ctr", gen.synth.base_ctr, "Target mean click rate");
  cmd_gen->add_flag("--shuffle-periods", gen.synth.shuffle_periods,
                    "Randomize the period used for the label draw");

  sten::TrainArgs train;
  std::uint64_t train_seed = 0;
  std::size_t train_steps = 0, train_warmup = 0, train_batch = 0, train_eval_interval = 0;
  CLI::App* cmd_tr = app.add_subcommand("train", "Train a model variant");
  cmd_tr->add_option("--data", train.data_path, "Training TSV")->required();
  cmd_tr->add_option("--out", train.out_dir, "Run directory")->required();
  cmd_tr->add_option("--config", train.config_path, "key = value config file");
  cmd_tr->add_option("--val", train.val_path, "Held-out TSV for periodic eval");
  cmd_tr->add_flag("--baseline", train.baseline, "Train the shared-projection base model");
  cmd_tr->add_option("--ablation", train.ablation,
                     "Comma list of blocks to enable: stpro,stpre,stta");
  CLI::Option* o_seed = cmd_tr->add_option("--seed", train_seed, "Overrides config seed");
  CLI::Option* o_steps = cmd_tr->add_option("--steps", train_steps, "Overrides total_steps");
  CLI::Option* o_warm =
      cmd_tr->add_option("--warmup-steps", train_warmup, "Overrides warmup_steps");
  CLI::Option* o_batch = cmd_tr->add_option("--batch-size", train_batch, "Overrides batch_size");
  CLI::Option* o_ei =
      cmd_tr->add_option("--eval-interval", train_eval_interval, "Overrides eval_interval");

  sten::EvalArgs eval;
  CLI::App* cmd_ev = app.add_subcommand("eval", "Score a checkpoint against labeled data");
  cmd_ev->add_option("--checkpoint", eval.checkpoint_path, "Model checkpoint")->required();
  cmd_ev->add_option("--data", eval.data_path, "Labeled TSV")->required();
  cmd_ev->add_option("--base-checkpoint", eval.base_checkpoint_path,
                     "Reference checkpoint for relative improvement");

  sten::PredictArgs pred;
  CLI::App* cmd_pr = app.add_subcommand("predict", "Write one score per input line");
  cmd_pr->add_option("--checkpoint", pred.checkpoint_path, "Model checkpoint")->required();
  cmd_pr->add_option("--input", pred.input_path, "Input TSV")->required();
  cmd_pr->add_option("--output", pred.output_path, "Scores file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (cmd_gen->parsed()) {
    return dispatch([&] {
      sten::SynthResult r = sten::cmd_gen_data(gen);
      std::cout << "train = " << r.train.size() << " samples\n"
                << "test = " << r.test.size() << " samples\n"
                << "realized_ctr = " << r.realized_ctr << "\n";
    });
  }
  if (cmd_tr->parsed()) {
    if (o_seed->count() > 0) train.seed = train_seed;
    if (o_steps->count() > 0) train.total_steps = train_steps;
    if (o_warm->count() > 0) train.warmup_steps = train_warmup;
    if (o_batch->count() > 0) train.batch_size = train_batch;
    if (o_ei->count() > 0) train.eval_interval = train_eval_interval;
    return dispatch([&] {
      sten::TrainResult r = sten::cmd_train(train);
      std::cout << "steps = " << r.steps << "\n"
                << "final_loss = " << r.final_loss << "\n";
    });
  }
  if (cmd_ev->parsed()) {
    return dispatch([&] { std::cout << sten::cmd_eval(eval).to_text(); });
  }
  return dispatch([&] { sten::cmd_predict(pred); });
}
