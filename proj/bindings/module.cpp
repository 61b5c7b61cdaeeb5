#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

#include "sten/commands.hpp"
#include "sten/eval.hpp"
#include "sten/features.hpp"
#include "sten/geo.hpp"

namespace py = pybind11;

namespace {

py::dict report_to_dict(const sten::EvalReport& r) {
  py::dict d;
  d["auc"] = r.auc;
  d["logloss"] = r.logloss;
  d["n_pos"] = r.n_pos;
  d["n_neg"] = r.n_neg;
  if (r.relaimpr_vs_base) d["relaimpr_vs_base"] = *r.relaimpr_vs_base;
  return d;
}

}  // namespace

PYBIND11_MODULE(_sten, m) {
  m.doc() = "Spatiotemporal CTR laboratory";

  m.def("geohash_encode", &sten::geohash_encode, py::arg("lat"), py::arg("lon"),
        py::arg("len") = 6);
  m.def(
      "period_of_day",
      [](int hour) { return static_cast<int>(sten::period_of_day(hour)); }, py::arg("hour"));
  m.def(
      "period_name",
      [](int period) { return std::string(sten::period_name(static_cast<sten::Period>(period))); },
      py::arg("period"));
  m.def("hash_feature", &sten::hash_feature, py::arg("field"), py::arg("value"),
        py::arg("table_size") = 10007);

  m.def(
      "auc",
      [](const std::vector<double>& scores, const std::vector<int>& labels) {
        return sten::auc(scores, labels);
      },
      py::arg("scores"), py::arg("labels"));
  m.def("relaimpr", &sten::relaimpr, py::arg("auc_model"), py::arg("auc_base"));
  m.def(
      "logloss",
      [](const std::vector<double>& scores, const std::vector<int>& labels) {
        return sten::logloss_metric(scores, labels);
      },
      py::arg("scores"), py::arg("labels"));

  m.def(
      "gen_data",
      [](const std::string& out_dir, std::uint64_t seed, std::size_t n_train, std::size_t n_test,
         std::size_t n_users, std::size_t n_items, double ctr, bool shuffle_periods) {
        sten::GenDataArgs args;
        args.out_dir = out_dir;
        args.synth.seed = seed;
        args.synth.n_train = n_train;
        args.synth.n_test = n_test;
        args.synth.n_users = n_users;
        args.synth.n_items = n_items;
        args.synth.base_ctr = ctr;
        args.synth.shuffle_periods = shuffle_periods;
        sten::SynthResult r = sten::cmd_gen_data(args);
        py::dict d;
        d["n_train"] = r.train.size();
        d["n_test"] = r.test.size();
        d["realized_ctr"] = r.realized_ctr;
        return d;
      },
      py::arg("out_dir"), py::arg("seed") = 7, py::arg("n_train") = 50000,
      py::arg("n_test") = 10000, py::arg("n_users") = 2000, py::arg("n_items") = 5000,
      py::arg("ctr") = 0.1, py::arg("shuffle_periods") = false);

  m.def(
      "train",
      [](const std::string& data, const std::string& out, const std::string& config,
         const std::string& val, bool baseline, const std::string& ablation,
         std::optional<std::uint64_t> seed, std::optional<std::size_t> steps,
         std::optional<std::size_t> warmup_steps, std::optional<std::size_t> batch_size,
         std::optional<std::size_t> eval_interval) {
        sten::TrainArgs args;
        args.data_path = data;
        args.out_dir = out;
        args.config_path = config;
        args.val_path = val;
        args.baseline = baseline;
        args.ablation = ablation;
        args.seed = seed;
        args.total_steps = steps;
        args.warmup_steps = warmup_steps;
        args.batch_size = batch_size;
        args.eval_interval = eval_interval;
        sten::TrainResult r = sten::cmd_train(args);
        py::dict d;
        d["steps"] = r.steps;
        d["final_loss"] = r.final_loss;
        return d;
      },
      py::arg("data"), py::arg("out"), py::arg("config") = "", py::arg("val") = "",
      py::arg("baseline") = false, py::arg("ablation") = "", py::arg("seed") = std::nullopt,
      py::arg("steps") = std::nullopt, py::arg("warmup_steps") = std::nullopt,
      py::arg("batch_size") = std::nullopt, py::arg("eval_interval") = std::nullopt);

  m.def(
      "evaluate",
      [](const std::string& checkpoint, const std::string& data,
         const std::string& base_checkpoint) {
        sten::EvalArgs args;
        args.checkpoint_path = checkpoint;
        args.data_path = data;
        args.base_checkpoint_path = base_checkpoint;
        return report_to_dict(sten::cmd_eval(args));
      },
      py::arg("checkpoint"), py::arg("data"), py::arg("base_checkpoint") = "");

  m.def(
      "predict",
      [](const std::string& checkpoint, const std::string& input, const std::string& output) {
        sten::cmd_predict({checkpoint, input, output});
      },
      py::arg("checkpoint"), py::arg("input"), py::arg("output"));
}
