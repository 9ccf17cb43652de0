// Command-line front end: data generation, training, canonicalization and
// landscape probes on checkpoint files, plus whole experiments from a config.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "symnet/datasets.hpp"
#include "symnet/experiment.hpp"
#include "symnet/geometry.hpp"
#include "symnet/io.hpp"
#include "symnet/probes.hpp"
#include "symnet/symmetry.hpp"
#include "symnet/training.hpp"

namespace fs = std::filesystem;
using namespace symnet;

namespace {

struct TrainFlags {
  int epochs = -1;
  int batch_size = -1;
  double lr = -1.0;
  double momentum = -1.0;
  bool nesterov = false;
  std::string schedule;
};

void add_train_flags(CLI::App* cmd, TrainFlags& f) {
  cmd->add_option("--epochs", f.epochs, "Training epochs");
  cmd->add_option("--batch-size", f.batch_size, "Minibatch size");
  cmd->add_option("--lr", f.lr, "Initial learning rate");
  cmd->add_option("--momentum", f.momentum, "Momentum coefficient");
  cmd->add_flag("--nesterov", f.nesterov, "Use Nesterov momentum");
  cmd->add_option("--schedule", f.schedule, "Learning-rate schedule")->check(CLI::IsMember({"cosine", "constant"}));
}

TrainConfig resolve_train(const TrainFlags& f, bool binary, const Dataset& data, std::uint64_t seed) {
  TrainConfig t;
  if (binary) {
    t.epochs = 200;
    t.batch_size = 100;
    t.lr0 = 1.0;
    t.schedule = Schedule::kConstant;
  } else {
    t.epochs = 300;
    t.batch_size = 128;
    t.lr0 = 0.02;
    t.momentum = 0.9;
    t.nesterov = true;
  }
  if (f.epochs >= 0) t.epochs = f.epochs;
  if (f.batch_size >= 0) t.batch_size = f.batch_size;
  if (f.lr >= 0.0) t.lr0 = f.lr;
  if (f.momentum >= 0.0) t.momentum = f.momentum;
  if (f.nesterov) t.nesterov = true;
  if (!f.schedule.empty()) t.schedule = schedule_from_string(f.schedule);
  t.loss = data.signed_labels ? LossKind::kBinaryCrossEntropy : LossKind::kCrossEntropy;
  t.seed = seed;
  t.validate();
  return t;
}

void print_scan(const PathScan& s) {
  std::cout << "mode " << to_string(s.mode) << " barrier " << format_number(barrier(s)) << "\n";
}

CsvTable scan_table(const PathScan& s, const std::string& label) {
  std::vector<std::string> header{"pair_id", "mode", "x", "train_error"};
  if (!s.loss.empty()) header.push_back("loss");
  CsvTable t(header);
  for (std::size_t k = 0; k < s.x.size(); ++k) {
    t.cell(label).cell(std::string(to_string(s.mode))).cell(s.x[k]).cell(s.train_error[k]);
    if (!s.loss.empty()) t.cell(s.loss[k]);
    t.end_row();
  }
  return t;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Symmetry removal and loss-landscape geometry for small networks"};
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  std::string out;

  // hmm-gen
  auto* gen = app.add_subcommand("hmm-gen", "Generate Hidden Manifold Model train/test datasets");
  HmmConfig hmm;
  gen->add_option("--D", hmm.D, "Teacher dimension");
  gen->add_option("--N", hmm.N, "Student input dimension");
  gen->add_option("--P", hmm.P, "Training patterns");
  gen->add_option("--P-test", hmm.P_test, "Test patterns");
  gen->add_option("--seed", seed, "Generator seed")->required();
  gen->add_option("--out", out, "Output directory (train.data, test.data)")->required();

  // train
  auto* train = app.add_subcommand("train", "Train one network and save a checkpoint");
  std::string data_path, test_path, algorithm = "sgd", arch = "perceptron";
  std::vector<int> hidden;
  bool binary = false, bias = false, keep_clean = false;
  TrainFlags tf;
  ReplicaConfig rep;
  AdvConfig adv;
  int pre_epochs = -1;
  double pre_lr = -1.0;
  train->add_option("--data", data_path, "Training dataset file")->required();
  train->add_option("--test", test_path, "Test dataset file");
  train->add_option("--algorithm", algorithm, "sgd | rsgd | adv")->check(CLI::IsMember({"sgd", "rsgd", "adv"}));
  train->add_option("--arch", arch, "perceptron | committee | mlp")->check(CLI::IsMember({"perceptron", "committee", "mlp"}));
  train->add_option("--hidden", hidden, "Hidden widths");
  train->add_flag("--binary", binary, "Binary weights");
  train->add_flag("--bias", bias, "Use biases");
  add_train_flags(train, tf);
  train->add_option("--replicas", rep.num_replicas, "RSGD replicas");
  train->add_option("--gamma0", rep.gamma0, "RSGD initial coupling");
  train->add_option("--gamma1", rep.gamma1, "RSGD coupling growth rate");
  train->add_option("--replication", adv.replication, "ADV label-randomized copies");
  train->add_option("--zero-fraction", adv.zero_pixel_fraction, "ADV fraction of zeroed inputs");
  train->add_flag("--keep-clean", keep_clean, "ADV: keep the clean copy in the poisoned set");
  train->add_option("--pretrain-epochs", pre_epochs, "ADV stage-1 epochs");
  train->add_option("--pretrain-lr", pre_lr, "ADV stage-1 learning rate");
  train->add_option("--seed", seed, "Seed")->required();
  train->add_option("--out", out, "Checkpoint path")->required();

  // normalize
  auto* norm = app.add_subcommand("normalize", "Normalize a continuous network onto the sphere product");
  std::string in_path;
  norm->add_option("--in", in_path, "Input checkpoint")->required();
  norm->add_option("--out", out, "Output checkpoint")->required();

  // align
  auto* al = app.add_subcommand("align", "Align a network onto a reference");
  std::string ref_path, plan_path;
  al->add_option("--ref", ref_path, "Reference checkpoint")->required();
  al->add_option("--in", in_path, "Checkpoint to permute")->required();
  al->add_option("--out", out, "Aligned checkpoint")->required();
  al->add_option("--plan", plan_path, "Write the permutation plan as JSON");

  // scan-path
  auto* sp = app.add_subcommand("scan-path", "Train error along a path between two networks");
  std::string a_path, b_path, mode = "geodesic-aligned";
  int points = 25;
  bool raw = false;
  sp->add_option("--a", a_path, "First endpoint")->required();
  sp->add_option("--b", b_path, "Second endpoint")->required();
  sp->add_option("--data", data_path, "Dataset file")->required();
  sp->add_option("--mode", mode, "Path mode")
      ->check(CLI::IsMember({"linear", "linear-aligned", "geodesic-aligned", "hamming"}));
  sp->add_option("--points", points, "Number of samples");
  sp->add_flag("--raw", raw, "Hamming mode: do not align before drawing the path");
  sp->add_option("--seed", seed, "Seed for random Hamming paths");
  sp->add_option("--out", out, "CSV output")->required();

  // scan-plane
  auto* pl = app.add_subcommand("scan-plane", "Train error on the plane through three networks");
  std::string c_path;
  PlaneOptions popt;
  bool align_anchors = false, binarized = false, normalized = false, no_reproject = false;
  pl->add_option("--a", a_path, "Anchor 1")->required();
  pl->add_option("--b", b_path, "Anchor 2")->required();
  pl->add_option("--c", c_path, "Anchor 3")->required();
  pl->add_option("--data", data_path, "Dataset file")->required();
  pl->add_option("--points", popt.resolution, "Grid points per axis");
  pl->add_option("--margin", popt.margin, "Margin around the anchors");
  pl->add_flag("--align", align_anchors, "Align anchors 2 and 3 onto anchor 1");
  pl->add_flag("--normalized", normalized, "Normalize anchors and re-project grid points");
  pl->add_flag("--no-reproject", no_reproject, "With --normalized: keep raw grid points");
  pl->add_flag("--binary", binarized, "Plane through latent weights, grid points binarized");
  pl->add_option("--out", out, "CSV output")->required();

  // local-energy
  auto* le = app.add_subcommand("local-energy", "Local energy profile of a network");
  std::string net_path;
  std::vector<double> amplitudes;
  int samples = 0;
  le->add_option("--net", net_path, "Checkpoint")->required();
  le->add_option("--data", data_path, "Dataset file")->required();
  le->add_option("--amplitudes", amplitudes, "Noise amplitudes");
  le->add_option("--samples", samples, "Draws per amplitude");
  le->add_option("--seed", seed, "Seed")->required();
  le->add_option("--out", out, "CSV output")->required();

  // distances
  auto* di = app.add_subcommand("distances", "Pairwise distances within and across solution groups");
  std::vector<std::string> groups;
  di->add_option("--group", groups, "label=ckpt1,ckpt2,... (repeatable)")->required();
  di->add_option("--out", out, "CSV output")->required();

  // optimize-midpoint
  auto* om = app.add_subcommand("optimize-midpoint", "Single-bend path through a trained midpoint");
  std::string mid_out;
  TrainFlags of;
  om->add_option("--a", a_path, "First endpoint")->required();
  om->add_option("--b", b_path, "Second endpoint")->required();
  om->add_option("--data", data_path, "Dataset file")->required();
  om->add_option("--points", points, "Samples per half path");
  add_train_flags(om, of);
  om->add_option("--seed", seed, "Seed")->required();
  om->add_option("--midpoint-out", mid_out, "Save the trained midpoint");
  om->add_option("--out", out, "CSV output")->required();

  // run
  auto* run = app.add_subcommand("run", "Run an experiment from a JSON config");
  std::string config_path;
  std::uint64_t seed_override = 0;
  run->add_option("config", config_path, "Experiment config")->required();
  auto* seed_opt = run->add_option("--seed", seed_override, "Override the master seed");
  run->add_option("--out", out, "Output directory (overrides output_dir)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*gen) {
      hmm.seed = seed;
      HmmData d = hmm_generate(hmm);
      nlohmann::json meta = {{"D", hmm.D}, {"N", hmm.N}, {"P", hmm.P}, {"P_test", hmm.P_test}, {"seed", seed}};
      save_dataset(d.train, fs::path(out) / "train.data", meta);
      save_dataset(d.test, fs::path(out) / "test.data", meta);
      std::cout << "wrote " << out << "/train.data and " << out << "/test.data\n";
    } else if (*train) {
      Dataset data = load_dataset(data_path);
      Network init;
      if (arch == "committee") {
        if (hidden.size() != 1) throw ConfigError("--arch committee needs exactly one --hidden width");
        init = make_committee(data.input_dim(), hidden.front());
      } else {
        if (arch == "perceptron" && !hidden.empty()) throw ConfigError("a perceptron has no hidden layer");
        if (arch == "mlp" && hidden.empty()) throw ConfigError("--arch mlp needs --hidden widths");
        std::vector<int> widths{data.input_dim()};
        widths.insert(widths.end(), hidden.begin(), hidden.end());
        widths.push_back(data.signed_labels ? 1 : data.num_classes);
        init = make_mlp(widths, binary || arch == "perceptron", bias);
      }
      Rng rng(mix_seed(seed, 1));
      initialize(init, rng);
      Dataset test;
      if (!test_path.empty()) test = load_dataset(test_path);
      const Dataset* test_ptr = test_path.empty() ? nullptr : &test;
      TrainConfig t = resolve_train(tf, init.is_binary(), data, mix_seed(seed, 2));
      TrainResult res;
      if (algorithm == "sgd") {
        res = sgd_train(init, data, t, test_ptr);
      } else if (algorithm == "rsgd") {
        res = rsgd_train(init, data, t, rep, test_ptr);
      } else {
        adv.keep_clean_copy = keep_clean;
        adv.pretrain = t;
        if (pre_epochs >= 0) adv.pretrain.epochs = pre_epochs;
        if (pre_lr > 0.0) adv.pretrain.lr0 = pre_lr;
        adv.finetune = t;
        adv.finetune.seed = mix_seed(seed, 3);
        res = adv_init_train(init, data, adv, mix_seed(seed, 4), test_ptr);
      }
      CheckpointInfo info;
      info.seed_lineage = {seed, t.seed};
      info.metadata = {{"algorithm", algorithm}, {"train", to_json(t)}, {"train_error", res.final_train_error}};
      save_checkpoint(res.net, out, info);
      std::cout << "train_error " << format_number(res.final_train_error);
      if (test_ptr) std::cout << " test_error " << format_number(train_error(res.net, test));
      std::cout << "\n";
    } else if (*norm) {
      LoadedCheckpoint ck = load_checkpoint(in_path);
      ck.info.metadata["normalized"] = true;
      save_checkpoint(normalize(ck.net), out, ck.info);
    } else if (*al) {
      LoadedCheckpoint ref = load_checkpoint(ref_path);
      LoadedCheckpoint ck = load_checkpoint(in_path);
      AlignResult r = align(ref.net, ck.net, false);
      ck.info.metadata["aligned_to"] = ref_path;
      save_checkpoint(r.net, out, ck.info);
      if (!plan_path.empty())
        write_file(plan_path, nlohmann::json{{"perm", r.plan.perm}, {"signs", r.plan.signs}}.dump(2) + "\n");
    } else if (*sp) {
      Network a = load_checkpoint(a_path).net;
      Network b = load_checkpoint(b_path).net;
      Dataset data = load_dataset(data_path);
      PathOptions opts;
      opts.points = points;
      opts.seed = seed;
      opts.align_hamming = !raw;
      PathScan s = path_scan(a, b, data, path_mode_from_string(mode), opts);
      scan_table(s, "0").write(out);
      print_scan(s);
    } else if (*pl) {
      std::vector<Network> anchors;
      for (const auto& p : {a_path, b_path, c_path}) anchors.push_back(load_checkpoint(p).net);
      Dataset data = load_dataset(data_path);
      popt.normalized = normalized;
      popt.reproject = !no_reproject;
      popt.binarized = binarized;
      if (normalized)
        for (auto& n : anchors) n = normalize(n);
      if (align_anchors)
        for (int i = 1; i < 3; ++i) anchors[i] = align(anchors[0], anchors[i], normalized).net;
      PlaneGrid g = plane_scan(anchors[0], anchors[1], anchors[2], data, popt);
      CsvTable t({"i", "j", "u", "v", "train_error"});
      for (std::size_t i = 0; i < g.us.size(); ++i)
        for (std::size_t j = 0; j < g.vs.size(); ++j)
          t.cell(i).cell(j).cell(g.us[i]).cell(g.vs[j]).cell(g.errors(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))).end_row();
      t.write(out);
    } else if (*le) {
      Network net = load_checkpoint(net_path).net;
      Dataset data = load_dataset(data_path);
      if (amplitudes.empty()) amplitudes = default_amplitudes(net.is_binary());
      if (samples == 0) samples = default_energy_samples(net.is_binary());
      LocalEnergyProfile p = local_energy(net, data, amplitudes, samples, seed);
      CsvTable t({"algorithm", "amplitude", "mean_dE", "std_dE", "samples"});
      for (std::size_t i = 0; i < p.amplitudes.size(); ++i)
        t.cell(fs::path(net_path).stem().string()).cell(p.amplitudes[i]).cell(p.mean[i]).cell(p.stddev[i]).cell(p.samples).end_row();
      t.write(out);
    } else if (*di) {
      std::vector<SolutionGroup> gs;
      for (const auto& spec : groups) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos) throw ConfigError("--group expects label=ckpt1,ckpt2,...");
        SolutionGroup g{spec.substr(0, eq), {}};
        std::string rest = spec.substr(eq + 1);
        std::size_t start = 0;
        while (start <= rest.size()) {
          const auto comma = rest.find(',', start);
          const std::string item = rest.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
          if (!item.empty()) g.nets.push_back(load_checkpoint(item).net);
          if (comma == std::string::npos) break;
          start = comma + 1;
        }
        gs.push_back(std::move(g));
      }
      CsvTable t({"group_a", "group_b", "raw_mean", "raw_std", "aligned_mean", "aligned_std", "pairs"});
      for (const auto& r : distance_study(gs))
        t.cell(r.group_a).cell(r.group_b).cell(r.raw_mean).cell(r.raw_std).cell(r.aligned_mean).cell(r.aligned_std).cell(r.pairs).end_row();
      t.write(out);
    } else if (*om) {
      Network a = load_checkpoint(a_path).net;
      Network b = load_checkpoint(b_path).net;
      Dataset data = load_dataset(data_path);
      PathOptions opts;
      opts.points = points;
      opts.seed = seed;
      TrainConfig t = resolve_train(of, a.is_binary(), data, mix_seed(seed, 7));
      OptimizedPath o = optimized_path(a, b, data, t, opts);
      CsvTable csv({"half", "x", "train_error"});
      for (int h = 0; h < 2; ++h) {
        const PathScan& s = h == 0 ? o.first : o.second;
        for (std::size_t k = 0; k < s.x.size(); ++k) csv.cell(h).cell(s.x[k]).cell(s.train_error[k]).end_row();
      }
      csv.write(out);
      if (!mid_out.empty()) {
        CheckpointInfo info;
        info.seed_lineage = {seed, t.seed};
        info.metadata = {{"midpoint_init", o.midpoint_init}, {"train_error", o.midpoint_error}};
        save_checkpoint(o.midpoint, mid_out, info);
      }
      std::cout << "barrier " << format_number(o.barrier) << " midpoint_error " << format_number(o.midpoint_error)
                << " midpoint_init " << o.midpoint_init << "\n";
    } else if (*run) {
      ExperimentConfig cfg = parse_experiment_config(load_json(config_path));
      if (seed_opt->count() > 0) cfg.seed = seed_override;
      ExperimentOutput res = run_experiment(cfg, out);
      std::cout << "wrote " << res.dir.string() << "/manifest.json\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return 0;
}
