// Command-line front end: dependency-graph construction and export, synthetic
// data preparation, two-step training, schedule-driven inference, and metric
// reports. Every command is deterministic under a fixed --seed.

#include <CLI11.hpp>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "sar/checkpoint.hpp"
#include "sar/dataio.hpp"
#include "sar/depgraph.hpp"
#include "sar/inference.hpp"
#include "sar/metrics.hpp"
#include "sar/model.hpp"
#include "sar/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Values from an optional JSON config file act as defaults; explicit flags
// win because the config is applied before parsing.
json config_prepass(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    std::string path;
    if (arg == "--config" && i + 1 < argc)
      path = argv[i + 1];
    else if (arg.rfind("--config=", 0) == 0)
      path = arg.substr(9);
    if (path.empty()) continue;
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    return json::parse(in);
  }
  return json::object();
}

template <typename T>
void from_config(const json& cfg, const char* key, T& out) {
  if (cfg.contains(key)) out = cfg[key].get<T>();
}

sar::DependencyGraph build_graph(const std::string& kind, long frames,
                                 const std::vector<long>& keyframes) {
  if (kind == "ar") return sar::build_original_ar(frames);
  if (kind == "binary") return sar::build_binary_search(frames);
  if (kind == "three-stage") return sar::build_three_stage(frames, keyframes);
  throw CLI::ValidationError("--schedule must be one of ar|binary|three-stage");
}

std::vector<std::string> sorted_json_files(const std::string& dir) {
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".json")
      names.push_back(entry.path().filename().string());
  std::sort(names.begin(), names.end());
  return names;
}

std::string resolve_relative(const std::string& base_file, const std::string& path) {
  fs::path p(path);
  if (p.is_absolute()) return path;
  return (fs::path(base_file).parent_path() / p).string();
}

int cmd_graph(const std::string& action, const std::string& kind, long frames,
              const std::vector<long>& keyframes, const std::string& out_prefix) {
  const sar::DependencyGraph graph = build_graph(kind, frames, keyframes);
  const sar::DagValidation check = sar::validate_dag(graph);
  if (!check.ok) {
    std::cerr << "graph failed validation (cycle found)\n";
    return 1;
  }
  const sar::Schedule schedule = sar::topological_schedule(graph);
  if (action == "build") {
    sar::save_schedule(schedule, out_prefix + ".json");
    std::ofstream dot(out_prefix + ".dot");
    if (!dot) throw std::runtime_error("cannot write " + out_prefix + ".dot");
    dot << sar::export_dot(graph);
    std::cout << "schedule written to " << out_prefix << ".json and " << out_prefix << ".dot\n";
  } else {
    std::ofstream dot(out_prefix);
    if (!dot) throw std::runtime_error("cannot write " + out_prefix);
    dot << sar::export_dot(graph);
    std::cout << "graph written to " << out_prefix << "\n";
  }
  std::cout << "levels: " << schedule.levels.size() << "\n";
  std::cout << "order:";
  for (long t : schedule.order) std::cout << " " << t;
  std::cout << "\n";
  return 0;
}

int cmd_data_synth(const std::string& out_dir, long count, long joints, long length, double fps,
                   std::uint64_t seed, const std::vector<double>& ratios, long window,
                   long stride) {
  fs::create_directories(out_dir);
  const std::vector<sar::Motion> sources = sar::synth_generate(count, joints, length, fps, seed);
  const sar::DatasetSplit split =
      sar::split_dataset(count, {ratios[0], ratios[1], ratios[2]}, seed);
  std::vector<std::string> split_of(static_cast<size_t>(count));
  for (long i : split.train) split_of[static_cast<size_t>(i)] = "train";
  for (long i : split.val) split_of[static_cast<size_t>(i)] = "val";
  for (long i : split.test) split_of[static_cast<size_t>(i)] = "test";

  std::vector<sar::ManifestEntry> manifest;
  for (long i = 0; i < count; ++i) {
    char name[64];
    std::snprintf(name, sizeof(name), "seq_%04ld", i);
    if (window > 0) {
      const auto windows =
          sar::slice_windows(sources[static_cast<size_t>(i)], window, stride > 0 ? stride : window);
      for (size_t w = 0; w < windows.size(); ++w) {
        char wname[96];
        std::snprintf(wname, sizeof(wname), "%s_w%03zu.json", name, w);
        sar::save_motion(windows[w], out_dir + "/" + wname);
        manifest.push_back({wname, split_of[static_cast<size_t>(i)]});
      }
    } else {
      const std::string fname = std::string(name) + ".json";
      sar::save_motion(sources[static_cast<size_t>(i)], out_dir + "/" + fname);
      manifest.push_back({fname, split_of[static_cast<size_t>(i)]});
    }
  }
  sar::save_manifest(manifest, out_dir + "/manifest.json");
  std::cout << "wrote " << manifest.size() << " motions and manifest.json to " << out_dir << "\n";
  return 0;
}

int cmd_train(const std::string& data_path, const std::string& schedule_path,
              const std::string& config_path, const std::string& out_dir, long steps1,
              long steps2, double lr, std::uint64_t seed, long batch, long report_every) {
  for (const std::string& p : {data_path, schedule_path, config_path})
    if (!fs::exists(p)) {
      std::cerr << "missing file: " << p << "\n";
      return 1;
    }
  const sar::Schedule schedule = sar::load_schedule(schedule_path);
  const sar::ModelConfig model_cfg = sar::ModelConfig::load(config_path);
  if (model_cfg.positions != schedule.n_positions) {
    std::cerr << "model positions (" << model_cfg.positions << ") disagree with schedule ("
              << schedule.n_positions << ")\n";
    return 1;
  }

  std::vector<sar::Motion> train_set, val_set;
  for (const sar::ManifestEntry& e : sar::load_manifest(data_path)) {
    const std::string path = resolve_relative(data_path, e.path);
    if (e.split == "train")
      train_set.push_back(sar::load_motion(path));
    else if (e.split == "val")
      val_set.push_back(sar::load_motion(path));
  }
  if (train_set.empty()) {
    std::cerr << "manifest has no train entries: " << data_path << "\n";
    return 1;
  }

  fs::create_directories(out_dir);
  const sar::SarModel model(model_cfg);
  sar::ParamStore store = model.init_params(seed);

  sar::TrainConfig cfg;
  cfg.batch_size = batch;
  cfg.steps1 = steps1;
  cfg.steps2 = steps2;
  cfg.lr = lr;
  cfg.seed = seed;
  cfg.report_every = report_every;
  cfg.out_dir = out_dir;
  const sar::TrainResult result = sar::train(model, store, train_set, val_set, schedule, cfg);

  model_cfg.save(out_dir + "/config.json");
  sar::save_schedule(schedule, out_dir + "/schedule.json");
  std::cout << "final step-1 loss: " << result.final_step1_loss << "\n";
  if (steps2 > 0) std::cout << "final step-2 loss: " << result.final_step2_loss << "\n";
  std::cout << "checkpoints and losses.csv written to " << out_dir << "\n";
  return 0;
}

int cmd_infer(const std::string& method, const std::string& model_dir,
              const std::string& input_path, const std::string& out_path, long frames) {
  if (!fs::exists(input_path)) {
    std::cerr << "missing input motion: " << input_path << "\n";
    return 1;
  }
  const sar::Motion input = sar::load_motion(input_path);
  if (input.frame_count() < 2) {
    std::cerr << "input motion needs at least the two endpoint frames\n";
    return 1;
  }
  const sar::Pose start = input.frames.front();
  const sar::Pose end = input.frames.back();

  sar::Motion out;
  if (method == "slerp") {
    long t = frames;
    if (t <= 0) {
      if (input.frame_count() < 3) {
        std::cerr << "slerp needs --frames when the input has no interior\n";
        return 1;
      }
      t = input.frame_count() - 2;
    }
    out = sar::interpolate_slerp(start, end, t, input.fps);
  } else if (method == "sar" || method == "sar-nosmooth") {
    if (model_dir.empty()) {
      std::cerr << "--model is required for method " << method << "\n";
      return 1;
    }
    for (const char* f : {"/model.sarm", "/config.json", "/schedule.json"})
      if (!fs::exists(model_dir + f)) {
        std::cerr << "missing file: " << model_dir + f << "\n";
        return 1;
      }
    const sar::ModelConfig cfg = sar::ModelConfig::load(model_dir + "/config.json");
    const sar::Schedule schedule = sar::load_schedule(model_dir + "/schedule.json");
    if (cfg.positions != schedule.n_positions) {
      std::cerr << "checkpoint/schedule mismatch in " << model_dir << "\n";
      return 1;
    }
    if (input.joint_count() != cfg.joints) {
      std::cerr << "input joints (" << input.joint_count() << ") disagree with model ("
                << cfg.joints << ")\n";
      return 1;
    }
    if (input.frame_count() != 2 && input.frame_count() != cfg.positions) {
      std::cerr << "input must carry 2 frames or exactly " << cfg.positions << " frames\n";
      return 1;
    }
    const sar::SarModel model(cfg);
    const sar::ParamStore store = sar::load_params(model_dir + "/model.sarm");
    if (store.total_size() != model.param_count()) {
      std::cerr << "checkpoint does not match the model configuration\n";
      return 1;
    }
    const sar::Fdam fdam = sar::derive_fdam(schedule, schedule.n_positions);
    const sar::RowPredictor predict = sar::model_predictor(model, store);
    out = method == "sar"
              ? sar::run_schedule(start, end, predict, schedule, fdam, input.fps)
              : sar::run_without_smoothing(start, end, predict, schedule, fdam, input.fps);
  } else {
    throw CLI::ValidationError("--method must be one of sar|sar-nosmooth|slerp");
  }
  sar::save_motion(out, out_path);
  std::cout << "wrote " << out.frame_count() << " frames to " << out_path << "\n";
  return 0;
}

int cmd_eval(const std::string& gt_dir, const std::vector<std::string>& pred_specs,
             const std::string& skeleton_path, const std::string& out_path,
             const std::string& neighbor_space) {
  const std::vector<std::string> gt_files = sorted_json_files(gt_dir);
  if (gt_files.empty()) {
    std::cerr << "no ground-truth motions in " << gt_dir << "\n";
    return 1;
  }

  std::map<std::string, std::string> methods;  // name -> directory
  for (const std::string& spec : pred_specs) {
    const size_t eq = spec.find('=');
    if (eq == std::string::npos) {
      std::cerr << "prediction spec must look like name=dir: " << spec << "\n";
      return 1;
    }
    methods[spec.substr(0, eq)] = spec.substr(eq + 1);
  }

  // Every method must cover exactly the ground-truth sequence set.
  bool mismatched = false;
  for (const auto& [name, dir] : methods) {
    const std::vector<std::string> have = sorted_json_files(dir);
    std::vector<std::string> missing, extra;
    std::set_difference(gt_files.begin(), gt_files.end(), have.begin(), have.end(),
                        std::back_inserter(missing));
    std::set_difference(have.begin(), have.end(), gt_files.begin(), gt_files.end(),
                        std::back_inserter(extra));
    for (const std::string& f : missing)
      std::cerr << "method " << name << " is missing prediction " << f << "\n";
    for (const std::string& f : extra)
      std::cerr << "method " << name << " has extra prediction " << f << "\n";
    if (!missing.empty() || !extra.empty()) mismatched = true;
  }
  if (mismatched) return 1;

  const sar::NeighborSpace space = neighbor_space == "position"
                                       ? sar::NeighborSpace::Position
                                       : sar::NeighborSpace::Angle;

  // Interior frames of each ground-truth sequence are the comparison target.
  std::vector<sar::Motion> gt_interior;
  for (const std::string& f : gt_files) {
    const sar::Motion full = sar::load_motion(gt_dir + "/" + f);
    if (full.frame_count() < 3) {
      std::cerr << "ground truth " << f << " has no interior frames\n";
      return 1;
    }
    sar::Motion m;
    m.fps = full.fps;
    m.frames.assign(full.frames.begin() + 1, full.frames.end() - 1);
    gt_interior.push_back(std::move(m));
  }

  sar::Skeleton skeleton;
  if (!skeleton_path.empty())
    skeleton = sar::load_skeleton(skeleton_path);
  else
    skeleton = sar::Skeleton::chain(gt_interior.front().joint_count());

  std::ofstream csv(out_path);
  if (!csv) throw std::runtime_error("cannot write report: " + out_path);
  csv << "model,mpjae,mpjpe,neighbor_l2_gen,neighbor_l2_gt,neighbor_gap,npss\n";
  for (const auto& [name, dir] : methods) {
    double sum_mpjae = 0, sum_mpjpe = 0, sum_ngen = 0, sum_ngt = 0, sum_npss = 0;
    for (size_t i = 0; i < gt_files.size(); ++i) {
      const sar::Motion pred = sar::load_motion(dir + "/" + gt_files[i]);
      const sar::Motion& gt = gt_interior[i];
      if (pred.frame_count() != gt.frame_count() || pred.joint_count() != gt.joint_count()) {
        std::cerr << "method " << name << " prediction " << gt_files[i]
                  << " does not match the ground-truth interior shape\n";
        return 1;
      }
      sum_mpjae += sar::mpjae(pred, gt);
      sum_mpjpe += sar::mpjpe(pred, gt, skeleton);
      sum_ngen += sar::neighbor_l2(pred, space, &skeleton);
      sum_ngt += sar::neighbor_l2(gt, space, &skeleton);
      sum_npss += sar::npss(pred, gt);
    }
    const double n = static_cast<double>(gt_files.size());
    const double ngen = sum_ngen / n, ngt = sum_ngt / n;
    csv << name << "," << sum_mpjae / n << "," << sum_mpjpe / n << "," << ngen << "," << ngt
        << "," << std::fabs(ngen - ngt) << "," << sum_npss / n << "\n";
  }
  std::cout << "report written to " << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Shuffled-autoregression motion interpolation toolkit"};
  app.require_subcommand(1);

  json cfg;
  try {
    cfg = config_prepass(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::string config_path;
  app.add_option("--config", config_path, "JSON config file; flags take precedence");

  // graph
  auto* graph = app.add_subcommand("graph", "Build or export dependency graphs");
  std::string g_action = "build", g_kind, g_out = "graph";
  long g_frames = 0;
  std::vector<long> g_keyframes;
  from_config(cfg, "schedule", g_kind);
  from_config(cfg, "frames", g_frames);
  from_config(cfg, "keyframes", g_keyframes);
  graph->add_option("action", g_action, "build (schedule JSON + DOT) or export (DOT only)")
      ->check(CLI::IsMember({"build", "export"}));
  graph->add_option("--schedule", g_kind, "ar|binary|three-stage")->required();
  auto* g_frames_opt = graph->add_option("--frames", g_frames, "interior frame count T");
  if (g_frames == 0) g_frames_opt->required();
  graph->add_option("--keyframes", g_keyframes, "three-stage keyframes, e.g. 1,9,19,29")
      ->delimiter(',');
  graph->add_option("--out", g_out, "output prefix (build) or file (export)");
  graph->add_option("--config", config_path, "JSON config file");

  // data synth
  auto* data = app.add_subcommand("data", "Dataset preparation");
  auto* synth = data->add_subcommand("synth", "Generate seeded synthetic motions + manifest");
  std::string d_out;
  long d_count = 240, d_joints = 4, d_length = 31, d_window = 0, d_stride = 0;
  double d_fps = 30.0;
  std::uint64_t d_seed = 0;
  std::vector<double> d_ratios{0.7, 0.1, 0.2};
  from_config(cfg, "count", d_count);
  from_config(cfg, "joints", d_joints);
  from_config(cfg, "length", d_length);
  from_config(cfg, "fps", d_fps);
  synth->add_option("--out", d_out, "output directory")->required();
  synth->add_option("--count", d_count, "number of source sequences");
  synth->add_option("--joints", d_joints, "joints per pose");
  synth->add_option("--length", d_length, "frames per sequence");
  synth->add_option("--fps", d_fps, "frames per second");
  synth->add_option("--seed", d_seed, "generator seed");
  synth->add_option("--ratios", d_ratios, "train,val,test ratios")->delimiter(',')->expected(3);
  synth->add_option("--window", d_window, "slice windows of this length (0 = no slicing)");
  synth->add_option("--stride", d_stride, "window stride (default: window)");
  synth->add_option("--config", config_path, "JSON config file");

  // train
  auto* train = app.add_subcommand("train", "Two-step training");
  std::string t_data, t_schedule, t_config, t_out;
  long t_steps1 = 20000, t_steps2 = 5000, t_batch = 16, t_report = 100;
  double t_lr = 1e-4;
  std::uint64_t t_seed = 0;
  from_config(cfg, "steps1", t_steps1);
  from_config(cfg, "steps2", t_steps2);
  from_config(cfg, "batch", t_batch);
  from_config(cfg, "lr", t_lr);
  from_config(cfg, "seed", t_seed);
  from_config(cfg, "report-every", t_report);
  train->add_option("--data", t_data, "dataset manifest JSON")->required();
  train->add_option("--schedule", t_schedule, "schedule JSON from `graph build`")->required();
  train->add_option("--model-config", t_config, "model config JSON")->required();
  train->add_option("--out", t_out, "output directory")->required();
  train->add_option("--steps1", t_steps1, "teacher-forcing steps");
  train->add_option("--steps2", t_steps2, "smoothing finetune steps (0 = w/o smoothing model)");
  train->add_option("--lr", t_lr, "Adam learning rate");
  train->add_option("--seed", t_seed, "seed for init and batch sampling");
  train->add_option("--batch", t_batch, "batch size");
  train->add_option("--report-every", t_report, "loss report cadence");
  train->add_option("--config", config_path, "JSON config file");

  // infer
  auto* infer = app.add_subcommand("infer", "Generate interior frames between two endpoints");
  std::string i_method = "sar", i_model, i_input, i_out;
  long i_frames = 0;
  from_config(cfg, "method", i_method);
  infer->add_option("--method", i_method, "sar|sar-nosmooth|slerp");
  infer->add_option("--model", i_model, "model directory from `train`");
  infer->add_option("--input", i_input, "motion JSON; interior frames are discarded")->required();
  infer->add_option("--out", i_out, "output motion JSON")->required();
  infer->add_option("--frames", i_frames, "interior count for slerp with 2-frame input");
  infer->add_option("--config", config_path, "JSON config file");

  // eval
  auto* eval = app.add_subcommand("eval", "Metric report CSV over prediction directories");
  std::string e_gt, e_skeleton, e_out = "report.csv", e_space = "angle";
  std::vector<std::string> e_preds;
  eval->add_option("--gt", e_gt, "directory of ground-truth motions")->required();
  eval->add_option("--pred", e_preds, "method=dir of predicted interiors (repeatable)")
      ->required();
  eval->add_option("--skeleton", e_skeleton, "skeleton JSON (default: chain)");
  eval->add_option("--out", e_out, "report CSV path");
  eval->add_option("--neighbor-space", e_space, "angle|position")
      ->check(CLI::IsMember({"angle", "position"}));
  eval->add_option("--config", config_path, "JSON config file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (graph->parsed()) return cmd_graph(g_action, g_kind, g_frames, g_keyframes, g_out);
    if (synth->parsed())
      return cmd_data_synth(d_out, d_count, d_joints, d_length, d_fps, d_seed, d_ratios,
                            d_window, d_stride);
    if (data->parsed()) {
      std::cerr << "data: choose a subcommand (synth)\n";
      return 2;
    }
    if (train->parsed())
      return cmd_train(t_data, t_schedule, t_config, t_out, t_steps1, t_steps2, t_lr, t_seed,
                       t_batch, t_report);
    if (infer->parsed()) return cmd_infer(i_method, i_model, i_input, i_out, i_frames);
    if (eval->parsed()) return cmd_eval(e_gt, e_preds, e_skeleton, e_out, e_space);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
