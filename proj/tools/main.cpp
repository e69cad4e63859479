// Copyright 2026 The hovsyn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <CLI11.hpp>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include "hovsyn/ccv_space.hpp"
#include "hovsyn/grasp_forge.hpp"
#include "hovsyn/loop_harness.hpp"
#include "hovsyn/mesh.hpp"
#include "hovsyn/pose_eval.hpp"
#include "hovsyn/scene_synthesis.hpp"
#include "hovsyn/serialization.hpp"

namespace {

using namespace hovsyn;

struct GlobalOpts {
  std::uint64_t seed = 0;
  int threads = 1;
  std::string config_path;

  FlatConfig config;

  void load_config() {
    if (!config_path.empty()) config = FlatConfig::parse_file(config_path);
  }
};

// Flags mirror config-file keys; an explicitly passed flag wins.
double pick(const CLI::Option* opt, double flag_value, const FlatConfig& cfg,
            const std::string& key, double fallback) {
  if (opt != nullptr && opt->count() > 0) return flag_value;
  return cfg.get_double(key, fallback);
}

long long pick(const CLI::Option* opt, long long flag_value, const FlatConfig& cfg,
               const std::string& key, long long fallback) {
  if (opt != nullptr && opt->count() > 0) return flag_value;
  return cfg.get_int(key, fallback);
}

int cmd_grasp_gen(const GlobalOpts& global, const std::string& mesh_path, long long target,
                  const std::string& out_path, const CLI::Option* target_opt,
                  double offset, const CLI::Option* offset_opt, long long sites,
                  const CLI::Option* sites_opt, double budget_factor,
                  const CLI::Option* budget_opt) {
  global.config.require_known({"seed", "threads", "target", "offset", "sites", "budget_factor"});
  GraspForgeConfig cfg;
  cfg.offset = pick(offset_opt, offset, global.config, "offset", cfg.offset);
  cfg.n_sites = static_cast<int>(pick(sites_opt, sites, global.config, "sites",
                                      static_cast<long long>(cfg.n_sites)));
  cfg.budget_factor = pick(budget_opt, budget_factor, global.config, "budget_factor", cfg.budget_factor);
  cfg.threads = global.threads;
  const long long target_count =
      pick(target_opt, target, global.config, "target", static_cast<long long>(100));

  const ObjectModel object = load_obj(mesh_path);
  Rng rng = Rng(global.seed).derive("grasp-gen").derive(object.id());
  const GenerationResult result = generate_poses(object, static_cast<int>(target_count), cfg, rng);
  write_grasps(result.candidates, out_path);

  std::cout << "object " << object.id() << ": accepted " << result.stats.accepted << " of "
            << result.stats.attempts << " attempts\n";
  for (const auto& [reason, count] : result.stats.rejections)
    std::cout << "  rejected " << reason << ": " << count << '\n';
  return 0;
}

int cmd_build_space(const GlobalOpts& global, const std::vector<std::string>& grasp_files,
                    std::pair<int, int> grid, const std::string& manifest_path,
                    const std::string& weights_path) {
  global.config.require_known({"seed", "threads"});
  if (grasp_files.empty()) throw ConfigError("need at least one grasp file");

  std::size_t n_poses = 0;
  for (std::size_t i = 0; i < grasp_files.size(); ++i) {
    const auto grasps = read_grasps(grasp_files[i]);
    if (i == 0) n_poses = grasps.size();
    if (grasps.empty() || grasps.size() != n_poses)
      throw ConfigError("grasp file " + grasp_files[i] + " holds " +
                        std::to_string(grasps.size()) + " poses, expected " +
                        std::to_string(n_poses));
  }

  const CCVSpace space = build_space(grasp_files.size(), n_poses, grid);
  SpaceManifest manifest;
  manifest.dims = space.dims();
  manifest.grid = grid;
  manifest.grasp_files = grasp_files;
  manifest.weight_snapshot = weights_path;
  write_manifest(manifest, manifest_path);
  save_weight_snapshot(WeightMap(space.dims()), weights_path);

  std::cout << "space " << manifest.dims.n_objects << " x " << manifest.dims.n_poses << " x "
            << manifest.dims.n_viewpoints << " = " << manifest.dims.total() << " triplets\n";
  return 0;
}

CCVSpace load_space(const SpaceManifest& manifest) {
  CCVSpace space =
      build_space(manifest.dims.n_objects, manifest.dims.n_poses, manifest.grid);
  for (std::size_t i = 0; i < manifest.grasp_files.size(); ++i)
    space.attach_poses(static_cast<std::uint32_t>(i), read_grasps(manifest.grasp_files[i]));
  return space;
}

int cmd_sample(const GlobalOpts& global, const std::string& manifest_path, long long n,
               const std::string& out_path, const std::string& weights_override) {
  global.config.require_known({"seed", "threads", "n"});
  const SpaceManifest manifest = read_manifest(manifest_path);
  const std::string snapshot =
      weights_override.empty() ? manifest.weight_snapshot : weights_override;
  const WeightMap map = load_weight_snapshot(snapshot);
  if (!(map.dims() == manifest.dims)) throw ConfigError("weight snapshot dims do not match manifest");

  Rng rng = Rng(global.seed).derive("sample");
  const auto triplets = sample_triplets(map, static_cast<std::uint64_t>(n), rng);
  std::ofstream out(out_path);
  if (!out) throw IoError("cannot write triplet file: " + out_path);
  for (const auto& t : triplets) {
    out << Json{{"o", t.object_id}, {"p", t.pose_id}, {"v", t.viewpoint_id}}.dump() << '\n';
  }
  std::cout << "sampled " << triplets.size() << " triplets\n";
  return 0;
}

int cmd_synth(const GlobalOpts& global, const std::string& manifest_path,
              const std::vector<std::string>& mesh_paths, long long n,
              const std::string& out_path) {
  global.config.require_known({"seed", "threads", "n"});
  const SpaceManifest manifest = read_manifest(manifest_path);
  if (mesh_paths.size() != manifest.dims.n_objects)
    throw ConfigError("need one mesh per object (" + std::to_string(manifest.dims.n_objects) + ")");
  const CCVSpace space = load_space(manifest);
  std::vector<ObjectModel> objects;
  objects.reserve(mesh_paths.size());
  for (const auto& path : mesh_paths) objects.push_back(load_obj(path));

  const WeightMap map = load_weight_snapshot(manifest.weight_snapshot);
  Rng rng = Rng(global.seed).derive("synth");
  const auto triplets = sample_triplets(map, static_cast<std::uint64_t>(n), rng);

  SynthesisConfig cfg;
  std::vector<SceneDescriptor> scenes;
  long failures = 0;
  for (const auto& t : triplets) {
    try {
      scenes.push_back(synthesize(t, space, objects, cfg, global.seed));
    } catch (const SynthError&) {
      ++failures;
    }
  }
  write_scenes(scenes, out_path);
  std::cout << "synthesized " << scenes.size() << " scenes";
  if (failures > 0) std::cout << " (" << failures << " dropped after mitigation failure)";
  std::cout << '\n';
  return 0;
}

int cmd_loop(const GlobalOpts& global, const std::string& csv_path,
             const std::string& online_map_path, const std::string& uniform_map_path) {
  global.config.require_known({"seed", "threads", "epochs", "samples", "batch_size", "ratio",
                               "online", "seeds", "objects", "poses", "grid_u", "grid_phi",
                               "learn_rate", "noise_sigma", "base_log_mean", "base_log_sigma",
                               "target_error", "real_pool_size"});
  const FlatConfig& cfg = global.config;

  ExperimentConfig exp;
  exp.dims.n_objects = static_cast<std::uint64_t>(cfg.get_int("objects", 4));
  exp.dims.n_poses = static_cast<std::uint64_t>(cfg.get_int("poses", 25));
  exp.dims.n_viewpoints = static_cast<std::uint64_t>(cfg.get_int("grid_u", 2)) *
                          static_cast<std::uint64_t>(cfg.get_int("grid_phi", 12));
  exp.epochs = static_cast<int>(cfg.get_int("epochs", 50));
  exp.epoch.samples = static_cast<std::uint64_t>(cfg.get_int("samples", 256));
  exp.epoch.batch_size = static_cast<std::uint64_t>(cfg.get_int("batch_size", 64));
  exp.epoch.ratio = cfg.get_double("ratio", 1.0);
  exp.epoch.real_pool_size = static_cast<std::uint64_t>(cfg.get_int("real_pool_size", 4096));
  exp.online_enabled = cfg.get_bool("online", true);
  exp.learner.learn_rate = cfg.get_double("learn_rate", 0.05);
  exp.learner.noise_sigma = cfg.get_double("noise_sigma", -1.0);
  exp.learner.base_log_mean = cfg.get_double("base_log_mean", std::log(0.02));
  exp.learner.base_log_sigma = cfg.get_double("base_log_sigma", 0.75);
  exp.target_error = cfg.get_double("target_error", 0.01);

  std::vector<std::uint64_t> seeds = cfg.get_u64_list("seeds");
  if (seeds.empty()) {
    for (std::uint64_t s = 0; s < 8; ++s) seeds.push_back(global.seed + 1 + s);
  }

  const ExperimentReport report = run_experiment(exp, seeds);

  std::ofstream out(csv_path);
  if (!out) throw IoError("cannot write curve CSV: " + csv_path);
  out << "seed,scheme,epoch,mean_error\n";
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    for (int e = 0; e < exp.epochs; ++e) {
      out << seeds[s] << ",online," << e << ','
          << csv_double(report.online_curves[s][static_cast<std::size_t>(e)]) << '\n';
    }
    for (int e = 0; e < exp.epochs; ++e) {
      out << seeds[s] << ",uniform," << e << ','
          << csv_double(report.uniform_curves[s][static_cast<std::size_t>(e)]) << '\n';
    }
  }
  if (!online_map_path.empty()) save_weight_snapshot(*report.online_final_map, online_map_path);
  if (!uniform_map_path.empty()) save_weight_snapshot(*report.uniform_final_map, uniform_map_path);

  std::cout << "final mean error: online " << report.online_mean.back() << ", uniform "
            << report.uniform_mean.back() << " (sign-test p = " << report.sign_test_p << ")\n";
  return 0;
}

int cmd_eval(const GlobalOpts& global, const std::string& pred_path, const std::string& gt_path,
             const std::string& mesh_path, const std::string& symset_path,
             const std::string& mode, const std::string& out_path) {
  global.config.require_known({"seed", "threads"});
  if (mode != "mpcpe" && mode != "sym") throw ConfigError("mode must be 'mpcpe' or 'sym'");

  const auto preds = read_eval_records(pred_path);
  const auto gts = read_eval_records(gt_path);
  std::map<std::string, const EvalRecord*> gt_by_id;
  for (const auto& g : gts) gt_by_id[g.id] = &g;

  std::vector<std::string> orphans;
  for (const auto& p : preds) {
    if (!gt_by_id.count(p.id)) orphans.push_back(p.id);
  }
  if (preds.size() != gts.size() || !orphans.empty()) {
    std::set<std::string> pred_ids;
    for (const auto& p : preds) pred_ids.insert(p.id);
    for (const auto& g : gts) {
      if (!pred_ids.count(g.id)) orphans.push_back(g.id);
    }
    std::cerr << "record id mismatch; orphans:";
    for (const auto& id : orphans) std::cerr << ' ' << id;
    std::cerr << '\n';
    return 1;
  }

  const ObjectModel object = load_obj(mesh_path);
  SymmetrySet sym = SymmetrySet::identity_only();
  if (!symset_path.empty()) sym = read_symmetry_set(symset_path);

  const double l1 = mode == "mpcpe" ? 1.0 : 0.0;
  const double l2 = mode == "mpcpe" ? 1.0 : 0.0;
  const double l3 = mode == "mpcpe" ? 0.0 : 1.0;
  const Vec3 view_dir(0, 0, 1);  // camera-frame records: optical axis

  std::ofstream out(out_path);
  if (!out) throw IoError("cannot write metrics CSV: " + out_path);
  out << "id,mpjpe,mpcpe,mssd,loss_loc,loss_cor,loss_ord,loss_sym,loss_total\n";

  double sum_mpjpe = 0, sum_mpcpe = 0, sum_mssd = 0;
  for (const auto& p : preds) {
    const EvalRecord& g = *gt_by_id.at(p.id);

    std::array<Vec3, 8> pred_corners, gt_corners;
    const Mat3 pr = so3_exp(p.obj_r), gr = so3_exp(g.obj_r);
    for (int i = 0; i < 8; ++i) {
      pred_corners[static_cast<std::size_t>(i)] = pr * object.corners()[static_cast<std::size_t>(i)] + p.obj_t;
      gt_corners[static_cast<std::size_t>(i)] = gr * object.corners()[static_cast<std::size_t>(i)] + g.obj_t;
    }
    std::vector<Vec3> pred22(p.hand.begin(), p.hand.end());
    pred22.push_back(p.obj_t);
    std::vector<Vec3> gt22(g.hand.begin(), g.hand.end());
    gt22.push_back(g.obj_t);

    const double v_mpjpe = mpjpe(p.hand, g.hand);
    const double v_mpcpe = mpcpe(pred_corners, gt_corners);
    const double v_mssd = mssd({pr, p.obj_t}, {gr, g.obj_t}, sym, object.vertices());
    const double v_loc = loss_loc(pred22, gt22);
    const double v_cor = loss_cor(p.obj_r, object.corners(), gt_corners);
    const auto relations = ord_relations(g.hand, gt_corners, view_dir);
    const double v_ord = loss_ord(p.hand, pred_corners, relations, view_dir);
    const double v_sym = loss_sym(p.obj_r, g.obj_r, sym, object.corners());
    const LossBundle bundle = loss_total(v_loc, v_cor, v_ord, v_sym, l1, l2, l3);

    out << p.id << ',' << csv_double(v_mpjpe) << ',' << csv_double(v_mpcpe) << ','
        << csv_double(v_mssd) << ',' << csv_double(bundle.loc) << ',' << csv_double(bundle.cor)
        << ',' << csv_double(bundle.ord) << ',' << csv_double(bundle.sym) << ','
        << csv_double(bundle.total) << '\n';
    sum_mpjpe += v_mpjpe;
    sum_mpcpe += v_mpcpe;
    sum_mssd += v_mssd;
  }
  const double n = static_cast<double>(preds.size());
  out << "mean," << csv_double(sum_mpjpe / n) << ',' << csv_double(sum_mpcpe / n) << ','
      << csv_double(sum_mssd / n) << ",,,,,\n";
  std::cout << "evaluated " << preds.size() << " records\n";
  return 0;
}

int cmd_symset(const GlobalOpts& global, const std::string& mesh_path, const std::string& spec_path,
               const std::string& out_path, long long steps, long long icp_iters) {
  global.config.require_known({"seed", "threads", "steps", "icp_iters"});
  const ObjectModel object = load_obj(mesh_path);

  std::ifstream spec_in(spec_path);
  if (!spec_in) throw IoError("cannot open symmetry spec: " + spec_path);
  const auto specs = parse_symmetry_table(spec_in);
  const SymmetrySpec* selected = nullptr;
  for (const auto& s : specs) {
    if (s.object_id == object.id()) selected = &s;
  }
  if (selected == nullptr && specs.size() == 1) selected = &specs.front();
  if (selected == nullptr)
    throw ConfigError("no symmetry table row matches object '" + object.id() + "'");

  const SymmetrySet set =
      symmetry_set(object, *selected, static_cast<int>(steps), static_cast<int>(icp_iters));
  write_symmetry_set(set, object.id(), out_path);
  std::cout << "symmetry set for " << object.id() << ": " << set.rotations.size() << " rotations";
  if (!set.warnings.empty()) std::cout << " (" << set.warnings.size() << " dropped)";
  std::cout << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hand-object-viewpoint exploration and synthesis engine"};
  app.require_subcommand(1);

  GlobalOpts global;
  app.add_option("--seed", global.seed, "master seed; all randomness derives from it");
  app.add_option("--threads", global.threads, "worker thread cap");
  app.add_option("--config", global.config_path, "flat key=value config file");

  // grasp-gen
  auto* grasp_gen = app.add_subcommand("grasp-gen", "synthesize grasp candidates for a mesh");
  std::string gg_mesh, gg_out;
  long long gg_target = 100, gg_sites = 64;
  double gg_offset = 0.08, gg_budget = 3.0;
  grasp_gen->add_option("--mesh", gg_mesh, "object OBJ file")->required();
  auto* gg_target_opt = grasp_gen->add_option("--target", gg_target, "accepted poses wanted");
  grasp_gen->add_option("--out", gg_out, "output grasp JSONL")->required();
  auto* gg_offset_opt = grasp_gen->add_option("--offset", gg_offset, "wrist offset distance, m");
  auto* gg_sites_opt = grasp_gen->add_option("--sites", gg_sites, "wrist sites on the offset surface");
  auto* gg_budget_opt = grasp_gen->add_option("--budget-factor", gg_budget, "attempt budget / target");

  // build-space
  auto* build = app.add_subcommand("build-space", "assemble a sampling space manifest");
  std::vector<std::string> bs_grasps;
  std::vector<int> bs_grid = {12, 24};
  std::string bs_manifest, bs_weights;
  build->add_option("--grasps", bs_grasps, "grasp JSONL files, one per object")->required();
  build->add_option("--grid", bs_grid, "viewpoint grid: N_u N_phi")->expected(2);
  build->add_option("--out", bs_manifest, "manifest JSON path")->required();
  build->add_option("--weights", bs_weights, "uniform weight snapshot path")->required();

  // sample
  auto* sample = app.add_subcommand("sample", "draw triplets from a weight map");
  std::string sm_manifest, sm_out, sm_weights;
  long long sm_n = 64;
  sample->add_option("--manifest", sm_manifest, "space manifest")->required();
  sample->add_option("--n", sm_n, "triplets to draw");
  sample->add_option("--out", sm_out, "output triplet JSONL")->required();
  sample->add_option("--weights", sm_weights, "weight snapshot override");

  // synth
  auto* synth = app.add_subcommand("synth", "sample triplets and emit scene descriptors");
  std::string sy_manifest, sy_out;
  std::vector<std::string> sy_meshes;
  long long sy_n = 64;
  synth->add_option("--manifest", sy_manifest, "space manifest")->required();
  synth->add_option("--meshes", sy_meshes, "object OBJ files in object order")->required();
  synth->add_option("--n", sy_n, "scenes to synthesize");
  synth->add_option("--out", sy_out, "output scene JSONL")->required();

  // loop
  auto* loop = app.add_subcommand("loop", "run the online-vs-uniform experiment");
  std::string lp_csv, lp_online_map, lp_uniform_map;
  loop->add_option("--out-csv", lp_csv, "curves CSV path")->required();
  loop->add_option("--out-map-online", lp_online_map, "final online weight snapshot");
  loop->add_option("--out-map-uniform", lp_uniform_map, "final uniform weight snapshot");

  // eval
  auto* eval = app.add_subcommand("eval", "score prediction records against ground truth");
  std::string ev_pred, ev_gt, ev_mesh, ev_symset, ev_mode = "mpcpe", ev_out;
  eval->add_option("--pred", ev_pred, "prediction JSONL")->required();
  eval->add_option("--gt", ev_gt, "ground-truth JSONL")->required();
  eval->add_option("--mesh", ev_mesh, "object OBJ (canonical corners and vertices)")->required();
  eval->add_option("--symset", ev_symset, "symmetry set JSON (default: identity only)");
  eval->add_option("--mode", ev_mode, "loss scheme: mpcpe (l1=l2=1) or sym (l3=1)");
  eval->add_option("--out", ev_out, "metrics CSV path")->required();

  // symset
  auto* symset = app.add_subcommand("symset", "generate a refined symmetry set");
  std::string ss_mesh, ss_spec, ss_out;
  long long ss_steps = 36, ss_icp = 30;
  symset->add_option("--mesh", ss_mesh, "object OBJ file")->required();
  symset->add_option("--spec", ss_spec, "symmetry table file")->required();
  symset->add_option("--out", ss_out, "output symmetry JSON")->required();
  symset->add_option("--steps", ss_steps, "revolution discretization steps");
  symset->add_option("--icp-iters", ss_icp, "ICP refinement iterations");

  CLI11_PARSE(app, argc, argv);

  try {
    global.load_config();
    if (grasp_gen->parsed())
      return cmd_grasp_gen(global, gg_mesh, gg_target, gg_out, gg_target_opt, gg_offset,
                           gg_offset_opt, gg_sites, gg_sites_opt, gg_budget, gg_budget_opt);
    if (build->parsed())
      return cmd_build_space(global, bs_grasps, {bs_grid[0], bs_grid[1]}, bs_manifest, bs_weights);
    if (sample->parsed()) return cmd_sample(global, sm_manifest, sm_n, sm_out, sm_weights);
    if (synth->parsed()) return cmd_synth(global, sy_manifest, sy_meshes, sy_n, sy_out);
    if (loop->parsed()) return cmd_loop(global, lp_csv, lp_online_map, lp_uniform_map);
    if (eval->parsed())
      return cmd_eval(global, ev_pred, ev_gt, ev_mesh, ev_symset, ev_mode, ev_out);
    if (symset->parsed()) return cmd_symset(global, ss_mesh, ss_spec, ss_out, ss_steps, ss_icp);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
