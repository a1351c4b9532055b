// hrrplab: synthetic HRRP experiments from the command line.
//
// Subcommands: gen-data, kalman-eval, attach-aspects, train, eval, report.
// Exit codes: 0 success, 2 usage error, 3 data/config error, 4 divergence.

#include <CLI11.hpp>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <thread>

#include "hrrp/checkpoint.hpp"
#include "hrrp/config.hpp"
#include "hrrp/dataset.hpp"
#include "hrrp/kalman.hpp"
#include "hrrp/pipeline.hpp"
#include "hrrp/results.hpp"
#include "hrrp/rng.hpp"
#include "hrrp/run_manifest.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace hrrp;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitDivergence = 4;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Timer {
  std::chrono::steady_clock::time_point start =
      std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start)
        .count();
  }
};

std::string manifest_path_for(const std::string& out) {
  std::string base = out;
  while (!base.empty() && base.back() == '/') base.pop_back();
  return base + ".run_manifest.json";
}

double deg(double rad) { return rad * 180.0 / 3.14159265358979323846; }

HeadingMethod heading_from_flag(const std::string& s) {
  if (s == "velocity") return HeadingMethod::kVelocity;
  if (s == "posdiff") return HeadingMethod::kPositionDiff;
  throw UsageError("unknown heading method: " + s);
}

// ------------------------------------------------------------- gen-data

int cmd_gen_data(const std::string& config_path, const std::string& out,
                 int64_t seed_flag) {
  Timer timer;
  const auto cfg_file = KeyValueConfig::from_file(config_path);
  DatasetConfig cfg = DatasetConfig::from_config(cfg_file);
  if (seed_flag >= 0) cfg.seed = uint64_t(seed_flag);

  Dataset ds = build_dataset(cfg);

  // build in a temp directory, swap in atomically
  const std::string tmp = out + ".tmp";
  fs::remove_all(tmp);
  write_dataset(ds, tmp);
  fs::remove_all(out);
  fs::rename(tmp, out);

  RunManifest m;
  m.command = "gen-data";
  m.config_path = config_path;
  m.seed = cfg.seed;
  m.inputs.emplace_back(config_path, sha256_file(config_path));
  m.outputs.emplace_back(out, dataset_content_hash(out));
  m.duration_s = timer.seconds();
  write_run_manifest(manifest_path_for(out), m);

  std::cout << "gen-data: " << ds.records.size() << " records, "
            << ds.classes.size() << " classes -> " << out << "\n";
  return 0;
}

// ---------------------------------------------------------- kalman-eval

std::vector<std::string> collect_csvs(const std::vector<std::string>& paths) {
  std::vector<std::string> files;
  for (const auto& p : paths) {
    if (fs::is_directory(p)) {
      std::vector<std::string> here;
      for (const auto& e : fs::recursive_directory_iterator(p)) {
        if (e.is_regular_file() && e.path().extension() == ".csv") {
          here.push_back(e.path().string());
        }
      }
      std::sort(here.begin(), here.end());
      files.insert(files.end(), here.begin(), here.end());
    } else {
      files.push_back(p);
    }
  }
  if (files.empty()) throw std::runtime_error("no trajectory csv files found");
  return files;
}

int cmd_kalman_eval(const std::vector<std::string>& traj_paths, double radar_x,
                    double radar_y, int k_min, int k_max, double q, double r,
                    double p0, double max_gap, const std::string& heading,
                    const std::string& out, const std::string& segments_csv) {
  Timer timer;
  if (k_max < k_min || k_min < 2) {
    throw UsageError("need 2 <= k-min <= k-max");
  }
  KfParams kf;
  if (q > 0) kf.q = q;
  if (r > 0) kf.r = r;
  if (p0 > 0) kf.p0 = p0;
  const HeadingMethod method = heading_from_flag(heading);

  const auto files = collect_csvs(traj_paths);
  std::vector<std::vector<TrajectorySample>> segments;
  for (const auto& f : files) {
    const auto samples = read_trajectory_csv(f);
    for (auto& seg : segment_trajectory(samples, max_gap)) {
      segments.push_back(std::move(seg));
    }
  }

  const EstimatorReport rep = evaluate_estimator(segments, {radar_x, radar_y},
                                                 kf, k_min, k_max, method);

  json j;
  j["k_min"] = rep.k_min;
  j["k_max"] = rep.k_max;
  j["segments_evaluated"] = rep.segments_evaluated;
  j["segments_skipped"] = rep.segments_skipped;
  j["median_rad"] = rep.median;
  j["median_deg"] = deg(rep.median);
  j["mean_rad"] = rep.mean;
  j["mean_deg"] = deg(rep.mean);
  j["worst_decile_mean_rad"] = rep.worst_decile_mean;
  j["worst_decile_mean_deg"] = deg(rep.worst_decile_mean);
  json per_k = json::array();
  for (int k = rep.k_min; k <= rep.k_max; ++k) {
    per_k.push_back({{"k", k},
                     {"mean_rad", rep.mean_error_per_k[k - rep.k_min]},
                     {"mean_deg", deg(rep.mean_error_per_k[k - rep.k_min])}});
  }
  j["per_k"] = per_k;
  json deciles = json::array();
  for (double d : rep.deciles) deciles.push_back(deg(d));
  j["deciles_deg"] = deciles;

  {
    const std::string tmp = out + ".tmp";
    std::ofstream o(tmp, std::ios::binary);
    if (!o) throw std::runtime_error("cannot write report: " + out);
    o << j.dump(2) << '\n';
    o.close();
    fs::rename(tmp, out);
  }
  if (!segments_csv.empty()) {
    const std::string tmp = segments_csv + ".tmp";
    std::ofstream o(tmp, std::ios::binary);
    if (!o) throw std::runtime_error("cannot write csv: " + segments_csv);
    o << "segment_index,score_rad,score_deg\n";
    for (size_t i = 0; i < rep.segment_scores.size(); ++i) {
      char buf[96];
      std::snprintf(buf, sizeof(buf), "%zu,%.9f,%.6f\n", i,
                    rep.segment_scores[i], deg(rep.segment_scores[i]));
      o << buf;
    }
    o.close();
    fs::rename(tmp, segments_csv);
  }

  RunManifest m;
  m.command = "kalman-eval";
  for (const auto& f : files) m.inputs.emplace_back(f, sha256_file(f));
  m.outputs.emplace_back(out, sha256_file(out));
  if (!segments_csv.empty()) {
    m.outputs.emplace_back(segments_csv, sha256_file(segments_csv));
  }
  m.duration_s = timer.seconds();
  write_run_manifest(manifest_path_for(out), m);

  std::cout << "kalman-eval: " << rep.segments_evaluated
            << " segments, median " << deg(rep.median) << " deg, worst-decile "
            << deg(rep.worst_decile_mean) << " deg -> " << out << "\n";
  return 0;
}

// -------------------------------------------------------- attach-aspects

int cmd_attach_aspects(const std::string& data_dir, const std::string& out,
                       double q, double r, double p0, double max_gap,
                       const std::string& heading) {
  Timer timer;
  Dataset ds = load_dataset(data_dir);
  KfParams kf;
  if (q > 0) kf.q = q;
  kf.r = r > 0 ? r : ds.config.meas_sigma * ds.config.meas_sigma;
  if (kf.r <= 0) kf.r = 1.0;  // noiseless datasets still need a valid filter
  if (p0 > 0) kf.p0 = p0;

  const auto stats = pipeline::attach_predicted_aspects(
      ds, kf, heading_from_flag(heading), max_gap);

  const std::string tmp = out + ".tmp";
  write_aspects_csv(tmp, ds);
  fs::rename(tmp, out);

  RunManifest m;
  m.command = "attach-aspects";
  m.inputs.emplace_back(data_dir, dataset_content_hash(data_dir));
  m.outputs.emplace_back(out, sha256_file(out));
  m.duration_s = timer.seconds();
  write_run_manifest(manifest_path_for(out), m);

  std::cout << "attach-aspects: " << stats.attached << " records attached, "
            << stats.warmup_flagged << " warm-up flagged -> " << out << "\n";
  return 0;
}

// ----------------------------------------------------------------- train

struct RunSpec {
  pipeline::TrainConfig config;
  std::string run_name;
};

pipeline::TrainConfig base_train_config(const KeyValueConfig& cfg) {
  pipeline::TrainConfig tc;
  const std::string task = cfg.get_or("task", "one_view");
  if (task == "one_view") {
    tc.multi_view = false;
  } else if (task == "multi_view") {
    tc.multi_view = true;
  } else {
    throw std::runtime_error("train config: unknown task '" + task + "'");
  }
  tc.angle_source = pipeline::angle_source_from_string(
      cfg.get_or("angle_source", "reference"));
  tc.epochs = cfg.get_int("epochs", tc.epochs);
  tc.batch = cfg.get_int("batch", tc.batch);
  tc.lr = cfg.get_double("lr", tc.lr);
  tc.momentum = cfg.get_double("momentum", tc.momentum);
  tc.jitter_sigma_deg = cfg.get_double("jitter_sigma_deg", tc.jitter_sigma_deg);
  tc.backbone.cond_dim = 2 * cfg.get_int("harmonics", 2);
  tc.backbone.kernel = cfg.get_int("kernel", tc.backbone.kernel);
  tc.seq.aggregator =
      models::aggregator_from_string(cfg.get_or("aggregator", "gru"));
  tc.seq.hidden = cfg.get_int("hidden", tc.seq.hidden);
  tc.seq.seq_len = cfg.get_int("T", tc.seq.seq_len);
  return tc;
}

std::vector<RunSpec> expand_grid(const KeyValueConfig& cfg) {
  const auto backbones = cfg.has("backbone")
                             ? cfg.get_list("backbone")
                             : std::vector<std::string>{"resnet"};
  const auto conds = cfg.has("conditioning")
                         ? cfg.get_list("conditioning")
                         : std::vector<std::string>{"none"};
  const auto seeds =
      cfg.has("seed") ? cfg.get_list("seed") : std::vector<std::string>{"1"};

  std::vector<RunSpec> runs;
  for (const auto& b : backbones) {
    for (const auto& c : conds) {
      for (const auto& s : seeds) {
        RunSpec r;
        r.config = base_train_config(cfg);
        r.config.backbone.family = models::family_from_string(b);
        r.config.backbone.conditioning = models::conditioning_from_string(c);
        r.config.seed = std::stoull(s);
        const std::string src =
            pipeline::to_string(r.config.effective_angle_source());
        r.run_name =
            (r.config.multi_view ? std::string("mv_") : std::string()) + b +
            "_" + c + "_" + src + "_s" + s;
        runs.push_back(std::move(r));
      }
    }
  }
  return runs;
}

json per_class_json(const pipeline::MetricsReport& m) {
  json j;
  json per = json::array();
  for (size_t c = 0; c < m.f1.size(); ++c) {
    per.push_back({{"class_id", c},
                   {"precision", m.precision[c]},
                   {"recall", m.recall[c]},
                   {"f1", m.f1[c]}});
  }
  j["per_class"] = per;
  j["confusion"] = m.confusion;
  j["accuracy"] = m.accuracy;
  j["macro_f1"] = m.macro_f1;
  return j;
}

int cmd_train(const std::string& config_path, const std::string& data_dir,
              const std::string& out_dir, const std::string& aspects,
              const std::string& results_path_flag, int jobs) {
  Timer timer;
  if (jobs < 1) throw UsageError("--jobs must be >= 1");
  const auto cfg_file = KeyValueConfig::from_file(config_path);
  auto runs = expand_grid(cfg_file);

  Dataset ds = load_dataset(data_dir);
  if (!aspects.empty()) load_aspects_csv(aspects, ds);
  for (const auto& r : runs) {
    if (r.config.effective_angle_source() ==
            pipeline::AngleSource::kPredicted &&
        aspects.empty()) {
      throw std::runtime_error(
          "angle_source=predicted needs --aspects (run `hrrplab "
          "attach-aspects` on the dataset first)");
    }
  }
  for (auto& r : runs) {
    r.config.backbone.n_classes = ds.config.n_classes;
    r.config.backbone.input_len = ds.config.n_bins;
  }

  fs::create_directories(out_dir);
  const std::string config_hash = sha256_file(config_path).substr(0, 16);

  struct RunOutcome {
    ResultRow row;
    std::string ckpt_path;
    std::string error;
    bool diverged = false;
  };
  std::vector<RunOutcome> outcomes(runs.size());

  std::atomic<size_t> next{0};
  auto worker = [&]() {
    while (true) {
      const size_t i = next.fetch_add(1);
      if (i >= runs.size()) return;
      const auto& run = runs[i];
      auto& out = outcomes[i];
      try {
        const auto result = pipeline::train(run.config, ds);

        CheckpointMeta meta;
        meta.multi_view = run.config.multi_view;
        meta.seq = run.config.seq;
        meta.train_seed = run.config.seed;
        meta.angle_source =
            pipeline::to_string(run.config.effective_angle_source());
        meta.config_hash = config_hash;

        std::vector<nn::Param*> params;
        std::vector<nn::StateRef> state;
        if (run.config.multi_view) {
          meta.backbone = result.multi_view->spec();
          params = result.multi_view->params();
          state = result.multi_view->state();
        } else {
          meta.backbone = result.one_view->spec();
          params = result.one_view->params();
          state = result.one_view->state();
        }
        out.ckpt_path =
            (fs::path(out_dir) / (run.run_name + ".ckpt")).string();
        save_checkpoint(out.ckpt_path, meta, params, state);

        const std::string f1_path =
            (fs::path(out_dir) / (run.run_name + "_f1.json")).string();
        {
          const std::string tmp = f1_path + ".tmp";
          std::ofstream o(tmp, std::ios::binary);
          o << per_class_json(result.test).dump(2) << '\n';
          o.close();
          fs::rename(tmp, f1_path);
        }

        out.row.config_hash = config_hash;
        out.row.run_name = run.run_name;
        out.row.backbone = models::to_string(run.config.backbone.family);
        out.row.conditioning =
            models::to_string(run.config.backbone.conditioning);
        out.row.angle_source = meta.angle_source;
        out.row.split = "test";
        out.row.seed = run.config.seed;
        out.row.accuracy = result.test.accuracy;
        out.row.macro_f1 = result.test.macro_f1;
        out.row.per_class_path = f1_path;
      } catch (const pipeline::DivergenceError& e) {
        out.diverged = true;
        out.error = e.what();
      } catch (const std::exception& e) {
        out.error = e.what();
      }
    }
  };

  std::vector<std::thread> pool;
  const size_t n_threads = std::min<size_t>(size_t(jobs), runs.size());
  for (size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  for (const auto& out : outcomes) {
    if (out.diverged) throw pipeline::DivergenceError(out.error);
    if (!out.error.empty()) throw std::runtime_error(out.error);
  }

  const std::string results_path =
      results_path_flag.empty() ? (fs::path(out_dir) / "results.csv").string()
                                : results_path_flag;
  std::vector<ResultRow> rows;
  for (const auto& out : outcomes) rows.push_back(out.row);
  append_results_csv(results_path, rows);

  RunManifest m;
  m.command = "train";
  m.config_path = config_path;
  m.seed = runs.size() == 1 ? runs[0].config.seed : 0;
  m.inputs.emplace_back(config_path, sha256_file(config_path));
  m.inputs.emplace_back(data_dir, dataset_content_hash(data_dir));
  if (!aspects.empty()) m.inputs.emplace_back(aspects, sha256_file(aspects));
  for (const auto& out : outcomes) {
    m.outputs.emplace_back(out.ckpt_path, sha256_file(out.ckpt_path));
  }
  m.outputs.emplace_back(results_path, sha256_file(results_path));
  m.duration_s = timer.seconds();
  write_run_manifest(manifest_path_for(out_dir), m);

  for (const auto& out : outcomes) {
    std::cout << out.row.run_name << ": test acc "
              << 100.0 * out.row.accuracy << "%, macro-F1 "
              << 100.0 * out.row.macro_f1 << "%\n";
  }
  return 0;
}

// ------------------------------------------------------------------ eval

int cmd_eval(const std::string& ckpt_path, const std::string& data_dir,
             const std::string& split, const std::string& angle_source,
             const std::string& aspects, const std::string& results_path) {
  Timer timer;
  const CheckpointMeta meta = read_checkpoint_meta(ckpt_path);
  Dataset ds = load_dataset(data_dir);
  const auto source = pipeline::angle_source_from_string(angle_source);
  if (source == pipeline::AngleSource::kPredicted) {
    if (aspects.empty()) {
      throw std::runtime_error(
          "eval with --angle-source predicted needs --aspects (run `hrrplab "
          "attach-aspects` first)");
    }
    load_aspects_csv(aspects, ds);
  }

  // reconstruct the training split from the checkpoint's seed
  const auto splits = pipeline::stratified_split(
      ds.labels(), 0.70, 0.15, derive_seed(meta.train_seed, "split"));
  const auto which = pipeline::split_from_string(split);

  pipeline::MetricsReport rep;
  if (meta.multi_view) {
    models::MultiViewModel model(meta.backbone, meta.seq,
                                 derive_seed(meta.train_seed, "init"));
    load_checkpoint_values(ckpt_path, model.params(), model.state());
    rep = pipeline::evaluate_multi_view(model, ds, splits, which, source,
                                        meta.seq.seq_len);
  } else {
    models::OneViewModel model(meta.backbone,
                               derive_seed(meta.train_seed, "init"));
    load_checkpoint_values(ckpt_path, model.params(), model.state());
    rep = pipeline::evaluate_one_view(model, ds, splits, which, source);
  }

  ResultRow row;
  row.config_hash = meta.config_hash;
  row.run_name = fs::path(ckpt_path).stem().string() + "_eval";
  row.backbone = models::to_string(meta.backbone.family);
  row.conditioning = models::to_string(meta.backbone.conditioning);
  row.angle_source = angle_source;
  row.split = split;
  row.seed = meta.train_seed;
  row.accuracy = rep.accuracy;
  row.macro_f1 = rep.macro_f1;
  append_results_csv(results_path, {row});

  RunManifest m;
  m.command = "eval";
  m.seed = meta.train_seed;
  m.inputs.emplace_back(ckpt_path, sha256_file(ckpt_path));
  m.inputs.emplace_back(data_dir, dataset_content_hash(data_dir));
  m.outputs.emplace_back(results_path, sha256_file(results_path));
  m.duration_s = timer.seconds();
  write_run_manifest(manifest_path_for(results_path), m);

  std::cout << row.run_name << " [" << split << "]: acc "
            << 100.0 * rep.accuracy << "%, macro-F1 " << 100.0 * rep.macro_f1
            << "%\n";
  return 0;
}

// ---------------------------------------------------------------- report

int cmd_report(const std::string& results_csv, const std::string& out_md) {
  Timer timer;
  const auto rows = read_results_csv(results_csv);
  const std::string md = markdown_report(rows);

  const std::string tmp = out_md + ".tmp";
  {
    std::ofstream o(tmp, std::ios::binary);
    if (!o) throw std::runtime_error("cannot write report: " + out_md);
    o << "# Classification results (accuracy | macro-F1, %)\n\n" << md;
    o.close();
  }
  fs::rename(tmp, out_md);

  RunManifest m;
  m.command = "report";
  m.inputs.emplace_back(results_csv, sha256_file(results_csv));
  m.outputs.emplace_back(out_md, sha256_file(out_md));
  m.duration_s = timer.seconds();
  write_run_manifest(manifest_path_for(out_md), m);

  std::cout << "report -> " << out_md << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"synthetic aspect-aware HRRP classification lab"};
  app.require_subcommand(1);

  std::string gd_config, gd_out;
  int64_t gd_seed = -1;
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
  gen->add_option("--config", gd_config, "dataset config (key=value)")
      ->required();
  gen->add_option("--out", gd_out, "output dataset directory")->required();
  gen->add_option("--seed", gd_seed, "override the config seed");

  std::vector<std::string> ke_traj;
  double ke_rx = 0.0, ke_ry = 0.0, ke_q = -1, ke_r = -1, ke_p0 = -1,
         ke_gap = 1200.0;
  int ke_kmin = 2, ke_kmax = 10;
  std::string ke_heading = "velocity", ke_out, ke_segcsv;
  auto* ke =
      app.add_subcommand("kalman-eval", "context-length aspect-error protocol");
  ke->add_option("--trajectories", ke_traj, "trajectory csv files or dirs")
      ->required()
      ->expected(-1);
  ke->add_option("--radar-x", ke_rx, "radar east coordinate")->required();
  ke->add_option("--radar-y", ke_ry, "radar north coordinate")->required();
  ke->add_option("--k-min", ke_kmin, "smallest context length");
  ke->add_option("--k-max", ke_kmax, "largest context length");
  ke->add_option("--q", ke_q, "process noise intensity");
  ke->add_option("--r", ke_r, "measurement noise variance");
  ke->add_option("--p0", ke_p0, "initial covariance scale");
  ke->add_option("--max-gap", ke_gap, "segment gap threshold, seconds");
  ke->add_option("--heading", ke_heading, "velocity | posdiff");
  ke->add_option("--out", ke_out, "output json report")->required();
  ke->add_option("--segments-csv", ke_segcsv, "optional per-segment csv");

  std::string aa_data, aa_out, aa_heading = "velocity";
  double aa_q = -1, aa_r = -1, aa_p0 = -1, aa_gap = 1200.0;
  auto* aa = app.add_subcommand(
      "attach-aspects", "estimate aspect angles for every dataset record");
  aa->add_option("--data", aa_data, "dataset directory")->required();
  aa->add_option("--out", aa_out, "output aspects csv")->required();
  aa->add_option("--q", aa_q, "process noise intensity");
  aa->add_option("--r", aa_r, "measurement noise variance");
  aa->add_option("--p0", aa_p0, "initial covariance scale");
  aa->add_option("--max-gap", aa_gap, "segment gap threshold, seconds");
  aa->add_option("--heading", aa_heading, "velocity | posdiff");

  std::string tr_config, tr_data, tr_out, tr_aspects, tr_results;
  int tr_jobs = 1;
  auto* tr = app.add_subcommand("train", "train a model or a config grid");
  tr->add_option("--config", tr_config, "train config (key=value)")->required();
  tr->add_option("--data", tr_data, "dataset directory")->required();
  tr->add_option("--out", tr_out, "output directory")->required();
  tr->add_option("--aspects", tr_aspects, "predicted-aspect sidecar csv");
  tr->add_option("--results", tr_results,
                 "results csv (default out/results.csv)");
  tr->add_option("--jobs", tr_jobs, "parallel runs for grid configs");

  std::string ev_ckpt, ev_data, ev_split = "test", ev_source = "reference",
              ev_aspects, ev_results;
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a split");
  ev->add_option("--checkpoint", ev_ckpt, "checkpoint file")->required();
  ev->add_option("--data", ev_data, "dataset directory")->required();
  ev->add_option("--split", ev_split, "train | val | test");
  ev->add_option("--angle-source", ev_source, "none | reference | predicted");
  ev->add_option("--aspects", ev_aspects, "predicted-aspect sidecar csv");
  ev->add_option("--results", ev_results, "results csv to append to")
      ->required();

  std::string rp_csv, rp_md;
  auto* rp = app.add_subcommand("report", "pivot results into markdown");
  rp->add_option("--results-csv", rp_csv, "results csv")->required();
  rp->add_option("--out-md", rp_md, "output markdown file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*gen) return cmd_gen_data(gd_config, gd_out, gd_seed);
    if (*ke) {
      return cmd_kalman_eval(ke_traj, ke_rx, ke_ry, ke_kmin, ke_kmax, ke_q,
                             ke_r, ke_p0, ke_gap, ke_heading, ke_out,
                             ke_segcsv);
    }
    if (*aa) {
      return cmd_attach_aspects(aa_data, aa_out, aa_q, aa_r, aa_p0, aa_gap,
                                aa_heading);
    }
    if (*tr) {
      return cmd_train(tr_config, tr_data, tr_out, tr_aspects, tr_results,
                       tr_jobs);
    }
    if (*ev) {
      return cmd_eval(ev_ckpt, ev_data, ev_split, ev_source, ev_aspects,
                      ev_results);
    }
    if (*rp) return cmd_report(rp_csv, rp_md);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const pipeline::DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
