#include "hrrp/dataset.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <stdexcept>

#include "hrrp/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace hrrp {

namespace {

std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double round_f32(double v) { return double(float(v)); }

}  // namespace

DatasetConfig DatasetConfig::from_config(const KeyValueConfig& cfg) {
  DatasetConfig d;
  d.n_classes = cfg.get_int("classes", d.n_classes);
  d.preset = cfg.get_or("preset", d.preset);
  d.trajectories_per_class =
      cfg.get_int("trajectories_per_class", d.trajectories_per_class);
  d.samples_per_trajectory =
      cfg.get_int("samples_per_trajectory", d.samples_per_trajectory);
  d.n_bins = cfg.get_int("n_bins", d.n_bins);
  d.delta_r = cfg.get_double("delta_r", d.delta_r);
  d.noise_sigma = cfg.get_double("noise_sigma", d.noise_sigma);
  d.amp_jitter = cfg.get_double("amp_jitter", d.amp_jitter);
  d.radar.x = cfg.get_double("radar_x", d.radar.x);
  d.radar.y = cfg.get_double("radar_y", d.radar.y);
  d.dt = cfg.get_double("dt", d.dt);
  d.meas_sigma = cfg.get_double("meas_sigma", d.meas_sigma);
  d.speed_min = cfg.get_double("speed_min", d.speed_min);
  d.speed_max = cfg.get_double("speed_max", d.speed_max);
  d.turn_prob = cfg.get_double("turn_prob", d.turn_prob);
  d.turn_max = cfg.get_double("turn_max", d.turn_max);
  d.length_pool = cfg.get_double_list("length_pool", d.length_pool);
  d.width_frac = cfg.get_double("width_frac", d.width_frac);
  d.seed = cfg.get_u64("seed", d.seed);
  d.validate();
  return d;
}

void DatasetConfig::validate() const {
  if (n_classes < 2) throw std::runtime_error("dataset config: need >= 2 classes");
  if (preset != "ambiguous" && preset != "distinct") {
    throw std::runtime_error("dataset config: unknown preset '" + preset + "'");
  }
  if (trajectories_per_class < 1) {
    throw std::runtime_error("dataset config: trajectories_per_class < 1");
  }
  if (samples_per_trajectory < 3) {
    throw std::runtime_error("dataset config: samples_per_trajectory < 3");
  }
  if (n_bins < 2 || delta_r <= 0.0) {
    throw std::runtime_error("dataset config: bad range geometry");
  }
  if (noise_sigma < 0.0 || amp_jitter < 0.0 || meas_sigma < 0.0) {
    throw std::runtime_error("dataset config: negative noise parameter");
  }
  if (dt <= 0.0 || speed_min <= 0.0 || speed_max < speed_min) {
    throw std::runtime_error("dataset config: bad kinematics");
  }
  if (turn_prob < 0.0 || turn_prob > 1.0 || turn_max < 0.0) {
    throw std::runtime_error("dataset config: bad turn parameters");
  }
}

std::vector<int> Dataset::labels() const {
  std::vector<int> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.class_id);
  return out;
}

namespace {

std::vector<double> resolve_length_pool(const DatasetConfig& cfg) {
  if (!cfg.length_pool.empty()) return cfg.length_pool;
  if (cfg.preset == "ambiguous") return {60.0, 80.0, 100.0};
  // distinct: one length per class, spread widely
  std::vector<double> pool;
  for (int i = 0; i < cfg.n_classes; ++i) pool.push_back(40.0 + 14.0 * i);
  return pool;
}

std::vector<TargetModel> build_class_table(const DatasetConfig& cfg) {
  const auto pool = resolve_length_pool(cfg);
  std::vector<TargetModel> classes;
  classes.reserve(cfg.n_classes);

  if (cfg.preset == "ambiguous") {
    // mirror pairs sharing lengths from a small pool
    const int n_groups = (cfg.n_classes + 1) / 2;
    for (int g = 0; g < n_groups; ++g) {
      const double length = pool[g % pool.size()];
      const double width = cfg.width_frac * length;
      auto rng = make_rng(cfg.seed, "target_geometry", uint64_t(g));
      TargetModel base = make_ship_target(2 * g, length, width, rng);
      classes.push_back(base);
      if (2 * g + 1 < cfg.n_classes) {
        classes.push_back(base.mirrored(2 * g + 1));
      }
    }
  } else {
    for (int c = 0; c < cfg.n_classes; ++c) {
      const double length = pool[c % pool.size()];
      const double width = cfg.width_frac * length;
      auto rng = make_rng(cfg.seed, "target_geometry", uint64_t(c));
      classes.push_back(make_ship_target(c, length, width, rng));
    }
  }
  return classes;
}

TrajectoryParams draw_trajectory_params(const DatasetConfig& cfg, int class_id,
                                        int traj_idx, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  TrajectoryParams p;
  p.speed = cfg.speed_min + (cfg.speed_max - cfg.speed_min) * u01(rng);
  p.dt = cfg.dt;
  p.duration = (cfg.samples_per_trajectory - 1) * cfg.dt;
  p.meas_sigma = cfg.meas_sigma;
  p.start.x = (2.0 * u01(rng) - 1.0) * 15000.0;
  p.start.y = (2.0 * u01(rng) - 1.0) * 15000.0;
  p.hdg0 = kTwoPi * u01(rng);
  // voyages of one ship are far apart in time so they never chunk together
  p.t0 = double(traj_idx) * (p.duration + 86400.0);
  if (u01(rng) < cfg.turn_prob && cfg.turn_max > 0.0) {
    TurnSegment turn;
    turn.t_start = u01(rng) * 0.5 * p.duration;
    const double mag = (0.2 + 0.8 * u01(rng)) * cfg.turn_max;
    turn.omega = u01(rng) < 0.5 ? mag : -mag;
    p.turns.push_back(turn);
  }
  (void)class_id;
  return p;
}

}  // namespace

Dataset build_dataset(const DatasetConfig& cfg) {
  cfg.validate();
  Dataset ds;
  ds.config = cfg;
  ds.classes = build_class_table(cfg);

  int traj_id = 0;
  for (int c = 0; c < cfg.n_classes; ++c) {
    const TargetModel& target = ds.classes[c];
    for (int j = 0; j < cfg.trajectories_per_class; ++j) {
      auto traj_rng = make_rng(cfg.seed, "trajectory", uint64_t(c), uint64_t(j));
      const TrajectoryParams tp =
          draw_trajectory_params(cfg, c, j, traj_rng);
      auto samples = gen_trajectory(tp, traj_rng);
      samples.resize(size_t(cfg.samples_per_trajectory));

      auto render_rng = make_rng(cfg.seed, "render", uint64_t(c), uint64_t(j));
      RenderParams rp;
      rp.n_bins = cfg.n_bins;
      rp.delta_r = cfg.delta_r;
      rp.noise_sigma = cfg.noise_sigma;
      rp.amp_jitter = cfg.amp_jitter;

      for (const auto& s : samples) {
        const AngleRad ref =
            aspect_angle(s.hdg_true, los_azimuth(s.pos, cfg.radar));
        ProfileRecord rec;
        rec.profile = render_hrrp(target, ref, rp, render_rng);
        for (auto& v : rec.profile) v = round_f32(v);
        rec.class_id = c;
        rec.t = round_f32(s.t);
        rec.aspect_ref = wrap_angle(round_f32(ref.value()));
        ds.records.push_back(std::move(rec));
        ds.record_traj.push_back(traj_id);
      }
      ds.trajectories.push_back(std::move(samples));
      ds.traj_class.push_back(c);
      ++traj_id;
    }
  }
  ds.pred_warmup.assign(ds.records.size(), false);
  return ds;
}

// -------------------------------------------------------------- disk I/O

void write_trajectory_csv(const std::string& path,
                          const std::vector<TrajectorySample>& samples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write trajectory csv: " + path);
  out << "t,x_meas,y_meas,x_true,y_true,hdg_true\n";
  for (const auto& s : samples) {
    out << format_g17(s.t) << ',' << format_g17(s.meas.x) << ','
        << format_g17(s.meas.y) << ',' << format_g17(s.pos.x) << ','
        << format_g17(s.pos.y) << ',' << format_g17(s.hdg_true.value())
        << '\n';
  }
}

std::vector<TrajectorySample> read_trajectory_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trajectory csv: " + path);
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error("empty trajectory csv: " + path);
  }
  if (line != "t,x_meas,y_meas,x_true,y_true,hdg_true") {
    throw std::runtime_error("trajectory csv " + path +
                             ": unexpected header '" + line + "'");
  }
  std::vector<TrajectorySample> out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    double f[6];
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%lf,%lf", &f[0], &f[1],
                    &f[2], &f[3], &f[4], &f[5]) != 6) {
      throw std::runtime_error("trajectory csv " + path + ":" +
                               std::to_string(lineno) + ": expected 6 columns");
    }
    TrajectorySample s;
    s.t = f[0];
    s.meas = {f[1], f[2]};
    s.pos = {f[3], f[4]};
    s.hdg_true = wrap_angle(f[5]);
    out.push_back(s);
  }
  return out;
}

namespace {

json config_to_json(const DatasetConfig& c) {
  json j;
  j["classes"] = c.n_classes;
  j["preset"] = c.preset;
  j["trajectories_per_class"] = c.trajectories_per_class;
  j["samples_per_trajectory"] = c.samples_per_trajectory;
  j["n_bins"] = c.n_bins;
  j["delta_r"] = c.delta_r;
  j["noise_sigma"] = c.noise_sigma;
  j["amp_jitter"] = c.amp_jitter;
  j["radar_x"] = c.radar.x;
  j["radar_y"] = c.radar.y;
  j["dt"] = c.dt;
  j["meas_sigma"] = c.meas_sigma;
  j["speed_min"] = c.speed_min;
  j["speed_max"] = c.speed_max;
  j["turn_prob"] = c.turn_prob;
  j["turn_max"] = c.turn_max;
  j["length_pool"] = c.length_pool;
  j["width_frac"] = c.width_frac;
  j["seed"] = c.seed;
  return j;
}

DatasetConfig config_from_json(const json& j) {
  DatasetConfig c;
  c.n_classes = j.at("classes");
  c.preset = j.at("preset");
  c.trajectories_per_class = j.at("trajectories_per_class");
  c.samples_per_trajectory = j.at("samples_per_trajectory");
  c.n_bins = j.at("n_bins");
  c.delta_r = j.at("delta_r");
  c.noise_sigma = j.at("noise_sigma");
  c.amp_jitter = j.at("amp_jitter");
  c.radar.x = j.at("radar_x");
  c.radar.y = j.at("radar_y");
  c.dt = j.at("dt");
  c.meas_sigma = j.at("meas_sigma");
  c.speed_min = j.at("speed_min");
  c.speed_max = j.at("speed_max");
  c.turn_prob = j.at("turn_prob");
  c.turn_max = j.at("turn_max");
  c.length_pool = j.at("length_pool").get<std::vector<double>>();
  c.width_frac = j.at("width_frac");
  c.seed = j.at("seed");
  return c;
}

std::string traj_file_name(int traj_id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "traj_%04d.csv", traj_id);
  return buf;
}

void put_f32le(std::vector<unsigned char>& buf, float v) {
  uint32_t u;
  std::memcpy(&u, &v, 4);
  buf.push_back(u & 0xff);
  buf.push_back((u >> 8) & 0xff);
  buf.push_back((u >> 16) & 0xff);
  buf.push_back((u >> 24) & 0xff);
}

float get_f32le(const unsigned char* p) {
  const uint32_t u = uint32_t(p[0]) | uint32_t(p[1]) << 8 |
                     uint32_t(p[2]) << 16 | uint32_t(p[3]) << 24;
  float v;
  std::memcpy(&v, &u, 4);
  return v;
}

}  // namespace

void write_dataset(const Dataset& ds, const std::string& dir) {
  fs::create_directories(dir);
  fs::create_directories(fs::path(dir) / "trajectories");

  json manifest;
  manifest["format"] = "hrrplab-dataset-v1";
  manifest["config"] = config_to_json(ds.config);

  json classes = json::array();
  for (const auto& t : ds.classes) {
    json jt;
    jt["class_id"] = t.class_id;
    jt["length"] = t.length;
    jt["width"] = t.width;
    json sc = json::array();
    for (const auto& s : t.scatterers) {
      sc.push_back({{"dx", s.dx}, {"dy", s.dy}, {"amp", s.amp}});
    }
    jt["scatterers"] = sc;
    classes.push_back(jt);
  }
  manifest["classes"] = classes;

  json trajs = json::array();
  for (size_t i = 0; i < ds.trajectories.size(); ++i) {
    trajs.push_back({{"traj_id", int(i)},
                     {"class_id", ds.traj_class[i]},
                     {"file", "trajectories/" + traj_file_name(int(i))},
                     {"n_samples", ds.trajectories[i].size()}});
    write_trajectory_csv(
        (fs::path(dir) / "trajectories" / traj_file_name(int(i))).string(),
        ds.trajectories[i]);
  }
  manifest["trajectories"] = trajs;

  json recs;
  recs["count"] = ds.records.size();
  recs["class_id"] = json::array();
  recs["traj_id"] = json::array();
  for (size_t i = 0; i < ds.records.size(); ++i) {
    recs["class_id"].push_back(ds.records[i].class_id);
    recs["traj_id"].push_back(ds.record_traj[i]);
  }
  manifest["records"] = recs;

  {
    std::ofstream out(fs::path(dir) / "manifest.json", std::ios::binary);
    if (!out) throw std::runtime_error("cannot write manifest.json in " + dir);
    out << manifest.dump(2) << '\n';
  }

  std::vector<unsigned char> buf;
  buf.reserve(ds.records.size() * (ds.config.n_bins + 3) * 4);
  for (const auto& r : ds.records) {
    if (int(r.profile.size()) != ds.config.n_bins) {
      throw std::runtime_error("record profile length != n_bins");
    }
    for (double v : r.profile) put_f32le(buf, float(v));
    put_f32le(buf, float(r.aspect_ref.value()));
    put_f32le(buf, float(r.t));
    put_f32le(buf, float(r.class_id));
  }
  std::ofstream out(fs::path(dir) / "records.bin", std::ios::binary);
  if (!out) throw std::runtime_error("cannot write records.bin in " + dir);
  out.write(reinterpret_cast<const char*>(buf.data()),
            std::streamsize(buf.size()));
}

Dataset load_dataset(const std::string& dir) {
  std::ifstream min(fs::path(dir) / "manifest.json");
  if (!min) throw std::runtime_error("cannot open manifest.json in " + dir);
  json manifest = json::parse(min);
  if (manifest.value("format", "") != "hrrplab-dataset-v1") {
    throw std::runtime_error("unknown dataset format in " + dir);
  }

  Dataset ds;
  ds.config = config_from_json(manifest.at("config"));

  for (const auto& jt : manifest.at("classes")) {
    TargetModel t;
    t.class_id = jt.at("class_id");
    t.length = jt.at("length");
    t.width = jt.at("width");
    for (const auto& s : jt.at("scatterers")) {
      t.scatterers.push_back({s.at("dx"), s.at("dy"), s.at("amp")});
    }
    ds.classes.push_back(std::move(t));
  }

  for (const auto& jt : manifest.at("trajectories")) {
    const std::string file = jt.at("file");
    ds.trajectories.push_back(
        read_trajectory_csv((fs::path(dir) / file).string()));
    ds.traj_class.push_back(jt.at("class_id"));
  }

  const auto& recs = manifest.at("records");
  const size_t count = recs.at("count");
  const std::vector<int> rec_class = recs.at("class_id");
  const std::vector<int> rec_traj = recs.at("traj_id");
  if (rec_class.size() != count || rec_traj.size() != count) {
    throw std::runtime_error("manifest record index inconsistent");
  }

  std::ifstream bin(fs::path(dir) / "records.bin", std::ios::binary);
  if (!bin) throw std::runtime_error("cannot open records.bin in " + dir);
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(bin)),
                                 std::istreambuf_iterator<char>());
  const size_t stride = size_t(ds.config.n_bins + 3) * 4;
  if (buf.size() != count * stride) {
    throw std::runtime_error("records.bin size mismatch");
  }

  for (size_t i = 0; i < count; ++i) {
    const unsigned char* p = buf.data() + i * stride;
    ProfileRecord r;
    r.profile.resize(ds.config.n_bins);
    for (int k = 0; k < ds.config.n_bins; ++k) {
      r.profile[k] = double(get_f32le(p + 4 * k));
    }
    r.aspect_ref =
        wrap_angle(double(get_f32le(p + 4 * size_t(ds.config.n_bins))));
    r.t = double(get_f32le(p + 4 * (size_t(ds.config.n_bins) + 1)));
    r.class_id = int(get_f32le(p + 4 * (size_t(ds.config.n_bins) + 2)));
    if (r.class_id != rec_class[i]) {
      throw std::runtime_error("records.bin / manifest class mismatch");
    }
    ds.records.push_back(std::move(r));
    ds.record_traj.push_back(rec_traj[i]);
  }
  ds.pred_warmup.assign(ds.records.size(), false);
  return ds;
}

void write_aspects_csv(const std::string& path, const Dataset& ds) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write aspects csv: " + path);
  out << "record_index,aspect_pred,warmup\n";
  for (size_t i = 0; i < ds.records.size(); ++i) {
    if (!ds.records[i].has_aspect_pred) continue;
    out << i << ',' << format_g17(ds.records[i].aspect_pred.value()) << ','
        << (ds.pred_warmup[i] ? 1 : 0) << '\n';
  }
}

void load_aspects_csv(const std::string& path, Dataset& ds) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open aspects csv: " + path);
  std::string line;
  if (!std::getline(in, line) || line != "record_index,aspect_pred,warmup") {
    throw std::runtime_error("aspects csv " + path + ": unexpected header");
  }
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    size_t idx;
    double aspect;
    int warm;
    if (std::sscanf(line.c_str(), "%zu,%lf,%d", &idx, &aspect, &warm) != 3) {
      throw std::runtime_error("aspects csv " + path + ":" +
                               std::to_string(lineno) + ": expected 3 columns");
    }
    if (idx >= ds.records.size()) {
      throw std::runtime_error("aspects csv " + path + ":" +
                               std::to_string(lineno) +
                               ": record index out of range");
    }
    ds.records[idx].has_aspect_pred = true;
    ds.records[idx].aspect_pred = wrap_angle(aspect);
    ds.pred_warmup[idx] = warm != 0;
  }
}

}  // namespace hrrp
