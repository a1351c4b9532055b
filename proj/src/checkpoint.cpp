#include "hrrp/checkpoint.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <stdexcept>

using nlohmann::json;

namespace hrrp {

namespace {

json spec_to_json(const models::BackboneSpec& s) {
  return json{{"family", models::to_string(s.family)},
              {"channels", s.channels},
              {"kernel", s.kernel},
              {"conditioning", models::to_string(s.conditioning)},
              {"n_classes", s.n_classes},
              {"input_len", s.input_len},
              {"cond_dim", s.cond_dim}};
}

models::BackboneSpec spec_from_json(const json& j) {
  models::BackboneSpec s;
  s.family = models::family_from_string(j.at("family"));
  s.channels = j.at("channels").get<std::vector<int>>();
  s.kernel = j.at("kernel");
  s.conditioning = models::conditioning_from_string(j.at("conditioning"));
  s.n_classes = j.at("n_classes");
  s.input_len = j.at("input_len");
  s.cond_dim = j.at("cond_dim");
  return s;
}

json seq_to_json(const models::SequenceSpec& s) {
  return json{{"aggregator", models::to_string(s.aggregator)},
              {"hidden", s.hidden},
              {"seq_len", s.seq_len}};
}

models::SequenceSpec seq_from_json(const json& j) {
  models::SequenceSpec s;
  s.aggregator = models::aggregator_from_string(j.at("aggregator"));
  s.hidden = j.at("hidden");
  s.seq_len = j.at("seq_len");
  return s;
}

void put_u64le(std::ofstream& out, uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = (v >> (8 * i)) & 0xff;
  out.write(reinterpret_cast<const char*>(b), 8);
}

}  // namespace

void save_checkpoint(const std::string& path, const CheckpointMeta& meta,
                     const std::vector<nn::Param*>& params,
                     const std::vector<nn::StateRef>& state) {
  json header;
  header["format"] = "hrrplab-checkpoint-v1";
  header["meta"] = {{"multi_view", meta.multi_view},
                    {"backbone", spec_to_json(meta.backbone)},
                    {"train_seed", meta.train_seed},
                    {"angle_source", meta.angle_source},
                    {"config_hash", meta.config_hash}};
  if (meta.multi_view) header["meta"]["sequence"] = seq_to_json(meta.seq);

  uint64_t offset = 0;
  json jp = json::array();
  for (const auto* p : params) {
    jp.push_back({{"name", p->name}, {"offset", offset}, {"count", p->w.size()}});
    offset += p->w.size();
  }
  header["params"] = jp;
  json js = json::array();
  for (const auto& s : state) {
    js.push_back({{"name", s.name}, {"offset", offset}, {"count", s.data->size()}});
    offset += s.data->size();
  }
  header["state"] = js;
  header["total"] = offset;

  const std::string hs = header.dump();
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    put_u64le(out, hs.size());
    out.write(hs.data(), std::streamsize(hs.size()));
    for (const auto* p : params) {
      out.write(reinterpret_cast<const char*>(p->w.data()),
                std::streamsize(p->w.size() * 8));
    }
    for (const auto& s : state) {
      out.write(reinterpret_cast<const char*>(s.data->data()),
                std::streamsize(s.data->size() * 8));
    }
    if (!out) throw std::runtime_error("write failed: " + path);
  }
  std::filesystem::rename(tmp, path);
}

namespace {

json read_header(std::ifstream& in, const std::string& path) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (!in) throw std::runtime_error("truncated checkpoint: " + path);
  uint64_t len = 0;
  for (int i = 0; i < 8; ++i) len |= uint64_t(b[i]) << (8 * i);
  std::string hs(len, '\0');
  in.read(hs.data(), std::streamsize(len));
  if (!in) throw std::runtime_error("truncated checkpoint header: " + path);
  json header = json::parse(hs);
  if (header.value("format", "") != "hrrplab-checkpoint-v1") {
    throw std::runtime_error("unknown checkpoint format: " + path);
  }
  return header;
}

}  // namespace

CheckpointMeta read_checkpoint_meta(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  const json header = read_header(in, path);
  const json& jm = header.at("meta");
  CheckpointMeta meta;
  meta.multi_view = jm.at("multi_view");
  meta.backbone = spec_from_json(jm.at("backbone"));
  if (meta.multi_view) meta.seq = seq_from_json(jm.at("sequence"));
  meta.train_seed = jm.at("train_seed");
  meta.angle_source = jm.at("angle_source");
  meta.config_hash = jm.value("config_hash", "");
  return meta;
}

void load_checkpoint_values(const std::string& path,
                            const std::vector<nn::Param*>& params,
                            const std::vector<nn::StateRef>& state) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  const json header = read_header(in, path);
  const std::streampos blob_start = in.tellg();

  auto load_block = [&](const json& table, const std::string& name,
                        std::vector<double>& dst) {
    for (const auto& e : table) {
      if (e.at("name") != name) continue;
      const uint64_t count = e.at("count");
      if (count != dst.size()) {
        throw std::runtime_error("checkpoint topology mismatch: " + name +
                                 " has " + std::to_string(count) +
                                 " values, model expects " +
                                 std::to_string(dst.size()));
      }
      const uint64_t offset = e.at("offset");
      in.seekg(blob_start + std::streampos(offset * 8));
      in.read(reinterpret_cast<char*>(dst.data()),
              std::streamsize(dst.size() * 8));
      if (!in) throw std::runtime_error("truncated checkpoint blob: " + path);
      return;
    }
    throw std::runtime_error("checkpoint topology mismatch: missing " + name);
  };

  for (auto* p : params) load_block(header.at("params"), p->name, p->w);
  for (auto& s : state) load_block(header.at("state"), s.name, *s.data);
}

}  // namespace hrrp
