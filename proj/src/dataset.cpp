#include "semocc/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "semocc/training.hpp"

namespace semocc {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<int> DatasetManifest::annotated_ids() const {
  std::vector<int> out;
  for (const auto& f : frames)
    if (f.annotated) out.push_back(f.frame_id);
  return out;
}

void save_manifest(const std::string& path, const DatasetManifest& m) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  for (const auto& f : m.frames) {
    os << f.frame_id << " " << f.image_path << " " << f.cloud_path << " " << f.gt_path << " "
       << f.geo_path << " " << f.seg_path;
    for (const auto& a : f.aux_paths) os << " " << a;
    os << " annotated=" << (f.annotated ? 1 : 0) << "\n";
  }
}

DatasetManifest load_manifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open manifest " + path);
  DatasetManifest m;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    FrameRecord f;
    std::vector<std::string> tokens;
    std::string tok;
    while (ls >> tok) tokens.push_back(tok);
    if (tokens.size() < 7) throw std::runtime_error("manifest: malformed line: " + line);
    f.frame_id = std::stoi(tokens[0]);
    f.image_path = tokens[1];
    f.cloud_path = tokens[2];
    f.gt_path = tokens[3];
    f.geo_path = tokens[4];
    f.seg_path = tokens[5];
    const std::string& last = tokens.back();
    if (last.rfind("annotated=", 0) != 0)
      throw std::runtime_error("manifest: missing annotated flag: " + line);
    f.annotated = last == "annotated=1";
    for (size_t i = 6; i + 1 < tokens.size(); ++i) f.aux_paths.push_back(tokens[i]);
    m.frames.push_back(std::move(f));
  }
  return m;
}

namespace {

json grid_to_json(const GridSpec& g) {
  return json{{"nx", g.nx}, {"ny", g.ny}, {"nz", g.nz},
              {"origin", {g.origin[0], g.origin[1], g.origin[2]}},
              {"voxel_size", g.voxel_size}};
}

GridSpec grid_from_json(const json& j) {
  GridSpec g;
  g.nx = j.at("nx");
  g.ny = j.at("ny");
  g.nz = j.at("nz");
  g.origin = {j.at("origin")[0], j.at("origin")[1], j.at("origin")[2]};
  g.voxel_size = j.at("voxel_size");
  return g;
}

void save_meta(const std::string& path, const DatasetMeta& meta) {
  json j{{"grid", grid_to_json(meta.grid)},
         {"image_h", meta.image_h},
         {"image_w", meta.image_w},
         {"num_classes", meta.num_classes},
         {"seed", meta.seed}};
  std::ofstream os(path);
  os << j.dump(2) << "\n";
}

DatasetMeta load_meta(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  json j = json::parse(is);
  DatasetMeta meta;
  meta.grid = grid_from_json(j.at("grid"));
  meta.image_h = j.at("image_h");
  meta.image_w = j.at("image_w");
  meta.num_classes = j.at("num_classes");
  meta.seed = j.at("seed");
  return meta;
}

void save_calib(const std::string& path, const CameraCalibration& c) {
  json k = json::array(), t = json::array();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) k.push_back(c.K[i][j]);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) t.push_back(c.T[i][j]);
  json j{{"K", k}, {"T", t}, {"image_h", c.image_h}, {"image_w", c.image_w}};
  std::ofstream os(path);
  os << j.dump(2) << "\n";
}

CameraCalibration load_calib(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  json j = json::parse(is);
  CameraCalibration c;
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) c.K[i][k] = j.at("K")[static_cast<size_t>(i * 3 + k)];
  for (int i = 0; i < 4; ++i)
    for (int k = 0; k < 4; ++k) c.T[i][k] = j.at("T")[static_cast<size_t>(i * 4 + k)];
  c.image_h = j.at("image_h");
  c.image_w = j.at("image_w");
  c.validate();
  return c;
}

std::string frame_tag(int id) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d", id);
  return buf;
}

FrameRecord write_frame(const std::string& dir, const std::string& split, int id,
                        const FrameBundle& bundle, bool annotated) {
  FrameRecord rec;
  rec.frame_id = id;
  rec.annotated = annotated;
  std::string tag = split + "_" + frame_tag(id);
  rec.image_path = "image_" + tag + ".ppm";
  rec.cloud_path = "cloud_" + tag + ".bin";
  rec.gt_path = "gt_" + tag + ".occg";
  rec.geo_path = "geo_" + tag + ".occg";
  rec.seg_path = "seg_" + tag + ".occm";
  save_ppm(dir + "/" + rec.image_path, bundle.image);
  save_point_cloud(dir + "/" + rec.cloud_path, bundle.cloud);
  save_label_grid(dir + "/" + rec.gt_path, bundle.voxel_gt);
  save_label_grid(dir + "/" + rec.geo_path, bundle.geometry_gt);
  save_label_map(dir + "/" + rec.seg_path, bundle.primary_seg);
  for (const auto& aux : bundle.aux_masks) {
    std::string name = "aux_" + aux.class_name + "_" + tag + ".occk";
    KeepMask m{aux.mask.h, aux.mask.w, 1, {}};
    m.keep.resize(aux.mask.labels.size());
    for (size_t i = 0; i < m.keep.size(); ++i) m.keep[i] = aux.mask.labels[i] ? 1 : 0;
    save_keep_mask(dir + "/" + name, m);
    rec.aux_paths.push_back(name);
  }
  return rec;
}

}  // namespace

Dataset Dataset::open(const std::string& dir) {
  Dataset ds;
  ds.root = dir;
  ds.meta = load_meta(dir + "/meta.json");
  ds.calib = load_calib(dir + "/calib.json");
  ds.taxonomy = load_taxonomy(dir + "/taxonomy.txt");
  ds.train = load_manifest(dir + "/train.manifest");
  ds.val = load_manifest(dir + "/val.manifest");
  return ds;
}

LoadedFrame load_frame(const Dataset& ds, const FrameRecord& rec) {
  LoadedFrame f;
  f.rec = rec;
  f.image = load_ppm(ds.root + "/" + rec.image_path);
  f.cloud = load_point_cloud(ds.root + "/" + rec.cloud_path);
  f.voxel_gt = load_label_grid(ds.root + "/" + rec.gt_path);
  f.geometry_gt = load_label_grid(ds.root + "/" + rec.geo_path);
  f.primary_seg = load_label_map(ds.root + "/" + rec.seg_path);
  for (const auto& aux : rec.aux_paths) {
    // aux_<class>_<split>_<id>.occk
    auto base = aux.substr(4);
    auto cut = base.find('_');
    std::string cls = base.substr(0, cut);
    KeepMask m = load_keep_mask(ds.root + "/" + aux);
    AuxiliaryMask am{cls, make_label_map(m.nx, m.ny, 0)};
    for (size_t i = 0; i < m.keep.size(); ++i) am.mask.labels[i] = m.keep[i];
    f.aux_masks.push_back(std::move(am));
  }
  return f;
}

void generate_dataset(const std::string& dir, const GenerateOptions& opts) {
  fs::create_directories(dir);
  DatasetMeta meta;
  meta.grid = opts.scene.grid;
  meta.image_h = opts.scene.image_h;
  meta.image_w = opts.scene.image_w;
  meta.num_classes = kDeskClassCount;
  meta.seed = opts.seed;
  save_meta(dir + "/meta.json", meta);
  save_taxonomy(dir + "/taxonomy.txt", desk_taxonomy());
  save_taxonomy(dir + "/reference_taxonomy_20.txt", reference_taxonomy());

  auto annotated = interval_sample(opts.train_frames, opts.label_fraction);
  DatasetManifest train, val;
  CameraCalibration calib;
  for (int i = 0; i < opts.train_frames; ++i) {
    SceneSpec spec = opts.scene;
    spec.seed = derive_seed(opts.seed, 100 + static_cast<uint64_t>(i));
    spec.seg_noise_rate = opts.seg_noise_rate;
    FrameBundle bundle = generate_scene(spec);
    bool ann = std::find(annotated.begin(), annotated.end(), i) != annotated.end();
    train.frames.push_back(write_frame(dir, "train", i, bundle, ann));
    calib = bundle.calib;
  }
  for (int i = 0; i < opts.val_frames; ++i) {
    SceneSpec spec = opts.scene;
    spec.seed = derive_seed(opts.seed, 1000000 + static_cast<uint64_t>(i));
    spec.seg_noise_rate = opts.seg_noise_rate;
    FrameBundle bundle = generate_scene(spec);
    val.frames.push_back(write_frame(dir, "val", i, bundle, true));
    calib = bundle.calib;
  }
  save_calib(dir + "/calib.json", calib);
  save_manifest(dir + "/train.manifest", train);
  save_manifest(dir + "/val.manifest", val);
}

}  // namespace semocc
