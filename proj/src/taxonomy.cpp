#include "semocc/taxonomy.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace semocc {

void ClassTaxonomy::validate() const {
  if (num_classes <= 0) throw std::invalid_argument("taxonomy: num_classes must be positive");
  for (const auto& [src, task] : primary_map)
    if (task >= num_classes)
      throw std::invalid_argument("taxonomy: task id " + std::to_string(task) +
                                  " for source " + std::to_string(src) + " exceeds class count");
  for (const auto& [name, task] : auxiliary_classes)
    if (task >= num_classes)
      throw std::invalid_argument("taxonomy: task id for auxiliary class '" + name +
                                  "' exceeds class count");
}

uint16_t ClassTaxonomy::aux_class(const std::string& name) const {
  for (const auto& [n, task] : auxiliary_classes)
    if (n == name) return task;
  throw std::invalid_argument("taxonomy: auxiliary class '" + name + "' not defined");
}

ClassTaxonomy load_taxonomy(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open taxonomy " + path);
  ClassTaxonomy tax;
  std::string line;
  int max_task = -1;
  while (std::getline(is, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    std::string first;
    if (!(ls >> first)) continue;
    if (first == "AUX") {
      std::string name;
      int task;
      if (!(ls >> name >> task)) throw std::runtime_error("taxonomy: malformed AUX line: " + line);
      tax.auxiliary_classes.emplace_back(name, static_cast<uint16_t>(task));
      max_task = std::max(max_task, task);
    } else {
      int src = std::stoi(first);
      int task;
      if (!(ls >> task)) throw std::runtime_error("taxonomy: malformed line: " + line);
      auto [it, fresh] = tax.primary_map.emplace(static_cast<uint16_t>(src),
                                                 static_cast<uint16_t>(task));
      (void)it;
      if (!fresh)
        throw std::runtime_error("taxonomy: duplicate source id " + std::to_string(src));
      max_task = std::max(max_task, task);
    }
  }
  tax.num_classes = max_task + 1;
  tax.validate();
  return tax;
}

void save_taxonomy(const std::string& path, const ClassTaxonomy& tax) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  // sorted for stable files
  std::vector<std::pair<uint16_t, uint16_t>> rows(tax.primary_map.begin(), tax.primary_map.end());
  std::sort(rows.begin(), rows.end());
  for (const auto& [src, task] : rows) os << src << " " << task << "\n";
  for (const auto& [name, task] : tax.auxiliary_classes) os << "AUX " << name << " " << task << "\n";
}

ClassTaxonomy reference_taxonomy() {
  ClassTaxonomy tax;
  tax.num_classes = 20;
  auto put = [&](int src, int task) { tax.primary_map[static_cast<uint16_t>(src)] = static_cast<uint16_t>(task); };
  put(176, 1);   // car
  put(175, 2);   // bicycle
  put(178, 3);   // motorcycle
  put(182, 4);   // truck
  put(177, 5);   // other-vehicle: autorickshaw
  put(180, 5);   // bus
  put(181, 5);   // train
  put(183, 5);   // trailer
  put(185, 5);   // slow_wheeled_object
  put(125, 6);   // person
  put(126, 7);   // bicyclist: rider_other
  put(127, 7);   // bicyclist
  put(128, 8);   // motorcyclist
  put(98, 9);    // road
  put(138, 10);  // parking_meter -> parking
  put(100, 11);  // sidewalk_pavement
  put(31, 12);   // other-ground: road_barrier
  put(32, 12);   // mailbox
  put(137, 12);  // fire_hydrant
  put(191, 12);  // wall
  put(35, 13);   // building
  put(144, 14);  // fence
  put(131, 15);  // vegetation: road_barrier variant
  put(174, 15);  // vegetation
  put(102, 17);  // terrain
  put(143, 18);  // pole
  put(130, 18);  // streetlight
  put(145, 18);  // railing_banister
  put(146, 18);  // guard_rail
  put(162, 18);  // column
  put(135, 19);  // traffic_sign
  put(136, 19);  // traffic_light
  tax.auxiliary_classes.emplace_back("trunk", 16);
  tax.validate();
  return tax;
}

LabelMap align_pseudo_labels(const LabelMap& primary_seg,
                             const std::vector<AuxiliaryMask>& auxiliary_masks,
                             const ClassTaxonomy& taxonomy) {
  for (const auto& aux : auxiliary_masks) {
    taxonomy.aux_class(aux.class_name);  // reject unknown names up front
    if (aux.mask.h != primary_seg.h || aux.mask.w != primary_seg.w)
      throw std::invalid_argument("align_pseudo_labels: mask dims differ from segmentation");
  }
  LabelMap out = make_label_map(primary_seg.h, primary_seg.w, taxonomy.ignore_id);
  for (int64_t i = 0; i < primary_seg.size(); ++i) {
    auto it = taxonomy.primary_map.find(primary_seg.labels[static_cast<size_t>(i)]);
    out.labels[static_cast<size_t>(i)] =
        it == taxonomy.primary_map.end() ? taxonomy.ignore_id : it->second;
  }
  for (const auto& aux : auxiliary_masks) {
    uint16_t task = taxonomy.aux_class(aux.class_name);
    for (int64_t i = 0; i < out.size(); ++i)
      if (aux.mask.labels[static_cast<size_t>(i)] != 0)
        out.labels[static_cast<size_t>(i)] = task;  // later masks win
  }
  return out;
}

}  // namespace semocc
