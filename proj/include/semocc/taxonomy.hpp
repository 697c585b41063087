#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "semocc/geometry.hpp"

namespace semocc {

// Maps source-model label IDs and named open-vocabulary masks onto task
// class IDs. Text format, one entry per line:
//   <source_id> <task_id>
//   AUX <name> <task_id>
// '#' starts a comment.
struct ClassTaxonomy {
  std::unordered_map<uint16_t, uint16_t> primary_map;
  std::vector<std::pair<std::string, uint16_t>> auxiliary_classes;  // list order wins
  uint16_t ignore_id = kIgnoreLabel;
  int num_classes = 0;  // task IDs are < num_classes, 0 = free

  void validate() const;
  uint16_t aux_class(const std::string& name) const;  // throws if unknown
};

ClassTaxonomy load_taxonomy(const std::string& path);
void save_taxonomy(const std::string& path, const ClassTaxonomy& tax);

// The 20-class reference taxonomy (19 semantics + free) mapping universal
// segmentation IDs onto the outdoor-driving class set, with trunk supplied
// by an auxiliary mask source.
ClassTaxonomy reference_taxonomy();

struct AuxiliaryMask {
  std::string class_name;
  LabelMap mask;  // nonzero = covered
};

// Applies the taxonomy to a source-ID segmentation, then overwrites covered
// pixels from each auxiliary mask in list order. Unmapped source IDs become
// ignore_id. Rejects masks whose class name is absent from the taxonomy.
LabelMap align_pseudo_labels(const LabelMap& primary_seg,
                             const std::vector<AuxiliaryMask>& auxiliary_masks,
                             const ClassTaxonomy& taxonomy);

}  // namespace semocc
