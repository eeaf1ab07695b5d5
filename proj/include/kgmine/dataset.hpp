#pragma once

#include <string>
#include <unordered_set>
#include <vector>

#include "kgmine/graph.hpp"

namespace kgmine {

struct Triplet {
  ClassId subject;
  RelationId relation;
  ClassId object;

  friend bool operator==(const Triplet&, const Triplet&) = default;
};

enum class Split { train, test };

struct Scene {
  std::string id;
  Split split = Split::train;
  std::vector<Triplet> triplets;
};

/// Scenes of <subject, relation, object> records, each scene tagged train or
/// test. Identical triplets within one scene are collapsed at load.
class TripletDataset {
 public:
  const std::vector<Scene>& scenes() const { return scenes_; }
  std::vector<Scene>& scenes() { return scenes_; }

  std::size_t triplet_count() const;
  std::size_t triplet_count(Split split) const;
  bool has_split(Split split) const;

  void add_scene(Scene scene) { scenes_.push_back(std::move(scene)); }

 private:
  std::vector<Scene> scenes_;
};

/// Loads `scene_id<TAB>subject<TAB>relation<TAB>object<TAB>split` lines
/// (split is "train" or "test"; # comments skipped). Lines of one scene may
/// appear anywhere in the file; scene order is first-appearance order. A scene
/// whose lines disagree on the split is an error.
TripletDataset load_triplets(const std::string& path, const EntityVocabulary& vocab);

std::string triplets_to_tsv(const TripletDataset& data, const EntityVocabulary& vocab);
void write_triplets(const TripletDataset& data, const EntityVocabulary& vocab,
                    const std::string& path);

/// Which (subject, relation, object) class combinations were observed in the
/// training split, and the derived zero-shot flag of every test triplet.
struct ZeroShotIndex {
  std::unordered_set<std::uint64_t> seen;  // packed train combinations
  // flags[scene_index][triplet_index], empty vectors for train scenes
  std::vector<std::vector<bool>> flags;

  static std::uint64_t pack(ClassId s, RelationId r, ClassId o) {
    // vocab ids stay far below 2^21, so the fields cannot overlap
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(s)) << 42) |
           (static_cast<std::uint64_t>(static_cast<std::uint32_t>(r)) << 21) |
           static_cast<std::uint32_t>(o);
  }

  bool is_zero_shot(std::size_t scene_index, std::size_t triplet_index) const {
    return flags[scene_index][triplet_index];
  }

  std::size_t zero_shot_count() const;
};

/// Flags each test triplet whose exact class/relation combination never
/// occurs in the training split. Requires a nonempty training split.
ZeroShotIndex build_zero_shot_index(const TripletDataset& data);

struct AmplifyLog {
  struct RelationChange {
    RelationId relation;
    std::uint64_t before;
    std::uint64_t after;
  };
  std::vector<std::string> removed_scene_ids;
  std::vector<RelationChange> tail_relations;
};

/// Zero-shot amplification: removes whole training scenes containing any of
/// the `tail_count` least-frequent relations (train-split frequency, ties by
/// relation id) until each such relation's training triplet count is at most
/// target_fraction of its original count. Scenes are visited sorted by
/// scene id; the test split is untouched. Requires tail_count in
/// [1, relation_count) and target_fraction in (0, 1).
TripletDataset amplify_zero_shot(const TripletDataset& data, std::size_t tail_count,
                                 double target_fraction, std::size_t relation_count,
                                 AmplifyLog* log = nullptr);

/// Removes zero-shot test triplets whose relation appears in the list;
/// everything else (including all non-zero-shot triplets) is retained.
TripletDataset filter_test_common_relations(const TripletDataset& data, const ZeroShotIndex& index,
                                            const std::vector<RelationId>& relations_to_remove);

/// Training-split triplet count per relation (size = relation_count).
std::vector<std::uint64_t> train_relation_frequencies(const TripletDataset& data,
                                                      std::size_t relation_count);

}  // namespace kgmine
