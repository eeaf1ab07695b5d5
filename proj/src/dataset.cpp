#include "kgmine/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <unordered_map>

namespace kgmine {

namespace {

std::string_view strip_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

const char* split_name(Split s) { return s == Split::train ? "train" : "test"; }

}  // namespace

std::size_t TripletDataset::triplet_count() const {
  std::size_t n = 0;
  for (const Scene& s : scenes_) n += s.triplets.size();
  return n;
}

std::size_t TripletDataset::triplet_count(Split split) const {
  std::size_t n = 0;
  for (const Scene& s : scenes_) {
    if (s.split == split) n += s.triplets.size();
  }
  return n;
}

bool TripletDataset::has_split(Split split) const {
  for (const Scene& s : scenes_) {
    if (s.split == split && !s.triplets.empty()) return true;
  }
  return false;
}

TripletDataset load_triplets(const std::string& path, const EntityVocabulary& vocab) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open triplet file: " + path);

  TripletDataset data;
  std::unordered_map<std::string, std::size_t> scene_index;
  std::vector<std::unordered_set<std::uint64_t>> scene_seen;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = strip_cr(line);
    if (view.empty() || view.front() == '#') continue;
    const auto fields = split_tabs(view);
    if (fields.size() != 5) {
      throw Error(path + ":" + std::to_string(line_no) + ": expected 5 tab-separated columns, got " +
                  std::to_string(fields.size()));
    }
    const auto subject = vocab.find_class(fields[1]);
    if (!subject) {
      throw Error(path + ":" + std::to_string(line_no) + ": unknown class '" +
                  std::string(fields[1]) + "'");
    }
    const auto relation = vocab.find_relation(fields[2]);
    if (!relation) {
      throw Error(path + ":" + std::to_string(line_no) + ": unknown relation '" +
                  std::string(fields[2]) + "'");
    }
    const auto object = vocab.find_class(fields[3]);
    if (!object) {
      throw Error(path + ":" + std::to_string(line_no) + ": unknown class '" +
                  std::string(fields[3]) + "'");
    }
    Split split;
    if (fields[4] == "train") {
      split = Split::train;
    } else if (fields[4] == "test") {
      split = Split::test;
    } else {
      throw Error(path + ":" + std::to_string(line_no) + ": split must be 'train' or 'test', got '" +
                  std::string(fields[4]) + "'");
    }

    const std::string scene_id(fields[0]);
    auto [it, inserted] = scene_index.emplace(scene_id, data.scenes().size());
    if (inserted) {
      data.add_scene(Scene{scene_id, split, {}});
      scene_seen.emplace_back();
    }
    Scene& scene = data.scenes()[it->second];
    if (scene.split != split) {
      throw Error(path + ":" + std::to_string(line_no) + ": scene '" + scene_id +
                  "' already tagged '" + split_name(scene.split) + "'");
    }
    const Triplet triplet{*subject, *relation, *object};
    if (scene_seen[it->second].insert(ZeroShotIndex::pack(*subject, *relation, *object)).second) {
      scene.triplets.push_back(triplet);
    }
  }
  if (data.triplet_count() == 0) throw Error("triplet file contains no triplets: " + path);
  return data;
}

std::string triplets_to_tsv(const TripletDataset& data, const EntityVocabulary& vocab) {
  std::string out;
  for (const Scene& scene : data.scenes()) {
    for (const Triplet& t : scene.triplets) {
      out += scene.id;
      out += '\t';
      out += vocab.class_name(t.subject);
      out += '\t';
      out += vocab.relation_name(t.relation);
      out += '\t';
      out += vocab.class_name(t.object);
      out += '\t';
      out += split_name(scene.split);
      out += '\n';
    }
  }
  return out;
}

void write_triplets(const TripletDataset& data, const EntityVocabulary& vocab,
                    const std::string& path) {
  write_file_atomic(path, triplets_to_tsv(data, vocab));
}

std::size_t ZeroShotIndex::zero_shot_count() const {
  std::size_t n = 0;
  for (const auto& scene_flags : flags) {
    n += static_cast<std::size_t>(std::count(scene_flags.begin(), scene_flags.end(), true));
  }
  return n;
}

ZeroShotIndex build_zero_shot_index(const TripletDataset& data) {
  if (!data.has_split(Split::train)) throw Error("build_zero_shot_index: empty training split");
  if (!data.has_split(Split::test)) throw Error("build_zero_shot_index: empty test split");

  ZeroShotIndex index;
  for (const Scene& scene : data.scenes()) {
    if (scene.split != Split::train) continue;
    for (const Triplet& t : scene.triplets) {
      index.seen.insert(ZeroShotIndex::pack(t.subject, t.relation, t.object));
    }
  }
  index.flags.resize(data.scenes().size());
  for (std::size_t si = 0; si < data.scenes().size(); ++si) {
    const Scene& scene = data.scenes()[si];
    if (scene.split != Split::test) continue;
    index.flags[si].resize(scene.triplets.size());
    for (std::size_t ti = 0; ti < scene.triplets.size(); ++ti) {
      const Triplet& t = scene.triplets[ti];
      index.flags[si][ti] =
          index.seen.count(ZeroShotIndex::pack(t.subject, t.relation, t.object)) == 0;
    }
  }
  return index;
}

std::vector<std::uint64_t> train_relation_frequencies(const TripletDataset& data,
                                                      std::size_t relation_count) {
  std::vector<std::uint64_t> freq(relation_count, 0);
  for (const Scene& scene : data.scenes()) {
    if (scene.split != Split::train) continue;
    for (const Triplet& t : scene.triplets) {
      if (t.relation < 0 || static_cast<std::size_t>(t.relation) >= relation_count) {
        throw Error("triplet relation id out of range in scene '" + scene.id + "'");
      }
      ++freq[static_cast<std::size_t>(t.relation)];
    }
  }
  return freq;
}

TripletDataset amplify_zero_shot(const TripletDataset& data, std::size_t tail_count,
                                 double target_fraction, std::size_t relation_count,
                                 AmplifyLog* log) {
  if (relation_count == 0) throw Error("amplify_zero_shot: empty relation vocabulary");
  if (tail_count == 0 || tail_count >= relation_count) {
    throw Error("amplify_zero_shot: tail_count must be in [1, relation_count)");
  }
  if (!(target_fraction > 0.0) || !(target_fraction < 1.0)) {
    throw Error("amplify_zero_shot: target_fraction must lie strictly between 0 and 1");
  }

  const std::vector<std::uint64_t> original = train_relation_frequencies(data, relation_count);

  // least-frequent relations first, ties by relation id
  std::vector<RelationId> order(relation_count);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](RelationId a, RelationId b) {
    const auto fa = original[static_cast<std::size_t>(a)];
    const auto fb = original[static_cast<std::size_t>(b)];
    if (fa != fb) return fa < fb;
    return a < b;
  });
  std::vector<bool> is_tail(relation_count, false);
  for (std::size_t i = 0; i < tail_count; ++i) is_tail[static_cast<std::size_t>(order[i])] = true;

  std::vector<std::size_t> train_indices;
  for (std::size_t i = 0; i < data.scenes().size(); ++i) {
    if (data.scenes()[i].split == Split::train) train_indices.push_back(i);
  }
  std::sort(train_indices.begin(), train_indices.end(), [&](std::size_t a, std::size_t b) {
    return data.scenes()[a].id < data.scenes()[b].id;
  });

  std::vector<std::uint64_t> counts = original;
  std::vector<bool> removed(data.scenes().size(), false);
  std::vector<std::string> removed_ids;
  for (const std::size_t si : train_indices) {
    const Scene& scene = data.scenes()[si];
    bool drop = false;
    for (const Triplet& t : scene.triplets) {
      const auto r = static_cast<std::size_t>(t.relation);
      if (is_tail[r] &&
          static_cast<double>(counts[r]) > target_fraction * static_cast<double>(original[r])) {
        drop = true;
        break;
      }
    }
    if (!drop) continue;
    removed[si] = true;
    removed_ids.push_back(scene.id);
    for (const Triplet& t : scene.triplets) --counts[static_cast<std::size_t>(t.relation)];
  }

  TripletDataset out;
  for (std::size_t i = 0; i < data.scenes().size(); ++i) {
    if (!removed[i]) out.add_scene(data.scenes()[i]);
  }
  if (log != nullptr) {
    log->removed_scene_ids = std::move(removed_ids);
    log->tail_relations.clear();
    for (std::size_t i = 0; i < tail_count; ++i) {
      const auto r = order[i];
      log->tail_relations.push_back(
          {r, original[static_cast<std::size_t>(r)], counts[static_cast<std::size_t>(r)]});
    }
  }
  return out;
}

TripletDataset filter_test_common_relations(const TripletDataset& data, const ZeroShotIndex& index,
                                            const std::vector<RelationId>& relations_to_remove) {
  if (index.flags.size() != data.scenes().size()) {
    throw Error("filter_test_common_relations: index does not match the dataset");
  }
  std::unordered_set<RelationId> remove;
  for (const RelationId r : relations_to_remove) {
    if (r < 0) throw Error("filter_test_common_relations: invalid relation id");
    remove.insert(r);
  }

  TripletDataset out;
  for (std::size_t si = 0; si < data.scenes().size(); ++si) {
    const Scene& scene = data.scenes()[si];
    if (scene.split != Split::test) {
      out.add_scene(scene);
      continue;
    }
    Scene filtered{scene.id, scene.split, {}};
    for (std::size_t ti = 0; ti < scene.triplets.size(); ++ti) {
      const Triplet& t = scene.triplets[ti];
      const bool zero_shot = index.flags[si].size() > ti && index.flags[si][ti];
      if (zero_shot && remove.count(t.relation) != 0) continue;
      filtered.triplets.push_back(t);
    }
    out.add_scene(std::move(filtered));
  }
  return out;
}

}  // namespace kgmine
