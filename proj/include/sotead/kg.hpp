#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "sotead/error.hpp"
#include "sotead/io.hpp"

namespace sotead {

using EntityId = std::int32_t;

struct Entity {
  EntityId id = 0;
  std::string key;
  std::string name;

  friend bool operator==(const Entity&, const Entity&) = default;
};

struct RelationTriple {
  EntityId head = 0;
  std::int32_t relation = 0;
  EntityId tail = 0;

  friend bool operator==(const RelationTriple&, const RelationTriple&) = default;
};

// One side of the alignment problem. Immutable once built.
class KnowledgeGraph {
 public:
  KnowledgeGraph() = default;

  // Validates ids and derives the undirected adjacency.
  KnowledgeGraph(std::vector<Entity> entities, std::vector<std::string> relation_names,
                 std::vector<RelationTriple> triples)
      : entities_(std::move(entities)),
        relation_names_(std::move(relation_names)),
        triples_(std::move(triples)) {
    for (std::size_t i = 0; i < entities_.size(); ++i) {
      if (entities_[i].id != static_cast<EntityId>(i))
        throw Error("entity ids must be contiguous from 0 (entity '" + entities_[i].key + "')");
      auto [it, fresh] = by_key_.emplace(entities_[i].key, entities_[i].id);
      if (!fresh) throw DuplicateError(entities_[i].key, "duplicate entity key");
    }
    const auto n = static_cast<EntityId>(entities_.size());
    const auto r = static_cast<std::int32_t>(relation_names_.size());
    adjacency_.assign(entities_.size(), {});
    for (const auto& t : triples_) {
      if (t.head < 0 || t.head >= n || t.tail < 0 || t.tail >= n)
        throw ReferenceError(std::to_string(t.head) + "->" + std::to_string(t.tail),
                             "triple references unknown entity id");
      if (t.relation < 0 || t.relation >= r)
        throw ReferenceError(std::to_string(t.relation), "triple references unknown relation");
      if (t.head == t.tail) continue;
      adjacency_[t.head].push_back(t.tail);
      adjacency_[t.tail].push_back(t.head);
    }
    for (auto& nb : adjacency_) {
      std::sort(nb.begin(), nb.end());
      nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
    }
  }

  std::size_t size() const { return entities_.size(); }
  const std::vector<Entity>& entities() const { return entities_; }
  const Entity& entity(EntityId id) const { return entities_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& relation_names() const { return relation_names_; }
  const std::vector<RelationTriple>& triples() const { return triples_; }

  // Sorted distinct neighbours of `id`, both edge directions, self excluded.
  const std::vector<EntityId>& neighbors(EntityId id) const {
    return adjacency_.at(static_cast<std::size_t>(id));
  }
  const std::vector<std::vector<EntityId>>& adjacency() const { return adjacency_; }

  std::optional<EntityId> find(const std::string& key) const {
    auto it = by_key_.find(key);
    if (it == by_key_.end()) return std::nullopt;
    return it->second;
  }

  EntityId id_of(const std::string& key) const {
    auto id = find(key);
    if (!id) throw ReferenceError(key, "unknown entity key");
    return *id;
  }

  friend bool operator==(const KnowledgeGraph& a, const KnowledgeGraph& b) {
    return a.entities_ == b.entities_ && a.relation_names_ == b.relation_names_ &&
           a.triples_ == b.triples_ && a.adjacency_ == b.adjacency_;
  }

 private:
  std::vector<Entity> entities_;
  std::vector<std::string> relation_names_;
  std::vector<RelationTriple> triples_;
  std::vector<std::vector<EntityId>> adjacency_;
  std::unordered_map<std::string, EntityId> by_key_;
};

using EntityPair = std::pair<EntityId, EntityId>;

// Gold alignment plus the dangling labels of each side. Id vectors are sorted.
struct GoldStandard {
  std::vector<EntityPair> pairs;
  std::vector<EntityId> dangling1;
  std::vector<EntityId> dangling2;
};

inline KnowledgeGraph load_kg(const std::filesystem::path& triples_path,
                              const std::filesystem::path& names_path) {
  std::vector<Entity> entities;
  std::unordered_map<std::string, EntityId> ids;
  for (const auto& line : io::read_lines(names_path)) {
    auto cols = io::split(line.text, '\t');
    if (cols.size() != 2)
      throw ParseError(names_path.string(), line.number,
                       "expected 2 tab-separated columns, got " + std::to_string(cols.size()));
    std::string key(cols[0]);
    const auto id = static_cast<EntityId>(entities.size());
    if (!ids.emplace(key, id).second) throw DuplicateError(key, "duplicate entity key");
    entities.push_back({id, std::move(key), std::string(cols[1])});
  }

  std::vector<std::string> relations;
  std::unordered_map<std::string, std::int32_t> relation_ids;
  std::vector<RelationTriple> triples;
  for (const auto& line : io::read_lines(triples_path)) {
    auto cols = io::split(line.text, '\t');
    if (cols.size() != 3)
      throw ParseError(triples_path.string(), line.number,
                       "expected 3 tab-separated columns, got " + std::to_string(cols.size()));
    auto resolve = [&](std::string_view k) {
      auto it = ids.find(std::string(k));
      if (it == ids.end())
        throw ReferenceError(std::string(k), triples_path.string() + ":" +
                                                 std::to_string(line.number) +
                                                 ": triple references unknown entity key");
      return it->second;
    };
    const EntityId head = resolve(cols[0]);
    const EntityId tail = resolve(cols[2]);
    auto [it, fresh] = relation_ids.emplace(std::string(cols[1]),
                                            static_cast<std::int32_t>(relations.size()));
    if (fresh) relations.emplace_back(cols[1]);
    triples.push_back({head, it->second, tail});
  }
  return KnowledgeGraph(std::move(entities), std::move(relations), std::move(triples));
}

inline void save_kg(const KnowledgeGraph& kg, const std::filesystem::path& triples_path,
                    const std::filesystem::path& names_path) {
  auto names = io::open_out(names_path);
  for (const auto& e : kg.entities()) names << e.key << '\t' << e.name << '\n';
  auto triples = io::open_out(triples_path);
  for (const auto& t : kg.triples())
    triples << kg.entity(t.head).key << '\t' << kg.relation_names()[t.relation] << '\t'
            << kg.entity(t.tail).key << '\n';
}

// Reads `kg1_key<TAB>kg2_key` lines. Rejects unresolved keys and repeated ids.
inline std::vector<EntityPair> load_pairs(const std::filesystem::path& path,
                                          const KnowledgeGraph& kg1, const KnowledgeGraph& kg2) {
  std::vector<EntityPair> pairs;
  std::vector<bool> seen1(kg1.size(), false), seen2(kg2.size(), false);
  for (const auto& line : io::read_lines(path)) {
    auto cols = io::split(line.text, '\t');
    if (cols.size() < 2)
      throw ParseError(path.string(), line.number, "expected 2 tab-separated columns");
    const std::string k1(cols[0]), k2(cols[1]);
    const EntityId a = kg1.id_of(k1);
    const EntityId b = kg2.id_of(k2);
    if (seen1[a]) throw DuplicateError(k1, "entity paired twice in '" + path.string() + "'");
    if (seen2[b]) throw DuplicateError(k2, "entity paired twice in '" + path.string() + "'");
    seen1[a] = seen2[b] = true;
    pairs.emplace_back(a, b);
  }
  return pairs;
}

inline std::vector<EntityId> load_key_list(const std::filesystem::path& path,
                                           const KnowledgeGraph& kg) {
  std::vector<EntityId> ids;
  for (const auto& line : io::read_lines(path)) {
    auto cols = io::split(line.text, '\t');
    ids.push_back(kg.id_of(std::string(cols[0])));
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

namespace detail {

inline std::vector<EntityId> unpaired(std::size_t size, const std::vector<bool>& paired) {
  std::vector<EntityId> out;
  for (std::size_t i = 0; i < size; ++i)
    if (!paired[i]) out.push_back(static_cast<EntityId>(i));
  return out;
}

}  // namespace detail

// Dangling sets default to the complement of the paired ids on each side.
inline GoldStandard load_gold(const std::filesystem::path& pairs_path, const KnowledgeGraph& kg1,
                              const KnowledgeGraph& kg2,
                              const std::optional<std::filesystem::path>& dangling1_path = {},
                              const std::optional<std::filesystem::path>& dangling2_path = {}) {
  GoldStandard gold;
  gold.pairs = load_pairs(pairs_path, kg1, kg2);
  std::vector<bool> paired1(kg1.size(), false), paired2(kg2.size(), false);
  for (auto [a, b] : gold.pairs) paired1[a] = paired2[b] = true;

  auto side = [](const std::optional<std::filesystem::path>& path, const KnowledgeGraph& kg,
                 const std::vector<bool>& paired) {
    if (!path) return detail::unpaired(kg.size(), paired);
    auto ids = load_key_list(*path, kg);
    for (auto id : ids)
      if (paired[id])
        throw DuplicateError(kg.entity(id).key, "entity is both paired and labeled dangling");
    return ids;
  };
  gold.dangling1 = side(dangling1_path, kg1, paired1);
  gold.dangling2 = side(dangling2_path, kg2, paired2);
  return gold;
}

}  // namespace sotead
