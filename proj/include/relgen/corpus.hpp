#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

namespace relgen {

using ClassId = int32_t;
using TripleId = int32_t;

// Dense name <-> id map. Ids are assigned in first-seen order; names are
// unique, non-empty and lowercase. Relation entries may carry an `excluded`
// flag when their name is on the ambiguous-relation list.
class Registry {
public:
    ClassId add(const std::string& name, bool excluded = false);
    std::optional<ClassId> find(const std::string& name) const;
    const std::string& name(ClassId id) const;
    bool excluded(ClassId id) const;
    int size() const { return static_cast<int>(names_.size()); }
    const std::vector<std::string>& names() const { return names_; }

    bool operator==(const Registry&) const = default;

private:
    std::vector<std::string> names_;
    std::vector<bool> excluded_;
    std::unordered_map<std::string, ClassId> ids_;
};

// One (head object, relation, tail object) fact; the unit of trie insertion
// and decoding output.
struct Triple {
    ClassId head = 0;
    ClassId relation = 0;
    ClassId tail = 0;
    TripleId id = 0;
};

struct GroundTruthTriple {
    int head_instance = 0;
    ClassId relation = 0;
    int tail_instance = 0;
};

struct SceneGraphAnnotation {
    std::string image_id;
    std::set<ClassId> gt_relations;  // the salient relation classes, unordered
    std::vector<GroundTruthTriple> gt_triples;
};

struct ImageRecord {
    std::string image_id;
    std::filesystem::path image_path;   // P6 PPM
    std::filesystem::path segmap_path;  // RLE JSON
    SceneGraphAnnotation annotation;
};

// The six relations dropped from the prediction space by default. The list
// is data, not code: loaders accept an override for corpora that differ.
extern const std::vector<std::string> kDefaultExcludedRelations;

struct Corpus {
    Registry objects;
    Registry relations;
    std::vector<Triple> triples;
    int dropped_excluded = 0;  // corpus lines removed by the exclusion list
    std::vector<std::string> excluded_names;

    // "head relation tail" with single spaces.
    std::string triple_text(TripleId id) const;
    bool relation_usable(ClassId id) const;  // registered and not excluded
};

// Loads a JSON-lines triple corpus: one {"head","relation","tail"} object
// per line. Names are case-folded, duplicates collapse to the first-seen
// triple, and lines whose relation is excluded are dropped (counted).
Corpus load_corpus(const std::filesystem::path& path,
                   const std::vector<std::string>& excluded = kDefaultExcludedRelations);

struct Dataset {
    std::vector<ImageRecord> records;  // sorted by image_id
    int dropped_gt_relations = 0;      // ground-truth entries removed by the exclusion list
};

// Loads a JSON-lines dataset manifest, one record per line:
//   {"image_id","image","segmap","gt_relations":[str],"gt_triples":[[int,str,int]]}
// Relative file paths resolve against the manifest directory. Every
// referenced file must exist and image/segmap dimensions must agree.
Dataset load_dataset(const std::filesystem::path& manifest, const Corpus& corpus);

// Registry snapshots round-trip through a small JSON file.
void save_registries(const Corpus& corpus, const std::filesystem::path& path);
std::pair<Registry, Registry> load_registries(const std::filesystem::path& path);

}  // namespace relgen
