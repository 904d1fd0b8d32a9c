#include "relgen/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <tuple>

#include <json.hpp>

#include "io_util.hpp"
#include "relgen/error.hpp"

namespace relgen {

using nlohmann::json;

const std::vector<std::string> kDefaultExcludedRelations = {
    "over", "in front of", "beside", "on", "in", "attached to",
};

ClassId Registry::add(const std::string& name, bool excluded) {
    if (name.empty()) throw_invalid("registry name must be non-empty");
    if (auto it = ids_.find(name); it != ids_.end()) return it->second;
    ClassId id = static_cast<ClassId>(names_.size());
    names_.push_back(name);
    excluded_.push_back(excluded);
    ids_.emplace(name, id);
    return id;
}

std::optional<ClassId> Registry::find(const std::string& name) const {
    auto it = ids_.find(name);
    if (it == ids_.end()) return std::nullopt;
    return it->second;
}

const std::string& Registry::name(ClassId id) const {
    if (id < 0 || id >= size()) throw_invalid("registry id out of range: " + std::to_string(id));
    return names_[static_cast<size_t>(id)];
}

bool Registry::excluded(ClassId id) const {
    if (id < 0 || id >= size()) throw_invalid("registry id out of range: " + std::to_string(id));
    return excluded_[static_cast<size_t>(id)];
}

std::string Corpus::triple_text(TripleId id) const {
    if (id < 0 || id >= static_cast<TripleId>(triples.size()))
        throw_invalid("triple id out of range: " + std::to_string(id));
    const Triple& t = triples[static_cast<size_t>(id)];
    return objects.name(t.head) + " " + relations.name(t.relation) + " " + objects.name(t.tail);
}

bool Corpus::relation_usable(ClassId id) const {
    return id >= 0 && id < relations.size() && !relations.excluded(id);
}

namespace {

json parse_line(const std::filesystem::path& path, int line_no, const std::string& line) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::parse_error& e) {
        throw_parse(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (!j.is_object())
        throw_parse(path.string() + ":" + std::to_string(line_no) + ": expected a JSON object");
    return j;
}

void check_keys(const json& j, const std::set<std::string>& allowed,
                const std::filesystem::path& path, int line_no) {
    for (const auto& item : j.items()) {
        if (!allowed.count(item.key()))
            throw_parse(path.string() + ":" + std::to_string(line_no) + ": unknown key \"" +
                        item.key() + "\"");
    }
}

std::string string_field(const json& j, const char* key, const std::filesystem::path& path,
                         int line_no) {
    if (!j.contains(key) || !j[key].is_string())
        throw_parse(path.string() + ":" + std::to_string(line_no) + ": missing string field \"" +
                    key + "\"");
    return j[key].get<std::string>();
}

}  // namespace

Corpus load_corpus(const std::filesystem::path& path, const std::vector<std::string>& excluded) {
    Corpus corpus;
    for (const std::string& name : excluded) corpus.excluded_names.push_back(lowercase(name));
    std::set<std::string> excluded_set(corpus.excluded_names.begin(), corpus.excluded_names.end());

    std::set<std::tuple<ClassId, ClassId, ClassId>> seen;
    for_each_line(path, [&](int line_no, const std::string& line) {
        json j = parse_line(path, line_no, line);
        check_keys(j, {"head", "relation", "tail"}, path, line_no);
        std::string head = lowercase(string_field(j, "head", path, line_no));
        std::string relation = lowercase(string_field(j, "relation", path, line_no));
        std::string tail = lowercase(string_field(j, "tail", path, line_no));
        if (head.empty() || relation.empty() || tail.empty())
            throw_parse(path.string() + ":" + std::to_string(line_no) + ": empty name");

        if (excluded_set.count(relation)) {
            // Register the name (flagged) so annotations mentioning it can be
            // diagnosed, but keep its triples out of the corpus.
            corpus.relations.add(relation, /*excluded=*/true);
            ++corpus.dropped_excluded;
            return;
        }

        ClassId h = corpus.objects.add(head);
        ClassId r = corpus.relations.add(relation);
        ClassId t = corpus.objects.add(tail);
        if (!seen.insert({h, r, t}).second) return;  // duplicate line

        Triple triple{h, r, t, static_cast<TripleId>(corpus.triples.size())};
        corpus.triples.push_back(triple);
    });
    return corpus;
}

namespace {

// Reads just enough of each referenced file to validate existence and
// dimensions.
std::pair<int, int> ppm_dimensions(const std::filesystem::path& path, const std::string& image_id) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw_io("image " + image_id + ": cannot open " + path.string());
    std::string magic;
    int w = 0, h = 0;
    in >> magic >> w >> h;
    if (!in || magic != "P6" || w <= 0 || h <= 0)
        throw_parse("image " + image_id + ": " + path.string() + " is not a P6 PPM");
    return {w, h};
}

std::pair<int, int> segmap_dimensions(const std::filesystem::path& path,
                                      const std::string& image_id) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw_parse("image " + image_id + ": " + path.string() + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("width") || !j.contains("height"))
        throw_parse("image " + image_id + ": " + path.string() + ": missing dimensions");
    return {j["width"].get<int>(), j["height"].get<int>()};
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& manifest, const Corpus& corpus) {
    Dataset dataset;
    std::set<std::string> excluded_set(corpus.excluded_names.begin(),
                                       corpus.excluded_names.end());
    std::filesystem::path base = manifest.has_parent_path()
                                     ? manifest.parent_path()
                                     : std::filesystem::path(".");
    std::set<std::string> seen_ids;

    auto resolve = [&](const std::string& p) {
        std::filesystem::path fp(p);
        return fp.is_absolute() ? fp : base / fp;
    };

    auto relation_id = [&](const std::string& raw, const std::string& image_id,
                           int line_no) -> std::optional<ClassId> {
        std::string name = lowercase(raw);
        if (excluded_set.count(name)) {
            ++dataset.dropped_gt_relations;
            return std::nullopt;
        }
        auto id = corpus.relations.find(name);
        if (!id || corpus.relations.excluded(*id))
            throw_parse(manifest.string() + ":" + std::to_string(line_no) + ": image " + image_id +
                        ": unknown relation \"" + name + "\"");
        return id;
    };

    for_each_line(manifest, [&](int line_no, const std::string& line) {
        json j = parse_line(manifest, line_no, line);
        check_keys(j, {"image_id", "image", "segmap", "gt_relations", "gt_triples"}, manifest,
                   line_no);
        ImageRecord rec;
        rec.image_id = string_field(j, "image_id", manifest, line_no);
        if (!seen_ids.insert(rec.image_id).second)
            throw_parse(manifest.string() + ":" + std::to_string(line_no) + ": duplicate image_id " +
                        rec.image_id);
        rec.image_path = resolve(string_field(j, "image", manifest, line_no));
        rec.segmap_path = resolve(string_field(j, "segmap", manifest, line_no));
        rec.annotation.image_id = rec.image_id;

        if (!std::filesystem::exists(rec.image_path))
            throw_io("image " + rec.image_id + ": missing file " + rec.image_path.string());
        if (!std::filesystem::exists(rec.segmap_path))
            throw_io("image " + rec.image_id + ": missing file " + rec.segmap_path.string());
        auto [iw, ih] = ppm_dimensions(rec.image_path, rec.image_id);
        auto [sw, sh] = segmap_dimensions(rec.segmap_path, rec.image_id);
        if (iw != sw || ih != sh)
            throw_invalid("image " + rec.image_id + ": dimension mismatch " + std::to_string(iw) +
                          "x" + std::to_string(ih) + " vs " + std::to_string(sw) + "x" +
                          std::to_string(sh));

        if (!j.contains("gt_relations") || !j["gt_relations"].is_array())
            throw_parse(manifest.string() + ":" + std::to_string(line_no) +
                        ": missing gt_relations array");
        for (const auto& rel : j["gt_relations"]) {
            if (!rel.is_string())
                throw_parse(manifest.string() + ":" + std::to_string(line_no) +
                            ": gt_relations entries must be strings");
            if (auto id = relation_id(rel.get<std::string>(), rec.image_id, line_no))
                rec.annotation.gt_relations.insert(*id);
        }

        if (j.contains("gt_triples")) {
            if (!j["gt_triples"].is_array())
                throw_parse(manifest.string() + ":" + std::to_string(line_no) +
                            ": gt_triples must be an array");
            for (const auto& gt : j["gt_triples"]) {
                if (!gt.is_array() || gt.size() != 3 || !gt[0].is_number_integer() ||
                    !gt[1].is_string() || !gt[2].is_number_integer())
                    throw_parse(manifest.string() + ":" + std::to_string(line_no) +
                                ": gt_triples entries must be [int, str, int]");
                auto id = relation_id(gt[1].get<std::string>(), rec.image_id, line_no);
                if (!id) continue;
                rec.annotation.gt_triples.push_back({gt[0].get<int>(), *id, gt[2].get<int>()});
            }
        }
        dataset.records.push_back(std::move(rec));
    });

    std::sort(dataset.records.begin(), dataset.records.end(),
              [](const ImageRecord& a, const ImageRecord& b) { return a.image_id < b.image_id; });
    return dataset;
}

void save_registries(const Corpus& corpus, const std::filesystem::path& path) {
    json objects = json::array();
    for (const std::string& n : corpus.objects.names()) objects.push_back(n);
    json relations = json::array();
    for (ClassId id = 0; id < corpus.relations.size(); ++id) {
        relations.push_back(
            {{"name", corpus.relations.name(id)}, {"excluded", corpus.relations.excluded(id)}});
    }
    write_file(path, json{{"objects", objects}, {"relations", relations}}.dump(2) + "\n");
}

std::pair<Registry, Registry> load_registries(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw_parse(path.string() + ": " + e.what());
    }
    Registry objects;
    Registry relations;
    for (const auto& n : j.at("objects")) objects.add(n.get<std::string>());
    for (const auto& r : j.at("relations"))
        relations.add(r.at("name").get<std::string>(), r.at("excluded").get<bool>());
    return {objects, relations};
}

}  // namespace relgen
