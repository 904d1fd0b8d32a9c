#include "relgen/segmentation.hpp"

#include <algorithm>
#include <map>

#include <json.hpp>

#include "io_util.hpp"
#include "relgen/error.hpp"

namespace relgen {

using nlohmann::json;

SegmentMap segmap_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw_parse(std::string("segmap: ") + e.what());
    }
    if (!j.is_object() || !j.contains("width") || !j.contains("height") || !j.contains("runs"))
        throw_parse("segmap: expected {\"width\",\"height\",\"runs\"}");

    SegmentMap map;
    map.width = j["width"].get<int>();
    map.height = j["height"].get<int>();
    if (map.width <= 0 || map.height <= 0) throw_parse("segmap: dimensions must be positive");
    const int64_t total = map.pixel_count();
    map.class_ids.reserve(static_cast<size_t>(total));
    map.instance_ids.reserve(static_cast<size_t>(total));

    std::map<int32_t, int32_t> instance_class;
    if (!j["runs"].is_array()) throw_parse("segmap: runs must be an array");
    for (const auto& run : j["runs"]) {
        if (!run.is_array() || run.size() != 3)
            throw_parse("segmap: runs must be [length, class_id, instance_id]");
        int64_t len = run[0].get<int64_t>();
        int32_t class_id = run[1].get<int32_t>();
        int32_t instance_id = run[2].get<int32_t>();
        if (len <= 0) throw_parse("segmap: run length must be positive");
        if (instance_id < 0) throw_parse("segmap: instance ids must be >= 0");
        if (instance_id != 0) {
            auto [it, inserted] = instance_class.emplace(instance_id, class_id);
            if (!inserted && it->second != class_id)
                throw_parse("segmap: instance " + std::to_string(instance_id) +
                            " maps to classes " + std::to_string(it->second) + " and " +
                            std::to_string(class_id));
        }
        if (static_cast<int64_t>(map.class_ids.size()) + len > total)
            throw_parse("segmap: runs overflow " + std::to_string(total) + " pixels");
        map.class_ids.insert(map.class_ids.end(), static_cast<size_t>(len), class_id);
        map.instance_ids.insert(map.instance_ids.end(), static_cast<size_t>(len), instance_id);
    }
    if (static_cast<int64_t>(map.class_ids.size()) != total)
        throw_parse("segmap: runs cover " + std::to_string(map.class_ids.size()) + " of " +
                    std::to_string(total) + " pixels");
    return map;
}

std::string segmap_to_json(const SegmentMap& map) {
    json runs = json::array();
    const size_t total = static_cast<size_t>(map.pixel_count());
    size_t i = 0;
    while (i < total) {
        size_t j = i;
        while (j < total && map.class_ids[j] == map.class_ids[i] &&
               map.instance_ids[j] == map.instance_ids[i])
            ++j;
        runs.push_back({j - i, map.class_ids[i], map.instance_ids[i]});
        i = j;
    }
    json out{{"width", map.width}, {"height", map.height}, {"runs", runs}};
    return out.dump() + "\n";
}

SegmentMap load_segmap(const std::filesystem::path& path) {
    try {
        return segmap_from_json(read_file(path));
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::io) throw;
        throw Error(e.kind(), path.string() + ": " + e.what());
    }
}

void save_segmap(const SegmentMap& map, const std::filesystem::path& path) {
    write_file(path, segmap_to_json(map));
}

std::vector<Segment> extract_segments(const SegmentMap& map) {
    std::map<int32_t, Segment> by_instance;
    const size_t total = static_cast<size_t>(map.pixel_count());
    for (size_t i = 0; i < total; ++i) {
        int32_t instance = map.instance_ids[i];
        if (instance == 0) continue;
        auto [it, inserted] = by_instance.try_emplace(
            instance, Segment{instance, map.class_ids[i], 0, 0.0});
        if (!inserted && it->second.class_id != map.class_ids[i])
            throw_invalid("segmap: instance " + std::to_string(instance) + " maps to classes " +
                          std::to_string(it->second.class_id) + " and " +
                          std::to_string(map.class_ids[i]));
        ++it->second.pixel_count;
    }
    std::vector<Segment> segments;
    segments.reserve(by_instance.size());
    for (auto& [_, seg] : by_instance) {
        seg.area_ratio =
            static_cast<double>(seg.pixel_count) / static_cast<double>(map.pixel_count());
        segments.push_back(seg);
    }
    return segments;
}

std::vector<Segment> select_subjects(const std::vector<Segment>& segments, int k) {
    if (k != kAllSubjects && k < 1) throw_invalid("subject count must be >= 1 or ALL");
    std::vector<Segment> sorted = segments;
    std::sort(sorted.begin(), sorted.end(), [](const Segment& a, const Segment& b) {
        if (a.area_ratio != b.area_ratio) return a.area_ratio > b.area_ratio;
        return a.instance_id < b.instance_id;
    });
    if (k != kAllSubjects && static_cast<int>(sorted.size()) > k)
        sorted.resize(static_cast<size_t>(k));
    return sorted;
}

std::vector<SubjectObjectPair> candidate_pairs(const std::vector<Segment>& selected,
                                               const std::vector<Segment>& all,
                                               bool objects_from_selected) {
    const std::vector<Segment>& object_pool = objects_from_selected ? selected : all;
    std::vector<int32_t> object_ids;
    object_ids.reserve(object_pool.size());
    for (const Segment& seg : object_pool) object_ids.push_back(seg.instance_id);
    std::sort(object_ids.begin(), object_ids.end());

    std::vector<SubjectObjectPair> pairs;
    for (const Segment& subject : selected) {
        for (int32_t object : object_ids) {
            if (object == subject.instance_id) continue;
            pairs.push_back({subject.instance_id, object});
        }
    }
    return pairs;
}

}  // namespace relgen
