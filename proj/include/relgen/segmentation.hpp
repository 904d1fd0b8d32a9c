#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace relgen {

// Per-pixel (class id, instance id) raster. Instance id 0 marks unlabeled
// pixels; every nonzero instance maps to exactly one class id.
struct SegmentMap {
    int width = 0;
    int height = 0;
    std::vector<int32_t> class_ids;     // row-major, width * height
    std::vector<int32_t> instance_ids;  // row-major, width * height

    int64_t pixel_count() const { return static_cast<int64_t>(width) * height; }
    int32_t instance_at(int x, int y) const { return instance_ids[static_cast<size_t>(y) * width + x]; }
    int32_t class_at(int x, int y) const { return class_ids[static_cast<size_t>(y) * width + x]; }

    bool operator==(const SegmentMap&) const = default;
};

struct Segment {
    int32_t instance_id = 0;
    int32_t class_id = 0;
    int64_t pixel_count = 0;
    double area_ratio = 0.0;  // pixel_count / (width * height), in (0, 1]
};

// RLE JSON: {"width":W,"height":H,"runs":[[len,class_id,instance_id],...]}
// over the row-major raster; runs may cross row boundaries.
SegmentMap segmap_from_json(const std::string& text);
std::string segmap_to_json(const SegmentMap& map);  // canonical maximal runs
SegmentMap load_segmap(const std::filesystem::path& path);
void save_segmap(const SegmentMap& map, const std::filesystem::path& path);

// One Segment per nonzero instance id, ascending instance id.
std::vector<Segment> extract_segments(const SegmentMap& map);

inline constexpr int kAllSubjects = -1;
inline constexpr int kDefaultSubjectTopK = 5;

// Top-k segments by area ratio descending, ties by ascending instance id;
// k = kAllSubjects keeps every segment.
std::vector<Segment> select_subjects(const std::vector<Segment>& segments,
                                     int k = kDefaultSubjectTopK);

struct SubjectObjectPair {
    int32_t subject = 0;  // instance id
    int32_t object = 0;   // instance id

    bool operator==(const SubjectObjectPair&) const = default;
};

// Directed pairs: subject from the selected list (rank order), object from
// `objects_from_selected ? selected : all`, subject != object. Ordered by
// (subject rank, object instance id).
std::vector<SubjectObjectPair> candidate_pairs(const std::vector<Segment>& selected,
                                               const std::vector<Segment>& all,
                                               bool objects_from_selected = false);

}  // namespace relgen
