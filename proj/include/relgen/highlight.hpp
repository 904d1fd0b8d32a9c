#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "relgen/segmentation.hpp"

namespace relgen {

struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> pixels;  // row-major RGB triplets, 3 * width * height

    size_t offset(int x, int y) const { return (static_cast<size_t>(y) * width + x) * 3; }

    bool operator==(const RgbImage&) const = default;
};

enum class HighlightMode { none, grey, random_colour, specific_colour };

HighlightMode highlight_mode_from_string(const std::string& s);
const char* to_string(HighlightMode mode);

// Binary P6 PPM, maxval 255, lossless round-trip.
RgbImage load_ppm(const std::filesystem::path& path);
void save_ppm(const RgbImage& image, const std::filesystem::path& path);

// Model-input image variant. Pixel rules by segment membership:
//   none            copy of the input
//   grey            background pixels to Rec.601 luma, subject/object kept
//   specific_colour background grey; subject 50/50-blended with red
//                   (255,0,0), object with blue (0,0,255)
//   random_colour   as specific_colour with both tints drawn from the
//                   "highlight" Lcg64 stream of `seed` (subject first)
// Luma and blends round half-up and clamp to [0, 255].
RgbImage apply_highlight(const RgbImage& image, const SegmentMap& map,
                         int32_t subject_instance, int32_t object_instance,
                         HighlightMode mode, uint64_t seed = 0);

// round(0.299 R + 0.587 G + 0.114 B), half-up.
uint8_t luma601(uint8_t r, uint8_t g, uint8_t b);

}  // namespace relgen
