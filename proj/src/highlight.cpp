#include "relgen/highlight.hpp"

#include <array>
#include <cmath>
#include <fstream>

#include "io_util.hpp"
#include "relgen/error.hpp"
#include "relgen/rng.hpp"

namespace relgen {

HighlightMode highlight_mode_from_string(const std::string& s) {
    if (s == "none") return HighlightMode::none;
    if (s == "grey") return HighlightMode::grey;
    if (s == "random") return HighlightMode::random_colour;
    if (s == "specific") return HighlightMode::specific_colour;
    throw_invalid("unknown highlight mode \"" + s + "\"");
}

const char* to_string(HighlightMode mode) {
    switch (mode) {
        case HighlightMode::none: return "none";
        case HighlightMode::grey: return "grey";
        case HighlightMode::random_colour: return "random";
        case HighlightMode::specific_colour: return "specific";
    }
    return "?";
}

namespace {

// Skips whitespace and '#' comment lines between PPM header tokens.
int read_header_int(std::istream& in, const std::filesystem::path& path) {
    for (;;) {
        int c = in.peek();
        if (c == '#') {
            std::string comment;
            std::getline(in, comment);
        } else if (std::isspace(c)) {
            in.get();
        } else {
            break;
        }
    }
    int value = 0;
    if (!(in >> value)) throw_parse(path.string() + ": malformed PPM header");
    return value;
}

uint8_t round_clamp(double x) {
    double r = std::floor(x + 0.5);  // half-up
    if (r < 0.0) r = 0.0;
    if (r > 255.0) r = 255.0;
    return static_cast<uint8_t>(r);
}

uint8_t blend50(uint8_t orig, uint8_t tint) {
    return round_clamp(0.5 * orig + 0.5 * tint);
}

}  // namespace

uint8_t luma601(uint8_t r, uint8_t g, uint8_t b) {
    return round_clamp(0.299 * r + 0.587 * g + 0.114 * b);
}

RgbImage load_ppm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw_io("cannot open " + path.string());
    char m0 = 0, m1 = 0;
    in.get(m0);
    in.get(m1);
    if (!in || m0 != 'P' || m1 != '6') throw_parse(path.string() + ": not a P6 PPM");
    RgbImage image;
    image.width = read_header_int(in, path);
    image.height = read_header_int(in, path);
    int maxval = read_header_int(in, path);
    if (image.width <= 0 || image.height <= 0)
        throw_parse(path.string() + ": bad dimensions");
    if (maxval != 255) throw_parse(path.string() + ": maxval must be 255");
    in.get();  // single whitespace after maxval
    size_t bytes = static_cast<size_t>(image.width) * image.height * 3;
    image.pixels.resize(bytes);
    in.read(reinterpret_cast<char*>(image.pixels.data()), static_cast<std::streamsize>(bytes));
    if (static_cast<size_t>(in.gcount()) != bytes)
        throw_parse(path.string() + ": truncated pixel data");
    return image;
}

void save_ppm(const RgbImage& image, const std::filesystem::path& path) {
    if (image.pixels.size() != static_cast<size_t>(image.width) * image.height * 3)
        throw_invalid("image buffer does not match dimensions");
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw_io("cannot write " + path.string());
    out << "P6\n" << image.width << " " << image.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(image.pixels.data()),
              static_cast<std::streamsize>(image.pixels.size()));
    if (!out) throw_io("short write to " + path.string());
}

RgbImage apply_highlight(const RgbImage& image, const SegmentMap& map, int32_t subject_instance,
                         int32_t object_instance, HighlightMode mode, uint64_t seed) {
    if (image.width != map.width || image.height != map.height)
        throw_invalid("image and segment map dimensions differ");
    if (subject_instance == object_instance)
        throw_invalid("subject and object instance must differ");

    bool subject_seen = false, object_seen = false;
    for (int32_t instance : map.instance_ids) {
        subject_seen |= instance == subject_instance;
        object_seen |= instance == object_instance;
    }
    if (!subject_seen)
        throw_invalid("subject instance " + std::to_string(subject_instance) + " not in segment map");
    if (!object_seen)
        throw_invalid("object instance " + std::to_string(object_instance) + " not in segment map");

    RgbImage out = image;
    if (mode == HighlightMode::none) return out;

    std::array<uint8_t, 3> subject_tint{255, 0, 0};
    std::array<uint8_t, 3> object_tint{0, 0, 255};
    if (mode == HighlightMode::random_colour) {
        Lcg64 rng(seed, "highlight");
        for (auto& c : subject_tint) c = rng.next_byte();
        for (auto& c : object_tint) c = rng.next_byte();
    }
    const bool tinted = mode != HighlightMode::grey;

    const size_t total = static_cast<size_t>(map.pixel_count());
    for (size_t i = 0; i < total; ++i) {
        uint8_t* px = &out.pixels[i * 3];
        int32_t instance = map.instance_ids[i];
        if (instance == subject_instance) {
            if (tinted) {
                px[0] = blend50(px[0], subject_tint[0]);
                px[1] = blend50(px[1], subject_tint[1]);
                px[2] = blend50(px[2], subject_tint[2]);
            }
        } else if (instance == object_instance) {
            if (tinted) {
                px[0] = blend50(px[0], object_tint[0]);
                px[1] = blend50(px[1], object_tint[1]);
                px[2] = blend50(px[2], object_tint[2]);
            }
        } else {
            uint8_t y = luma601(px[0], px[1], px[2]);
            px[0] = px[1] = px[2] = y;
        }
    }
    return out;
}

}  // namespace relgen
