#include "relgen/synth.hpp"

#include <array>
#include <cstdio>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "io_util.hpp"
#include "relgen/corpus.hpp"
#include "relgen/error.hpp"
#include "relgen/highlight.hpp"
#include "relgen/rng.hpp"
#include "relgen/scoring.hpp"
#include "relgen/segmentation.hpp"

namespace relgen {

using nlohmann::json;

namespace {

const std::vector<std::string> kObjectPool = {
    "person",     "dog",          "cat",           "horse",
    "car",        "bicycle",      "skateboard",    "surfboard",
    "pizza",      "chair",        "laptop",        "frisbee",
    "baseball bat", "traffic light", "fire hydrant", "tennis racket",
};

const std::vector<std::string> kRelationPool = {
    "holding",      "riding",       "eating",       "watching",
    "driving on",   "sitting on",   "standing on",  "jumping over",
    "playing with", "looking at",   "carrying",     "chasing",
};

constexpr int kSegmentsPerImage = 6;
constexpr int kGroundTruthPerImage = 3;
constexpr int kDecoysPerImage = 2;
constexpr std::array<double, 3> kGroundTruthWeights = {8.0, 4.0, 2.0};
constexpr double kDecoyWeight = 0.25;

struct NameTriple {
    std::string head, relation, tail;
};

struct InstanceTriple {
    int subject = 0;
    std::string relation;
    int object = 0;
};

struct ImagePlan {
    std::string image_id;
    std::vector<std::string> classes;  // one per strip, instance id = index + 1
    std::vector<std::array<uint8_t, 3>> colours;
    std::vector<NameTriple> triples;  // ground truth first, then decoys
    std::vector<InstanceTriple> gt;
};

// Picks n distinct indices below `size`, in draw order.
std::vector<int> draw_distinct(Lcg64& rng, int size, int n) {
    std::vector<int> pool(static_cast<size_t>(size));
    for (int i = 0; i < size; ++i) pool[static_cast<size_t>(i)] = i;
    std::vector<int> out;
    out.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        uint32_t j = rng.next_below(static_cast<uint32_t>(pool.size()));
        out.push_back(pool[j]);
        pool.erase(pool.begin() + j);
    }
    return out;
}

ImagePlan plan_image(Lcg64& rng, int index) {
    ImagePlan plan;
    char id[32];
    std::snprintf(id, sizeof(id), "img_%04d", index);
    plan.image_id = id;

    for (int k : draw_distinct(rng, static_cast<int>(kObjectPool.size()), kSegmentsPerImage))
        plan.classes.push_back(kObjectPool[static_cast<size_t>(k)]);
    for (int s = 0; s < kSegmentsPerImage; ++s)
        plan.colours.push_back({rng.next_byte(), rng.next_byte(), rng.next_byte()});

    std::vector<int> relations =
        draw_distinct(rng, static_cast<int>(kRelationPool.size()), kGroundTruthPerImage);
    for (int j = 0; j < kGroundTruthPerImage; ++j) {
        int subject_instance = j + 1;  // the three largest strips, in rank order
        uint64_t other = rng.next_below(kSegmentsPerImage - 1);
        int object_instance = static_cast<int>(other) + 1;
        if (object_instance >= subject_instance) ++object_instance;
        const std::string& rel = kRelationPool[static_cast<size_t>(relations[j])];
        plan.triples.push_back({plan.classes[static_cast<size_t>(subject_instance - 1)], rel,
                                plan.classes[static_cast<size_t>(object_instance - 1)]});
        plan.gt.push_back({subject_instance, rel, object_instance});
    }

    auto is_ground_truth = [&](const NameTriple& t) {
        for (int j = 0; j < kGroundTruthPerImage; ++j) {
            const NameTriple& g = plan.triples[static_cast<size_t>(j)];
            if (g.head == t.head && g.relation == t.relation && g.tail == t.tail) return true;
        }
        return false;
    };
    for (int d = 0; d < kDecoysPerImage; ++d) {
        for (int attempt = 0;; ++attempt) {
            if (attempt >= 100) throw_state("decoy sampling did not converge");
            size_t head = rng.next_below(kSegmentsPerImage);
            size_t tail = rng.next_below(kSegmentsPerImage);
            size_t rel = rng.next_below(static_cast<uint32_t>(kRelationPool.size()));
            if (head == tail) continue;
            NameTriple decoy{plan.classes[head], kRelationPool[rel], plan.classes[tail]};
            if (is_ground_truth(decoy)) continue;
            plan.triples.push_back(decoy);
            break;
        }
    }

    // Every strip class must occur in some triple, or the corpus registries
    // would lack classes that the segment maps name. Cover the leftovers
    // with extra decoy-weight triples.
    auto covered = [&plan](const std::string& cls) {
        for (const NameTriple& t : plan.triples)
            if (t.head == cls || t.tail == cls) return true;
        return false;
    };
    for (int s = 0; s < kSegmentsPerImage; ++s) {
        const std::string& cls = plan.classes[static_cast<size_t>(s)];
        if (covered(cls)) continue;
        int tail = static_cast<int>(rng.next_below(kSegmentsPerImage - 1));
        if (tail >= s) ++tail;
        size_t rel = rng.next_below(static_cast<uint32_t>(kRelationPool.size()));
        // An uncovered head cannot collide with a ground-truth triple.
        plan.triples.push_back(
            {cls, kRelationPool[rel], plan.classes[static_cast<size_t>(tail)]});
    }
    return plan;
}

// Strictly decreasing strip widths summing to `width`; the slack all lands
// on the first strip so the area order matches the instance order.
std::vector<int> strip_widths(int width) {
    std::vector<int> widths(kSegmentsPerImage);
    int base_total = 0;
    for (int s = 0; s < kSegmentsPerImage; ++s) {
        widths[static_cast<size_t>(s)] = kSegmentsPerImage - s;
        base_total += kSegmentsPerImage - s;
    }
    widths[0] += width - base_total;
    return widths;
}

SegmentMap build_segmap(const ImagePlan& plan, const Corpus& corpus, int width, int height) {
    SegmentMap map;
    map.width = width;
    map.height = height;
    map.class_ids.resize(static_cast<size_t>(width) * height);
    map.instance_ids.resize(static_cast<size_t>(width) * height);

    std::vector<int> widths = strip_widths(width);
    std::vector<int32_t> class_of_column(static_cast<size_t>(width));
    std::vector<int32_t> instance_of_column(static_cast<size_t>(width));
    int x = 0;
    for (int s = 0; s < kSegmentsPerImage; ++s) {
        auto cls = corpus.objects.find(plan.classes[static_cast<size_t>(s)]);
        if (!cls) throw_state("synthetic class missing from its own corpus");
        for (int i = 0; i < widths[static_cast<size_t>(s)]; ++i, ++x) {
            class_of_column[static_cast<size_t>(x)] = *cls;
            instance_of_column[static_cast<size_t>(x)] = s + 1;
        }
    }
    for (int y = 0; y < height; ++y) {
        for (int col = 0; col < width; ++col) {
            size_t at = static_cast<size_t>(y) * width + col;
            map.class_ids[at] = class_of_column[static_cast<size_t>(col)];
            map.instance_ids[at] = instance_of_column[static_cast<size_t>(col)];
        }
    }
    return map;
}

RgbImage build_image(const ImagePlan& plan, const SegmentMap& map) {
    RgbImage image;
    image.width = map.width;
    image.height = map.height;
    image.pixels.resize(static_cast<size_t>(map.width) * map.height * 3);
    for (int y = 0; y < map.height; ++y) {
        for (int x = 0; x < map.width; ++x) {
            const auto& c = plan.colours[static_cast<size_t>(map.instance_at(x, y) - 1)];
            size_t at = image.offset(x, y);
            image.pixels[at] = c[0];
            image.pixels[at + 1] = c[1];
            image.pixels[at + 2] = c[2];
        }
    }
    return image;
}

std::string run_conf_text(const SynthConfig& cfg) {
    std::string out;
    out += "# default pipeline configuration for this dataset\n";
    out += "triples = triples.jsonl\n";
    out += "dataset = dataset.jsonl\n";
    out += "weights = weights.json\n";
    out += "scorer = weights\n";
    out += "oh = specific\n";
    out += "os = 5\n";
    out += "rtg = restricted\n";
    out += "beam = 3\n";
    out += "agg = max\n";
    out += "seed = " + std::to_string(cfg.seed) + "\n";
    out += "jobs = 1\n";
    return out;
}

}  // namespace

SynthSummary generate_synthetic_dataset(const SynthConfig& cfg) {
    if (cfg.images < 1) throw_invalid("images must be >= 1");
    if (cfg.height < 1) throw_invalid("height must be >= 1");
    int min_width = kSegmentsPerImage * (kSegmentsPerImage + 1) / 2;
    if (cfg.width < min_width)
        throw_invalid("width must be >= " + std::to_string(min_width) +
                      " to fit the segment strips");
    if (cfg.out_dir.empty()) throw_invalid("out_dir is required");

    Lcg64 rng(cfg.seed, "synth");
    std::vector<ImagePlan> plans;
    plans.reserve(static_cast<size_t>(cfg.images));
    for (int i = 0; i < cfg.images; ++i) plans.push_back(plan_image(rng, i));

    std::filesystem::create_directories(cfg.out_dir / "images");
    std::filesystem::create_directories(cfg.out_dir / "segmaps");

    std::string triples_text;
    auto emit = [&triples_text](const NameTriple& t) {
        json line = {{"head", t.head}, {"relation", t.relation}, {"tail", t.tail}};
        triples_text += line.dump() + "\n";
    };
    for (const ImagePlan& plan : plans)
        for (const NameTriple& t : plan.triples) emit(t);
    // Two lines with excluded relations, so loading this corpus exercises the
    // drop-and-count path.
    emit({plans[0].classes[0], "on", plans[0].classes[1]});
    emit({plans[0].classes[1], "in front of", plans[0].classes[2]});
    write_file(cfg.out_dir / "triples.jsonl", triples_text);

    // Reload the corpus we just wrote: class and triple ids used below are
    // then consistent with any later load by construction.
    Corpus corpus = load_corpus(cfg.out_dir / "triples.jsonl");
    std::unordered_map<std::string, TripleId> triple_ids;
    for (const Triple& t : corpus.triples) triple_ids[corpus.triple_text(t.id)] = t.id;
    auto id_of = [&](const NameTriple& t) {
        auto it = triple_ids.find(t.head + " " + t.relation + " " + t.tail);
        if (it == triple_ids.end()) throw_state("synthetic triple missing from its own corpus");
        return it->second;
    };

    std::string dataset_text;
    json weights = json::object();
    for (const ImagePlan& plan : plans) {
        SegmentMap map = build_segmap(plan, corpus, cfg.width, cfg.height);
        RgbImage image = build_image(plan, map);
        std::string image_rel = "images/" + plan.image_id + ".ppm";
        std::string segmap_rel = "segmaps/" + plan.image_id + ".json";
        save_ppm(image, cfg.out_dir / image_rel);
        save_segmap(map, cfg.out_dir / segmap_rel);

        json gt_relations = json::array();
        json gt_triples = json::array();
        for (const InstanceTriple& t : plan.gt) {
            gt_relations.push_back(t.relation);
            gt_triples.push_back({t.subject, t.relation, t.object});
        }
        json record = {{"image_id", plan.image_id}, {"image", image_rel},
                       {"segmap", segmap_rel},      {"gt_relations", gt_relations},
                       {"gt_triples", gt_triples}};
        dataset_text += record.dump() + "\n";

        json image_weights = json::object();
        for (size_t j = 0; j < plan.triples.size(); ++j) {
            double w = j < kGroundTruthWeights.size() ? kGroundTruthWeights[j] : kDecoyWeight;
            image_weights[std::to_string(id_of(plan.triples[j]))] = w;
        }
        weights[plan.image_id] = std::move(image_weights);
    }
    write_file(cfg.out_dir / "dataset.jsonl", dataset_text);
    write_file(cfg.out_dir / "weights.json", weights.dump(2) + "\n");
    write_file(cfg.out_dir / "run.conf", run_conf_text(cfg));

    Dataset dataset = load_dataset(cfg.out_dir / "dataset.jsonl", corpus);

    SynthSummary summary;
    summary.images = static_cast<int>(dataset.records.size());
    summary.triples = static_cast<int>(corpus.triples.size());
    summary.objects = corpus.objects.size();
    summary.relations = corpus.relations.size();
    return summary;
}

}  // namespace relgen
