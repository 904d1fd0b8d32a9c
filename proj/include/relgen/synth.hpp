#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

namespace relgen {

// Desk-scale synthetic dataset generator. Everything is a pure function of
// the seed: two runs with the same seed produce byte-identical trees.
//
// The generated ground truth is recoverable by the restricted pipeline: each
// image's weights rank its three ground-truth triples first (with distinct
// relations), and the subjects of those triples are always the three largest
// segments by area.
struct SynthConfig {
    uint64_t seed = 42;
    int images = 32;
    int width = 32;
    int height = 32;
    std::filesystem::path out_dir;
};

struct SynthSummary {
    int images = 0;
    int triples = 0;
    int objects = 0;
    int relations = 0;
};

// Writes triples.jsonl, dataset.jsonl, weights.json, run.conf and the
// images/ and segmaps/ trees under cfg.out_dir.
SynthSummary generate_synthetic_dataset(const SynthConfig& cfg);

}  // namespace relgen
