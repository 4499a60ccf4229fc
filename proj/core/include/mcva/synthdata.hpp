#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mcva/flow_io.hpp"
#include "mcva/image_io.hpp"

namespace mcva {

// Motion model for sample_flow_field: random affine (translation, rotation,
// scale) plus a smooth low-frequency perturbation, capped in magnitude.
struct FlowParams {
    double max_translation = 8.0; // px
    double max_rotation_deg = 10.0;
    double scale_min = 0.9, scale_max = 1.1;
    double max_perturbation = 2.0; // px
    double magnitude_cap = 12.0;   // px
};

struct ScenePair {
    Image frame1, frame2;
    std::optional<Flow> flow_gt;
    std::uint64_t seed = 0;
};

// Multi-octave value noise plus random filled polygons, clipped to [0,1].
Image make_texture(std::uint64_t seed, int h, int w);

// Random smooth flow field under `params`; deterministic per seed.
Flow sample_flow_field(std::uint64_t seed, int h, int w, const FlowParams& params = {});

// Inverse bilinear warp: img'(x) = img(x + flow(x)), edge-clamped sampling.
Image warp_image(const Image& img, const Flow& flow);

// frame1 = texture, frame2 = warp_image(frame1, flow_gt) + Gaussian noise.
ScenePair make_scene_pair(std::uint64_t seed, int h, int w, bool labeled,
                          double noise_sigma, const FlowParams& params = {});

// ---- dataset directory -----------------------------------------------------
// Layout: pair_%05d/frame1.ppm, frame2.ppm, optional flow.flo, plus
// manifest.txt (key=value: seed, count, width, height, noise).

struct DatasetManifest {
    std::uint64_t seed = 0;
    int count = 0;
    int width = 0, height = 0;
    double noise = 0.01;
    bool labeled = false;
};

void generate_dataset(const std::string& dir, const DatasetManifest& manifest);

struct Dataset {
    std::string dir;
    DatasetManifest manifest;

    int size() const { return manifest.count; }
    ScenePair load(int index) const; // throws DatasetError on missing files
};

Dataset open_dataset(const std::string& dir);

} // namespace mcva
