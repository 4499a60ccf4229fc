#include "mcva/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "mcva/errors.hpp"
#include "mcva/rng.hpp"

namespace fs = std::filesystem;

namespace mcva {

namespace {

// Bilinearly upsampled random lattice, one channel, values in [-1, 1].
std::vector<float> value_noise(Rng& rng, int h, int w, int cell) {
    const int gh = h / cell + 2, gw = w / cell + 2;
    std::vector<float> lattice(static_cast<std::size_t>(gh) * gw);
    for (auto& v : lattice) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    std::vector<float> out(static_cast<std::size_t>(h) * w);
    for (int y = 0; y < h; ++y) {
        const float fy = static_cast<float>(y) / cell;
        const int y0 = static_cast<int>(fy);
        const float ty = fy - y0;
        for (int x = 0; x < w; ++x) {
            const float fx = static_cast<float>(x) / cell;
            const int x0 = static_cast<int>(fx);
            const float tx = fx - x0;
            const float a = lattice[static_cast<std::size_t>(y0) * gw + x0];
            const float b = lattice[static_cast<std::size_t>(y0) * gw + x0 + 1];
            const float c = lattice[static_cast<std::size_t>(y0 + 1) * gw + x0];
            const float d = lattice[static_cast<std::size_t>(y0 + 1) * gw + x0 + 1];
            out[static_cast<std::size_t>(y) * w + x] =
                (1 - ty) * ((1 - tx) * a + tx * b) + ty * ((1 - tx) * c + tx * d);
        }
    }
    return out;
}

float clamp01(float v) { return v < 0.f ? 0.f : (v > 1.f ? 1.f : v); }

} // namespace

Image make_texture(std::uint64_t seed, int h, int w) {
    Rng rng(Rng::mix(seed, 0x7e57));
    Image img;
    img.h = h;
    img.w = w;
    img.data.assign(static_cast<std::size_t>(3) * h * w, 0.5f);

    // octaves of value noise, halving cell size and amplitude
    for (int c = 0; c < 3; ++c) {
        float amplitude = 0.25f;
        int cell = std::max(4, std::min(h, w) / 4);
        for (int oct = 0; oct < 4 && cell >= 2; ++oct) {
            const auto layer = value_noise(rng, h, w, cell);
            for (int i = 0; i < h * w; ++i) {
                img.data[static_cast<std::size_t>(c) * h * w + i] +=
                    amplitude * layer[static_cast<std::size_t>(i)];
            }
            amplitude *= 0.5f;
            cell /= 2;
        }
    }

    // random filled convex quads with constant color offsets
    const int n_poly = 5;
    for (int p = 0; p < n_poly; ++p) {
        const double cy = rng.uniform(0.0, h);
        const double cx = rng.uniform(0.0, w);
        const double radius = rng.uniform(0.08, 0.3) * std::min(h, w);
        const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
        double vy[4], vx[4];
        for (int k = 0; k < 4; ++k) {
            const double ang = phase + k * std::numbers::pi / 2 + rng.uniform(-0.3, 0.3);
            const double r = radius * rng.uniform(0.7, 1.3);
            vy[k] = cy + r * std::sin(ang);
            vx[k] = cx + r * std::cos(ang);
        }
        float shift[3];
        for (float& s : shift) s = static_cast<float>(rng.uniform(-0.35, 0.35));
        const int y_lo = std::max(0, static_cast<int>(std::floor(*std::min_element(vy, vy + 4))));
        const int y_hi = std::min(h - 1, static_cast<int>(std::ceil(*std::max_element(vy, vy + 4))));
        const int x_lo = std::max(0, static_cast<int>(std::floor(*std::min_element(vx, vx + 4))));
        const int x_hi = std::min(w - 1, static_cast<int>(std::ceil(*std::max_element(vx, vx + 4))));
        for (int y = y_lo; y <= y_hi; ++y) {
            for (int x = x_lo; x <= x_hi; ++x) {
                bool inside = true;
                for (int k = 0; k < 4 && inside; ++k) {
                    const int k2 = (k + 1) % 4;
                    const double cross = (vx[k2] - vx[k]) * (y - vy[k]) -
                                         (vy[k2] - vy[k]) * (x - vx[k]);
                    inside = cross >= 0.0;
                }
                if (!inside) continue;
                for (int c = 0; c < 3; ++c) img.at(c, y, x) += shift[c];
            }
        }
    }

    for (auto& v : img.data) v = clamp01(v);
    return img;
}

Flow sample_flow_field(std::uint64_t seed, int h, int w, const FlowParams& params) {
    Rng rng(Rng::mix(seed, 0xF100));
    Flow flow;
    flow.h = h;
    flow.w = w;
    flow.data.assign(static_cast<std::size_t>(2) * h * w, 0.f);

    const double tx = rng.uniform(-params.max_translation, params.max_translation);
    const double ty = rng.uniform(-params.max_translation, params.max_translation);
    const double rot = rng.uniform(-params.max_rotation_deg, params.max_rotation_deg) *
                       std::numbers::pi / 180.0;
    const double s = rng.uniform(params.scale_min, params.scale_max);
    // flow(p) = (A - I) (p - c) + t with A = s R(rot)
    const double a00 = s * std::cos(rot) - 1.0, a01 = -s * std::sin(rot);
    const double a10 = s * std::sin(rot), a11 = s * std::cos(rot) - 1.0;
    const double cy = (h - 1) / 2.0, cx = (w - 1) / 2.0;

    std::vector<float> pu, pv;
    if (params.max_perturbation > 0.0) {
        const int cell = std::max(8, std::min(h, w) / 4);
        pu = value_noise(rng, h, w, cell);
        pv = value_noise(rng, h, w, cell);
    }

    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double dy = y - cy, dx = x - cx;
            double u = a01 * dy + a00 * dx + tx;
            double v = a11 * dy + a10 * dx + ty;
            if (!pu.empty()) {
                u += params.max_perturbation * pu[static_cast<std::size_t>(y) * w + x];
                v += params.max_perturbation * pv[static_cast<std::size_t>(y) * w + x];
            }
            const double mag = std::hypot(u, v);
            if (mag > params.magnitude_cap) {
                u *= params.magnitude_cap / mag;
                v *= params.magnitude_cap / mag;
            }
            flow.u(y, x) = static_cast<float>(u);
            flow.v(y, x) = static_cast<float>(v);
        }
    }
    return flow;
}

Image warp_image(const Image& img, const Flow& flow) {
    if (img.h != flow.h || img.w != flow.w) throw ShapeError("warp_image: size mismatch");
    Image out;
    out.h = img.h;
    out.w = img.w;
    out.data.resize(img.data.size());
    const int h = img.h, w = img.w;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            // edge-clamped bilinear sample at (y + v, x + u)
            double sy = y + flow.v(y, x);
            double sx = x + flow.u(y, x);
            sy = sy < 0 ? 0 : (sy > h - 1 ? h - 1 : sy);
            sx = sx < 0 ? 0 : (sx > w - 1 ? w - 1 : sx);
            const int y0 = static_cast<int>(sy);
            const int x0 = static_cast<int>(sx);
            const int y1 = y0 + 1 < h ? y0 + 1 : y0;
            const int x1 = x0 + 1 < w ? x0 + 1 : x0;
            const float fy = static_cast<float>(sy - y0);
            const float fx = static_cast<float>(sx - x0);
            for (int c = 0; c < 3; ++c) {
                const float v00 = img.at(c, y0, x0), v01 = img.at(c, y0, x1);
                const float v10 = img.at(c, y1, x0), v11 = img.at(c, y1, x1);
                out.at(c, y, x) = (1 - fy) * ((1 - fx) * v00 + fx * v01) +
                                  fy * ((1 - fx) * v10 + fx * v11);
            }
        }
    }
    return out;
}

ScenePair make_scene_pair(std::uint64_t seed, int h, int w, bool labeled,
                          double noise_sigma, const FlowParams& params) {
    ScenePair pair;
    pair.seed = seed;
    pair.frame1 = make_texture(Rng::mix(seed, 1), h, w);
    Flow flow = sample_flow_field(Rng::mix(seed, 2), h, w, params);
    pair.frame2 = warp_image(pair.frame1, flow);
    if (noise_sigma > 0.0) {
        Rng rng(Rng::mix(seed, 3));
        for (auto& v : pair.frame2.data) {
            v = clamp01(v + static_cast<float>(rng.normal() * noise_sigma));
        }
    }
    if (labeled) pair.flow_gt = std::move(flow);
    return pair;
}

namespace {

std::string pair_dir(const std::string& root, int index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "pair_%05d", index);
    return root + "/" + buf;
}

} // namespace

void generate_dataset(const std::string& dir, const DatasetManifest& m) {
    fs::create_directories(dir);
    for (int i = 0; i < m.count; ++i) {
        const auto pd = pair_dir(dir, i);
        fs::create_directories(pd);
        const ScenePair pair =
            make_scene_pair(Rng::mix(m.seed, static_cast<std::uint64_t>(i)), m.height,
                            m.width, m.labeled, m.noise);
        write_ppm(pd + "/frame1.ppm", pair.frame1);
        write_ppm(pd + "/frame2.ppm", pair.frame2);
        if (pair.flow_gt) write_flo(pd + "/flow.flo", *pair.flow_gt);
    }
    std::ofstream f(dir + "/manifest.txt");
    if (!f) throw DatasetError("generate_dataset: cannot write manifest in " + dir);
    f << "seed=" << m.seed << "\n"
      << "count=" << m.count << "\n"
      << "width=" << m.width << "\n"
      << "height=" << m.height << "\n"
      << "noise=" << m.noise << "\n"
      << "labeled=" << (m.labeled ? 1 : 0) << "\n";
}

Dataset open_dataset(const std::string& dir) {
    std::ifstream f(dir + "/manifest.txt");
    if (!f) throw DatasetError("open_dataset: missing manifest.txt in " + dir);
    Dataset ds;
    ds.dir = dir;
    std::string line;
    while (std::getline(f, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = line.substr(0, eq);
        const std::string val = line.substr(eq + 1);
        try {
            if (key == "seed") ds.manifest.seed = std::stoull(val);
            else if (key == "count") ds.manifest.count = std::stoi(val);
            else if (key == "width") ds.manifest.width = std::stoi(val);
            else if (key == "height") ds.manifest.height = std::stoi(val);
            else if (key == "noise") ds.manifest.noise = std::stod(val);
            else if (key == "labeled") ds.manifest.labeled = std::stoi(val) != 0;
        } catch (...) {
            throw DatasetError("open_dataset: malformed manifest entry '" + line + "'");
        }
    }
    if (ds.manifest.count <= 0) throw DatasetError("open_dataset: empty dataset in " + dir);
    return ds;
}

ScenePair Dataset::load(int index) const {
    const auto pd = pair_dir(dir, index);
    ScenePair pair;
    pair.seed = Rng::mix(manifest.seed, static_cast<std::uint64_t>(index));
    try {
        pair.frame1 = read_ppm(pd + "/frame1.ppm");
        pair.frame2 = read_ppm(pd + "/frame2.ppm");
    } catch (const FormatError& e) {
        throw DatasetError(std::string("dataset pair missing or malformed: ") + e.what());
    }
    const std::string flo = pd + "/flow.flo";
    if (fs::exists(flo)) pair.flow_gt = read_flo(flo);
    return pair;
}

} // namespace mcva
