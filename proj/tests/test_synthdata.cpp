#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "mcva/synthdata.hpp"
#include "mcva/errors.hpp"
#include "support/oracles.hpp"

using namespace mcva;
namespace fs = std::filesystem;

namespace {

std::string temp_dir(const char* tag) {
    auto dir = fs::temp_directory_path() / (std::string("mcva_test_") + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir.string();
}

std::vector<char> slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

} // namespace

TEST_CASE("make_texture: deterministic, bounded, distinct across seeds") {
    auto a = make_texture(7, 48, 40);
    auto b = make_texture(7, 48, 40);
    CHECK(a.data == b.data);
    for (float v : a.data) {
        CHECK(v >= 0.f);
        CHECK(v <= 1.f);
    }
    double mean_abs_diff = 0;
    int pairs = 0;
    for (std::uint64_t s = 0; s < 10; ++s) {
        auto x = make_texture(s, 32, 32);
        auto y = make_texture(s + 100, 32, 32);
        double d = 0;
        for (std::size_t i = 0; i < x.data.size(); ++i) d += std::abs(x.data[i] - y.data[i]);
        mean_abs_diff += d / static_cast<double>(x.data.size());
        ++pairs;
    }
    CHECK(mean_abs_diff / pairs > 0.01);
}

TEST_CASE("sample_flow_field: zero-motion config gives the zero field") {
    FlowParams p;
    p.max_translation = 0;
    p.max_rotation_deg = 0;
    p.scale_min = p.scale_max = 1.0;
    p.max_perturbation = 0;
    auto f = sample_flow_field(3, 24, 24, p);
    for (float v : f.data) CHECK(v == 0.f);
}

TEST_CASE("sample_flow_field: pure translation is constant") {
    FlowParams p;
    p.max_translation = 2.0;
    p.max_rotation_deg = 0;
    p.scale_min = p.scale_max = 1.0;
    p.max_perturbation = 0;
    auto f = sample_flow_field(11, 16, 16, p);
    for (int y = 0; y < 16; ++y) {
        for (int x = 0; x < 16; ++x) {
            CHECK(f.u(y, x) == f.u(0, 0));
            CHECK(f.v(y, x) == f.v(0, 0));
        }
    }
    CHECK(std::abs(f.u(0, 0)) <= 2.f);
}

TEST_CASE("sample_flow_field: smooth and capped") {
    FlowParams p; // defaults: cap 12 px
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        auto f = sample_flow_field(seed, 64, 64, p);
        double max_grad = 0;
        for (int y = 0; y < 64; ++y) {
            for (int x = 1; x < 64; ++x) {
                max_grad = std::max(max_grad, std::abs(double(f.u(y, x)) - f.u(y, x - 1)));
                max_grad = std::max(max_grad, std::abs(double(f.v(y, x)) - f.v(y, x - 1)));
            }
        }
        for (int y = 0; y < 64; ++y) {
            for (int x = 0; x < 64; ++x) {
                CHECK(std::hypot(f.u(y, x), f.v(y, x)) <= p.magnitude_cap + 1e-4);
            }
        }
        // affine part changes by at most ~|A| per pixel plus perturbation slope
        CHECK(max_grad < 1.0);
    }
}

TEST_CASE("warp_image: zero flow is the identity") {
    auto img = make_texture(5, 20, 24);
    Flow zero;
    zero.h = 20;
    zero.w = 24;
    zero.data.assign(2 * 20 * 24, 0.f);
    auto out = warp_image(img, zero);
    CHECK(out.data == img.data);
}

TEST_CASE("warp_image: integer translation shifts interior pixels exactly") {
    auto img = make_texture(9, 16, 16);
    Flow t;
    t.h = t.w = 16;
    t.data.assign(2 * 16 * 16, 0.f);
    for (int y = 0; y < 16; ++y) {
        for (int x = 0; x < 16; ++x) t.u(y, x) = 2.f; // sample from (y, x+2)
    }
    auto out = warp_image(img, t);
    for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < 16; ++y) {
            for (int x = 0; x < 14; ++x) {
                REQUIRE(out.at(c, y, x) == img.at(c, y, x + 2));
            }
        }
    }
}

TEST_CASE("warp_image: constant image stays constant") {
    Image img;
    img.h = img.w = 12;
    img.data.assign(3 * 12 * 12, 0.25f);
    auto flow = sample_flow_field(13, 12, 12);
    auto out = warp_image(img, flow);
    for (float v : out.data) CHECK(v == doctest::Approx(0.25f));
}

TEST_CASE("scene pairs: photometric consistency on the noise-free config") {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        auto pair = make_scene_pair(seed, 48, 48, true, 0.0);
        REQUIRE(pair.flow_gt.has_value());
        auto rewarp = warp_image(pair.frame1, *pair.flow_gt);
        double err = 0;
        for (std::size_t i = 0; i < rewarp.data.size(); ++i) {
            err += std::abs(rewarp.data[i] - pair.frame2.data[i]);
        }
        err /= static_cast<double>(rewarp.data.size());
        CHECK(err < 0.02);
    }
}

TEST_CASE("ppm round trip quantizes to 8 bits") {
    const auto dir = temp_dir("ppm");
    auto img = make_texture(21, 10, 14);
    write_ppm(dir + "/x.ppm", img);
    auto back = read_ppm(dir + "/x.ppm");
    REQUIRE(back.h == 10);
    REQUIRE(back.w == 14);
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        const float q = std::lround(img.data[i] * 255.f) / 255.f;
        REQUIRE(back.data[i] == doctest::Approx(q).epsilon(1e-6));
    }
    // writing the read-back image reproduces the file byte for byte
    write_ppm(dir + "/y.ppm", back);
    CHECK(slurp(dir + "/x.ppm") == slurp(dir + "/y.ppm"));
}

TEST_CASE("ppm header layout and failure modes") {
    const auto dir = temp_dir("ppm_hdr");
    Image img;
    img.h = 3;
    img.w = 4;
    img.data.assign(36, 0.5f);
    write_ppm(dir + "/z.ppm", img);
    const auto bytes = slurp(dir + "/z.ppm");
    const std::string head(bytes.begin(), bytes.begin() + 11);
    CHECK(head == "P6\n4 3\n255\n");

    std::ofstream bad(dir + "/bad.ppm", std::ios::binary);
    bad << "P5\n4 3\n255\n";
    bad.close();
    CHECK_THROWS_AS(read_ppm(dir + "/bad.ppm"), FormatError);

    std::ofstream trunc(dir + "/trunc.ppm", std::ios::binary);
    trunc << "P6\n4 3\n255\n";
    trunc << "ab"; // far short of 36 bytes
    trunc.close();
    CHECK_THROWS_AS(read_ppm(dir + "/trunc.ppm"), FormatError);
}

TEST_CASE("flo round trip is bit exact") {
    const auto dir = temp_dir("flo");
    Flow f;
    f.h = 6;
    f.w = 5;
    f.data.resize(60);
    Rng rng(23);
    for (auto& v : f.data) v = static_cast<float>(rng.uniform(-20.0, 20.0));
    write_flo(dir + "/a.flo", f);
    auto back = read_flo(dir + "/a.flo");
    CHECK(back.h == 6);
    CHECK(back.w == 5);
    CHECK(back.data == f.data);
}

TEST_CASE("flo: hand-computed byte layout of a 1x1 field") {
    const auto dir = temp_dir("flo_bytes");
    Flow f;
    f.h = 1;
    f.w = 1;
    f.data = {3.0f, -1.5f};
    write_flo(dir + "/one.flo", f);
    const auto bytes = slurp(dir + "/one.flo");
    REQUIRE(bytes.size() == 20);
    const unsigned char expect[20] = {
        0x50, 0x49, 0x45, 0x48,             // 202021.25f little-endian ("PIEH")
        0x01, 0x00, 0x00, 0x00,             // width 1
        0x01, 0x00, 0x00, 0x00,             // height 1
        0x00, 0x00, 0x40, 0x40,             // u = 3.0f
        0x00, 0x00, 0xC0, 0xBF,             // v = -1.5f
    };
    for (int i = 0; i < 20; ++i) {
        REQUIRE(static_cast<unsigned char>(bytes[static_cast<std::size_t>(i)]) == expect[i]);
    }
}

TEST_CASE("flo: wrong magic raises FormatError") {
    const auto dir = temp_dir("flo_bad");
    std::ofstream f(dir + "/bad.flo", std::ios::binary);
    const float wrong = 123.25f;
    f.write(reinterpret_cast<const char*>(&wrong), 4);
    const std::int32_t one = 1;
    f.write(reinterpret_cast<const char*>(&one), 4);
    f.write(reinterpret_cast<const char*>(&one), 4);
    const float uv[2] = {0.f, 0.f};
    f.write(reinterpret_cast<const char*>(uv), 8);
    f.close();
    CHECK_THROWS_AS(read_flo(dir + "/bad.flo"), FormatError);
}

TEST_CASE("dataset generation is manifest-reproducible and lazily loadable") {
    const auto dir1 = temp_dir("ds1");
    const auto dir2 = temp_dir("ds2");
    DatasetManifest m;
    m.seed = 99;
    m.count = 4;
    m.width = 32;
    m.height = 32;
    m.labeled = true;
    generate_dataset(dir1, m);
    generate_dataset(dir2, m);

    for (int i = 0; i < m.count; ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "pair_%05d", i);
        for (const char* file : {"/frame1.ppm", "/frame2.ppm", "/flow.flo"}) {
            REQUIRE(slurp(dir1 + "/" + name + file) == slurp(dir2 + "/" + name + file));
        }
    }

    auto ds = open_dataset(dir1);
    CHECK(ds.size() == 4);
    CHECK(ds.manifest.labeled);
    const auto pair = ds.load(2);
    CHECK(pair.frame1.h == 32);
    REQUIRE(pair.flow_gt.has_value());
    CHECK(pair.flow_gt->h == 32);
}

TEST_CASE("dataset: missing files raise DatasetError") {
    const auto dir = temp_dir("ds_missing");
    DatasetManifest m;
    m.seed = 1;
    m.count = 2;
    m.width = 16;
    m.height = 16;
    generate_dataset(dir, m);
    fs::remove(dir + "/pair_00001/frame2.ppm");
    auto ds = open_dataset(dir);
    CHECK_THROWS_AS(ds.load(1), DatasetError);
    CHECK_THROWS_AS(open_dataset(dir + "/nope"), DatasetError);
}
