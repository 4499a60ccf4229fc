#include "mcva/image_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "mcva/errors.hpp"

namespace mcva {

void write_ppm(const std::string& path, const Image& img) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw FormatError("write_ppm: cannot open " + path);
    f << "P6\n" << img.w << " " << img.h << "\n255\n";
    std::vector<unsigned char> row(static_cast<std::size_t>(img.w) * 3);
    for (int y = 0; y < img.h; ++y) {
        for (int x = 0; x < img.w; ++x) {
            for (int c = 0; c < 3; ++c) {
                float v = img.at(c, y, x);
                v = v < 0.f ? 0.f : (v > 1.f ? 1.f : v);
                row[static_cast<std::size_t>(x) * 3 + c] =
                    static_cast<unsigned char>(std::lround(v * 255.f));
            }
        }
        f.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
    if (!f) throw FormatError("write_ppm: short write to " + path);
}

namespace {

// Reads one whitespace-delimited token, skipping '#' comments.
std::string next_token(std::istream& in) {
    std::string tok;
    char c;
    while (in.get(c)) {
        if (c == '#') {
            while (in.get(c) && c != '\n') {
            }
            continue;
        }
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!tok.empty()) return tok;
            continue;
        }
        tok.push_back(c);
    }
    return tok;
}

int parse_dim(const std::string& tok, const std::string& path, const char* what) {
    if (tok.empty()) throw FormatError("read_ppm: truncated header in " + path);
    try {
        const int v = std::stoi(tok);
        if (v <= 0) throw FormatError(std::string("read_ppm: non-positive ") + what +
                                      " in " + path);
        return v;
    } catch (const FormatError&) {
        throw;
    } catch (...) {
        throw FormatError(std::string("read_ppm: malformed ") + what + " in " + path);
    }
}

} // namespace

Image read_ppm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw FormatError("read_ppm: cannot open " + path);
    if (next_token(f) != "P6") throw FormatError("read_ppm: missing P6 magic in " + path);
    Image img;
    img.w = parse_dim(next_token(f), path, "width");
    img.h = parse_dim(next_token(f), path, "height");
    const int maxval = parse_dim(next_token(f), path, "maxval");
    if (maxval != 255) throw FormatError("read_ppm: unsupported maxval in " + path);
    img.data.resize(static_cast<std::size_t>(3) * img.h * img.w);
    std::vector<unsigned char> row(static_cast<std::size_t>(img.w) * 3);
    for (int y = 0; y < img.h; ++y) {
        f.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size()));
        if (f.gcount() != static_cast<std::streamsize>(row.size())) {
            throw FormatError("read_ppm: truncated pixel data in " + path);
        }
        for (int x = 0; x < img.w; ++x) {
            for (int c = 0; c < 3; ++c) {
                img.at(c, y, x) = static_cast<float>(row[static_cast<std::size_t>(x) * 3 + c]) / 255.f;
            }
        }
    }
    return img;
}

} // namespace mcva
