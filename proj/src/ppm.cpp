// Copyright Contributors to the progsplat project
// SPDX-License-Identifier: Apache-2.0

#include "progsplat/ppm.hpp"

#include "progsplat/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>

namespace progsplat {

namespace {

class HeaderReader {
  public:
    HeaderReader(const std::vector<unsigned char>& bytes, const std::string& name) : bytes_(bytes), name_(name) {}

    int next_int() {
        skip_space();
        if (pos_ >= bytes_.size() || !std::isdigit(bytes_[pos_])) fail(ErrorCode::Parse, name_ + ": bad PPM header");
        long value = 0;
        while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
            value = value * 10 + (bytes_[pos_++] - '0');
            if (value > (1 << 24)) fail(ErrorCode::Parse, name_ + ": PPM header value too large");
        }
        return static_cast<int>(value);
    }

    // Exactly one whitespace byte separates maxval from the raster.
    std::size_t raster_start() {
        if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) fail(ErrorCode::Parse, name_ + ": bad PPM header");
        return pos_ + 1;
    }

  private:
    void skip_space() {
        while (pos_ < bytes_.size()) {
            if (bytes_[pos_] == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
            } else if (std::isspace(bytes_[pos_])) {
                ++pos_;
            } else {
                break;
            }
        }
    }

    const std::vector<unsigned char>& bytes_;
    const std::string& name_;
    std::size_t pos_ = 2;
};

} // namespace

Image read_ppm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
    const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const std::string name = path.string();
    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') {
        fail(ErrorCode::Parse, name + ": not a binary PPM (P6)");
    }
    HeaderReader header(bytes, name);
    const int width = header.next_int();
    const int height = header.next_int();
    const int maxval = header.next_int();
    if (width <= 0 || height <= 0) fail(ErrorCode::Parse, name + ": empty PPM");
    if (maxval < 1 || maxval > 255) fail(ErrorCode::Parse, name + ": only 8-bit PPM is supported");
    const std::size_t start = header.raster_start();
    const std::size_t need = static_cast<std::size_t>(width) * height * 3;
    if (bytes.size() - std::min(bytes.size(), start) < need) fail(ErrorCode::Parse, name + ": truncated PPM raster");

    Image img(width, height);
    for (std::size_t i = 0; i < need; ++i) img.data[i] = static_cast<double>(bytes[start + i]) / maxval;
    return img;
}

void write_ppm(const Image& image, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
    out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
    std::vector<char> raster(image.data.size());
    for (std::size_t i = 0; i < raster.size(); ++i) {
        const double v = std::isfinite(image.data[i]) ? std::clamp(image.data[i], 0.0, 1.0) : 0.0;
        raster[i] = static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0)));
    }
    out.write(raster.data(), static_cast<std::streamsize>(raster.size()));
    if (!out) fail(ErrorCode::Io, "write failed: " + path.string());
}

Image downscale_image(const Image& image, int factor) {
    if (factor < 1) fail(ErrorCode::InvalidParameter, "downscale factor must be >= 1");
    if (image.width % factor != 0 || image.height % factor != 0) {
        fail(ErrorCode::InvalidParameter, "image size " + std::to_string(image.width) + "x" +
                                              std::to_string(image.height) + " not divisible by " +
                                              std::to_string(factor));
    }
    if (factor == 1) return image;
    Image out(image.width / factor, image.height / factor);
    const double norm = 1.0 / (factor * factor);
    for (int y = 0; y < out.height; ++y) {
        for (int x = 0; x < out.width; ++x) {
            for (int c = 0; c < 3; ++c) {
                double sum = 0.0;
                for (int dy = 0; dy < factor; ++dy) {
                    for (int dx = 0; dx < factor; ++dx) sum += image.at(x * factor + dx, y * factor + dy, c);
                }
                out.at(x, y, c) = sum * norm;
            }
        }
    }
    return out;
}

} // namespace progsplat
