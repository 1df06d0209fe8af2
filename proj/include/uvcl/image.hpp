#pragma once

#include <filesystem>
#include <vector>

namespace uvcl {

// Row-major, channel-last raster with values in [0, 1].
struct Image {
    int h = 0, w = 0, c = 1;
    std::vector<double> px;

    static Image zeros(int h, int w, int c = 1) {
        Image im;
        im.h = h;
        im.w = w;
        im.c = c;
        im.px.assign(static_cast<std::size_t>(h) * w * c, 0.0);
        return im;
    }

    double& at(int y, int x, int ch = 0) {
        return px[(static_cast<std::size_t>(y) * w + x) * c + ch];
    }
    double at(int y, int x, int ch = 0) const {
        return px[(static_cast<std::size_t>(y) * w + x) * c + ch];
    }
};

struct PgmHeader {
    int h = 0, w = 0, maxval = 0;
};

// Reads just the header, for cheap shape validation of a whole corpus.
PgmHeader read_pgm_header(const std::filesystem::path& path);

// Binary (P5) and ASCII (P2) greyscale images, maxval up to 255. Pixels map
// to [0, 1].
Image read_pgm(const std::filesystem::path& path);

// Writes binary P5, quantizing to 8 bits.
void write_pgm(const Image& im, const std::filesystem::path& path);

}  // namespace uvcl
