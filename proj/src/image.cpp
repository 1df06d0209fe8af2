#include "uvcl/image.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>

namespace uvcl {

namespace {

// Reads the next whitespace-separated token, skipping '#' comment lines.
std::string next_token(std::istream& is) {
    std::string tok;
    int ch;
    while ((ch = is.get()) != EOF) {
        if (ch == '#') {
            while ((ch = is.get()) != EOF && ch != '\n') {
            }
            continue;
        }
        if (std::isspace(ch)) {
            if (!tok.empty()) return tok;
            continue;
        }
        tok.push_back(static_cast<char>(ch));
    }
    return tok;
}

int parse_int(const std::string& tok, const std::filesystem::path& path, const char* what) {
    try {
        return std::stoi(tok);
    } catch (const std::exception&) {
        throw std::runtime_error("pgm: malformed " + std::string(what) + " in " + path.string());
    }
}

struct ParsedHeader {
    std::string magic;
    PgmHeader hdr;
};

ParsedHeader parse_header(std::istream& is, const std::filesystem::path& path) {
    ParsedHeader p;
    p.magic = next_token(is);
    if (p.magic != "P5" && p.magic != "P2") {
        throw std::runtime_error("pgm: " + path.string() + " is not a P2/P5 greyscale image");
    }
    p.hdr.w = parse_int(next_token(is), path, "width");
    p.hdr.h = parse_int(next_token(is), path, "height");
    p.hdr.maxval = parse_int(next_token(is), path, "maxval");
    if (p.hdr.w <= 0 || p.hdr.h <= 0) {
        throw std::runtime_error("pgm: non-positive dimensions in " + path.string());
    }
    if (p.hdr.maxval <= 0 || p.hdr.maxval > 255) {
        throw std::runtime_error("pgm: unsupported maxval " + std::to_string(p.hdr.maxval) +
                                 " in " + path.string());
    }
    return p;
}

}  // namespace

PgmHeader read_pgm_header(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("pgm: cannot open " + path.string());
    return parse_header(is, path).hdr;
}

Image read_pgm(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("pgm: cannot open " + path.string());
    const ParsedHeader p = parse_header(is, path);

    Image im = Image::zeros(p.hdr.h, p.hdr.w, 1);
    const std::size_t count = im.px.size();
    if (p.magic == "P5") {
        std::vector<unsigned char> raw(count);
        is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(count));
        if (static_cast<std::size_t>(is.gcount()) != count) {
            throw std::runtime_error("pgm: truncated pixel data in " + path.string());
        }
        for (std::size_t i = 0; i < count; ++i) im.px[i] = raw[i] / static_cast<double>(p.hdr.maxval);
    } else {
        for (std::size_t i = 0; i < count; ++i) {
            const std::string tok = next_token(is);
            if (tok.empty()) throw std::runtime_error("pgm: truncated pixel data in " + path.string());
            const int v = parse_int(tok, path, "pixel");
            if (v < 0 || v > p.hdr.maxval) {
                throw std::runtime_error("pgm: pixel value out of range in " + path.string());
            }
            im.px[i] = v / static_cast<double>(p.hdr.maxval);
        }
    }
    return im;
}

void write_pgm(const Image& im, const std::filesystem::path& path) {
    if (im.c != 1) throw std::invalid_argument("pgm: only single-channel images can be written");
    if (im.h <= 0 || im.w <= 0) throw std::invalid_argument("pgm: empty image");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("pgm: cannot create " + path.string());
    os << "P5\n" << im.w << " " << im.h << "\n255\n";
    std::vector<unsigned char> raw(im.px.size());
    for (std::size_t i = 0; i < im.px.size(); ++i) {
        const double v = std::min(1.0, std::max(0.0, im.px[i]));
        raw[i] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
    os.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!os) throw std::runtime_error("pgm: failed writing " + path.string());
}

}  // namespace uvcl
