#include "textboot/image.hpp"

#include "textboot/error.hpp"

#include <cctype>
#include <fstream>
#include <string>

namespace textboot {

GrayImage::GrayImage(int w, int h, std::uint8_t fill) : width(w), height(h) {
    if (w < 1 || h < 1)
        throw Error(ErrorCode::InvalidArgument, "image dimensions must be positive");
    pixels.assign(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill);
}

namespace {

struct PgmHeader {
    int width = 0;
    int height = 0;
    int maxval = 0;
};

int read_header_int(std::istream& in, const std::filesystem::path& path) {
    int c = in.get();
    for (;;) {
        while (c != EOF && std::isspace(c))
            c = in.get();
        if (c == '#') {
            while (c != EOF && c != '\n')
                c = in.get();
            continue;
        }
        break;
    }
    if (c == EOF || !std::isdigit(c))
        throw Error(ErrorCode::ParseError, "malformed PGM header in " + path.string());
    long value = 0;
    while (c != EOF && std::isdigit(c)) {
        value = value * 10 + (c - '0');
        if (value > 1'000'000)
            throw Error(ErrorCode::ParseError, "PGM dimension too large in " + path.string());
        c = in.get();
    }
    // exactly one whitespace byte separates the header from the raster
    if (c == EOF || !std::isspace(c))
        throw Error(ErrorCode::ParseError, "malformed PGM header in " + path.string());
    return static_cast<int>(value);
}

PgmHeader read_header(std::istream& in, const std::filesystem::path& path) {
    char magic[2] = {};
    in.read(magic, 2);
    if (!in || magic[0] != 'P' || magic[1] != '5')
        throw Error(ErrorCode::ParseError, "not a binary PGM (P5): " + path.string());
    PgmHeader h;
    h.width = read_header_int(in, path);
    h.height = read_header_int(in, path);
    h.maxval = read_header_int(in, path);
    if (h.width < 1 || h.height < 1 || h.maxval != 255)
        throw Error(ErrorCode::ParseError, "unsupported PGM geometry or maxval in " + path.string());
    return h;
}

} // namespace

GrayImage read_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorCode::IoError, "cannot open " + path.string());
    const PgmHeader h = read_header(in, path);
    GrayImage img(h.width, h.height);
    in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
    if (in.gcount() != static_cast<std::streamsize>(img.pixels.size()))
        throw Error(ErrorCode::ParseError, "truncated PGM raster in " + path.string());
    return img;
}

void write_pgm(const GrayImage& img, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out << "P5\n" << img.width << ' ' << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
    if (!out)
        throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

std::pair<int, int> pgm_dimensions(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorCode::IoError, "cannot open " + path.string());
    const PgmHeader h = read_header(in, path);
    return {h.width, h.height};
}

} // namespace textboot
