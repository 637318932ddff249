#include "wbc/image_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>

#include "wbc/errors.hpp"
#include "wbc/fsio.hpp"

namespace wbc::image {

RasterU8 from_float_rgb(const std::vector<float>& pixels, int height, int width) {
    if (pixels.size() != static_cast<std::size_t>(height) * width * 3) {
        throw ShapeError("from_float_rgb: pixel buffer does not match geometry");
    }
    RasterU8 raster(height, width);
    for (std::size_t i = 0; i < pixels.size(); ++i) {
        const float v = std::clamp(pixels[i], 0.0f, 1.0f);
        raster.rgb[i] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
    }
    return raster;
}

namespace {

void append_u32_be(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>((v >> 24) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>(v & 0xff));
}

void append_chunk(std::string& out, const char type[4], const std::string& payload) {
    append_u32_be(out, static_cast<std::uint32_t>(payload.size()));
    const std::size_t crc_start = out.size();
    out.append(type, 4);
    out += payload;
    const auto crc = crc32(0L, reinterpret_cast<const Bytef*>(out.data() + crc_start),
                           static_cast<uInt>(out.size() - crc_start));
    append_u32_be(out, static_cast<std::uint32_t>(crc));
}

std::string deflate_bytes(const std::string& raw) {
    uLongf bound = compressBound(static_cast<uLong>(raw.size()));
    std::string compressed(bound, '\0');
    const int rc = compress2(reinterpret_cast<Bytef*>(compressed.data()), &bound,
                             reinterpret_cast<const Bytef*>(raw.data()),
                             static_cast<uLong>(raw.size()), 6);
    if (rc != Z_OK) throw IoError("png encode: zlib compress failed (" + std::to_string(rc) + ")");
    compressed.resize(bound);
    return compressed;
}

}  // namespace

std::string encode_png(const RasterU8& raster) {
    if (raster.height <= 0 || raster.width <= 0) throw ShapeError("png encode: empty raster");
    if (raster.rgb.size() != static_cast<std::size_t>(raster.height) * raster.width * 3) {
        throw ShapeError("png encode: raster buffer does not match geometry");
    }

    std::string out("\x89PNG\r\n\x1a\n", 8);

    std::string ihdr;
    append_u32_be(ihdr, static_cast<std::uint32_t>(raster.width));
    append_u32_be(ihdr, static_cast<std::uint32_t>(raster.height));
    ihdr.push_back(8);   // bit depth
    ihdr.push_back(2);   // color type: truecolor RGB
    ihdr.push_back(0);   // compression
    ihdr.push_back(0);   // filter method
    ihdr.push_back(0);   // no interlace
    append_chunk(out, "IHDR", ihdr);

    // Raw scanlines, each prefixed with filter type 0 (None).
    std::string raw;
    raw.reserve(static_cast<std::size_t>(raster.height) * (static_cast<std::size_t>(raster.width) * 3 + 1));
    for (int y = 0; y < raster.height; ++y) {
        raw.push_back('\0');
        raw.append(reinterpret_cast<const char*>(raster.pixel(y, 0)),
                   static_cast<std::size_t>(raster.width) * 3);
    }
    append_chunk(out, "IDAT", deflate_bytes(raw));
    append_chunk(out, "IEND", "");
    return out;
}

void write_png(const RasterU8& raster, const std::string& path) {
    io::write_file_atomic(path, encode_png(raster));
}

void write_ppm(const RasterU8& raster, const std::string& path) {
    std::string out = "P6\n" + std::to_string(raster.width) + " " + std::to_string(raster.height) + "\n255\n";
    out.append(reinterpret_cast<const char*>(raster.rgb.data()), raster.rgb.size());
    io::write_file_atomic(path, out);
}

RasterU8 read_ppm(const std::string& path) {
    const std::string bytes = io::read_file(path);
    std::size_t pos = 0;

    // Header tokens are separated by whitespace; '#' starts a comment that
    // runs to end of line.
    auto next_token = [&]() -> std::string {
        while (pos < bytes.size()) {
            const char c = bytes[pos];
            if (c == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                ++pos;
            } else {
                break;
            }
        }
        const std::size_t start = pos;
        while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos])) &&
               bytes[pos] != '#') {
            ++pos;
        }
        if (start == pos) throw DataFormatError(path + ": truncated ppm header");
        return bytes.substr(start, pos - start);
    };
    auto next_int = [&](const char* field) {
        const std::string tok = next_token();
        try {
            std::size_t used = 0;
            const int v = std::stoi(tok, &used);
            if (used != tok.size() || v <= 0) throw std::invalid_argument(tok);
            return v;
        } catch (const std::exception&) {
            throw DataFormatError(path + ": bad ppm " + field + " '" + tok + "'");
        }
    };

    if (next_token() != "P6") throw DataFormatError(path + ": not a binary ppm (P6)");
    RasterU8 raster;
    raster.width = next_int("width");
    raster.height = next_int("height");
    const int maxval = next_int("maxval");
    if (maxval != 255) {
        throw DataFormatError(path + ": unsupported ppm maxval " + std::to_string(maxval));
    }
    ++pos;  // the single whitespace byte after maxval
    const std::size_t need = static_cast<std::size_t>(raster.width) * raster.height * 3;
    if (bytes.size() - pos < need) throw DataFormatError(path + ": ppm pixel data truncated");
    raster.rgb.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                      bytes.begin() + static_cast<std::ptrdiff_t>(pos + need));
    return raster;
}

PngInfo parse_png_header(const std::string& bytes) {
    static const char kSignature[8] = {'\x89', 'P', 'N', 'G', '\r', '\n', '\x1a', '\n'};
    if (bytes.size() < 33 || std::memcmp(bytes.data(), kSignature, 8) != 0) {
        throw DataFormatError("parse_png_header: bad signature");
    }
    if (std::memcmp(bytes.data() + 12, "IHDR", 4) != 0) {
        throw DataFormatError("parse_png_header: first chunk is not IHDR");
    }
    auto read_u32 = [&bytes](std::size_t at) {
        return (static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[at])) << 24) |
               (static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[at + 1])) << 16) |
               (static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[at + 2])) << 8) |
               static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[at + 3]));
    };
    PngInfo info;
    info.width = static_cast<int>(read_u32(16));
    info.height = static_cast<int>(read_u32(20));
    info.bit_depth = static_cast<unsigned char>(bytes[24]);
    info.color_type = static_cast<unsigned char>(bytes[25]);
    return info;
}

namespace {

// 3x5 glyphs, row-major bits (left to right, top to bottom).
struct Glyph {
    char ch;
    std::uint16_t bits;  // 15 bits used
};

constexpr std::uint16_t rows(unsigned r0, unsigned r1, unsigned r2, unsigned r3, unsigned r4) {
    return static_cast<std::uint16_t>(r0 << 12 | r1 << 9 | r2 << 6 | r3 << 3 | r4);
}

// clang-format off
const Glyph kGlyphs[] = {
    {'0', rows(0b111, 0b101, 0b101, 0b101, 0b111)},
    {'1', rows(0b010, 0b110, 0b010, 0b010, 0b111)},
    {'2', rows(0b111, 0b001, 0b111, 0b100, 0b111)},
    {'3', rows(0b111, 0b001, 0b011, 0b001, 0b111)},
    {'4', rows(0b101, 0b101, 0b111, 0b001, 0b001)},
    {'5', rows(0b111, 0b100, 0b111, 0b001, 0b111)},
    {'6', rows(0b111, 0b100, 0b111, 0b101, 0b111)},
    {'7', rows(0b111, 0b001, 0b010, 0b010, 0b010)},
    {'8', rows(0b111, 0b101, 0b111, 0b101, 0b111)},
    {'9', rows(0b111, 0b101, 0b111, 0b001, 0b111)},
    {'A', rows(0b010, 0b101, 0b111, 0b101, 0b101)},
    {'B', rows(0b110, 0b101, 0b110, 0b101, 0b110)},
    {'C', rows(0b011, 0b100, 0b100, 0b100, 0b011)},
    {'D', rows(0b110, 0b101, 0b101, 0b101, 0b110)},
    {'E', rows(0b111, 0b100, 0b110, 0b100, 0b111)},
    {'F', rows(0b111, 0b100, 0b110, 0b100, 0b100)},
    {'G', rows(0b011, 0b100, 0b101, 0b101, 0b011)},
    {'H', rows(0b101, 0b101, 0b111, 0b101, 0b101)},
    {'I', rows(0b111, 0b010, 0b010, 0b010, 0b111)},
    {'J', rows(0b001, 0b001, 0b001, 0b101, 0b010)},
    {'K', rows(0b101, 0b110, 0b100, 0b110, 0b101)},
    {'L', rows(0b100, 0b100, 0b100, 0b100, 0b111)},
    {'M', rows(0b101, 0b111, 0b111, 0b101, 0b101)},
    {'N', rows(0b101, 0b111, 0b111, 0b111, 0b101)},
    {'O', rows(0b010, 0b101, 0b101, 0b101, 0b010)},
    {'P', rows(0b110, 0b101, 0b110, 0b100, 0b100)},
    {'Q', rows(0b010, 0b101, 0b101, 0b011, 0b001)},
    {'R', rows(0b110, 0b101, 0b110, 0b101, 0b101)},
    {'S', rows(0b011, 0b100, 0b010, 0b001, 0b110)},
    {'T', rows(0b111, 0b010, 0b010, 0b010, 0b010)},
    {'U', rows(0b101, 0b101, 0b101, 0b101, 0b111)},
    {'V', rows(0b101, 0b101, 0b101, 0b010, 0b010)},
    {'W', rows(0b101, 0b101, 0b111, 0b111, 0b101)},
    {'X', rows(0b101, 0b101, 0b010, 0b101, 0b101)},
    {'Y', rows(0b101, 0b101, 0b010, 0b010, 0b010)},
    {'Z', rows(0b111, 0b001, 0b010, 0b100, 0b111)},
    {':', rows(0b000, 0b010, 0b000, 0b010, 0b000)},
    {'.', rows(0b000, 0b000, 0b000, 0b000, 0b010)},
    {'-', rows(0b000, 0b000, 0b111, 0b000, 0b000)},
    {' ', rows(0b000, 0b000, 0b000, 0b000, 0b000)},
};
// clang-format on

const Glyph* find_glyph(char ch) {
    for (const auto& g : kGlyphs) {
        if (g.ch == ch) return &g;
    }
    return nullptr;
}

}  // namespace

int text_width(const std::string& text, int scale) {
    return static_cast<int>(text.size()) * 4 * scale;
}

void draw_text(RasterU8& raster, int x, int y, const std::string& text,
               const std::array<std::uint8_t, 3>& color, int scale) {
    int cursor = x;
    for (char ch : text) {
        const Glyph* glyph = find_glyph(static_cast<char>(std::toupper(static_cast<unsigned char>(ch))));
        if (glyph) {
            for (int gy = 0; gy < 5; ++gy) {
                for (int gx = 0; gx < 3; ++gx) {
                    const int bit = 14 - (gy * 3 + gx);
                    if (!((glyph->bits >> bit) & 1)) continue;
                    for (int sy = 0; sy < scale; ++sy) {
                        for (int sx = 0; sx < scale; ++sx) {
                            const int py = y + gy * scale + sy;
                            const int px = cursor + gx * scale + sx;
                            if (py < 0 || py >= raster.height || px < 0 || px >= raster.width) continue;
                            std::uint8_t* p = raster.pixel(py, px);
                            p[0] = color[0];
                            p[1] = color[1];
                            p[2] = color[2];
                        }
                    }
                }
            }
        }
        cursor += 4 * scale;
    }
}

}  // namespace wbc::image
