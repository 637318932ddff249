#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace wbc::image {

/// 8-bit RGB raster, row-major, 3 bytes per pixel.
struct RasterU8 {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> rgb;

    RasterU8() = default;
    RasterU8(int h, int w)
        : height(h), width(w), rgb(static_cast<std::size_t>(h) * w * 3, 0) {}

    std::uint8_t* pixel(int y, int x) {
        return rgb.data() + (static_cast<std::size_t>(y) * width + x) * 3;
    }
    const std::uint8_t* pixel(int y, int x) const {
        return rgb.data() + (static_cast<std::size_t>(y) * width + x) * 3;
    }
};

/// Clamps [0,1] floats to 8-bit; buffer is H*W*3 channel-last.
RasterU8 from_float_rgb(const std::vector<float>& pixels, int height, int width);

/// Minimal PNG writer (8-bit RGB, one IDAT, filter 0 scanlines, zlib
/// deflate). Deterministic: the same raster always produces the same bytes.
/// Atomic like every other artifact writer.
void write_png(const RasterU8& raster, const std::string& path);

/// Binary PPM (P6) fallback writer.
void write_ppm(const RasterU8& raster, const std::string& path);

/// Binary PPM (P6, maxval 255) reader; '#' comments in the header are
/// honored. Throws DataFormatError on anything else.
RasterU8 read_ppm(const std::string& path);

/// PNG byte-level encode (exposed for tests).
std::string encode_png(const RasterU8& raster);

/// Reads width/height/bit depth/color type from a PNG byte string
/// (signature + IHDR only); used to sanity-check written files.
struct PngInfo {
    int width = 0, height = 0, bit_depth = 0, color_type = 0;
};
PngInfo parse_png_header(const std::string& bytes);

/// Draws `text` with a 3x5 bitmap font (digits, capital letters A-Z, ':',
/// '.', '-', space) at (x, y); each glyph cell is scale*(3+1) wide.
void draw_text(RasterU8& raster, int x, int y, const std::string& text,
               const std::array<std::uint8_t, 3>& color, int scale = 1);

/// Width in pixels that draw_text will occupy.
int text_width(const std::string& text, int scale = 1);

}  // namespace wbc::image
