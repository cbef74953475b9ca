#include "fieldline/png_io.hpp"

#include <png.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>

#include <json.hpp>

namespace fieldline {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

std::string sidecar_path(const std::string& png_path) {
    std::filesystem::path p(png_path);
    p.replace_extension("");
    return p.string() + ".geo.json";
}

RasterPatch read_raster(const std::string& png_path) {
    FilePtr fp(std::fopen(png_path.c_str(), "rb"));
    if (!fp) throw Error(ErrorCode::Io, "cannot open " + png_path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw Error(ErrorCode::Io, "libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error(ErrorCode::Io, "PNG decode failed: " + png_path);
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    const int bit_depth = png_get_bit_depth(png, info);
    const int color_type = png_get_color_type(png, info);
    if (bit_depth > 8) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error(ErrorCode::Io, "only 8-bit PNG supported: " + png_path);
    }
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_read_update_info(png, info);

    RasterPatch patch;
    patch.width = static_cast<int>(png_get_image_width(png, info));
    patch.height = static_cast<int>(png_get_image_height(png, info));
    patch.bands = static_cast<int>(png_get_channels(png, info));
    patch.pixels.resize(static_cast<std::size_t>(patch.width) * patch.height * patch.bands);

    std::vector<png_bytep> rows(patch.height);
    const std::size_t stride = static_cast<std::size_t>(patch.width) * patch.bands;
    for (int r = 0; r < patch.height; ++r) rows[r] = patch.pixels.data() + r * stride;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    const std::string sidecar = sidecar_path(png_path);
    if (std::filesystem::exists(sidecar)) {
        std::ifstream in(sidecar);
        std::ostringstream ss;
        ss << in.rdbuf();
        try {
            auto j = nlohmann::json::parse(ss.str());
            GeoTransform gt;
            gt.origin_x = j.at("origin_x").get<double>();
            gt.origin_y = j.at("origin_y").get<double>();
            gt.pixel_size_x = j.at("pixel_size_x").get<double>();
            gt.pixel_size_y = j.at("pixel_size_y").get<double>();
            gt.crs_code = j.at("epsg").get<int>();
            gt.validate();
            patch.geo = gt;
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::Io, "invalid geo sidecar " + sidecar + ": " + e.what());
        }
    }
    patch.validate();
    return patch;
}

void write_raster(const RasterPatch& patch, const std::string& png_path) {
    patch.validate();
    FilePtr fp(std::fopen(png_path.c_str(), "wb"));
    if (!fp) throw Error(ErrorCode::Io, "cannot write " + png_path);

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw Error(ErrorCode::Io, "libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error(ErrorCode::Io, "PNG encode failed: " + png_path);
    }
    png_init_io(png, fp.get());

    int color_type = PNG_COLOR_TYPE_GRAY;
    if (patch.bands == 2) color_type = PNG_COLOR_TYPE_GRAY_ALPHA;
    else if (patch.bands == 3) color_type = PNG_COLOR_TYPE_RGB;
    else if (patch.bands == 4) color_type = PNG_COLOR_TYPE_RGB_ALPHA;
    png_set_IHDR(png, info, patch.width, patch.height, 8, color_type, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    std::vector<png_bytep> rows(patch.height);
    const std::size_t stride = static_cast<std::size_t>(patch.width) * patch.bands;
    for (int r = 0; r < patch.height; ++r)
        rows[r] = const_cast<png_bytep>(patch.pixels.data() + r * stride);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);

    if (patch.geo) {
        nlohmann::ordered_json j;
        j["origin_x"] = patch.geo->origin_x;
        j["origin_y"] = patch.geo->origin_y;
        j["pixel_size_x"] = patch.geo->pixel_size_x;
        j["pixel_size_y"] = patch.geo->pixel_size_y;
        j["epsg"] = patch.geo->crs_code;
        std::ofstream out(sidecar_path(png_path));
        if (!out) throw Error(ErrorCode::Io, "cannot write sidecar for " + png_path);
        out << j.dump();
    }
}

}  // namespace fieldline
