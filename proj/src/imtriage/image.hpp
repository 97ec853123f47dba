#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace imtriage {

/// 8-bit interleaved RGB raster with an opaque identifier.
struct ImageRecord {
    std::string id;
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> rgb; // width * height * 3, row-major

    ImageRecord() = default;
    ImageRecord(std::string id_, int w, int h);
    ImageRecord(std::string id_, int w, int h, std::vector<std::uint8_t> pixels);

    std::uint8_t* pixel(int x, int y) { return rgb.data() + (static_cast<std::size_t>(y) * width + x) * 3; }
    const std::uint8_t* pixel(int x, int y) const { return rgb.data() + (static_cast<std::size_t>(y) * width + x) * 3; }
    void fill(std::uint8_t r, std::uint8_t g, std::uint8_t b);
    void fill_rect(int x0, int y0, int w, int h, std::uint8_t r, std::uint8_t g, std::uint8_t b);

    bool operator==(const ImageRecord&) const = default;
};

/// Throws InvalidInput unless the raster matches its declared size and has positive area.
void validate(const ImageRecord& image);

/// Decode PNG/JPEG (anything OpenCV can read). Throws Io on failure.
ImageRecord load_image(const std::filesystem::path& path, std::string id);
ImageRecord decode_image(const std::vector<std::uint8_t>& bytes, std::string id);
void save_png(const ImageRecord& image, const std::filesystem::path& path);

bool is_image_file(const std::filesystem::path& path);

} // namespace imtriage
