#pragma once

#include <filesystem>
#include <string>

#include "cocoedit/grid.hpp"

namespace cocoedit {

// NetPBM greymap I/O. Accepts P5 (binary) and P2 (ASCII) with maxval 255.
// Intensities map to [0,1] by division by 255.

Grid2D read_pgm(const std::filesystem::path& path);
Grid2D parse_pgm(const std::string& bytes);

/// Reads a mask; every pixel must be 0 or 255. Throws InvalidMaskError otherwise.
EditMask read_pgm_mask(const std::filesystem::path& path);
EditMask parse_pgm_mask(const std::string& bytes);

/// Writes P5. Values must lie in [0,1]; each is stored as floor(v*255 + 0.5).
void write_pgm(const Grid2D& grid, const std::filesystem::path& path);
std::string encode_pgm(const Grid2D& grid);

/// Writes a P5 mask with pixels in {0,255}.
void write_pgm_mask(const EditMask& mask, const std::filesystem::path& path);
std::string encode_pgm_mask(const EditMask& mask);

}  // namespace cocoedit
