#ifndef IONCHAIN_IO_HPP
#define IONCHAIN_IO_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "ionchain/profile.hpp"

namespace ionchain {

// Numeric CSV with optional '#' comments and an optional non-numeric header
// row. Every data row must have the same column count.
std::vector<std::vector<double>> read_csv(const std::string& path);

// Rows formatted with %.12g; one header line.
void write_csv(const std::string& path, const std::string& header,
               const std::vector<std::vector<double>>& rows);

// Frame manifest: global imaging parameters plus one 'frame' line per CSV,
// ordered by nominal offset.
//
//   # comment
//   pixel_size_um 13.0
//   magnification 11.58
//   frame frame0.csv 0.0        <- path (relative to the manifest) and
//   frame frame1.csv 1000.0        nominal offset in um
struct FrameManifest {
    double pixel_size_um = 13.0;
    double magnification = 11.58;
    std::vector<std::string> frame_paths;      // resolved against the manifest dir
    std::vector<double> nominal_offsets_um;
};

FrameManifest read_frame_manifest(const std::string& path);

// Loads one frame CSV (pixel_index, intensity) into a profile.
FluorescenceProfile read_frame_csv(const std::string& path, double pixel_size_um,
                                   double nominal_offset_um);

// FNV-1a 64-bit checksum of a file's bytes, as a hex string. Used to embed
// input provenance in output reports.
std::string file_checksum_hex(const std::string& path);

std::string format_double(double value);  // %.12g

}  // namespace ionchain

#endif
