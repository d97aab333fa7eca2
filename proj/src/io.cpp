#include "ionchain/io.hpp"

#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ionchain/constants.hpp"
#include "ionchain/errors.hpp"

namespace ionchain {

namespace {

bool parse_row(const std::string& line, std::vector<double>& row) {
    row.clear();
    std::string token;
    std::stringstream ss(line);
    while (std::getline(ss, token, ',')) {
        try {
            std::size_t pos = 0;
            const double v = std::stod(token, &pos);
            while (pos < token.size() && std::isspace(static_cast<unsigned char>(token[pos]))) ++pos;
            if (pos != token.size()) return false;
            row.push_back(v);
        } catch (const std::exception&) {
            return false;
        }
    }
    return !row.empty();
}

}  // namespace

std::string format_double(double value) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", value);
    return buf;
}

std::vector<std::vector<double>> read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw DomainError("cannot open '" + path + "'");
    std::vector<std::vector<double>> rows;
    std::string line;
    std::vector<double> row;
    bool first_content = true;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        if (!parse_row(line, row)) {
            if (first_content) {  // header row
                first_content = false;
                continue;
            }
            throw DomainError("CSV parse error at " + path + ":" + std::to_string(lineno));
        }
        first_content = false;
        if (!rows.empty() && rows.back().size() != row.size())
            throw DomainError("CSV column count changes at " + path + ":" + std::to_string(lineno));
        rows.push_back(row);
    }
    return rows;
}

void write_csv(const std::string& path, const std::string& header,
               const std::vector<std::vector<double>>& rows) {
    std::ofstream out(path);
    if (!out)
        throw DomainError("cannot write '" + path + "'");
    out << header << "\n";
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out << ",";
            out << format_double(row[i]);
        }
        out << "\n";
    }
}

FrameManifest read_frame_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw DomainError("cannot open manifest '" + path + "'");
    const auto dir = std::filesystem::path(path).parent_path();

    FrameManifest manifest;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ss(line);
        std::string key;
        if (!(ss >> key)) continue;
        if (key == "pixel_size_um") {
            if (!(ss >> manifest.pixel_size_um))
                throw DomainError("manifest parse error at line " + std::to_string(lineno));
        } else if (key == "magnification") {
            if (!(ss >> manifest.magnification))
                throw DomainError("manifest parse error at line " + std::to_string(lineno));
        } else if (key == "frame") {
            std::string file;
            double offset_um = 0.0;
            if (!(ss >> file >> offset_um))
                throw DomainError("manifest frame line malformed at line " + std::to_string(lineno));
            manifest.frame_paths.push_back((dir / file).string());
            manifest.nominal_offsets_um.push_back(offset_um);
        } else {
            throw DomainError("manifest: unknown key '" + key + "' at line " + std::to_string(lineno));
        }
    }
    if (manifest.frame_paths.empty())
        throw DomainError("manifest '" + path + "' lists no frames");
    if (!(manifest.pixel_size_um > 0.0) || !(manifest.magnification > 0.0))
        throw DomainError("manifest: pixel size and magnification must be positive");
    for (std::size_t i = 1; i < manifest.nominal_offsets_um.size(); ++i)
        if (!(manifest.nominal_offsets_um[i] > manifest.nominal_offsets_um[i - 1]))
            throw DomainError("manifest: frames must be ordered by nominal offset");
    return manifest;
}

FluorescenceProfile read_frame_csv(const std::string& path, double pixel_size_um,
                                   double nominal_offset_um) {
    const auto rows = read_csv(path);
    if (rows.empty())
        throw DomainError("frame '" + path + "' is empty");

    FluorescenceProfile profile;
    profile.pixel_size_m = pixel_size_um * constants::kMicron;
    profile.frame_offset_m = nominal_offset_um * constants::kMicron;
    profile.intensities.resize(rows.size(), 0.0);
    for (const auto& row : rows) {
        if (row.size() != 2)
            throw DomainError("frame '" + path + "': expected (pixel_index, intensity) rows");
        const auto idx = static_cast<long>(row[0]);
        if (idx < 0 || static_cast<std::size_t>(idx) >= rows.size())
            throw DomainError("frame '" + path + "': pixel index out of range");
        profile.intensities[static_cast<std::size_t>(idx)] = row[1];
    }
    validate_profile(profile);
    return profile;
}

std::string file_checksum_hex(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw DomainError("cannot open '" + path + "' for checksum");
    std::uint64_t hash = 1469598103934665603ull;  // FNV offset basis
    char chunk[4096];
    while (in.read(chunk, sizeof chunk) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            hash ^= static_cast<unsigned char>(chunk[i]);
            hash *= 1099511628211ull;  // FNV prime
        }
        if (!in) break;
    }
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

}  // namespace ionchain
