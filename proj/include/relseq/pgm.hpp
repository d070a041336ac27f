#pragma once

// Binary PGM (P5, maxval 255) export for frames.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <vector>

#include "relseq/errors.hpp"
#include "relseq/matrix.hpp"

namespace relseq {

inline void write_pgm(const std::filesystem::path& path, const Matrix& gray) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
    os << "P5\n" << gray.cols() << " " << gray.rows() << "\n255\n";
    std::vector<unsigned char> bytes(gray.size());
    for (std::size_t i = 0; i < gray.size(); ++i) {
        const double v = std::clamp(gray.data()[i], 0.0, 255.0);
        bytes[i] = static_cast<unsigned char>(v + 0.5);
    }
    os.write(reinterpret_cast<const char*>(bytes.data()),
             static_cast<std::streamsize>(bytes.size()));
    if (!os) throw std::runtime_error("write failed: " + path.string());
}

// Min-max normalization over a whole sequence of flattened square frames, so
// one sequence shares a single gray scale.
inline void write_sequence_pgms(const std::filesystem::path& dir, const std::string& prefix,
                                const std::vector<Matrix>& frames, std::size_t side) {
    if (frames.empty()) return;
    double lo = frames[0](0, 0), hi = lo;
    for (const auto& f : frames) {
        if (f.rows() != side * side || f.cols() != 1)
            throw ShapeError("write_sequence_pgms: frame is not a flattened " +
                             std::to_string(side) + "x" + std::to_string(side) + " column");
        for (std::size_t i = 0; i < f.size(); ++i) {
            lo = std::min(lo, f.data()[i]);
            hi = std::max(hi, f.data()[i]);
        }
    }
    const double span = hi > lo ? hi - lo : 1.0;
    std::filesystem::create_directories(dir);
    for (std::size_t t = 0; t < frames.size(); ++t) {
        Matrix img(side, side);
        for (std::size_t i = 0; i < img.size(); ++i)
            img.data()[i] = 255.0 * (frames[t].data()[i] - lo) / span;
        char name[64];
        std::snprintf(name, sizeof(name), "%s_%03zu.pgm", prefix.c_str(), t);
        write_pgm(dir / name, img);
    }
}

} // namespace relseq
