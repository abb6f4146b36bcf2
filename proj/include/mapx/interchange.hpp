#pragma once

// Tensor interchange format shared with external tools:
//   <name>.f32   raw little-endian IEEE-754 float32, row-major
//   <name>.json  {"name", "shape", "dtype": "float32", "byte_order": "little",
//                 "scenario_hash"}

#include <json.hpp>

#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mapx/estimate.hpp"

namespace mapx {

namespace fs = std::filesystem;

struct TensorHeader {
    std::string name;
    std::vector<std::int64_t> shape;
    std::string scenario_hash;

    std::size_t element_count() const {
        return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                               [](std::size_t a, std::int64_t b) { return a * static_cast<std::size_t>(b); });
    }
};

struct Tensor {
    TensorHeader header;
    std::vector<float> data;
};

inline fs::path sidecar_path(const fs::path& data_file) {
    fs::path p = data_file;
    p.replace_extension(".json");
    return p;
}

inline void write_tensor(const fs::path& data_file, const TensorHeader& header, std::span<const double> values) {
    if (values.size() != header.element_count())
        throw std::invalid_argument("write_tensor: " + header.name + ": value count does not match shape");
    if (data_file.has_parent_path()) fs::create_directories(data_file.parent_path());
    {
        std::ofstream out(data_file, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write '" + data_file.string() + "'");
        for (const double v : values) {
            std::uint32_t bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
            if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
            out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
        }
        if (!out) throw std::runtime_error("failed writing '" + data_file.string() + "'");
    }
    nlohmann::json meta = {{"name", header.name},
                           {"shape", header.shape},
                           {"dtype", "float32"},
                           {"byte_order", "little"},
                           {"scenario_hash", header.scenario_hash}};
    std::ofstream side(sidecar_path(data_file));
    if (!side) throw std::runtime_error("cannot write '" + sidecar_path(data_file).string() + "'");
    side << meta.dump(2) << '\n';
}

inline Tensor read_tensor(const fs::path& data_file) {
    const fs::path meta_path = sidecar_path(data_file);
    std::ifstream side(meta_path);
    if (!side) throw std::runtime_error("missing tensor manifest '" + meta_path.string() + "'");
    nlohmann::json meta;
    try {
        side >> meta;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("malformed tensor manifest '" + meta_path.string() + "': " + e.what());
    }
    Tensor t;
    try {
        t.header.name = meta.at("name").get<std::string>();
        t.header.shape = meta.at("shape").get<std::vector<std::int64_t>>();
        t.header.scenario_hash = meta.value("scenario_hash", std::string{});
        if (meta.at("dtype").get<std::string>() != "float32")
            throw std::runtime_error("unsupported dtype in '" + meta_path.string() + "'");
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("incomplete tensor manifest '" + meta_path.string() + "': " + e.what());
    }
    for (const auto d : t.header.shape)
        if (d < 0) throw std::runtime_error("negative dimension in '" + meta_path.string() + "'");

    std::ifstream in(data_file, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read '" + data_file.string() + "'");
    const std::size_t n = t.header.element_count();
    in.seekg(0, std::ios::end);
    const auto bytes = static_cast<std::size_t>(in.tellg());
    if (bytes != n * sizeof(float))
        throw std::runtime_error("'" + data_file.string() + "' holds " + std::to_string(bytes) + " bytes, manifest shape needs " +
                                 std::to_string(n * sizeof(float)));
    in.seekg(0);
    t.data.resize(n);
    for (float& v : t.data) {
        std::uint32_t bits = 0;
        in.read(reinterpret_cast<char*>(&bits), sizeof bits);
        if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
        v = std::bit_cast<float>(bits);
    }
    return t;
}

/// Writes estimate values as <stem>.f32 and its validity (1/0) as <stem>_mask.f32.
/// Invalid cells hold 0 in the value tensor.
inline void write_estimate(const fs::path& dir, const std::string& stem, const GroundEstimate& est,
                           const std::string& scenario_hash) {
    const std::int64_t side = est.values.rows();
    Eigen::MatrixXd values = est.values;
    Eigen::MatrixXd mask(est.valid.rows(), est.valid.cols());
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        mask.data()[i] = est.valid.data()[i] ? 1.0 : 0.0;
        if (!est.valid.data()[i]) values.data()[i] = 0.0;
    }
    write_tensor(dir / (stem + ".f32"), {stem, {side, side}, scenario_hash}, to_row_major(values));
    write_tensor(dir / (stem + "_mask.f32"), {stem + "_mask", {side, side}, scenario_hash}, to_row_major(mask));
}

inline Eigen::MatrixXd tensor_as_grid(const Tensor& t) {
    if (t.header.shape.size() != 2) throw std::runtime_error("tensor '" + t.header.name + "' is not 2-D");
    const int rows = static_cast<int>(t.header.shape[0]), cols = static_cast<int>(t.header.shape[1]);
    std::vector<double> d(t.data.begin(), t.data.end());
    return from_row_major(d, rows, cols);
}

/// Reads an estimate written by write_estimate or by an external producer.
/// The mask file is optional (absent: every cell valid). NaN values are an error.
inline GroundEstimate read_estimate(const fs::path& data_file) {
    const Tensor t = read_tensor(data_file);
    GroundEstimate est;
    est.values = tensor_as_grid(t);
    for (Eigen::Index i = 0; i < est.values.size(); ++i)
        if (!std::isfinite(est.values.data()[i]))
            throw std::runtime_error("'" + data_file.string() + "' contains non-finite values");
    est.valid = Mask::Constant(est.values.rows(), est.values.cols(), true);
    fs::path mask_file = data_file;
    mask_file.replace_filename(data_file.stem().string() + "_mask.f32");
    if (fs::exists(mask_file)) {
        const Eigen::MatrixXd m = tensor_as_grid(read_tensor(mask_file));
        if (m.rows() != est.values.rows() || m.cols() != est.values.cols())
            throw std::runtime_error("mask shape differs from estimate shape");
        est.valid = m.array() > 0.5;
    }
    return est;
}

}  // namespace mapx
