#pragma once

// RTC1 tensor container: 4-byte magic "RTC1", a little-endian u32 header
// length, a UTF-8 JSON header ({"arrays":[{name,dtype,shape,offset}...],
// "meta":{...}}), then the raw payload. Arrays are little-endian, row-major,
// at 8-byte-aligned offsets relative to the payload start. dtype is one of
// f32, f64, i64. Files are written to a temporary path and renamed into
// place so interrupted writes leave no partial output.

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "relseq/errors.hpp"
#include "relseq/matrix.hpp"

namespace relseq {

using Json = nlohmann::json;

struct ArrayInfo {
    std::string name;
    std::string dtype;
    std::vector<std::size_t> shape;
    std::size_t offset = 0;  // bytes from payload start

    std::size_t numel() const {
        std::size_t n = 1;
        for (auto s : shape) n *= s;
        return n;
    }
    std::size_t elem_size() const {
        if (dtype == "f32") return 4;
        if (dtype == "f64" || dtype == "i64") return 8;
        throw ContainerError("unknown dtype: " + dtype);
    }
    std::size_t byte_size() const { return numel() * elem_size(); }
};

class ContainerWriter {
public:
    void add_f32(const std::string& name, std::vector<std::size_t> shape,
                 const double* values, std::size_t count) {
        check_count(name, shape, count);
        std::vector<float> tmp(count);
        for (std::size_t i = 0; i < count; ++i) {
            if (!std::isfinite(values[i]))
                throw ContainerError("array " + name + " has non-finite entries");
            tmp[i] = static_cast<float>(values[i]);
        }
        append(name, "f32", std::move(shape), tmp.data(), count * sizeof(float));
    }

    void add_f32(const std::string& name, const Matrix& m) {
        add_f32(name, {m.rows(), m.cols()}, m.data(), m.size());
    }

    void add_f64(const std::string& name, std::vector<std::size_t> shape,
                 const double* values, std::size_t count) {
        check_count(name, shape, count);
        for (std::size_t i = 0; i < count; ++i)
            if (!std::isfinite(values[i]))
                throw ContainerError("array " + name + " has non-finite entries");
        append(name, "f64", std::move(shape), values, count * sizeof(double));
    }

    void add_i64(const std::string& name, std::vector<std::size_t> shape,
                 const std::int64_t* values, std::size_t count) {
        check_count(name, shape, count);
        append(name, "i64", std::move(shape), values, count * sizeof(std::int64_t));
    }

    void set_meta(Json meta) { meta_ = std::move(meta); }

    void write(const std::filesystem::path& path) const {
        Json header;
        header["arrays"] = Json::array();
        for (const auto& a : arrays_) {
            header["arrays"].push_back(
                {{"name", a.name}, {"dtype", a.dtype}, {"shape", a.shape}, {"offset", a.offset}});
        }
        header["meta"] = meta_.is_null() ? Json::object() : meta_;
        const std::string header_str = header.dump();

        const std::filesystem::path tmp = path.string() + ".tmp";
        {
            std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
            if (!os) throw ContainerError("cannot open for writing: " + tmp.string());
            os.write("RTC1", 4);
            const auto len = static_cast<std::uint32_t>(header_str.size());
            unsigned char lenb[4] = {static_cast<unsigned char>(len & 0xff),
                                     static_cast<unsigned char>((len >> 8) & 0xff),
                                     static_cast<unsigned char>((len >> 16) & 0xff),
                                     static_cast<unsigned char>((len >> 24) & 0xff)};
            os.write(reinterpret_cast<const char*>(lenb), 4);
            os.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
            os.write(payload_.data(), static_cast<std::streamsize>(payload_.size()));
            if (!os) throw ContainerError("write failed: " + tmp.string());
        }
        std::filesystem::rename(tmp, path);
    }

private:
    static void check_count(const std::string& name, const std::vector<std::size_t>& shape,
                            std::size_t count) {
        std::size_t n = 1;
        for (auto s : shape) n *= s;
        if (n != count)
            throw ContainerError("array " + name + ": shape does not match element count");
    }

    void append(const std::string& name, const char* dtype, std::vector<std::size_t> shape,
                const void* bytes, std::size_t nbytes) {
        for (const auto& a : arrays_)
            if (a.name == name) throw ContainerError("duplicate array name: " + name);
        while (payload_.size() % 8 != 0) payload_.push_back('\0');
        ArrayInfo info{name, dtype, std::move(shape), payload_.size()};
        payload_.resize(payload_.size() + nbytes);
        std::memcpy(payload_.data() + info.offset, bytes, nbytes);
        arrays_.push_back(std::move(info));
    }

    std::vector<ArrayInfo> arrays_;
    std::vector<char> payload_;
    Json meta_;
};

class Container {
public:
    static Container read(const std::filesystem::path& path) {
        std::ifstream is(path, std::ios::binary);
        if (!is) throw ContainerError("cannot open: " + path.string());
        char magic[4];
        is.read(magic, 4);
        if (!is || std::memcmp(magic, "RTC1", 4) != 0)
            throw ContainerError("bad magic in " + path.string());
        unsigned char lenb[4];
        is.read(reinterpret_cast<char*>(lenb), 4);
        if (!is) throw ContainerError("truncated header length in " + path.string());
        const std::uint32_t len = static_cast<std::uint32_t>(lenb[0]) |
                                  (static_cast<std::uint32_t>(lenb[1]) << 8) |
                                  (static_cast<std::uint32_t>(lenb[2]) << 16) |
                                  (static_cast<std::uint32_t>(lenb[3]) << 24);
        std::string header_str(len, '\0');
        is.read(header_str.data(), len);
        if (!is) throw ContainerError("truncated header in " + path.string());

        Container c;
        Json header;
        try {
            header = Json::parse(header_str);
        } catch (const Json::exception& e) {
            throw ContainerError("invalid header JSON in " + path.string() + ": " + e.what());
        }
        c.meta_ = header.value("meta", Json::object());
        for (const auto& j : header.at("arrays")) {
            ArrayInfo a;
            a.name = j.at("name").get<std::string>();
            a.dtype = j.at("dtype").get<std::string>();
            a.shape = j.at("shape").get<std::vector<std::size_t>>();
            a.offset = j.at("offset").get<std::size_t>();
            a.elem_size();  // validates dtype
            c.arrays_.push_back(std::move(a));
        }
        c.payload_.assign(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());

        // Extents must stay inside the payload and must not overlap.
        std::vector<std::pair<std::size_t, std::size_t>> spans;
        for (const auto& a : c.arrays_) {
            const std::size_t end = a.offset + a.byte_size();
            if (end > c.payload_.size())
                throw ContainerError("array " + a.name + " exceeds payload in " + path.string());
            spans.emplace_back(a.offset, end);
        }
        std::sort(spans.begin(), spans.end());
        for (std::size_t i = 1; i < spans.size(); ++i)
            if (spans[i].first < spans[i - 1].second)
                throw ContainerError("overlapping arrays in " + path.string());
        return c;
    }

    const Json& meta() const noexcept { return meta_; }
    const std::vector<ArrayInfo>& arrays() const noexcept { return arrays_; }

    bool has(const std::string& name) const {
        for (const auto& a : arrays_)
            if (a.name == name) return true;
        return false;
    }

    const ArrayInfo& info(const std::string& name) const {
        for (const auto& a : arrays_)
            if (a.name == name) return a;
        throw ContainerError("no such array: " + name);
    }

    // All numeric reads widen to double.
    std::vector<double> read_values(const std::string& name) const {
        const ArrayInfo& a = info(name);
        std::vector<double> out(a.numel());
        const char* base = payload_.data() + a.offset;
        if (a.dtype == "f32") {
            for (std::size_t i = 0; i < out.size(); ++i) {
                float v;
                std::memcpy(&v, base + i * 4, 4);
                out[i] = static_cast<double>(v);
            }
        } else if (a.dtype == "f64") {
            std::memcpy(out.data(), base, out.size() * 8);
        } else {
            throw ContainerError("array " + name + " is not floating point");
        }
        return out;
    }

    std::vector<std::int64_t> read_i64(const std::string& name) const {
        const ArrayInfo& a = info(name);
        if (a.dtype != "i64") throw ContainerError("array " + name + " is not i64");
        std::vector<std::int64_t> out(a.numel());
        std::memcpy(out.data(), payload_.data() + a.offset, out.size() * 8);
        return out;
    }

    // 2-D (or 1-D, read as a column) array as a Matrix.
    Matrix read_matrix(const std::string& name) const {
        const ArrayInfo& a = info(name);
        const auto values = read_values(name);
        if (a.shape.size() == 1) return Matrix(a.shape[0], 1, values);
        if (a.shape.size() == 2) return Matrix(a.shape[0], a.shape[1], values);
        throw ContainerError("array " + name + " is not 1-D or 2-D");
    }

private:
    std::vector<ArrayInfo> arrays_;
    std::vector<char> payload_;
    Json meta_;
};

} // namespace relseq
