#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "bdgx/errors.hpp"
#include "bdgx/tensor.hpp"

namespace bdgx {

/// Shared on-disk artifact container used for checkpoints and .bgd datasets:
/// an 8-byte magic, a little-endian u64 header length, a JSON header
/// {version, kind, meta, tensors:[{name, shape, dtype:"f32", byte_offset,
/// byte_length}]}, then the concatenated little-endian float32 blobs in
/// manifest order. Offsets are relative to the start of the blob section.
class Container {
public:
    static constexpr int kVersion = 1;
    static constexpr char kMagic[9] = "BDGXBIN1";

    std::string kind;
    nlohmann::json meta = nlohmann::json::object();

    void add(const std::string& name, const Tensor& t) {
        names_.push_back(name);
        tensors_.push_back(t);
    }

    bool has(const std::string& name) const {
        for (const auto& n : names_) {
            if (n == name) return true;
        }
        return false;
    }

    const Tensor& get(const std::string& name) const {
        for (std::size_t i = 0; i < names_.size(); ++i) {
            if (names_[i] == name) return tensors_[i];
        }
        throw FormatError("container: missing tensor '" + name + "'");
    }

    const std::vector<std::string>& names() const { return names_; }
    std::size_t size() const { return names_.size(); }

    void save(const std::string& path) const {
        nlohmann::json header;
        header["version"] = kVersion;
        header["kind"] = kind;
        header["meta"] = meta;
        nlohmann::json manifest = nlohmann::json::array();
        std::uint64_t offset = 0;
        for (std::size_t i = 0; i < tensors_.size(); ++i) {
            const std::uint64_t bytes = tensors_[i].numel() * sizeof(float);
            manifest.push_back({{"name", names_[i]},
                                {"shape", tensors_[i].shape},
                                {"dtype", "f32"},
                                {"byte_offset", offset},
                                {"byte_length", bytes}});
            offset += bytes;
        }
        header["tensors"] = manifest;
        const std::string header_str = header.dump();

        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw FormatError("container: cannot open '" + path + "' for writing");
        out.write(kMagic, 8);
        const std::uint64_t hlen = header_str.size();
        write_u64(out, hlen);
        out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
        std::vector<float> buf;
        for (const Tensor& t : tensors_) {
            buf.resize(t.numel());
            for (std::size_t n = 0; n < t.numel(); ++n) buf[n] = static_cast<float>(t.data[n]);
            out.write(reinterpret_cast<const char*>(buf.data()),
                      static_cast<std::streamsize>(buf.size() * sizeof(float)));
        }
        if (!out) throw FormatError("container: write failed for '" + path + "'");
    }

    static Container load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw FormatError("container: cannot open '" + path + "'");
        char magic[8];
        in.read(magic, 8);
        if (!in || std::memcmp(magic, kMagic, 8) != 0) {
            throw FormatError("container: bad magic in '" + path + "'");
        }
        const std::uint64_t hlen = read_u64(in, path);
        std::string header_str(hlen, '\0');
        in.read(header_str.data(), static_cast<std::streamsize>(hlen));
        if (!in) throw FormatError("container: truncated header in '" + path + "'");
        nlohmann::json header;
        try {
            header = nlohmann::json::parse(header_str);
        } catch (const nlohmann::json::exception& e) {
            throw FormatError("container: invalid header JSON in '" + path + "': " + e.what());
        }
        const int version = header.at("version").get<int>();
        if (version != kVersion) {
            throw FormatError("container: unsupported version " + std::to_string(version) +
                              " in '" + path + "'");
        }
        Container c;
        c.kind = header.value("kind", "");
        c.meta = header.value("meta", nlohmann::json::object());
        for (const auto& entry : header.at("tensors")) {
            const std::string name = entry.at("name").get<std::string>();
            const std::vector<std::size_t> shape =
                entry.at("shape").get<std::vector<std::size_t>>();
            if (entry.at("dtype").get<std::string>() != "f32") {
                throw FormatError("container: unsupported dtype for tensor '" + name + "'");
            }
            const std::uint64_t bytes = entry.at("byte_length").get<std::uint64_t>();
            Tensor t(shape);
            if (bytes != t.numel() * sizeof(float)) {
                throw FormatError("container: tensor '" + name + "' byte length " +
                                  std::to_string(bytes) + " does not match shape");
            }
            std::vector<float> buf(t.numel());
            in.read(reinterpret_cast<char*>(buf.data()),
                    static_cast<std::streamsize>(bytes));
            if (!in) throw FormatError("container: truncated blob for tensor '" + name + "'");
            for (std::size_t n = 0; n < t.numel(); ++n) t.data[n] = static_cast<double>(buf[n]);
            c.names_.push_back(name);
            c.tensors_.push_back(std::move(t));
        }
        return c;
    }

private:
    std::vector<std::string> names_;
    std::vector<Tensor> tensors_;

    static void write_u64(std::ofstream& out, std::uint64_t v) {
        char b[8];
        for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
        out.write(b, 8);
    }

    static std::uint64_t read_u64(std::ifstream& in, const std::string& path) {
        unsigned char b[8];
        in.read(reinterpret_cast<char*>(b), 8);
        if (!in) throw FormatError("container: truncated length field in '" + path + "'");
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
        return v;
    }
};

}  // namespace bdgx
