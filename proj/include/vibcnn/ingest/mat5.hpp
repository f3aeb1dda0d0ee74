#pragma once

// Reader for MAT-file Level 5 containers (the format written by MATLAB
// `save -v5/-v6/-v7`). Only real numeric arrays are extracted.

#include <zlib.h>

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "vibcnn/binary_io.hpp"
#include "vibcnn/error.hpp"

namespace vibcnn::ingest {

struct MatArray {
    std::vector<std::size_t> shape;  // MATLAB dims, column-major storage order
    std::vector<double> values;
    std::size_t numel() const { return values.size(); }
};

struct MatFile {
    std::map<std::string, MatArray> arrays;
    std::vector<std::string> warnings;
};

namespace mat5 {

// data types
enum : std::uint32_t {
    miINT8 = 1, miUINT8 = 2, miINT16 = 3, miUINT16 = 4, miINT32 = 5, miUINT32 = 6,
    miSINGLE = 7, miDOUBLE = 9, miINT64 = 12, miUINT64 = 13, miMATRIX = 14,
    miCOMPRESSED = 15, miUTF8 = 16, miUTF16 = 17, miUTF32 = 18,
};

// array classes
enum : std::uint8_t {
    mxCELL = 1, mxSTRUCT = 2, mxOBJECT = 3, mxCHAR = 4, mxSPARSE = 5, mxDOUBLE = 6,
    mxSINGLE = 7, mxINT8 = 8, mxUINT8 = 9, mxINT16 = 10, mxUINT16 = 11, mxINT32 = 12,
    mxUINT32 = 13, mxINT64 = 14, mxUINT64 = 15,
};

constexpr std::size_t kHeaderSize = 128;
constexpr std::uint8_t kComplexFlag = 0x08;

inline const char* class_name(std::uint8_t cls) {
    switch (cls) {
    case mxCELL: return "cell";
    case mxSTRUCT: return "struct";
    case mxOBJECT: return "object";
    case mxCHAR: return "char";
    case mxSPARSE: return "sparse";
    default: return "unknown";
    }
}

inline std::size_t type_size(std::uint32_t type) {
    switch (type) {
    case miINT8: case miUINT8: case miUTF8: return 1;
    case miINT16: case miUINT16: case miUTF16: return 2;
    case miINT32: case miUINT32: case miSINGLE: case miUTF32: return 4;
    case miDOUBLE: case miINT64: case miUINT64: return 8;
    default: return 0;
    }
}

class Reader {
public:
    Reader(std::span<const std::uint8_t> bytes, bool swap) : bytes_(bytes), swap_(swap) {}

    bool at_end() const { return pos_ >= bytes_.size(); }
    std::size_t pos() const { return pos_; }
    std::size_t remaining() const { return bytes_.size() - pos_; }

    template <typename T>
    T read_raw(std::size_t at) const {
        T v;
        std::memcpy(&v, bytes_.data() + at, sizeof(T));
        if (swap_ && sizeof(T) > 1) v = byteswap_value(v);
        return v;
    }

    struct Tag {
        std::uint32_t type;
        std::uint32_t nbytes;
        std::size_t data_pos;  // offset of the payload
        std::size_t next_pos;  // offset of the following element
    };

    Tag read_tag() {
        if (remaining() < 8) throw Error(ErrorCode::Truncated, "element tag at offset " + std::to_string(pos_));
        const auto first = read_raw<std::uint32_t>(pos_);
        Tag tag{};
        if ((first >> 16) != 0) {
            // small data element: 2-byte count, 2-byte type, 4 bytes of payload
            tag.type = first & 0xffffu;
            tag.nbytes = first >> 16;
            if (tag.nbytes > 4)
                throw Error(ErrorCode::Truncated, "small data element claims " + std::to_string(tag.nbytes) + " bytes");
            tag.data_pos = pos_ + 4;
            tag.next_pos = pos_ + 8;
        } else {
            tag.type = first;
            tag.nbytes = read_raw<std::uint32_t>(pos_ + 4);
            tag.data_pos = pos_ + 8;
            std::size_t padded = tag.nbytes;
            if (tag.type != miCOMPRESSED) padded = (padded + 7) & ~std::size_t{7};
            if (tag.nbytes > bytes_.size() - tag.data_pos)
                throw Error(ErrorCode::Truncated, "element at offset " + std::to_string(pos_) + " extends past end of data");
            // the final element of a stream may omit trailing padding
            tag.next_pos = std::min(tag.data_pos + padded, bytes_.size());
        }
        pos_ = tag.next_pos;
        return tag;
    }

    std::span<const std::uint8_t> payload(const Tag& tag) const { return bytes_.subspan(tag.data_pos, tag.nbytes); }

    std::vector<double> numeric(const Tag& tag) const {
        const std::size_t width = type_size(tag.type);
        if (width == 0 || tag.type == miUTF8 || tag.type == miUTF16 || tag.type == miUTF32)
            throw Error(ErrorCode::BadHeader, "non-numeric data type " + std::to_string(tag.type));
        const std::size_t n = tag.nbytes / width;
        std::vector<double> out(n);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t at = tag.data_pos + i * width;
            switch (tag.type) {
            case miINT8: out[i] = read_raw<std::int8_t>(at); break;
            case miUINT8: out[i] = read_raw<std::uint8_t>(at); break;
            case miINT16: out[i] = read_raw<std::int16_t>(at); break;
            case miUINT16: out[i] = read_raw<std::uint16_t>(at); break;
            case miINT32: out[i] = read_raw<std::int32_t>(at); break;
            case miUINT32: out[i] = read_raw<std::uint32_t>(at); break;
            case miSINGLE: out[i] = read_raw<float>(at); break;
            case miDOUBLE: out[i] = read_raw<double>(at); break;
            case miINT64: out[i] = static_cast<double>(read_raw<std::int64_t>(at)); break;
            case miUINT64: out[i] = static_cast<double>(read_raw<std::uint64_t>(at)); break;
            }
        }
        return out;
    }

private:
    template <typename T>
    static T byteswap_value(T v) {
        std::uint8_t raw[sizeof(T)];
        std::memcpy(raw, &v, sizeof(T));
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(raw[i], raw[sizeof(T) - 1 - i]);
        std::memcpy(&v, raw, sizeof(T));
        return v;
    }

    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
    bool swap_;
};

/// zlib (RFC 1950) stream inflation; output size is not known up front.
inline std::vector<std::uint8_t> inflate_zlib(std::span<const std::uint8_t> in) {
    z_stream zs{};
    if (inflateInit(&zs) != Z_OK) throw Error(ErrorCode::DecompressFailed, "inflateInit failed");
    zs.next_in = const_cast<Bytef*>(in.data());
    zs.avail_in = static_cast<uInt>(in.size());

    std::vector<std::uint8_t> out(std::max<std::size_t>(in.size() * 4, 256));
    int rc = Z_OK;
    while (rc != Z_STREAM_END) {
        if (zs.total_out == out.size()) out.resize(out.size() * 2);
        zs.next_out = out.data() + zs.total_out;
        zs.avail_out = static_cast<uInt>(out.size() - zs.total_out);
        rc = inflate(&zs, Z_NO_FLUSH);
        if (rc == Z_BUF_ERROR && zs.avail_in == 0) break;  // input exhausted before stream end
        if (rc != Z_OK && rc != Z_STREAM_END && rc != Z_BUF_ERROR) break;
    }
    const auto produced = zs.total_out;
    const std::string msg = zs.msg ? zs.msg : "incomplete stream";
    inflateEnd(&zs);
    if (rc != Z_STREAM_END) throw Error(ErrorCode::DecompressFailed, "zlib: " + msg);
    out.resize(produced);
    return out;
}

inline void parse_matrix(const Reader& outer, const Reader::Tag& matrix_tag, bool swap, MatFile& result) {
    if (matrix_tag.nbytes == 0) return;  // empty placeholder element
    Reader r(outer.payload(matrix_tag), swap);

    const auto flags_tag = r.read_tag();
    if (flags_tag.type != miUINT32 || flags_tag.nbytes < 8)
        throw Error(ErrorCode::BadHeader, "miMATRIX without array flags");
    const auto flags_word = r.read_raw<std::uint32_t>(flags_tag.data_pos);
    const auto cls = static_cast<std::uint8_t>(flags_word & 0xffu);
    const auto flags = static_cast<std::uint8_t>((flags_word >> 8) & 0xffu);

    const auto dims_tag = r.read_tag();
    if (dims_tag.type != miINT32) throw Error(ErrorCode::BadHeader, "miMATRIX dimensions are not miINT32");
    std::vector<std::size_t> shape;
    for (std::size_t i = 0; i < dims_tag.nbytes / 4; ++i) {
        const auto d = r.read_raw<std::int32_t>(dims_tag.data_pos + 4 * i);
        if (d < 0) throw Error(ErrorCode::BadHeader, "negative dimension");
        shape.push_back(static_cast<std::size_t>(d));
    }

    const auto name_tag = r.read_tag();
    const auto name_bytes = r.payload(name_tag);
    std::string name(name_bytes.begin(), name_bytes.end());

    const bool numeric_class = cls >= mxDOUBLE && cls <= mxUINT64;
    if (!numeric_class || (flags & kComplexFlag)) {
        const char* what = (flags & kComplexFlag) ? "complex" : class_name(cls);
        result.warnings.push_back("skipped variable '" + name + "' of unsupported class " + what);
        return;
    }

    const auto real_tag = r.read_tag();
    MatArray array;
    array.shape = std::move(shape);
    array.values = r.numeric(real_tag);
    std::size_t expected = 1;
    for (auto d : array.shape) expected *= d;
    if (array.values.size() != expected)
        throw Error(ErrorCode::Truncated, "variable '" + name + "' holds " + std::to_string(array.values.size()) +
                                              " values but its dimensions require " + std::to_string(expected));
    result.arrays[name] = std::move(array);
}

inline void parse_elements(std::span<const std::uint8_t> body, bool swap, MatFile& result, bool inside_compressed) {
    Reader r(body, swap);
    while (!r.at_end()) {
        if (r.remaining() < 8) {
            // trailing zero padding is tolerated
            bool zeros = true;
            for (std::size_t i = r.pos(); i < body.size(); ++i) zeros = zeros && body[i] == 0;
            if (zeros) break;
        }
        const auto tag = r.read_tag();
        if (tag.type == miCOMPRESSED) {
            if (inside_compressed) throw Error(ErrorCode::BadHeader, "nested miCOMPRESSED element");
            const auto inflated = inflate_zlib(r.payload(tag));
            parse_elements(inflated, swap, result, true);
        } else if (tag.type == miMATRIX) {
            parse_matrix(r, tag, swap, result);
        } else {
            result.warnings.push_back("skipped top-level element of type " + std::to_string(tag.type));
        }
    }
}

} // namespace mat5

/// Parses a MAT-file Level 5 byte stream and returns every top-level real
/// numeric array, widened to double. Unsupported variables are skipped and
/// noted in `warnings`; a file with nothing usable is an error.
inline MatFile parse_mat5(std::span<const std::uint8_t> bytes) {
    using namespace mat5;
    if (bytes.size() < kHeaderSize) throw Error(ErrorCode::BadHeader, "file shorter than the 128-byte header");

    bool swap;
    if (bytes[126] == 'I' && bytes[127] == 'M') {
        swap = std::endian::native != std::endian::little;
    } else if (bytes[126] == 'M' && bytes[127] == 'I') {
        swap = std::endian::native != std::endian::big;
    } else {
        throw Error(ErrorCode::BadHeader, "missing endian indicator");
    }
    const Reader header(bytes, swap);
    const auto version = header.read_raw<std::uint16_t>(124);
    if (version != 0x0100) throw Error(ErrorCode::BadHeader, "unsupported version " + std::to_string(version));

    MatFile result;
    parse_elements(bytes.subspan(kHeaderSize), swap, result, false);
    if (result.arrays.empty()) throw Error(ErrorCode::NoNumericArrays, "no real numeric arrays in file");
    return result;
}

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) { return io::read_file(path); }

inline MatFile parse_mat5_file(const std::filesystem::path& path) { return parse_mat5(read_file_bytes(path)); }

} // namespace vibcnn::ingest
