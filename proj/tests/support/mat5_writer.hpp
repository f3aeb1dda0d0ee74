#pragma once

// Minimal MAT-file Level 5 writer for test fixtures.

#include <zlib.h>

#include <bit>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

#include "vibcnn/ingest/mat5.hpp"

namespace vibcnn::test {

enum class MatClass { f64, f32, i16, i32, u8 };

struct MatVar {
    std::string name;
    std::vector<std::size_t> dims;
    std::vector<double> values;  // column-major, converted to `cls` on write
    MatClass cls = MatClass::f64;
    bool cell = false;  // write as a 1x1 cell wrapping the numeric payload
};

class Mat5Writer {
public:
    explicit Mat5Writer(bool big_endian = false) : big_(big_endian) {}

    /// Short names use the small data element format.
    void add(const MatVar& v, bool compress = false) {
        auto elem = matrix(v);
        if (!compress) {
            append(body_, elem);
            return;
        }
        uLongf len = compressBound(static_cast<uLong>(elem.size()));
        std::vector<std::uint8_t> z(len);
        if (compress2(z.data(), &len, elem.data(), static_cast<uLong>(elem.size()), 6) != Z_OK)
            throw std::runtime_error("compress2 failed");
        z.resize(len);
        put_u32(body_, ingest::mat5::miCOMPRESSED);
        put_u32(body_, static_cast<std::uint32_t>(z.size()));
        append(body_, z);
    }

    std::vector<std::uint8_t> bytes() const {
        std::vector<std::uint8_t> out(128, ' ');
        const std::string text = "MATLAB 5.0 MAT-file, test fixture";
        std::memcpy(out.data(), text.data(), text.size());
        std::fill(out.begin() + 116, out.begin() + 124, 0);
        std::vector<std::uint8_t> tail;
        put_u16(tail, 0x0100);
        out[124] = tail[0];
        out[125] = tail[1];
        out[126] = big_ ? 'M' : 'I';
        out[127] = big_ ? 'I' : 'M';
        out.insert(out.end(), body_.begin(), body_.end());
        return out;
    }

private:
    template <typename U>
    void put(std::vector<std::uint8_t>& out, U v) const {
        std::uint8_t b[sizeof(U)];
        std::memcpy(b, &v, sizeof(U));
        const bool swap = big_ == (std::endian::native == std::endian::little);
        for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(b[swap ? sizeof(U) - 1 - i : i]);
    }
    void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) const { put(out, v); }
    void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) const { put(out, v); }
    static void append(std::vector<std::uint8_t>& out, const std::vector<std::uint8_t>& more) { out.insert(out.end(), more.begin(), more.end()); }
    static void pad8(std::vector<std::uint8_t>& out, std::size_t start) {
        while ((out.size() - start) % 8) out.push_back(0);
    }

    void element(std::vector<std::uint8_t>& out, std::uint32_t type, const std::vector<std::uint8_t>& payload) const {
        if (payload.size() <= 4 && type != ingest::mat5::miMATRIX) {
            // small data element: (bytes << 16) | type, then 4 data bytes
            put_u32(out, static_cast<std::uint32_t>(payload.size() << 16) | type);
            std::vector<std::uint8_t> data = payload;
            data.resize(4, 0);
            append(out, data);
            return;
        }
        put_u32(out, type);
        put_u32(out, static_cast<std::uint32_t>(payload.size()));
        const auto start = out.size();
        append(out, payload);
        pad8(out, start);
    }

    std::vector<std::uint8_t> matrix(const MatVar& v) const {
        using namespace ingest::mat5;
        std::vector<std::uint8_t> body;
        if (v.cell) {
            std::vector<std::uint8_t> flags;
            put_u32(flags, mxCELL);
            put_u32(flags, 0);
            element(body, miUINT32, flags);
            element(body, miINT32, dims({1, 1}));
            element(body, miINT8, std::vector<std::uint8_t>(v.name.begin(), v.name.end()));
            MatVar inner = v;
            inner.cell = false;
            inner.name.clear();
            append(body, matrix(inner));
        } else {
            std::uint8_t cls = mxDOUBLE;
            std::uint32_t type = miDOUBLE;
            std::vector<std::uint8_t> data;
            for (double x : v.values) {
                switch (v.cls) {
                case MatClass::f64: put(data, x); break;
                case MatClass::f32: put(data, static_cast<float>(x)); cls = mxSINGLE; type = miSINGLE; break;
                case MatClass::i16: put(data, static_cast<std::int16_t>(x)); cls = mxINT16; type = miINT16; break;
                case MatClass::i32: put(data, static_cast<std::int32_t>(x)); cls = mxINT32; type = miINT32; break;
                case MatClass::u8: data.push_back(static_cast<std::uint8_t>(x)); cls = mxUINT8; type = miUINT8; break;
                }
            }
            std::vector<std::uint8_t> flags;
            put_u32(flags, cls);
            put_u32(flags, 0);
            element(body, miUINT32, flags);
            element(body, miINT32, dims(v.dims));
            element(body, miINT8, std::vector<std::uint8_t>(v.name.begin(), v.name.end()));
            element(body, type, data);
        }
        std::vector<std::uint8_t> out;
        put_u32(out, miMATRIX);
        put_u32(out, static_cast<std::uint32_t>(body.size()));
        append(out, body);
        return out;
    }

    std::vector<std::uint8_t> dims(const std::vector<std::size_t>& d) const {
        std::vector<std::uint8_t> out;
        for (auto x : d) put(out, static_cast<std::int32_t>(x));
        return out;
    }

    bool big_;
    std::vector<std::uint8_t> body_;
};

} // namespace vibcnn::test
