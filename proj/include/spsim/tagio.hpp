#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "spsim/errors.hpp"
#include "spsim/tag_stream.hpp"

namespace spsim {

// PTAG1 binary layout, little-endian, in file order:
//
//   offset size  field
//        0    5  magic "PTAG1"
//        5    2  version (currently 1)
//        7    8  resolution_ps, >= 1
//       15    1  channel_count
//       16    8  record_count
//
// followed by record_count 16-byte records:
//
//        0    8  time (ticks)
//        8    1  channel
//        9    7  reserved, zero
//
// Records are sorted non-decreasing by time.
namespace tagio {

inline constexpr std::array<char, 5> magic = {'P', 'T', 'A', 'G', '1'};
inline constexpr uint16_t format_version = 1;
inline constexpr size_t header_size = 24;
inline constexpr size_t record_size = 16;

namespace detail {

template <typename T>
void put_le(char* out, T v) {
    for (size_t i = 0; i < sizeof(T); ++i) out[i] = char(v >> (8 * i));
}

template <typename T>
T get_le(const char* in) {
    T v = 0;
    for (size_t i = 0; i < sizeof(T); ++i)
        v |= T(uint8_t(in[i])) << (8 * i);
    return v;
}

}  // namespace detail

inline void write_tags(const TagStream& stream, const std::string& path) {
    if (!stream.sorted())
        throw data_error("write_tags: stream must be sorted by time");
    if (stream.resolution_ps < 1)
        throw data_error("write_tags: resolution_ps must be >= 1");

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw data_error("write_tags: cannot open " + path);

    char header[header_size];
    std::memcpy(header, magic.data(), 5);
    detail::put_le<uint16_t>(header + 5, format_version);
    detail::put_le<uint64_t>(header + 7, stream.resolution_ps);
    header[15] = char(stream.tags.empty() ? 1 : stream.max_channel() + 1);
    detail::put_le<uint64_t>(header + 16, stream.tags.size());
    out.write(header, header_size);

    char rec[record_size];
    std::memset(rec, 0, record_size);
    for (const auto& tag : stream.tags) {
        detail::put_le<uint64_t>(rec, tag.time);
        rec[8] = char(tag.channel);
        out.write(rec, record_size);
    }
    if (!out) throw data_error("write_tags: write failed on " + path);
}

inline TagStream read_tags(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw tag_file_error("unreadable file", path);

    char header[header_size];
    in.read(header, header_size);
    if (in.gcount() != std::streamsize(header_size))
        throw tag_file_error("truncated file", path + ": header short");
    if (std::memcmp(header, magic.data(), 5) != 0)
        throw tag_file_error("bad magic", path);
    const uint16_t version = detail::get_le<uint16_t>(header + 5);
    if (version != format_version)
        throw tag_file_error("unsupported version",
                             path + ": version " + std::to_string(version));

    TagStream stream;
    stream.resolution_ps = detail::get_le<uint64_t>(header + 7);
    if (stream.resolution_ps < 1)
        throw tag_file_error("bad header", path + ": resolution_ps = 0");
    const uint64_t count = detail::get_le<uint64_t>(header + 16);

    stream.tags.reserve(count);
    char rec[record_size];
    uint64_t prev = 0;
    for (uint64_t i = 0; i < count; ++i) {
        in.read(rec, record_size);
        if (in.gcount() != std::streamsize(record_size))
            throw tag_file_error("truncated file",
                                 path + ": record " + std::to_string(i));
        const uint64_t time = detail::get_le<uint64_t>(rec);
        if (i > 0 && time < prev)
            throw tag_file_error("unsorted records",
                                 path + ": record " + std::to_string(i));
        prev = time;
        stream.tags.push_back({time, uint8_t(rec[8])});
    }
    // a count mismatch shows as either a short read above or surplus bytes
    char extra;
    if (in.read(&extra, 1))
        throw tag_file_error("record count mismatch",
                             path + ": data past declared records");
    return stream;
}

}  // namespace tagio

}  // namespace spsim
