// Copyright Contributors to the evsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "evsplat/events.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace evsplat {

static_assert(std::endian::native == std::endian::little, "event binary I/O assumes a little-endian host");

namespace {

constexpr std::array<char, 4> kMagic      = {'E', 'V', 'T', '1'};
constexpr size_t              kRecordSize = 20;
constexpr size_t              kHeaderSize = 4 + 4 + 4 + 8;

template <typename T>
void
put(char *dst, T v) {
    std::memcpy(dst, &v, sizeof(T));
}

template <typename T>
T
get(const char *src) {
    T v;
    std::memcpy(&v, src, sizeof(T));
    return v;
}

} // namespace

void
write_events_binary(const std::filesystem::path &path, const EventStream &stream) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot open " + path.string() + " for writing");
    }
    std::array<char, kHeaderSize> header{};
    std::memcpy(header.data(), kMagic.data(), 4);
    put<uint32_t>(header.data() + 4, static_cast<uint32_t>(stream.width()));
    put<uint32_t>(header.data() + 8, static_cast<uint32_t>(stream.height()));
    put<uint64_t>(header.data() + 12, static_cast<uint64_t>(stream.size()));
    out.write(header.data(), header.size());

    std::vector<char> buf(stream.size() * kRecordSize, 0);
    char             *p = buf.data();
    for (const auto &e : stream.events()) {
        put<double>(p, e.t);
        put<uint16_t>(p + 8, e.x);
        put<uint16_t>(p + 10, e.y);
        put<int8_t>(p + 12, e.p);
        p += kRecordSize;
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) {
        throw std::runtime_error("write failed for " + path.string());
    }
}

EventStream
read_events_binary(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open " + path.string());
    }
    std::array<char, kHeaderSize> header{};
    in.read(header.data(), header.size());
    if (in.gcount() != static_cast<std::streamsize>(header.size())) {
        throw std::runtime_error(path.string() + ": truncated event header");
    }
    if (std::memcmp(header.data(), kMagic.data(), 4) != 0) {
        throw std::runtime_error(path.string() + ": bad magic, expected EVT1");
    }
    const auto width  = get<uint32_t>(header.data() + 4);
    const auto height = get<uint32_t>(header.data() + 8);
    const auto count  = get<uint64_t>(header.data() + 12);

    const auto file_size = std::filesystem::file_size(path);
    if (file_size < kHeaderSize || (file_size - kHeaderSize) / kRecordSize < count) {
        throw std::runtime_error(path.string() + ": truncated, header declares " + std::to_string(count) +
                                 " events but file holds " + std::to_string((file_size - kHeaderSize) / kRecordSize));
    }
    std::vector<char> buf(count * kRecordSize);
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() != static_cast<std::streamsize>(buf.size())) {
        throw std::runtime_error(path.string() + ": truncated event records");
    }
    std::vector<Event> events(count);
    const char        *p = buf.data();
    for (auto &e : events) {
        e.t = get<double>(p);
        e.x = get<uint16_t>(p + 8);
        e.y = get<uint16_t>(p + 10);
        e.p = get<int8_t>(p + 12);
        p += kRecordSize;
    }
    return EventStream(static_cast<int>(width), static_cast<int>(height), std::move(events));
}

void
write_events_csv(const std::filesystem::path &path, const EventStream &stream) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot open " + path.string() + " for writing");
    }
    out << "t,x,y,p\n";
    std::array<char, 64> num{};
    for (const auto &e : stream.events()) {
        // shortest representation that parses back to the same double
        const auto r = std::to_chars(num.data(), num.data() + num.size(), e.t);
        out.write(num.data(), r.ptr - num.data());
        out << ',' << e.x << ',' << e.y << ',' << static_cast<int>(e.p) << '\n';
    }
    if (!out) {
        throw std::runtime_error("write failed for " + path.string());
    }
}

EventStream
read_events_csv(const std::filesystem::path &path, int width, int height) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open " + path.string());
    }
    std::string line;
    if (!std::getline(in, line) || line.rfind("t,x,y,p", 0) != 0) {
        throw std::runtime_error(path.string() + ": missing header t,x,y,p");
    }
    std::vector<Event> events;
    size_t             lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        std::array<std::string_view, 4> fields;
        std::string_view                rest(line);
        for (int k = 0; k < 4; ++k) {
            const auto comma = rest.find(',');
            if ((k < 3) == (comma == std::string_view::npos)) {
                throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": expected 4 fields");
            }
            fields[k] = rest.substr(0, comma);
            rest      = k < 3 ? rest.substr(comma + 1) : std::string_view{};
        }
        Event e;
        int   x = 0, y = 0, pol = 0;
        auto  parse = [&](std::string_view f, auto &v) {
            const auto r = std::from_chars(f.data(), f.data() + f.size(), v);
            if (r.ec != std::errc{} || r.ptr != f.data() + f.size()) {
                throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": bad field '" +
                                         std::string(f) + "'");
            }
        };
        parse(fields[0], e.t);
        parse(fields[1], x);
        parse(fields[2], y);
        parse(fields[3], pol);
        if (x < 0 || y < 0 || x > 0xffff || y > 0xffff) {
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": coordinate out of range");
        }
        if (pol != 1 && pol != -1) {
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": polarity must be +1 or -1");
        }
        e.x = static_cast<uint16_t>(x);
        e.y = static_cast<uint16_t>(y);
        e.p = static_cast<int8_t>(pol);
        events.push_back(e);
    }
    return EventStream(width, height, std::move(events));
}

} // namespace evsplat
