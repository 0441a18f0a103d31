#include "rlihf/blob.hpp"

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>

#include "rlihf/errors.hpp"

namespace rlihf {
namespace {

static_assert(std::endian::native == std::endian::little, "little-endian host required");

void put_u64(std::ostream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); }

std::uint64_t get_u64(std::istream& in) {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw ConfigError("truncated blob");
    return v;
}

}  // namespace

void write_blob(std::ostream& out, const char (&magic)[9], const Blob& blob) {
    out.write(magic, 8);
    put_u64(out, blob.header_json.size());
    out.write(blob.header_json.data(), static_cast<std::streamsize>(blob.header_json.size()));
    put_u64(out, blob.values.size());
    out.write(reinterpret_cast<const char*>(blob.values.data()),
              static_cast<std::streamsize>(blob.values.size() * sizeof(double)));
}

Blob read_blob(std::istream& in, const char (&magic)[9]) {
    char got[8] = {};
    in.read(got, 8);
    if (!in || std::string(got, 8) != std::string(magic, 8)) throw ConfigError("bad blob magic");
    Blob blob;
    const auto header_len = get_u64(in);
    blob.header_json.resize(header_len);
    in.read(blob.header_json.data(), static_cast<std::streamsize>(header_len));
    const auto count = get_u64(in);
    blob.values.resize(count);
    in.read(reinterpret_cast<char*>(blob.values.data()), static_cast<std::streamsize>(count * sizeof(double)));
    if (!in) throw ConfigError("truncated blob");
    return blob;
}

}  // namespace rlihf
