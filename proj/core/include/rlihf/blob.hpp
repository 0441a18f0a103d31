#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rlihf {

// Container shared by decoder models and agent checkpoints:
// 8-byte magic, u64 header length, JSON header, u64 count, float64 values.
struct Blob {
    std::string header_json;
    std::vector<double> values;
};

void write_blob(std::ostream& out, const char (&magic)[9], const Blob& blob);
Blob read_blob(std::istream& in, const char (&magic)[9]);

}  // namespace rlihf
