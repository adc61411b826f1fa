#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace faultbench {

// One device recording at 1 kHz: sample index i corresponds to i
// milliseconds. anomaly_at_ms is the onset of an injected anomaly and is only
// present on anomalous sequences.
struct RawSequence {
    std::string id;
    std::vector<double> samples;
    int label = 0; // 0 = normal, 1 = anomalous
    std::optional<std::int64_t> anomaly_at_ms;
};

struct Dataset {
    std::vector<RawSequence> sequences;
    std::string source_name;
};

// Throws faultbench::error if any sequence violates its invariants
// (non-empty samples, label in {0,1}, anomaly_at_ms only on anomalous
// sequences and inside the sample range) or if ids repeat.
void validate(const Dataset& dataset);

// Parses the line-oriented interchange format:
//   id,time_ms,value,label,anomaly_at_ms
// Rows may interleave across ids; per id they are sorted by time_ms and must
// form the gap-free range 0..n-1. label and anomaly_at_ms must be constant
// per id. Errors carry the 1-based line number.
Dataset parse_sequences(std::istream& in, const std::string& source_name = "");

// Inverse of parse_sequences; values are serialized with full round-trip
// precision so parse(write(d)) == d exactly.
void write_sequences(const Dataset& dataset, std::ostream& out);

Dataset read_dataset_file(const std::string& path);
void write_dataset_file(const Dataset& dataset, const std::string& path);

} // namespace faultbench
