#include "faultbench/ingest.hpp"

#include "faultbench/common.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace faultbench {

namespace {

const char* kHeader = "id,time_ms,value,label,anomaly_at_ms";

struct PendingRow {
    std::int64_t time_ms;
    double value;
};

struct PendingSequence {
    std::size_t order; // first-appearance order in the stream
    int label = 0;
    std::optional<std::int64_t> anomaly_at_ms;
    std::vector<PendingRow> rows;
};

[[noreturn]] void parse_fail(std::size_t line_no, const std::string& msg) {
    fail("parse error at line " + std::to_string(line_no) + ": " + msg);
}

std::int64_t parse_int(const std::string& s, std::size_t line_no, const char* what) {
    if (s.empty()) parse_fail(line_no, std::string(what) + " is empty");
    errno = 0;
    char* end = nullptr;
    long long v = std::strtoll(s.c_str(), &end, 10);
    if (errno != 0 || end != s.c_str() + s.size())
        parse_fail(line_no, std::string("invalid ") + what + " '" + s + "'");
    return v;
}

double parse_double(const std::string& s, std::size_t line_no) {
    if (s.empty()) parse_fail(line_no, "value is empty");
    errno = 0;
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size()) parse_fail(line_no, "invalid value '" + s + "'");
    // strtod reports ERANGE for subnormal underflow too; those still parse to
    // the nearest representable double, so only overflow rejects.
    if (errno == ERANGE && (v == HUGE_VAL || v == -HUGE_VAL))
        parse_fail(line_no, "value out of range '" + s + "'");
    return v;
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

std::string format_double(double v) {
    char buf[64];
    // 17 significant digits round-trip any IEEE-754 double.
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

void validate(const Dataset& dataset) {
    std::map<std::string, int> seen;
    for (const auto& seq : dataset.sequences) {
        require(!seq.id.empty(), "sequence with empty id");
        require(!seq.samples.empty(), "sequence '" + seq.id + "' has no samples");
        require(seq.label == 0 || seq.label == 1,
                "sequence '" + seq.id + "' has label outside {0,1}");
        if (seq.anomaly_at_ms) {
            require(seq.label == 1,
                    "sequence '" + seq.id + "' has anomaly_at_ms but label 0");
            require(*seq.anomaly_at_ms >= 0 &&
                        static_cast<std::size_t>(*seq.anomaly_at_ms) < seq.samples.size(),
                    "sequence '" + seq.id + "' anomaly_at_ms out of range");
        }
        if (++seen[seq.id] > 1) fail("duplicate sequence id '" + seq.id + "'");
    }
}

Dataset parse_sequences(std::istream& in, const std::string& source_name) {
    std::string line;
    std::size_t line_no = 0;

    if (!std::getline(in, line)) fail("no sequences: empty stream");
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kHeader)
        parse_fail(line_no, std::string("expected header '") + kHeader + "'");

    std::map<std::string, PendingSequence> pending;
    std::size_t next_order = 0;

    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;

        auto fields = split_fields(line);
        if (fields.size() != 5)
            parse_fail(line_no, "expected 5 fields, got " + std::to_string(fields.size()));

        const std::string& id = fields[0];
        if (id.empty()) parse_fail(line_no, "id is empty");

        std::int64_t time_ms = parse_int(fields[1], line_no, "time_ms");
        if (time_ms < 0) parse_fail(line_no, "time_ms is negative");

        double value = parse_double(fields[2], line_no);

        std::int64_t label = parse_int(fields[3], line_no, "label");
        if (label != 0 && label != 1) parse_fail(line_no, "label must be 0 or 1");

        std::optional<std::int64_t> anomaly_at;
        if (!fields[4].empty()) {
            std::int64_t a = parse_int(fields[4], line_no, "anomaly_at_ms");
            if (a < 0) parse_fail(line_no, "anomaly_at_ms is negative");
            anomaly_at = a;
        }

        auto [it, inserted] = pending.try_emplace(id);
        PendingSequence& ps = it->second;
        if (inserted) {
            ps.order = next_order++;
            ps.label = static_cast<int>(label);
            ps.anomaly_at_ms = anomaly_at;
        } else {
            if (ps.label != label)
                parse_fail(line_no, "label not constant for id '" + id + "'");
            if (ps.anomaly_at_ms != anomaly_at)
                parse_fail(line_no, "anomaly_at_ms not constant for id '" + id + "'");
        }
        ps.rows.push_back({time_ms, value});
    }

    if (pending.empty()) fail("no sequences: stream has a header but no rows");

    std::vector<const std::map<std::string, PendingSequence>::value_type*> by_order;
    by_order.reserve(pending.size());
    for (const auto& kv : pending) by_order.push_back(&kv);
    std::sort(by_order.begin(), by_order.end(),
              [](auto* a, auto* b) { return a->second.order < b->second.order; });

    Dataset dataset;
    dataset.source_name = source_name;
    dataset.sequences.reserve(pending.size());

    for (const auto* kv : by_order) {
        const std::string& id = kv->first;
        const PendingSequence& ps = kv->second;

        std::vector<PendingRow> rows = ps.rows;
        std::sort(rows.begin(), rows.end(),
                  [](const PendingRow& a, const PendingRow& b) { return a.time_ms < b.time_ms; });

        RawSequence seq;
        seq.id = id;
        seq.label = ps.label;
        seq.anomaly_at_ms = ps.anomaly_at_ms;
        seq.samples.reserve(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            std::int64_t expect = static_cast<std::int64_t>(i);
            if (rows[i].time_ms != expect) {
                if (i > 0 && rows[i].time_ms == rows[i - 1].time_ms)
                    fail("duplicate time_ms " + std::to_string(rows[i].time_ms) +
                         " for id '" + id + "'");
                fail("id '" + id + "': time_ms must cover 0..n-1 without gaps (expected " +
                     std::to_string(expect) + ", got " + std::to_string(rows[i].time_ms) + ")");
            }
            seq.samples.push_back(rows[i].value);
        }
        dataset.sequences.push_back(std::move(seq));
    }

    validate(dataset);
    return dataset;
}

void write_sequences(const Dataset& dataset, std::ostream& out) {
    validate(dataset);
    out << kHeader << '\n';
    for (const auto& seq : dataset.sequences) {
        std::string anom = seq.anomaly_at_ms ? std::to_string(*seq.anomaly_at_ms) : "";
        for (std::size_t t = 0; t < seq.samples.size(); ++t) {
            out << seq.id << ',' << t << ',' << format_double(seq.samples[t]) << ','
                << seq.label << ',' << anom << '\n';
        }
    }
    if (!out) fail("write failed");
}

Dataset read_dataset_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("cannot open dataset file '" + path + "'");
    return parse_sequences(in, path);
}

void write_dataset_file(const Dataset& dataset, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("cannot open '" + path + "' for writing");
    write_sequences(dataset, out);
    out.flush();
    if (!out) fail("write failed for '" + path + "'");
}

} // namespace faultbench
