#include "qoc/csv.hpp"

#include <cstdio>

#include "qoc/errors.hpp"

namespace qoc {

namespace {

bool needs_quotes(const std::string& f) {
    return f.find_first_of(",\"\r\n") != std::string::npos;
}

std::string quoted(const std::string& f) {
    std::string out = "\"";
    for (char c : f) {
        out += c;
        if (c == '"') out += '"';
    }
    out += '"';
    return out;
}

}  // namespace

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& header)
    : out_(path, std::ios::binary), path_(path), width_(header.size()) {
    if (!out_) throw IoError("cannot open '" + path + "' for writing");
    emit(header);
}

void CsvWriter::emit(const std::vector<std::string>& fields) {
    if (fields.size() != width_)
        throw DimMismatch("csv row for '" + path_ + "' has " + std::to_string(fields.size()) +
                          " fields, header has " + std::to_string(width_));
    for (size_t i = 0; i < fields.size(); ++i) {
        if (i > 0) out_ << ',';
        out_ << (needs_quotes(fields[i]) ? quoted(fields[i]) : fields[i]);
    }
    out_ << "\r\n";
    if (!out_) throw IoError("write to '" + path_ + "' failed");
}

void CsvWriter::row(const std::vector<std::string>& fields) {
    emit(fields);
    ++rows_;
}

std::string CsvWriter::num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace qoc
