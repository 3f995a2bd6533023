#pragma once

#include <fstream>
#include <string>
#include <vector>

namespace qoc {

// RFC 4180 output: comma separation, CRLF row endings, a header row always,
// quoting only for fields that need it. Numeric fields go through num(),
// which prints 17 significant digits so a reader recovers the exact double.
class CsvWriter {
  public:
    CsvWriter(const std::string& path, const std::vector<std::string>& header);

    void row(const std::vector<std::string>& fields);
    int rows_written() const { return rows_; }

    static std::string num(double v);

  private:
    void emit(const std::vector<std::string>& fields);

    std::ofstream out_;
    std::string path_;
    size_t width_ = 0;
    int rows_ = 0;
};

}  // namespace qoc
