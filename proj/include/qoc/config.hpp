#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace qoc {

// Sectioned key = value configuration in the INI style: [section] headers,
// one assignment per line, # and ; comments, blank lines ignored. Values are
// plain scalars or comma lists; nothing in a file is ever interpreted as
// code. Readers consume keys as they go and finish with require_consumed(),
// so a typo or an unknown option is reported by name instead of being
// silently ignored.
class Config {
  public:
    static Config parse_file(const std::string& path);
    static Config parse_string(const std::string& text, const std::string& origin = "<string>");

    bool has(const std::string& section, const std::string& key) const;

    // Scalar readers mark the key consumed. The overloads without a default
    // throw ConfigError when the key is absent; the ones with a default do
    // not require the key to exist.
    std::string get_string(const std::string& section, const std::string& key);
    std::string get_string(const std::string& section, const std::string& key,
                           const std::string& fallback);
    double get_double(const std::string& section, const std::string& key);
    double get_double(const std::string& section, const std::string& key, double fallback);
    int get_int(const std::string& section, const std::string& key);
    int get_int(const std::string& section, const std::string& key, int fallback);
    std::uint64_t get_seed(const std::string& section, const std::string& key,
                           std::uint64_t fallback);

    // Comma lists; entries are trimmed and must be nonempty.
    std::vector<std::string> get_list(const std::string& section, const std::string& key);
    std::vector<double> get_double_list(const std::string& section, const std::string& key);

    // Throws ConfigError naming the first key that no reader asked for.
    void require_consumed() const;

    const std::string& origin() const { return origin_; }

  private:
    struct Entry {
        std::string section;
        std::string key;
        std::string value;
        int line = 0;
        mutable bool consumed = false;
    };

    const Entry* find(const std::string& section, const std::string& key) const;
    const Entry& demand(const std::string& section, const std::string& key) const;

    std::string origin_;
    std::vector<Entry> entries_;  // file order, for deterministic error messages
};

// Number parsing shared with the CLI flag handlers: the whole token must be
// consumed, so "1.5x" or an empty string is an error naming `what`.
double parse_double_token(const std::string& token, const std::string& what);
int parse_int_token(const std::string& token, const std::string& what);

}  // namespace qoc
