#include "qoc/config.hpp"

#include <cctype>
#include <climits>
#include <fstream>
#include <sstream>

#include "qoc/errors.hpp"

namespace qoc {

namespace {

std::string trim(const std::string& s) {
    size_t b = 0;
    size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::string strip_comment(const std::string& line) {
    for (size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '#' || line[i] == ';') return line.substr(0, i);
    }
    return line;
}

std::string spot(const std::string& section, const std::string& key) {
    return "[" + section + "] " + key;
}

}  // namespace

Config Config::parse_string(const std::string& text, const std::string& origin) {
    Config cfg;
    cfg.origin_ = origin;
    std::istringstream in(text);
    std::string raw;
    std::string section;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        if (!raw.empty() && raw.back() == '\r') raw.pop_back();
        std::string line = trim(strip_comment(raw));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']' || line.size() < 3)
                throw ConfigError(origin + ":" + std::to_string(line_no) +
                                  ": malformed section header '" + line + "'");
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty())
                throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty section name");
            continue;
        }
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(line_no) +
                              ": expected key = value, got '" + line + "'");
        Entry e;
        e.section = section;
        e.key = trim(line.substr(0, eq));
        e.value = trim(line.substr(eq + 1));
        e.line = line_no;
        if (e.key.empty())
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty key");
        if (e.section.empty())
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": key '" + e.key +
                              "' appears before any [section] header");
        for (const Entry& seen : cfg.entries_) {
            if (seen.section == e.section && seen.key == e.key)
                throw ConfigError(origin + ":" + std::to_string(line_no) + ": duplicate key " +
                                  spot(e.section, e.key) + " (first set on line " +
                                  std::to_string(seen.line) + ")");
        }
        cfg.entries_.push_back(std::move(e));
    }
    return cfg;
}

Config Config::parse_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_string(buf.str(), path);
}

const Config::Entry* Config::find(const std::string& section, const std::string& key) const {
    for (const Entry& e : entries_) {
        if (e.section == section && e.key == key) return &e;
    }
    return nullptr;
}

const Config::Entry& Config::demand(const std::string& section, const std::string& key) const {
    const Entry* e = find(section, key);
    if (e == nullptr)
        throw ConfigError(origin_ + ": missing required key " + spot(section, key));
    e->consumed = true;
    return *e;
}

bool Config::has(const std::string& section, const std::string& key) const {
    return find(section, key) != nullptr;
}

std::string Config::get_string(const std::string& section, const std::string& key) {
    return demand(section, key).value;
}

std::string Config::get_string(const std::string& section, const std::string& key,
                               const std::string& fallback) {
    const Entry* e = find(section, key);
    if (e == nullptr) return fallback;
    e->consumed = true;
    return e->value;
}

double parse_double_token(const std::string& token, const std::string& what) {
    std::string t = trim(token);
    if (!t.empty()) {
        try {
            size_t pos = 0;
            double v = std::stod(t, &pos);
            if (pos == t.size()) return v;
        } catch (const std::exception&) {
        }
    }
    throw ConfigError("expected a number for " + what + ", got '" + token + "'");
}

int parse_int_token(const std::string& token, const std::string& what) {
    std::string t = trim(token);
    if (!t.empty()) {
        try {
            size_t pos = 0;
            long v = std::stol(t, &pos);
            if (pos == t.size() && v >= INT_MIN && v <= INT_MAX) return static_cast<int>(v);
        } catch (const std::exception&) {
        }
    }
    throw ConfigError("expected an integer for " + what + ", got '" + token + "'");
}

double Config::get_double(const std::string& section, const std::string& key) {
    return parse_double_token(demand(section, key).value, spot(section, key));
}

double Config::get_double(const std::string& section, const std::string& key, double fallback) {
    const Entry* e = find(section, key);
    if (e == nullptr) return fallback;
    e->consumed = true;
    return parse_double_token(e->value, spot(section, key));
}

int Config::get_int(const std::string& section, const std::string& key) {
    return parse_int_token(demand(section, key).value, spot(section, key));
}

int Config::get_int(const std::string& section, const std::string& key, int fallback) {
    const Entry* e = find(section, key);
    if (e == nullptr) return fallback;
    e->consumed = true;
    return parse_int_token(e->value, spot(section, key));
}

std::uint64_t Config::get_seed(const std::string& section, const std::string& key,
                               std::uint64_t fallback) {
    const Entry* e = find(section, key);
    if (e == nullptr) return fallback;
    e->consumed = true;
    try {
        size_t pos = 0;
        unsigned long long v = std::stoull(e->value, &pos);
        if (pos == e->value.size()) return v;
    } catch (const std::exception&) {
    }
    throw ConfigError("expected a nonnegative integer for " + spot(section, key) + ", got '" +
                      e->value + "'");
}

std::vector<std::string> Config::get_list(const std::string& section, const std::string& key) {
    const std::string value = demand(section, key).value;
    std::vector<std::string> items;
    std::string item;
    std::istringstream in(value);
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (item.empty())
            throw ConfigError("empty entry in list " + spot(section, key) + ": '" + value + "'");
        items.push_back(item);
    }
    if (items.empty())
        throw ConfigError("list " + spot(section, key) + " has no entries");
    return items;
}

std::vector<double> Config::get_double_list(const std::string& section, const std::string& key) {
    std::vector<double> out;
    for (const std::string& item : get_list(section, key))
        out.push_back(parse_double_token(item, spot(section, key)));
    return out;
}

void Config::require_consumed() const {
    for (const Entry& e : entries_) {
        if (!e.consumed)
            throw ConfigError(origin_ + ":" + std::to_string(e.line) + ": unknown key " +
                              spot(e.section, e.key));
    }
}

}  // namespace qoc
