#include "csv.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>

#include "errors.hpp"

namespace crx::csv {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    size_t start = 0;
    for (;;) {
        const size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    if (!out.empty() && !out.back().empty() && out.back().back() == '\r')
        out.back().pop_back();
    return out;
}

Table read_file(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), CRX_E_IO, "cannot open " + path);
    Table t;
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), CRX_E_PARSE, path + ": empty file");
    t.header = split_line(line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        t.rows.push_back(split_line(line));
        require(t.rows.back().size() == t.header.size(), CRX_E_PARSE,
                path + ": row " + std::to_string(t.rows.size()) + " has " +
                    std::to_string(t.rows.back().size()) + " fields, expected " +
                    std::to_string(t.header.size()));
    }
    return t;
}

void write_file(const std::string& path, const std::vector<std::string>& header,
                const std::vector<std::vector<std::string>>& rows) {
    std::ofstream out(path, std::ios::trunc);
    require(out.good(), CRX_E_IO, "cannot write " + path);
    for (size_t i = 0; i < header.size(); ++i) {
        if (i) out << ',';
        out << header[i];
    }
    out << '\n';
    for (const auto& row : rows) {
        for (size_t i = 0; i < row.size(); ++i) {
            if (i) out << ',';
            out << row[i];
        }
        out << '\n';
    }
    out.flush();
    require(out.good(), CRX_E_IO, "write failed for " + path);
}

double parse_double(const std::string& token, const std::string& context) {
    require(!token.empty(), CRX_E_PARSE, context + ": empty numeric field");
    char* end = nullptr;
    const double v = std::strtod(token.c_str(), &end);
    require(end == token.c_str() + token.size(), CRX_E_PARSE,
            context + ": bad number '" + token + "'");
    return v;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string format_sample(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

}  // namespace crx::csv
