#ifndef QPSIM_CSV_HPP
#define QPSIM_CSV_HPP

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace qpsim {

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const {
        for (size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return static_cast<int>(i);
        throw std::runtime_error("csv: missing column '" + name + "'");
    }
    double number(size_t row, int col) const {
        const std::string& cell = rows.at(row).at(static_cast<size_t>(col));
        try {
            return std::stod(cell);
        } catch (const std::exception&) {
            throw std::runtime_error("csv: cell '" + cell + "' is not a number");
        }
    }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

/// Reads a comma-separated table; lines starting with '#' are skipped and the
/// first remaining line is the header.
inline CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    CsvTable t;
    std::string line;
    bool have_header = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (!have_header) {
            t.header = split_csv_line(line);
            have_header = true;
        } else {
            t.rows.push_back(split_csv_line(line));
        }
    }
    if (!have_header) throw std::runtime_error("csv: '" + path + "' has no header row");
    return t;
}

class CsvWriter {
public:
    explicit CsvWriter(const std::string& path) : out_(path) {
        if (!out_) throw std::runtime_error("cannot write '" + path + "'");
    }
    void comment(const std::string& text) { out_ << "# " << text << "\n"; }
    void row(const std::vector<std::string>& cells) {
        for (size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ',';
            out_ << cells[i];
        }
        out_ << "\n";
    }

private:
    std::ofstream out_;
};

} // namespace qpsim

#endif
