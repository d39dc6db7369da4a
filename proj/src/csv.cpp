#include "telic/csv.hpp"

#include "telic/error.hpp"

#include <cmath>
#include <cstdio>

namespace telic::csv {

std::string format(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (v == 0.0) return "0"; // drops the sign of -0
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

std::string format(bool v) { return v ? "1" : "0"; }
std::string format(std::int64_t v) { return std::to_string(v); }
std::string format(std::size_t v) { return std::to_string(v); }
std::string format(int v) { return std::to_string(v); }

Table::Table(std::vector<std::string> header) : header_(std::move(header)) {
    if (header_.empty()) throw ShapeError("csv header must have at least one column");
}

void Table::add(std::vector<std::string> cells) {
    if (cells.size() != header_.size())
        throw ShapeError("csv row has " + std::to_string(cells.size()) + " cells, header has " +
                         std::to_string(header_.size()));
    rows_.push_back(std::move(cells));
}

std::size_t Table::column(std::string_view name) const {
    for (std::size_t i = 0; i < header_.size(); ++i)
        if (header_[i] == name) return i;
    throw ShapeError("missing csv column '" + std::string(name) + "'");
}

namespace {

void put(std::string& out, const std::string& cell) {
    if (cell.find_first_of(",\"\n\r") == std::string::npos) {
        out += cell;
        return;
    }
    out += '"';
    for (char c : cell) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
}

void put_row(std::string& out, const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out += ',';
        put(out, cells[i]);
    }
    out += '\n';
}

} // namespace

std::string Table::str() const {
    std::string out;
    put_row(out, header_);
    for (const auto& r : rows_) put_row(out, r);
    return out;
}

Table parse(std::string_view text) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string cell;
    bool quoted = false;
    bool any = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"' && i + 1 < text.size() && text[i + 1] == '"') {
                cell += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cell += c;
            }
            continue;
        }
        any = true;
        if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            record.push_back(std::move(cell));
            cell.clear();
        } else if (c == '\n') {
            record.push_back(std::move(cell));
            cell.clear();
            records.push_back(std::move(record));
            record.clear();
            any = false;
        } else if (c != '\r') {
            cell += c;
        }
    }
    if (quoted) throw ShapeError("unterminated quoted csv field");
    if (any) {
        record.push_back(std::move(cell));
        records.push_back(std::move(record));
    }
    if (records.empty()) throw ShapeError("csv document has no header");
    Table table(records.front());
    for (std::size_t r = 1; r < records.size(); ++r) {
        if (records[r].size() != table.header().size())
            throw ShapeError("csv line " + std::to_string(r + 1) + " has " + std::to_string(records[r].size()) +
                             " cells, header has " + std::to_string(table.header().size()));
        table.add(std::move(records[r]));
    }
    return table;
}

void require_header(const Table& table, const std::vector<std::string>& expected) {
    const auto& h = table.header();
    for (std::size_t i = 0; i < std::max(h.size(), expected.size()); ++i) {
        const std::string got = i < h.size() ? h[i] : "<missing>";
        const std::string want = i < expected.size() ? expected[i] : "<none>";
        if (got != want)
            throw ShapeError("csv column " + std::to_string(i + 1) + " is '" + got + "', expected '" + want + "'");
    }
}

} // namespace telic::csv
