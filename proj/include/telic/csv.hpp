#pragma once
// Comma-separated tables: header row, LF line endings, '.' decimal point and
// nine significant digits for floating point.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace telic::csv {

/// "%.9g", with "inf", "-inf" and "nan" for non-finite values.
std::string format(double v);
std::string format(bool v);
std::string format(std::int64_t v);
std::string format(std::size_t v);
std::string format(int v);
inline std::string format(std::string s) { return s; }
inline std::string format(const char* s) { return s; }

class Table {
public:
    explicit Table(std::vector<std::string> header);

    const std::vector<std::string>& header() const noexcept { return header_; }
    const std::vector<std::vector<std::string>>& rows() const noexcept { return rows_; }

    /// Throws ShapeError when the width differs from the header.
    void add(std::vector<std::string> cells);

    template <typename... Cells>
    void row(const Cells&... cells) {
        add({format(cells)...});
    }

    /// Index of a header column; throws ShapeError when absent.
    std::size_t column(std::string_view name) const;

    std::string str() const;

private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

/// Parses text written by Table::str (quoted fields allowed). Throws
/// ShapeError on ragged rows or an empty document.
Table parse(std::string_view text);

/// Throws ShapeError naming the first column that differs from `expected`.
void require_header(const Table& table, const std::vector<std::string>& expected);

} // namespace telic::csv
