#include "memcore/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "memcore/error.hpp"

namespace memcore::harness {

void MinMaxScaler::fit(const Matrix& raw) {
    if (raw.rows() == 0) {
        throw InvalidInput("harness", "cannot fit a scaler on zero samples");
    }
    lo_.assign(raw.cols(), 0.0);
    hi_.assign(raw.cols(), 0.0);
    for (std::size_t f = 0; f < raw.cols(); ++f) {
        double lo = raw(0, f);
        double hi = raw(0, f);
        for (std::size_t s = 1; s < raw.rows(); ++s) {
            lo = std::min(lo, raw(s, f));
            hi = std::max(hi, raw(s, f));
        }
        lo_[f] = lo;
        hi_[f] = hi;
    }
}

Matrix MinMaxScaler::transform(const Matrix& raw) const {
    if (raw.cols() != lo_.size()) {
        throw InvalidInput("harness", "scaler feature count does not match data");
    }
    Matrix out(raw.rows(), raw.cols());
    for (std::size_t s = 0; s < raw.rows(); ++s) {
        for (std::size_t f = 0; f < raw.cols(); ++f) {
            const double span = hi_[f] - lo_[f];
            out(s, f) = span > 0.0 ? std::clamp((raw(s, f) - lo_[f]) / span - 0.5, -0.5, 0.5) : 0.0;
        }
    }
    return out;
}

Matrix MinMaxScaler::inverse(const Matrix& scaled) const {
    if (scaled.cols() != lo_.size()) {
        throw InvalidInput("harness", "scaler feature count does not match data");
    }
    Matrix out(scaled.rows(), scaled.cols());
    for (std::size_t s = 0; s < scaled.rows(); ++s) {
        for (std::size_t f = 0; f < scaled.cols(); ++f) {
            const double span = hi_[f] - lo_[f];
            out(s, f) = span > 0.0 ? (scaled(s, f) + 0.5) * span + lo_[f] : lo_[f];
        }
    }
    return out;
}

namespace {

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw FormatError("harness", "cannot open " + path.string());
    }
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<unsigned char>& buf, std::size_t offset,
                        const std::filesystem::path& path) {
    if (offset + 4 > buf.size()) {
        throw FormatError("harness", path.string() + ": truncated header at offset " +
                                         std::to_string(offset));
    }
    return (std::uint32_t{buf[offset]} << 24) | (std::uint32_t{buf[offset + 1]} << 16) |
           (std::uint32_t{buf[offset + 2]} << 8) | std::uint32_t{buf[offset + 3]};
}

struct IdxHeader {
    std::vector<std::size_t> dims;
    std::size_t data_offset = 0;
};

IdxHeader parse_idx_header(const std::vector<unsigned char>& buf, std::uint32_t expected_magic,
                           const std::filesystem::path& path) {
    const std::uint32_t magic = read_be32(buf, 0, path);
    if (magic != expected_magic) {
        char text[96];
        std::snprintf(text, sizeof text, ": bad magic 0x%08X at offset 0 (expected 0x%08X)",
                      static_cast<unsigned>(magic), static_cast<unsigned>(expected_magic));
        throw FormatError("harness", path.string() + text);
    }
    IdxHeader h;
    const std::size_t ndims = magic & 0xFFu;
    for (std::size_t d = 0; d < ndims; ++d) {
        h.dims.push_back(read_be32(buf, 4 + 4 * d, path));
    }
    h.data_offset = 4 + 4 * ndims;
    std::size_t total = 1;
    for (auto d : h.dims) {
        total *= d;
    }
    if (buf.size() < h.data_offset + total) {
        throw FormatError("harness", path.string() + ": truncated data at offset " +
                                         std::to_string(buf.size()) + " (need " +
                                         std::to_string(h.data_offset + total) + " bytes)");
    }
    return h;
}

}  // namespace

Matrix load_idx_images(const std::filesystem::path& path, std::size_t max_items) {
    const auto buf = read_file(path);
    const auto h = parse_idx_header(buf, 0x00000803u, path);
    const std::size_t count = max_items > 0 ? std::min(max_items, h.dims[0]) : h.dims[0];
    const std::size_t dim = h.dims[1] * h.dims[2];
    Matrix out(count, dim);
    for (std::size_t s = 0; s < count; ++s) {
        for (std::size_t k = 0; k < dim; ++k) {
            out(s, k) = buf[h.data_offset + s * dim + k] / 255.0 - 0.5;
        }
    }
    return out;
}

std::vector<int> load_idx_labels(const std::filesystem::path& path, std::size_t max_items) {
    const auto buf = read_file(path);
    const auto h = parse_idx_header(buf, 0x00000801u, path);
    const std::size_t count = max_items > 0 ? std::min(max_items, h.dims[0]) : h.dims[0];
    std::vector<int> out(count);
    for (std::size_t s = 0; s < count; ++s) {
        out[s] = buf[h.data_offset + s];
    }
    return out;
}

Dataset load_idx(const std::filesystem::path& images,
                 const std::optional<std::filesystem::path>& labels, std::size_t max_items) {
    Dataset ds;
    ds.features = load_idx_images(images, max_items);
    if (labels) {
        ds.labels = load_idx_labels(*labels, max_items);
        if (ds.labels.size() != ds.features.rows()) {
            throw FormatError("harness", "IDX label count does not match image count");
        }
    }
    return ds;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        const auto b = cell.find_first_not_of(" \t\r");
        const auto e = cell.find_last_not_of(" \t\r");
        cells.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') {
        cells.emplace_back();
    }
    return cells;
}

bool parse_double(const std::string& s, double& out) {
    if (s.empty()) {
        return false;
    }
    char* end = nullptr;
    out = std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size() && std::isfinite(out);
}

}  // namespace

RawTable load_csv_table(const std::filesystem::path& path, const CsvOptions& opts) {
    std::ifstream is(path);
    if (!is) {
        throw FormatError("harness", "cannot open " + path.string());
    }
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty() || (opts.header && line_no == 1)) {
            continue;
        }
        auto cells = split_line(line);
        if (!rows.empty() && cells.size() != rows.front().size()) {
            throw FormatError("harness", path.string() + " line " + std::to_string(line_no) +
                                             ": expected " + std::to_string(rows.front().size()) +
                                             " fields, got " + std::to_string(cells.size()));
        }
        rows.push_back(std::move(cells));
        line_numbers.push_back(line_no);
    }
    if (rows.empty()) {
        throw FormatError("harness", path.string() + ": no data rows");
    }
    const std::size_t ncols = rows.front().size();
    if (opts.label_column && *opts.label_column >= ncols) {
        throw FormatError("harness", path.string() + ": label column out of range");
    }

    // A column is categorical when any of its cells fails to parse as a number.
    std::vector<bool> categorical(ncols, false);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < ncols; ++c) {
            double v = 0.0;
            if (!categorical[c] && !parse_double(rows[r][c], v)) {
                if (opts.categorical == CategoricalEncoding::none &&
                    (!opts.label_column || c != *opts.label_column)) {
                    throw FormatError("harness", path.string() + " line " +
                                                     std::to_string(line_numbers[r]) +
                                                     ": non-numeric field '" + rows[r][c] + "'");
                }
                categorical[c] = true;
            }
        }
    }
    std::vector<std::map<std::string, int>> categories(ncols);
    std::vector<std::vector<std::string>> order(ncols);
    for (std::size_t c = 0; c < ncols; ++c) {
        if (!categorical[c]) {
            continue;
        }
        for (const auto& row : rows) {
            if (categories[c].emplace(row[c], static_cast<int>(order[c].size())).second) {
                order[c].push_back(row[c]);
            }
        }
    }

    std::size_t width = 0;
    for (std::size_t c = 0; c < ncols; ++c) {
        if (opts.label_column && c == *opts.label_column) {
            continue;
        }
        width += categorical[c] && opts.categorical == CategoricalEncoding::one_hot
                     ? order[c].size()
                     : 1;
    }
    RawTable ds;
    ds.raw = Matrix(rows.size(), width);
    Matrix& raw = ds.raw;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        std::size_t f = 0;
        for (std::size_t c = 0; c < ncols; ++c) {
            const auto& cell = rows[r][c];
            if (opts.label_column && c == *opts.label_column) {
                double v = 0.0;
                ds.labels.push_back(!categorical[c] && parse_double(cell, v)
                                        ? static_cast<int>(v)
                                        : categories[c].at(cell));
                continue;
            }
            if (!categorical[c]) {
                double v = 0.0;
                parse_double(cell, v);
                raw(r, f++) = v;
            } else if (opts.categorical == CategoricalEncoding::one_hot) {
                const int k = categories[c].at(cell);
                for (std::size_t q = 0; q < order[c].size(); ++q) {
                    raw(r, f++) = static_cast<int>(q) == k ? 1.0 : 0.0;
                }
            } else {
                raw(r, f++) = categories[c].at(cell);
            }
        }
    }
    return ds;
}

Dataset load_csv(const std::filesystem::path& path, const CsvOptions& opts) {
    auto table = load_csv_table(path, opts);
    Dataset ds;
    ds.labels = std::move(table.labels);
    ds.scaling.fit(table.raw);
    ds.features = ds.scaling.transform(table.raw);
    return ds;
}

double accuracy(const Matrix& predictions, std::span<const int> labels) {
    if (predictions.rows() != labels.size()) {
        throw InvalidInput("harness", "accuracy: prediction and label counts differ");
    }
    if (labels.empty()) {
        throw InvalidInput("harness", "accuracy: no samples");
    }
    std::size_t hits = 0;
    for (std::size_t s = 0; s < labels.size(); ++s) {
        const auto row = predictions.row(s);
        const auto best = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
        hits += best == labels[s] ? 1 : 0;
    }
    return static_cast<double>(hits) / static_cast<double>(labels.size());
}

Matrix one_hot(std::span<const int> labels, std::size_t classes, double hi, double lo) {
    Matrix out(labels.size(), classes, lo);
    for (std::size_t s = 0; s < labels.size(); ++s) {
        if (labels[s] < 0 || static_cast<std::size_t>(labels[s]) >= classes) {
            throw InvalidInput("harness", "label out of range for one-hot encoding");
        }
        out(s, static_cast<std::size_t>(labels[s])) = hi;
    }
    return out;
}

}  // namespace memcore::harness
