#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "memcore/matrix.hpp"

namespace memcore::harness {

/// Per-feature affine map of the fitted range onto the rails [-0.5, 0.5].
/// Zero-span features map to 0.
class MinMaxScaler {
public:
    MinMaxScaler() = default;

    void fit(const Matrix& raw);
    [[nodiscard]] bool fitted() const noexcept { return !lo_.empty(); }

    /// Values outside the fitted range are clamped to the rails.
    [[nodiscard]] Matrix transform(const Matrix& raw) const;
    [[nodiscard]] Matrix inverse(const Matrix& scaled) const;

    [[nodiscard]] std::span<const double> lo() const noexcept { return lo_; }
    [[nodiscard]] std::span<const double> hi() const noexcept { return hi_; }

private:
    std::vector<double> lo_;
    std::vector<double> hi_;
};

struct Dataset {
    Matrix features;          // scaled to the rails
    std::vector<int> labels;  // empty when unlabeled
    MinMaxScaler scaling;     // unfitted for sources with a fixed scale (IDX pixels)

    [[nodiscard]] std::size_t size() const noexcept { return features.rows(); }
    [[nodiscard]] std::size_t dims() const noexcept { return features.cols(); }
};

/// IDX image file (magic 0x00000803): pixels p -> p/255 - 0.5, one row per image.
[[nodiscard]] Matrix load_idx_images(const std::filesystem::path& path,
                                     std::size_t max_items = 0);
/// IDX label file (magic 0x00000801).
[[nodiscard]] std::vector<int> load_idx_labels(const std::filesystem::path& path,
                                               std::size_t max_items = 0);
/// Images plus optional labels; label count must match image count.
[[nodiscard]] Dataset load_idx(const std::filesystem::path& images,
                               const std::optional<std::filesystem::path>& labels = std::nullopt,
                               std::size_t max_items = 0);

/// none: any non-numeric feature is a format error.
enum class CategoricalEncoding { none, index, one_hot };

struct CsvOptions {
    std::optional<std::size_t> label_column;  // excluded from features
    CategoricalEncoding categorical = CategoricalEncoding::index;
    bool header = false;
};

/// Parsed, encoded but unscaled CSV contents.
struct RawTable {
    Matrix raw;
    std::vector<int> labels;  // empty without a label column
};

[[nodiscard]] RawTable load_csv_table(const std::filesystem::path& path,
                                      const CsvOptions& opts = {});

/// Numeric CSV scaled over all rows; non-numeric columns are encoded per `categorical`, categories
/// numbered in order of first appearance.  Labels: integers as-is, other
/// strings numbered in order of first appearance.
[[nodiscard]] Dataset load_csv(const std::filesystem::path& path, const CsvOptions& opts = {});

/// Argmax-match fraction; throws on length mismatch.
[[nodiscard]] double accuracy(const Matrix& predictions, std::span<const int> labels);

/// +hi for the labelled class, lo elsewhere.
[[nodiscard]] Matrix one_hot(std::span<const int> labels, std::size_t classes, double hi = 0.5,
                             double lo = -0.5);

}  // namespace memcore::harness
