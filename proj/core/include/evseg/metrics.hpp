#pragma once

#include <string>
#include <vector>

namespace evseg {

struct BinaryMask {
    int h = 0, w = 0;
    std::vector<uint8_t> grid;  // row-major, 0/1

    static BinaryMask from_labels(const std::vector<int>& labels, int h, int w,
                                  int foreground_class = 1);
    bool at(int r, int c) const { return grid[r * w + c] != 0; }
};

struct SurfacePoint {
    int row, col;
};

/// Foreground pixels with at least one background 4-neighbor, or touching
/// the image border.
std::vector<SurfacePoint> extract_surface(const BinaryMask& mask);

/// 2 |R ∩ G| / (|R| + |G|); both empty -> 1 by convention.
double dice(const BinaryMask& r, const BinaryMask& g);

/// |R ∩ G| / |R ∪ G|; both empty -> 1.
double iou(const BinaryMask& r, const BinaryMask& g);

/// Average symmetric surface distance between boundary point sets.
/// Either surface empty -> +infinity sentinel (reported as undefined).
double assd(const BinaryMask& r, const BinaryMask& g);

/// Dice overlap between the error mask and the binarized map {u >= tau}.
double ueo(const BinaryMask& err, const std::vector<double>& umap, double tau);

/// Max of ueo over tau in {0.05, 0.10, ..., 0.95}.
double ueo_max(const BinaryMask& err, const std::vector<double>& umap);

struct MetricRow {
    std::string image_id;
    double dice = 0, iou = 0, assd = 0, ueo05 = 0, ueo_max = 0;
};

struct MetricReport {
    std::vector<MetricRow> rows;
    /// Aggregate means; undefined (infinite) ASSD values are excluded.
    MetricRow aggregate() const;
    std::string to_csv() const;
};

}  // namespace evseg
