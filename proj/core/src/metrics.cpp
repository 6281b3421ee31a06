#include "evseg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "evseg/tensor.hpp"

namespace evseg {

BinaryMask BinaryMask::from_labels(const std::vector<int>& labels, int h, int w,
                                   int foreground_class) {
    if (static_cast<int>(labels.size()) != h * w)
        throw dim_error("BinaryMask: label count mismatch");
    BinaryMask m;
    m.h = h;
    m.w = w;
    m.grid.resize(labels.size());
    for (size_t i = 0; i < labels.size(); ++i)
        m.grid[i] = labels[i] == foreground_class ? 1 : 0;
    return m;
}

namespace {

void require_same(const BinaryMask& a, const BinaryMask& b, const char* op) {
    if (a.h != b.h || a.w != b.w)
        throw dim_error(std::string(op) + ": mask shape mismatch");
}

struct Overlap {
    long long inter = 0, r = 0, g = 0;
};

Overlap count_overlap(const BinaryMask& r, const BinaryMask& g) {
    Overlap o;
    for (size_t i = 0; i < r.grid.size(); ++i) {
        o.r += r.grid[i];
        o.g += g.grid[i];
        o.inter += r.grid[i] & g.grid[i];
    }
    return o;
}

constexpr double kInf = std::numeric_limits<double>::infinity();

// Large finite stand-in for "no site here": infinities make the parabola
// intersection below NaN. Any real squared grid distance is far smaller,
// so exactness is unaffected.
constexpr double kFar = 1e15;

// Felzenszwalb-Huttenlocher 1D squared distance transform.
void dt1d(const std::vector<double>& f, std::vector<double>& d, int n) {
    std::vector<int> v(n);
    std::vector<double> z(n + 1);
    int k = 0;
    v[0] = 0;
    z[0] = -kInf;
    z[1] = kInf;
    for (int q = 1; q < n; ++q) {
        double s;
        while (true) {
            const int p = v[k];
            s = ((f[q] + q * q) - (f[p] + p * p)) / (2.0 * q - 2.0 * p);
            if (s > z[k]) break;
            --k;
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = kInf;
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[k + 1] < q) ++k;
        d[q] = (q - v[k]) * static_cast<double>(q - v[k]) + f[v[k]];
    }
}

// Exact squared Euclidean distance to the nearest site on an h x w grid.
std::vector<double> edt2_squared(const std::vector<SurfacePoint>& sites, int h,
                                 int w) {
    std::vector<double> d(static_cast<size_t>(h) * w, kFar);
    for (const auto& p : sites) d[p.row * w + p.col] = 0.0;
    std::vector<double> f(std::max(h, w)), out(std::max(h, w));
    for (int c = 0; c < w; ++c) {  // columns
        for (int r = 0; r < h; ++r) f[r] = d[r * w + c];
        dt1d(f, out, h);
        for (int r = 0; r < h; ++r) d[r * w + c] = out[r];
    }
    for (int r = 0; r < h; ++r) {  // rows
        for (int c = 0; c < w; ++c) f[c] = d[r * w + c];
        dt1d(f, out, w);
        for (int c = 0; c < w; ++c) d[r * w + c] = out[c];
    }
    return d;
}

}  // namespace

std::vector<SurfacePoint> extract_surface(const BinaryMask& mask) {
    std::vector<SurfacePoint> pts;
    for (int r = 0; r < mask.h; ++r) {
        for (int c = 0; c < mask.w; ++c) {
            if (!mask.at(r, c)) continue;
            const bool border = r == 0 || c == 0 || r == mask.h - 1 || c == mask.w - 1;
            const bool exposed = border || !mask.at(r - 1, c) || !mask.at(r + 1, c) ||
                                 !mask.at(r, c - 1) || !mask.at(r, c + 1);
            if (exposed) pts.push_back({r, c});
        }
    }
    return pts;
}

double dice(const BinaryMask& r, const BinaryMask& g) {
    require_same(r, g, "dice");
    const Overlap o = count_overlap(r, g);
    if (o.r + o.g == 0) return 1.0;
    return 2.0 * o.inter / static_cast<double>(o.r + o.g);
}

double iou(const BinaryMask& r, const BinaryMask& g) {
    require_same(r, g, "iou");
    const Overlap o = count_overlap(r, g);
    const long long uni = o.r + o.g - o.inter;
    if (uni == 0) return 1.0;
    return o.inter / static_cast<double>(uni);
}

double assd(const BinaryMask& r, const BinaryMask& g) {
    require_same(r, g, "assd");
    const auto sr = extract_surface(r);
    const auto sg = extract_surface(g);
    if (sr.empty() || sg.empty()) return kInf;
    const auto dg = edt2_squared(sg, r.h, r.w);
    const auto dr = edt2_squared(sr, r.h, r.w);
    double total = 0.0;
    for (const auto& p : sr) total += std::sqrt(dg[p.row * r.w + p.col]);
    for (const auto& p : sg) total += std::sqrt(dr[p.row * r.w + p.col]);
    return total / (sr.size() + sg.size());
}

double ueo(const BinaryMask& err, const std::vector<double>& umap, double tau) {
    if (umap.size() != err.grid.size())
        throw dim_error("ueo: umap/mask size mismatch");
    if (!(tau > 0.0 && tau < 1.0)) throw contract_error("ueo: tau must be in (0,1)");
    BinaryMask um;
    um.h = err.h;
    um.w = err.w;
    um.grid.resize(umap.size());
    for (size_t i = 0; i < umap.size(); ++i) um.grid[i] = umap[i] >= tau ? 1 : 0;
    return dice(err, um);
}

double ueo_max(const BinaryMask& err, const std::vector<double>& umap) {
    double best = 0.0;
    for (int i = 1; i <= 19; ++i)
        best = std::max(best, ueo(err, umap, 0.05 * i));
    return best;
}

MetricRow MetricReport::aggregate() const {
    MetricRow agg;
    agg.image_id = "mean";
    if (rows.empty()) return agg;
    int assd_count = 0;
    for (const auto& r : rows) {
        agg.dice += r.dice;
        agg.iou += r.iou;
        agg.ueo05 += r.ueo05;
        agg.ueo_max += r.ueo_max;
        if (std::isfinite(r.assd)) {
            agg.assd += r.assd;
            ++assd_count;
        }
    }
    const double n = static_cast<double>(rows.size());
    agg.dice /= n;
    agg.iou /= n;
    agg.ueo05 /= n;
    agg.ueo_max /= n;
    agg.assd = assd_count > 0 ? agg.assd / assd_count
                              : std::numeric_limits<double>::quiet_NaN();
    return agg;
}

std::string MetricReport::to_csv() const {
    std::ostringstream os;
    os.precision(10);
    os << "image_id,dice,iou,assd,ueo@0.5,ueo_max\n";
    auto emit = [&os](const MetricRow& r) {
        os << r.image_id << ',' << r.dice << ',' << r.iou << ',';
        if (std::isfinite(r.assd))
            os << r.assd;
        else
            os << "undefined";
        os << ',' << r.ueo05 << ',' << r.ueo_max << '\n';
    };
    for (const auto& r : rows) emit(r);
    emit(aggregate());
    return os.str();
}

}  // namespace evseg
