#include "gle/density.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gle {

namespace {

Grid2D empty_grid(int bins_x, int bins_y, double xmin, double xmax, double ymin, double ymax) {
    if (bins_x <= 0 || bins_y <= 0) throw std::invalid_argument("grid: bins must be positive");
    if (!(xmax > xmin) || !(ymax > ymin)) throw std::invalid_argument("grid: empty range");
    Grid2D g;
    g.nx = bins_x;
    g.ny = bins_y;
    g.xmin = xmin;
    g.xmax = xmax;
    g.ymin = ymin;
    g.ymax = ymax;
    g.density.assign(static_cast<size_t>(bins_x) * bins_y, 0.0);
    return g;
}

// Silverman bandwidth with the interquartile refinement.
double silverman(std::vector<double> v) {
    const size_t n = v.size();
    double mean = 0.0;
    for (double c : v) mean += c;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double c : v) var += (c - mean) * (c - mean);
    const double sd = std::sqrt(var / (n - 1));
    std::sort(v.begin(), v.end());
    const double iqr = v[static_cast<size_t>(0.75 * (n - 1))] - v[static_cast<size_t>(0.25 * (n - 1))];
    double spread = sd;
    if (iqr > 0.0) spread = std::min(sd, iqr / 1.34);
    if (spread <= 0.0) spread = std::max(sd, 1e-12);
    return 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
}

}  // namespace

Grid2D histogram2d(const std::vector<std::pair<double, double>>& samples, int bins_x, int bins_y,
                   double xmin, double xmax, double ymin, double ymax) {
    if (samples.size() < 1000) throw std::invalid_argument("histogram2d: need >= 1000 samples");
    Grid2D g = empty_grid(bins_x, bins_y, xmin, xmax, ymin, ymax);
    const double wx = (xmax - xmin) / bins_x, wy = (ymax - ymin) / bins_y;
    size_t inside = 0;
    for (const auto& [x, y] : samples) {
        if (x < xmin || x >= xmax || y < ymin || y >= ymax) continue;
        const int ix = std::min(bins_x - 1, static_cast<int>((x - xmin) / wx));
        const int iy = std::min(bins_y - 1, static_cast<int>((y - ymin) / wy));
        g.at(ix, iy) += 1.0;
        ++inside;
    }
    if (inside == 0) throw std::invalid_argument("histogram2d: no samples in range");
    const double norm = 1.0 / (static_cast<double>(inside) * g.cell_area());
    for (double& d : g.density) d *= norm;
    return g;
}

Grid2D kde2d(const std::vector<std::pair<double, double>>& samples, int bins_x, int bins_y,
             double xmin, double xmax, double ymin, double ymax) {
    if (samples.empty()) throw std::invalid_argument("kde2d: no samples");
    Grid2D g = empty_grid(bins_x, bins_y, xmin, xmax, ymin, ymax);
    std::vector<double> xs(samples.size()), ys(samples.size());
    for (size_t i = 0; i < samples.size(); ++i) {
        xs[i] = samples[i].first;
        ys[i] = samples[i].second;
    }
    const double hx = silverman(xs), hy = silverman(ys);
    const double norm = 1.0 / (2.0 * M_PI * hx * hy * static_cast<double>(samples.size()));
    // Kernels truncated at 6 sigma; the tail is below double-visible mass.
    const double cut = 6.0;
    const double wx = (xmax - xmin) / bins_x, wy = (ymax - ymin) / bins_y;
    for (const auto& [sx, sy] : samples) {
        const int ix0 = std::max(0, static_cast<int>((sx - cut * hx - xmin) / wx));
        const int ix1 = std::min(bins_x - 1, static_cast<int>((sx + cut * hx - xmin) / wx));
        const int iy0 = std::max(0, static_cast<int>((sy - cut * hy - ymin) / wy));
        const int iy1 = std::min(bins_y - 1, static_cast<int>((sy + cut * hy - ymin) / wy));
        for (int ix = ix0; ix <= ix1; ++ix) {
            const double dx = (g.x_center(ix) - sx) / hx;
            const double ex = std::exp(-0.5 * dx * dx);
            for (int iy = iy0; iy <= iy1; ++iy) {
                const double dy = (g.y_center(iy) - sy) / hy;
                g.at(ix, iy) += ex * std::exp(-0.5 * dy * dy);
            }
        }
    }
    for (double& d : g.density) d *= norm;
    return g;
}

double tv_distance(const Grid2D& a, const Grid2D& b) {
    if (a.nx != b.nx || a.ny != b.ny || a.xmin != b.xmin || a.xmax != b.xmax ||
        a.ymin != b.ymin || a.ymax != b.ymax)
        throw std::invalid_argument("tv_distance: mismatched grids");
    double s = 0.0;
    for (size_t i = 0; i < a.density.size(); ++i) s += std::abs(a.density[i] - b.density[i]);
    return 0.5 * s * a.cell_area();
}

double density_refinement_probe(const std::vector<std::pair<double, double>>& samples_a,
                                const std::vector<std::pair<double, double>>& samples_b,
                                int bins_x, int bins_y, double xmin, double xmax, double ymin,
                                double ymax) {
    if (samples_a.size() != samples_b.size())
        throw std::invalid_argument("density_refinement_probe: unequal sample counts");
    const Grid2D ka = kde2d(samples_a, bins_x, bins_y, xmin, xmax, ymin, ymax);
    const Grid2D kb = kde2d(samples_b, bins_x, bins_y, xmin, xmax, ymin, ymax);
    double sup = 0.0;
    for (size_t i = 0; i < ka.density.size(); ++i)
        sup = std::max(sup, std::abs(ka.density[i] - kb.density[i]));
    return sup;
}

}  // namespace gle
