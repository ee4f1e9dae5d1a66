#pragma once

#include <utility>
#include <vector>

namespace gle {

struct Grid2D {
    int nx = 0, ny = 0;
    double xmin = 0.0, xmax = 0.0, ymin = 0.0, ymax = 0.0;
    std::vector<double> density;  // row-major [ix * ny + iy], integrates to ~1

    double cell_area() const { return (xmax - xmin) / nx * ((ymax - ymin) / ny); }
    double x_center(int ix) const { return xmin + (ix + 0.5) * (xmax - xmin) / nx; }
    double y_center(int iy) const { return ymin + (iy + 0.5) * (ymax - ymin) / ny; }
    double& at(int ix, int iy) { return density[static_cast<size_t>(ix) * ny + iy]; }
    double at(int ix, int iy) const { return density[static_cast<size_t>(ix) * ny + iy]; }
};

// Normalized 2-D histogram (integral one, out-of-range samples dropped).
// Needs >= 1000 samples and a nonempty range.
Grid2D histogram2d(const std::vector<std::pair<double, double>>& samples, int bins_x, int bins_y,
                   double xmin, double xmax, double ymin, double ymax);

// Gaussian product-kernel density estimate on the same grid, bandwidths by
// Silverman's rule per marginal.
Grid2D kde2d(const std::vector<std::pair<double, double>>& samples, int bins_x, int bins_y,
             double xmin, double xmax, double ymin, double ymax);

// Total variation distance between two densities on identical grids:
// 0.5 * sum |p - q| * cell_area.
double tv_distance(const Grid2D& a, const Grid2D& b);

// Sup-norm difference of the two kernel density estimates on the grid; zero
// for identical sample sets, a noise floor for independent same-law sets.
double density_refinement_probe(const std::vector<std::pair<double, double>>& samples_a,
                                const std::vector<std::pair<double, double>>& samples_b,
                                int bins_x, int bins_y, double xmin, double xmax, double ymin,
                                double ymax);

}  // namespace gle
