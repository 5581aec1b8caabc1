#include "mmflow/grid.hpp"

#include <cmath>

namespace mmflow {

Grid1D make_grid(double L, int N) {
    if (!(L > 0.0) || !std::isfinite(L))
        throw std::invalid_argument("grid: domain length must be positive and finite");
    if (N < 4)
        throw std::invalid_argument("grid: need at least 4 cells, got " + std::to_string(N));
    Grid1D g;
    g.L  = L;
    g.N  = N;
    g.dx = L / N;
    return g;
}

DensityField make_field(const Grid1D& grid, const std::vector<double>& samples,
                        bool normalize) {
    if (static_cast<int>(samples.size()) != grid.N)
        throw std::invalid_argument("make_field: expected " + std::to_string(grid.N) +
                                    " samples, got " + std::to_string(samples.size()));
    double total = 0.0;
    for (int i = 0; i < grid.N; ++i) {
        if (!(samples[i] >= 0.0)) // also catches NaN
            throw std::invalid_argument("make_field: negative sample at index " +
                                        std::to_string(i));
        total += samples[i];
    }
    DensityField u;
    u.grid   = grid;
    u.values = samples;
    if (normalize) {
        const double m = total * grid.dx;
        if (!(m > 0.0))
            throw std::invalid_argument("make_field: cannot normalize a zero-mass field");
        for (double& v : u.values) v /= m;
    }
    return u;
}

double mass(const DensityField& u) {
    double s = 0.0;
    for (double v : u.values) s += v;
    return s * u.grid.dx;
}

double second_moment(const DensityField& u) {
    double s = 0.0;
    for (int i = 0; i < u.grid.N; ++i) {
        const double x = u.grid.cell_center(i);
        s += x * x * u.values[i];
    }
    return s * u.grid.dx;
}

double first_moment(const DensityField& u) {
    double s = 0.0;
    for (int i = 0; i < u.grid.N; ++i) s += u.grid.cell_center(i) * u.values[i];
    return s * u.grid.dx;
}

std::vector<double> grad_faces(const Grid1D& g, const std::vector<double>& cells) {
    if (static_cast<int>(cells.size()) != g.N)
        throw std::invalid_argument("grad_faces: size mismatch");
    std::vector<double> w(g.N + 1, 0.0);
    for (int j = 1; j < g.N; ++j) w[j] = (cells[j] - cells[j - 1]) / g.dx;
    return w;
}

std::vector<double> div_cells(const Grid1D& g, const std::vector<double>& faces) {
    if (static_cast<int>(faces.size()) != g.N + 1)
        throw std::invalid_argument("div_cells: size mismatch");
    std::vector<double> d(g.N, 0.0);
    for (int i = 0; i < g.N; ++i) d[i] = (faces[i + 1] - faces[i]) / g.dx;
    return d;
}

std::vector<double> laplacian_neumann(const Grid1D& g, const std::vector<double>& cells) {
    return div_cells(g, grad_faces(g, cells));
}

std::vector<double> cell_gradient(const Grid1D& g, const std::vector<double>& cells) {
    const std::vector<double> w = grad_faces(g, cells);
    std::vector<double> c(g.N, 0.0);
    for (int i = 0; i < g.N; ++i) c[i] = 0.5 * (w[i] + w[i + 1]);
    return c;
}

double cell_integral(const Grid1D& g, const std::vector<double>& cells) {
    double s = 0.0;
    for (double v : cells) s += v;
    return s * g.dx;
}

double l2_norm(const Grid1D& g, const std::vector<double>& cells) {
    double s = 0.0;
    for (double v : cells) s += v * v;
    return std::sqrt(s * g.dx);
}

} // namespace mmflow
