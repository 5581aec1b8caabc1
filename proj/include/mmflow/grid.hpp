// One-dimensional cell-centered finite-volume primitives: uniform grids on
// [0, L], nonnegative density fields with unit mass, and the discrete
// calculus (face gradient, cell divergence, Laplacian) with a zero-flux
// Neumann closure at the boundary faces.  All quadrature is midpoint rule
// (cell average times dx), so energies, entropies and moments share one
// integration convention.

#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace mmflow {

struct Grid1D {
    double L  = 1.0;  // domain is [0, L]
    int    N  = 4;    // number of cells
    double dx = 0.25; // L / N

    // Cell centers x_i = (i + 1/2) dx, i = 0..N-1.
    double cell_center(int i) const { return (i + 0.5) * dx; }
    // Faces x_{i+1/2} = j dx, j = 0..N.
    double face(int j) const { return j * dx; }

    bool same_as(const Grid1D& o) const { return N == o.N && L == o.L; }
};

// Validates N >= 4, L > 0.
Grid1D make_grid(double L, int N);

// A nonnegative piecewise-constant density on a grid.  `values[i]` is the
// cell average on cell i (units: mass per length).
struct DensityField {
    Grid1D              grid;
    std::vector<double> values;
};

// Builds a field from per-cell samples.  Rejects negative samples (with the
// offending index) and, when `normalize` is set, rescales to unit mass;
// all-zero samples cannot be normalized.
DensityField make_field(const Grid1D& grid, const std::vector<double>& samples,
                        bool normalize);

// dx * sum(u_i): the discrete L1 mass.
double mass(const DensityField& u);

// dx * sum(x_i^2 u_i): midpoint-rule second moment.
double second_moment(const DensityField& u);

// dx * sum(x_i u_i).
double first_moment(const DensityField& u);

// Face gradient with Neumann closure: interior faces (u_{i} - u_{i-1})/dx,
// boundary faces 0.  Input size N, output size N+1.
std::vector<double> grad_faces(const Grid1D& g, const std::vector<double>& cells);

// Cell divergence of a face field: (w_{i+1} - w_i)/dx.  Input size N+1,
// output size N.  Summation by parts: div is the negative adjoint of
// grad_faces whenever the boundary faces of w vanish.
std::vector<double> div_cells(const Grid1D& g, const std::vector<double>& faces);

// laplacian = div o grad; annihilates constants exactly.
std::vector<double> laplacian_neumann(const Grid1D& g, const std::vector<double>& cells);

// Cell-centered gradient: mean of the two adjacent face gradients (with the
// Neumann closure on boundary faces).  Used wherever a gradient is needed at
// the same location as the density value.
std::vector<double> cell_gradient(const Grid1D& g, const std::vector<double>& cells);

// dx * sum(cells_i): midpoint quadrature of a cell field.
double cell_integral(const Grid1D& g, const std::vector<double>& cells);

// sqrt(dx * sum u_i^2): discrete L2 norm of a cell field.
double l2_norm(const Grid1D& g, const std::vector<double>& cells);

} // namespace mmflow
