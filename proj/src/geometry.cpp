#include "refuge/geometry.hpp"

#include <cmath>
#include <queue>
#include <sstream>

#include "refuge/errors.hpp"

namespace refuge {

namespace {

// Returns the face index k with k*h == coordinate, or throws.
int face_index(double coordinate, double h, const char* name) {
  const double scaled = coordinate / h;
  const double k = std::round(scaled);
  if (std::abs(scaled - k) > 1e-9 * std::max(1.0, std::abs(scaled))) {
    std::ostringstream msg;
    msg << "refuge coordinate " << name << "=" << coordinate << " is not aligned to a cell face (h=" << h << ")";
    throw GeometryError(msg.str());
  }
  return static_cast<int>(k);
}

} // namespace

std::array<double, 2> Grid::center(int c) const {
  return {(column_of(c) + 0.5) * h_x_, (row_of(c) + 0.5) * h_y_};
}

double Grid::area(Region r) const {
  const int count = r == Region::All ? num_cells() : num_exterior();
  return count * cell_area();
}

int Grid::exterior_components() const {
  std::vector<char> seen(static_cast<std::size_t>(num_cells()), 0);
  int components = 0;
  for (int start : exterior_cells_) {
    if (seen[static_cast<std::size_t>(start)]) continue;
    ++components;
    std::queue<int> pending;
    pending.push(start);
    seen[static_cast<std::size_t>(start)] = 1;
    while (!pending.empty()) {
      const int c = pending.front();
      pending.pop();
      const int i = column_of(c);
      const int j = row_of(c);
      const std::array<std::array<int, 2>, 4> nbrs{{{i - 1, j}, {i + 1, j}, {i, j - 1}, {i, j + 1}}};
      for (const auto& [ni, nj] : nbrs) {
        if (ni < 0 || nj < 0 || ni >= n_x_ || nj >= n_y_) continue;
        const int nc = cell(ni, nj);
        if (is_refuge(nc) || seen[static_cast<std::size_t>(nc)]) continue;
        seen[static_cast<std::size_t>(nc)] = 1;
        pending.push(nc);
      }
    }
  }
  return components;
}

Grid build_grid(const GeometrySettings& settings) {
  if (settings.n_x < 4 || settings.n_y < 4) {
    throw GeometryError("grid needs at least 4 cells per axis");
  }
  if (!(settings.length_x > 0.0) || !(settings.length_y > 0.0)) {
    throw GeometryError("domain lengths must be positive");
  }

  Grid g;
  g.n_x_ = settings.n_x;
  g.n_y_ = settings.n_y;
  g.length_x_ = settings.length_x;
  g.length_y_ = settings.length_y;
  g.h_x_ = settings.length_x / settings.n_x;
  g.h_y_ = settings.length_y / settings.n_y;
  g.refuge_ = settings.refuge;
  g.regions_.assign(static_cast<std::size_t>(g.num_cells()), CellRegion::Exterior);

  if (settings.refuge) {
    const RefugeBox& box = *settings.refuge;
    const int i0 = face_index(box.x0, g.h_x_, "x0");
    const int i1 = face_index(box.x1, g.h_x_, "x1");
    const int j0 = face_index(box.y0, g.h_y_, "y0");
    const int j1 = face_index(box.y1, g.h_y_, "y1");
    if (i1 <= i0 || j1 <= j0) {
      throw GeometryError("refuge box is empty or inverted");
    }
    // The closed refuge must lie inside the open domain: at least one exterior
    // cell layer on every side.
    if (i0 < 1 || j0 < 1 || i1 > g.n_x_ - 1 || j1 > g.n_y_ - 1) {
      throw GeometryError("refuge box touches the outer boundary of the domain");
    }
    for (int j = j0; j < j1; ++j) {
      for (int i = i0; i < i1; ++i) {
        g.regions_[static_cast<std::size_t>(g.cell(i, j))] = CellRegion::Refuge;
      }
    }
  }

  g.exterior_index_.assign(static_cast<std::size_t>(g.num_cells()), -1);
  for (int c = 0; c < g.num_cells(); ++c) {
    if (!g.is_refuge(c)) {
      g.exterior_index_[static_cast<std::size_t>(c)] = static_cast<int>(g.exterior_cells_.size());
      g.exterior_cells_.push_back(c);
    }
  }
  return g;
}

ScalarField ScalarField::constant(const Grid& grid, double value, Region support) {
  ScalarField f;
  f.support = support;
  f.values = Eigen::VectorXd::Constant(grid.num_cells(), value);
  if (support == Region::Exterior) {
    for (int c = 0; c < grid.num_cells(); ++c) {
      if (grid.is_refuge(c)) f.values[c] = 0.0;
    }
  }
  return f;
}

Eigen::VectorXd gather_exterior(const Grid& grid, const Eigen::VectorXd& full) {
  const auto cells = grid.exterior_cells();
  Eigen::VectorXd compact(static_cast<Eigen::Index>(cells.size()));
  for (std::size_t k = 0; k < cells.size(); ++k) {
    compact[static_cast<Eigen::Index>(k)] = full[cells[k]];
  }
  return compact;
}

Eigen::VectorXd scatter_exterior(const Grid& grid, const Eigen::VectorXd& compact) {
  Eigen::VectorXd full = Eigen::VectorXd::Zero(grid.num_cells());
  const auto cells = grid.exterior_cells();
  for (std::size_t k = 0; k < cells.size(); ++k) {
    full[cells[k]] = compact[static_cast<Eigen::Index>(k)];
  }
  return full;
}

ScalarField predation_field(const Grid& grid, double b) {
  if (!(b > 0.0)) {
    throw ParameterError("predation coefficient b must be positive");
  }
  return ScalarField::constant(grid, b, Region::Exterior);
}

namespace {

// Shared five-point assembly. `face_weight(c, nc)` returns the coefficient on
// the face between two cells that both belong to the operator's region.
template <typename FaceWeight>
SparseOperator assemble_flux_operator(const Grid& grid, Region region, FaceWeight face_weight) {
  const bool exterior = region == Region::Exterior;
  const int n = exterior ? grid.num_exterior() : grid.num_cells();
  auto index_of = [&](int c) { return exterior ? grid.exterior_index(c) : c; };

  const double wx = 1.0 / (grid.h_x() * grid.h_x());
  const double wy = 1.0 / (grid.h_y() * grid.h_y());

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(5 * n));
  SparseOperator op;
  op.dofs.reserve(static_cast<std::size_t>(n));

  for (int c = 0; c < grid.num_cells(); ++c) {
    if (!grid.in_region(c, region)) continue;
    const int row = index_of(c);
    op.dofs.push_back({c, exterior ? FieldId::V : FieldId::U});
    const int i = grid.column_of(c);
    const int j = grid.row_of(c);
    double diagonal = 0.0;
    auto couple = [&](int ni, int nj, double w) {
      if (ni < 0 || nj < 0 || ni >= grid.n_x() || nj >= grid.n_y()) return;
      const int nc = grid.cell(ni, nj);
      if (!grid.in_region(nc, region)) return;
      const double k = w * face_weight(c, nc);
      triplets.emplace_back(row, index_of(nc), k);
      diagonal += k;
    };
    couple(i - 1, j, wx);
    couple(i + 1, j, wx);
    couple(i, j - 1, wy);
    couple(i, j + 1, wy);
    triplets.emplace_back(row, row, -diagonal);
  }

  op.matrix.resize(n, n);
  op.matrix.setFromTriplets(triplets.begin(), triplets.end());
  op.matrix.makeCompressed();
  return op;
}

} // namespace

SparseOperator neumann_laplacian(const Grid& grid, Region region) {
  return assemble_flux_operator(grid, region, [](int, int) { return 1.0; });
}

SparseOperator weighted_neumann_laplacian(const Grid& grid, const Eigen::VectorXd& coefficient) {
  return assemble_flux_operator(grid, Region::All,
                                [&](int c, int nc) { return 0.5 * (coefficient[c] + coefficient[nc]); });
}

double integrate(const Grid& grid, const Eigen::VectorXd& full_values, Region region) {
  double sum = 0.0;
  for (int c = 0; c < grid.num_cells(); ++c) {
    if (grid.in_region(c, region)) sum += full_values[c];
  }
  return sum * grid.cell_area();
}

double integrate(const Grid& grid, const ScalarField& field, Region region) {
  return integrate(grid, field.values, region);
}

} // namespace refuge
