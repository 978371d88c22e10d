#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace refuge {

/// Label carried by every cell of the mesh.
enum class CellRegion : std::uint8_t { Refuge, Exterior };

/// Where a field lives or where an operator acts: the whole rectangle, or
/// only the predator habitat outside the refuge.
enum class Region : std::uint8_t { All, Exterior };

/// Axis-aligned refuge rectangle [x0, x1] x [y0, y1].
struct RefugeBox {
  double x0 = 0.0;
  double y0 = 0.0;
  double x1 = 0.0;
  double y1 = 0.0;
};

struct GeometrySettings {
  int n_x = 64;
  int n_y = 64;
  double length_x = 1.0;
  double length_y = 1.0;
  std::optional<RefugeBox> refuge;
};

/// Uniform cell-centred mesh of a rectangle with an optional refuge zone.
///
/// Cells are numbered row by row, `cell = j * n_x + i`. Exterior cells carry a
/// second, compact index used for predator unknowns.
class Grid {
public:
  int n_x() const { return n_x_; }
  int n_y() const { return n_y_; }
  double h_x() const { return h_x_; }
  double h_y() const { return h_y_; }
  double length_x() const { return length_x_; }
  double length_y() const { return length_y_; }
  double cell_area() const { return h_x_ * h_y_; }
  const std::optional<RefugeBox>& refuge_box() const { return refuge_; }

  int num_cells() const { return n_x_ * n_y_; }
  int num_exterior() const { return static_cast<int>(exterior_cells_.size()); }
  int num_refuge() const { return num_cells() - num_exterior(); }

  int cell(int i, int j) const { return j * n_x_ + i; }
  int column_of(int cell) const { return cell % n_x_; }
  int row_of(int cell) const { return cell / n_x_; }
  std::array<double, 2> center(int cell) const;

  CellRegion region(int cell) const { return regions_[static_cast<std::size_t>(cell)]; }
  bool is_refuge(int cell) const { return region(cell) == CellRegion::Refuge; }
  bool in_region(int cell, Region r) const { return r == Region::All || !is_refuge(cell); }

  /// Compact exterior index of a cell, or -1 for refuge cells.
  int exterior_index(int cell) const { return exterior_index_[static_cast<std::size_t>(cell)]; }
  std::span<const int> exterior_cells() const { return exterior_cells_; }

  /// Measure of the region (|Omega| or |Omega_1|).
  double area(Region r) const;

  /// Number of 4-connected components of the exterior cell set.
  int exterior_components() const;

private:
  friend Grid build_grid(const GeometrySettings& settings);

  int n_x_ = 0;
  int n_y_ = 0;
  double length_x_ = 0.0;
  double length_y_ = 0.0;
  double h_x_ = 0.0;
  double h_y_ = 0.0;
  std::optional<RefugeBox> refuge_;
  std::vector<CellRegion> regions_;
  std::vector<int> exterior_index_;
  std::vector<int> exterior_cells_;
};

/// Builds the mesh and labels refuge cells. Throws GeometryError when the
/// refuge is not face-aligned or touches the outer boundary.
Grid build_grid(const GeometrySettings& settings);

/// One real per cell. Cells outside `support` hold exact zeros.
struct ScalarField {
  Region support = Region::All;
  Eigen::VectorXd values;

  static ScalarField constant(const Grid& grid, double value, Region support = Region::All);
};

/// Gathers the exterior entries of a full-grid vector into compact order.
Eigen::VectorXd gather_exterior(const Grid& grid, const Eigen::VectorXd& full);
/// Scatters compact exterior values back to the full grid, refuge entries zero.
Eigen::VectorXd scatter_exterior(const Grid& grid, const Eigen::VectorXd& compact);

enum class FieldId : std::uint8_t { U, V };

/// Unknown attached to a matrix row/column.
struct Dof {
  int cell = 0;
  FieldId field = FieldId::U;
};

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Square sparse matrix plus the map from its indices back to grid unknowns.
struct SparseOperator {
  SparseMatrix matrix;
  std::vector<Dof> dofs;

  Eigen::Index size() const { return matrix.rows(); }
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const { return matrix * x; }
};

/// b(x): equal to `b` outside the refuge and zero inside it.
ScalarField predation_field(const Grid& grid, double b);

/// Five-point no-flux Laplacian. For Region::Exterior the operator acts on the
/// compact exterior unknowns and faces shared with refuge cells carry no flux.
SparseOperator neumann_laplacian(const Grid& grid, Region region);

/// Variable-coefficient no-flux operator div(k grad .) on all cells, with the
/// face coefficient taken as the arithmetic mean of the two adjacent cells.
SparseOperator weighted_neumann_laplacian(const Grid& grid, const Eigen::VectorXd& coefficient);

/// Midpoint quadrature of a full-grid field over a region.
double integrate(const Grid& grid, const ScalarField& field, Region region);
double integrate(const Grid& grid, const Eigen::VectorXd& full_values, Region region);

} // namespace refuge
