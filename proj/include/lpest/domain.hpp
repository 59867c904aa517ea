#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "lpest/core.hpp"

namespace lpest {

enum class DomainKind { kBall, kCylinder };

// Classification of a point (or node) relative to a domain.
//   ball:     kInterior, kBoundary, kExterior
//   cylinder: kInterior, kInitial ({t0} x B_r, not part of the parabolic
//             boundary), kLateral ([t0, t0+rho) x dB_r), kTerminal
//             ({t0+rho} x closure(B_r)), kExterior
enum class NodeTag : std::uint8_t { kExterior, kInterior, kBoundary, kInitial, kLateral, kTerminal };

std::string_view to_string(NodeTag tag);

// Ball B_r(c) in R^d, or the space-time cylinder (t0, t0 + rho) x B_r(c).
class Domain {
 public:
  static Domain ball(int dim, double radius, Vec2 center = {});
  static Domain cylinder(int dim, double height, double radius, double t0 = 0.0, Vec2 center = {});

  DomainKind kind() const { return kind_; }
  bool is_cylinder() const { return kind_ == DomainKind::kCylinder; }
  int dim() const { return dim_; }
  double radius() const { return radius_; }
  double height() const { return height_; }
  double t0() const { return t0_; }
  double t1() const { return t0_ + height_; }
  Vec2 center() const { return center_; }

  // Open spatial ball membership.
  bool contains_space(Vec2 x) const;
  // Open-domain membership; t is ignored for balls.
  bool contains(double t, Vec2 x) const;
  // |B_r| for balls, rho |B_r| for cylinders.
  double measure() const;
  double ball_volume() const;

  // Tags a continuum point; tol is the absolute thickness of the boundary shell.
  NodeTag classify(double t, Vec2 x, double tol = 1e-12) const;
  // Membership of the parabolic boundary (or dB_r for balls).
  bool on_parabolic_boundary(double t, Vec2 x, double tol = 1e-12) const;

 private:
  Domain() = default;
  DomainKind kind_ = DomainKind::kBall;
  int dim_ = 1;
  double radius_ = 1.0;
  double height_ = 0.0;
  double t0_ = 0.0;
  Vec2 center_{};
};

// make_domain(cylinder, r=1, rho=1, shift=(1,0)) is C_{1,1}(1,0): t0 = 1, center 0.
Domain make_domain(DomainKind kind, int dim, double radius, double height = 0.0,
                   double t_shift = 0.0, Vec2 x_shift = {});

// C_r := C_{r^2, r}.
inline Domain parabolic_cylinder(int dim, double r, double t0 = 0.0, Vec2 center = {}) {
  return Domain::cylinder(dim, r * r, r, t0, center);
}

struct GridSpec {
  int dim = 2;
  int noise_dim = 2;  // d1 >= d; only d1 == d is exercised
  double h = 0.0;     // spatial step
  double k = 0.0;     // time step, cylinders only
};

// Uniform tensor grid over the bounding box of a domain, with every node tagged.
// Box nodes sit at center - (n-1) h / 2 + i h along each axis. A node is
// interior when strictly inside the ball; a non-interior box node that is a
// (diagonal) neighbour of an interior node is a boundary node and carries
// Dirichlet data (nearest-node snapping). Remaining box nodes are exterior.
class Grid {
 public:
  Grid(const Domain& domain, const GridSpec& spec);

  const Domain& domain() const { return domain_; }
  const GridSpec& spec() const { return spec_; }
  int dim() const { return domain_.dim(); }
  double h() const { return spec_.h; }
  double k() const { return spec_.k; }

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  int space_size() const { return nx_ * ny_; }
  // Number of time levels; 1 for balls.
  int levels() const { return levels_; }
  std::size_t size() const { return static_cast<std::size_t>(levels_) * space_size(); }

  int index(int i, int j) const { return j * nx_ + i; }
  int col(int s) const { return s % nx_; }
  int row(int s) const { return s / nx_; }
  Vec2 coord(int s) const;
  Vec2 coord(int i, int j) const { return {lo_.x + i * spec_.h, lo_.y + j * spec_.h}; }
  double time(int level) const { return domain_.is_cylinder() ? domain_.t0() + level * spec_.k : 0.0; }
  std::size_t flat(int level, int s) const {
    return static_cast<std::size_t>(level) * space_size() + s;
  }

  NodeTag tag(int level, int s) const;
  // Spatial role of a node: kInterior, kBoundary or kExterior.
  NodeTag space_tag(int s) const { return space_tags_[s]; }
  bool space_interior(int s) const { return space_tags_[s] == NodeTag::kInterior; }
  // Nodes solved for (interior or initial-slab interior).
  bool is_unknown(int level, int s) const;
  // Nodes that carry a value: everything but exterior.
  bool has_value(int /*level*/, int s) const { return space_tags_[s] != NodeTag::kExterior; }

  // Spatial cell measure (h^d cell centered at the node) clipped to the ball.
  std::span<const double> space_weights() const { return space_weights_; }
  // Time cell length clipped to [t0, t0 + rho]; 1 for balls.
  double time_weight(int level) const;

  // Neighbour index in direction (di, dj), or -1 outside the box.
  int neighbour(int s, int di, int dj) const;

  // All tagged nodes as (level, s) pairs with the requested tag.
  std::vector<std::pair<int, int>> nodes_with(NodeTag tag) const;

 private:
  Domain domain_;
  GridSpec spec_;
  int nx_ = 0;
  int ny_ = 1;
  int levels_ = 1;
  Vec2 lo_{};
  std::vector<NodeTag> space_tags_;
  std::vector<double> space_weights_;
};

// Builds and tags the grid; throws ValidationError on grid/domain mismatch.
std::shared_ptr<const Grid> classify_boundary(const Domain& domain, const GridSpec& spec);

// Measure of the cell [x - h/2, x + h/2]^d intersected with the ball B_r(c).
double clipped_cell_measure(int dim, Vec2 node, double h, Vec2 center, double radius);

}  // namespace lpest
