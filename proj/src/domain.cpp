#include "lpest/domain.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace lpest {

std::string_view to_string(NodeTag tag) {
  switch (tag) {
    case NodeTag::kExterior: return "exterior";
    case NodeTag::kInterior: return "interior";
    case NodeTag::kBoundary: return "boundary";
    case NodeTag::kInitial: return "initial";
    case NodeTag::kLateral: return "lateral";
    case NodeTag::kTerminal: return "terminal";
  }
  return "?";
}

namespace {

void check_dim(int dim) {
  if (dim != 1 && dim != 2) throw ValidationError("spatial dimension must be 1 or 2");
}

}  // namespace

Domain Domain::ball(int dim, double radius, Vec2 center) {
  check_dim(dim);
  if (!(radius > 0.0)) throw ValidationError("ball radius must be positive");
  Domain d;
  d.kind_ = DomainKind::kBall;
  d.dim_ = dim;
  d.radius_ = radius;
  d.center_ = dim == 1 ? Vec2{center.x, 0.0} : center;
  return d;
}

Domain Domain::cylinder(int dim, double height, double radius, double t0, Vec2 center) {
  check_dim(dim);
  if (!(radius > 0.0)) throw ValidationError("cylinder radius must be positive");
  if (!(height > 0.0)) throw ValidationError("cylinder height must be positive");
  Domain d;
  d.kind_ = DomainKind::kCylinder;
  d.dim_ = dim;
  d.radius_ = radius;
  d.height_ = height;
  d.t0_ = t0;
  d.center_ = dim == 1 ? Vec2{center.x, 0.0} : center;
  return d;
}

Domain make_domain(DomainKind kind, int dim, double radius, double height, double t_shift,
                   Vec2 x_shift) {
  if (kind == DomainKind::kBall) return Domain::ball(dim, radius, x_shift);
  return Domain::cylinder(dim, height, radius, t_shift, x_shift);
}

bool Domain::contains_space(Vec2 x) const {
  const Vec2 r = x - center_;
  const double dist = dim_ == 1 ? std::abs(r.x) : norm(r);
  return dist < radius_;
}

bool Domain::contains(double t, Vec2 x) const {
  if (!contains_space(x)) return false;
  return kind_ == DomainKind::kBall || (t > t0_ && t < t1());
}

double Domain::ball_volume() const {
  return dim_ == 1 ? 2.0 * radius_ : std::numbers::pi * radius_ * radius_;
}

double Domain::measure() const {
  return kind_ == DomainKind::kBall ? ball_volume() : height_ * ball_volume();
}

NodeTag Domain::classify(double t, Vec2 x, double tol) const {
  const Vec2 r = x - center_;
  const double dist = dim_ == 1 ? std::abs(r.x) : norm(r);
  const bool inside = dist < radius_ - tol;
  const bool on_sphere = !inside && dist <= radius_ + tol;
  if (kind_ == DomainKind::kBall) {
    if (inside) return NodeTag::kInterior;
    return on_sphere ? NodeTag::kBoundary : NodeTag::kExterior;
  }
  if (t < t0_ - tol || t > t1() + tol || !(inside || on_sphere)) return NodeTag::kExterior;
  // The edge {t1} x dB_r is tagged terminal.
  if (std::abs(t - t1()) <= tol) return NodeTag::kTerminal;
  if (on_sphere) return NodeTag::kLateral;
  if (std::abs(t - t0_) <= tol) return NodeTag::kInitial;
  return NodeTag::kInterior;
}

bool Domain::on_parabolic_boundary(double t, Vec2 x, double tol) const {
  const NodeTag tag = classify(t, x, tol);
  return tag == NodeTag::kBoundary || tag == NodeTag::kLateral || tag == NodeTag::kTerminal;
}

double clipped_cell_measure(int dim, Vec2 node, double h, Vec2 center, double radius) {
  if (dim == 1) {
    const double lo = std::max(node.x - 0.5 * h, center.x - radius);
    const double hi = std::min(node.x + 0.5 * h, center.x + radius);
    return std::max(0.0, hi - lo);
  }
  const Vec2 r = node - center;
  const double half = 0.5 * h;
  // Farthest and nearest points of the cell from the center.
  const double fx = std::abs(r.x) + half, fy = std::abs(r.y) + half;
  if (fx * fx + fy * fy <= radius * radius) return h * h;
  const double nx = std::max(0.0, std::abs(r.x) - half), ny = std::max(0.0, std::abs(r.y) - half);
  if (nx * nx + ny * ny >= radius * radius) return 0.0;
  constexpr int kSub = 32;
  int inside = 0;
  for (int a = 0; a < kSub; ++a) {
    for (int b = 0; b < kSub; ++b) {
      const double px = r.x - half + (a + 0.5) * h / kSub;
      const double py = r.y - half + (b + 0.5) * h / kSub;
      if (px * px + py * py < radius * radius) ++inside;
    }
  }
  return h * h * static_cast<double>(inside) / (kSub * kSub);
}

Grid::Grid(const Domain& domain, const GridSpec& spec) : domain_(domain), spec_(spec) {
  spec_.dim = domain.dim();
  if (spec_.noise_dim < spec_.dim) spec_.noise_dim = spec_.dim;
  if (!(spec.h > 0.0)) throw ValidationError("grid step h must be positive");
  const double r = domain.radius();
  const int cells = static_cast<int>(std::ceil(2.0 * r / spec.h - 1e-9));
  if (cells < 2) {
    std::ostringstream msg;
    msg << "grid/domain mismatch: h=" << spec.h << " gives fewer than 3 nodes across radius " << r;
    throw ValidationError(msg.str());
  }
  nx_ = cells + 1;
  ny_ = domain.dim() == 2 ? nx_ : 1;
  const double half_span = 0.5 * cells * spec.h;
  lo_ = {domain.center().x - half_span, domain.dim() == 2 ? domain.center().y - half_span : 0.0};

  if (domain.is_cylinder()) {
    if (!(spec.k > 0.0)) throw ValidationError("cylinder grids need a positive time step k");
    const double steps = domain.height() / spec.k;
    const double rounded = std::round(steps);
    if (rounded < 1.0 || std::abs(steps - rounded) > 1e-8 * std::max(1.0, steps)) {
      std::ostringstream msg;
      msg << "grid/domain mismatch: time step k=" << spec.k << " does not divide height "
          << domain.height();
      throw ValidationError(msg.str());
    }
    levels_ = static_cast<int>(rounded) + 1;
  }

  const int n = space_size();
  space_tags_.assign(n, NodeTag::kExterior);
  for (int s = 0; s < n; ++s) {
    const Vec2 rel = coord(s) - domain.center();
    const double dist = domain.dim() == 1 ? std::abs(rel.x) : norm(rel);
    if (dist < r * (1.0 - 1e-12)) {
      space_tags_[s] = NodeTag::kInterior;
    }
  }
  for (int s = 0; s < n; ++s) {
    if (space_tags_[s] != NodeTag::kInterior) continue;
    for (int dj = -1; dj <= 1; ++dj) {
      for (int di = -1; di <= 1; ++di) {
        const int q = neighbour(s, di, dj);
        if (q >= 0 && space_tags_[q] == NodeTag::kExterior) space_tags_[q] = NodeTag::kBoundary;
      }
    }
  }
  space_weights_.resize(n);
  for (int s = 0; s < n; ++s) {
    space_weights_[s] = space_tags_[s] == NodeTag::kExterior
                            ? 0.0
                            : clipped_cell_measure(domain.dim(), coord(s), spec.h,
                                                   domain.center(), r);
  }
}

Vec2 Grid::coord(int s) const { return coord(col(s), row(s)); }

int Grid::neighbour(int s, int di, int dj) const {
  const int i = col(s) + di;
  const int j = row(s) + dj;
  if (i < 0 || i >= nx_ || j < 0 || j >= ny_) return -1;
  return index(i, j);
}

NodeTag Grid::tag(int level, int s) const {
  const NodeTag st = space_tags_[s];
  if (!domain_.is_cylinder() || st == NodeTag::kExterior) return st;
  if (level == levels_ - 1) return NodeTag::kTerminal;
  if (st == NodeTag::kBoundary) return NodeTag::kLateral;
  return level == 0 ? NodeTag::kInitial : NodeTag::kInterior;
}

bool Grid::is_unknown(int level, int s) const {
  const NodeTag t = tag(level, s);
  return t == NodeTag::kInterior || t == NodeTag::kInitial;
}

double Grid::time_weight(int level) const {
  if (!domain_.is_cylinder()) return 1.0;
  return (level == 0 || level == levels_ - 1) ? 0.5 * spec_.k : spec_.k;
}

std::vector<std::pair<int, int>> Grid::nodes_with(NodeTag wanted) const {
  std::vector<std::pair<int, int>> out;
  for (int l = 0; l < levels_; ++l)
    for (int s = 0; s < space_size(); ++s)
      if (tag(l, s) == wanted) out.emplace_back(l, s);
  return out;
}

std::shared_ptr<const Grid> classify_boundary(const Domain& domain, const GridSpec& spec) {
  return std::make_shared<const Grid>(domain, spec);
}

}  // namespace lpest
