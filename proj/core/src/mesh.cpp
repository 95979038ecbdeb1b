#include "stsm/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>

#include "stsm/errors.hpp"

namespace stsm {

double signed_area(const Point2D& a, const Point2D& b, const Point2D& c) {
  return 0.5 * ((b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x));
}

bool TriangulatedMesh::is_inner_triangle(std::size_t t) const {
  const auto& tri = triangles[t];
  return inner_flag[tri[0]] && inner_flag[tri[1]] && inner_flag[tri[2]];
}

namespace {

double orient(const Point2D& a, const Point2D& b, const Point2D& c) {
  return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
}

// > 0 when d lies strictly inside the circumcircle of the ccw triangle abc.
double incircle(const Point2D& a, const Point2D& b, const Point2D& c, const Point2D& d) {
  const double adx = a.x - d.x, ady = a.y - d.y;
  const double bdx = b.x - d.x, bdy = b.y - d.y;
  const double cdx = c.x - d.x, cdy = c.y - d.y;
  const double ad = adx * adx + ady * ady;
  const double bd = bdx * bdx + bdy * bdy;
  const double cd = cdx * cdx + cdy * cdy;
  return adx * (bdy * cd - bd * cdy) - ady * (bdx * cd - bd * cdx) + ad * (bdx * cdy - bdy * cdx);
}

Point2D circumcenter(const Point2D& a, const Point2D& b, const Point2D& c) {
  const double bx = b.x - a.x, by = b.y - a.y;
  const double cx = c.x - a.x, cy = c.y - a.y;
  const double d = 2.0 * (bx * cy - by * cx);
  const double b2 = bx * bx + by * by;
  const double c2 = cx * cx + cy * cy;
  return {a.x + (cy * b2 - by * c2) / d, a.y + (bx * c2 - cx * b2) / d};
}

double dist(const Point2D& a, const Point2D& b) { return std::hypot(a.x - b.x, a.y - b.y); }

double min_angle_deg(const Point2D& a, const Point2D& b, const Point2D& c) {
  const double la = dist(b, c), lb = dist(a, c), lc = dist(a, b);
  auto angle = [](double opp, double s1, double s2) {
    double cosv = (s1 * s1 + s2 * s2 - opp * opp) / (2.0 * s1 * s2);
    cosv = std::clamp(cosv, -1.0, 1.0);
    return std::acos(cosv);
  };
  const double m = std::min({angle(la, lb, lc), angle(lb, la, lc), angle(lc, la, lb)});
  return m * 180.0 / std::numbers::pi;
}

// Andrew monotone chain; returns ccw hull without collinear points.
std::vector<Point2D> convex_hull(std::vector<Point2D> pts) {
  std::sort(pts.begin(), pts.end(), [](const Point2D& a, const Point2D& b) {
    return a.x < b.x || (a.x == b.x && a.y < b.y);
  });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  std::vector<Point2D> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && orient(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && orient(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

// Convex polygon containing the disk-dilation of `hull` by `radius`.
std::vector<Point2D> dilate(const std::vector<Point2D>& hull, double radius) {
  constexpr int kDirections = 8;
  const double r = radius / std::cos(std::numbers::pi / kDirections);
  std::vector<Point2D> samples;
  samples.reserve(hull.size() * kDirections);
  for (const auto& p : hull) {
    for (int k = 0; k < kDirections; ++k) {
      const double a = 2.0 * std::numbers::pi * k / kDirections + std::numbers::pi / kDirections;
      samples.push_back({p.x + r * std::cos(a), p.y + r * std::sin(a)});
    }
  }
  return convex_hull(std::move(samples));
}

bool inside_convex(const std::vector<Point2D>& poly, const Point2D& p, double tol) {
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const auto& a = poly[i];
    const auto& b = poly[(i + 1) % poly.size()];
    if (orient(a, b, p) < -tol * dist(a, b)) return false;
  }
  return true;
}

struct Tri {
  std::array<int, 3> v{};
  std::array<int, 3> nb{-1, -1, -1};  // nb[i] is across the edge opposite v[i]
  bool alive = true;
};

struct Segment {
  int a;
  int b;
  bool outer;
};

// Incremental Bowyer-Watson triangulation inside a super triangle, with
// Ruppert-style refinement against a set of boundary segments.
class Refiner {
 public:
  Refiner(const std::vector<Point2D>& all_points, const std::vector<Point2D>& inner_poly,
          const std::vector<Point2D>& outer_poly, const MeshOptions& opt)
      : inner_(inner_poly), outer_(outer_poly), opt_(opt) {
    double xmin = outer_poly[0].x, xmax = xmin, ymin = outer_poly[0].y, ymax = ymin;
    for (const auto& p : outer_poly) {
      xmin = std::min(xmin, p.x);
      xmax = std::max(xmax, p.x);
      ymin = std::min(ymin, p.y);
      ymax = std::max(ymax, p.y);
    }
    scale_ = std::max(xmax - xmin, ymax - ymin);
    const double cx = 0.5 * (xmin + xmax), cy = 0.5 * (ymin + ymax);
    const double big = 50.0 * scale_;
    pts_.push_back({cx - big, cy - big});
    pts_.push_back({cx + big, cy - big});
    pts_.push_back({cx, cy + big});
    tris_.push_back(Tri{{0, 1, 2}, {-1, -1, -1}, true});
    vert_tri_ = {0, 0, 0};
    for (const auto& p : all_points) insert(p);
  }

  int add_polygon_segments(const std::vector<int>& ids, bool outer) {
    for (std::size_t i = 0; i < ids.size(); ++i) {
      segs_.push_back({ids[i], ids[(i + 1) % ids.size()], outer});
    }
    return static_cast<int>(segs_.size());
  }

  int insert(const Point2D& p) {
    const int id = static_cast<int>(pts_.size());
    pts_.push_back(p);
    vert_tri_.push_back(-1);
    const int start = locate(p);
    if (start < 0) throw DataError("mesh construction: point location failed");
    carve_and_fill(id, start);
    return id;
  }

  void refine() {
    while (true) {
      split_encroached_segments();
      const int bad = find_bad_triangle();
      if (bad < 0) break;
      const auto& t = tris_[bad];
      const Point2D cc = circumcenter(pts_[t.v[0]], pts_[t.v[1]], pts_[t.v[2]]);
      std::vector<int> hits;
      for (std::size_t s = 0; s < segs_.size(); ++s) {
        if (in_diametral_circle(segs_[s], cc)) hits.push_back(static_cast<int>(s));
      }
      if (!hits.empty()) {
        for (int s : hits) split_segment(s);
      } else if (inside_convex(outer_, cc, 0.0)) {
        insert(cc);
      } else {
        // No visible segment is encroached; give up on this triangle.
        skipped_.push_back(canonical(t.v));
      }
      check_size();
    }
  }

  TriangulatedMesh extract() const {
    std::vector<char> used(pts_.size(), 0);
    for (const auto& t : tris_) {
      if (!t.alive || !in_domain(t)) continue;
      for (int v : t.v) used[v] = 1;
    }
    // vertices keep insertion order, so input points come first
    TriangulatedMesh mesh;
    std::vector<int> final_id(pts_.size(), -1);
    for (std::size_t v = 3; v < pts_.size(); ++v) {
      if (!used[v]) continue;
      final_id[v] = static_cast<int>(mesh.vertices.size());
      mesh.vertices.push_back(pts_[v]);
    }
    for (const auto& t : tris_) {
      if (!t.alive || !in_domain(t)) continue;
      mesh.triangles.push_back({final_id[t.v[0]], final_id[t.v[1]], final_id[t.v[2]]});
    }
    mesh.inner_flag.resize(mesh.vertices.size());
    const double tol = 1e-9 * scale_;
    for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
      mesh.inner_flag[v] = inside_convex(inner_, mesh.vertices[v], tol);
    }
    return mesh;
  }

 private:
  static std::array<int, 3> canonical(std::array<int, 3> v) {
    std::sort(v.begin(), v.end());
    return v;
  }

  void check_size() const {
    if (pts_.size() > opt_.max_vertices + 3) {
      throw DataError("mesh refinement exceeded " + std::to_string(opt_.max_vertices) +
                      " vertices; increase edge lengths");
    }
  }

  bool in_domain(const Tri& t) const {
    if (t.v[0] < 3 || t.v[1] < 3 || t.v[2] < 3) return false;
    const Point2D c{(pts_[t.v[0]].x + pts_[t.v[1]].x + pts_[t.v[2]].x) / 3.0,
                    (pts_[t.v[0]].y + pts_[t.v[1]].y + pts_[t.v[2]].y) / 3.0};
    return inside_convex(outer_, c, 0.0);
  }

  bool contains(const Tri& t, const Point2D& p) const {
    for (int i = 0; i < 3; ++i) {
      if (orient(pts_[t.v[(i + 1) % 3]], pts_[t.v[(i + 2) % 3]], p) < 0) return false;
    }
    return true;
  }

  int locate(const Point2D& p) const {
    int t = last_;
    if (t < 0 || t >= static_cast<int>(tris_.size()) || !tris_[t].alive) {
      t = -1;
      for (int i = static_cast<int>(tris_.size()) - 1; i >= 0; --i) {
        if (tris_[i].alive) {
          t = i;
          break;
        }
      }
    }
    for (std::size_t step = 0; step < 4 * tris_.size() + 16 && t >= 0; ++step) {
      const Tri& tri = tris_[t];
      int next = -1;
      for (int i = 0; i < 3; ++i) {
        if (orient(pts_[tri.v[(i + 1) % 3]], pts_[tri.v[(i + 2) % 3]], p) < 0) {
          next = tri.nb[i];
          break;
        }
      }
      if (next < 0) return t;
      t = next;
    }
    // Walk failed (cycling on degenerate input); fall back to a scan.
    for (std::size_t i = 0; i < tris_.size(); ++i) {
      if (tris_[i].alive && contains(tris_[i], p)) return static_cast<int>(i);
    }
    return -1;
  }

  void carve_and_fill(int id, int start) {
    const Point2D& p = pts_[id];
    std::vector<int> cavity{start};
    std::vector<char> in_cavity(tris_.size(), 0);
    in_cavity[start] = 1;
    for (std::size_t k = 0; k < cavity.size(); ++k) {
      const Tri& t = tris_[cavity[k]];
      for (int nb : t.nb) {
        if (nb < 0 || in_cavity[nb]) continue;
        const Tri& n = tris_[nb];
        if (incircle(pts_[n.v[0]], pts_[n.v[1]], pts_[n.v[2]], p) > 0) {
          in_cavity[nb] = 1;
          cavity.push_back(nb);
        }
      }
    }

    struct Edge {
      int a, b, outside;
    };
    std::vector<Edge> boundary;
    // Shrink the cavity until every boundary edge sees p on its left.
    for (bool changed = true; changed;) {
      changed = false;
      boundary.clear();
      for (int c : cavity) {
        if (!in_cavity[c]) continue;
        const Tri& t = tris_[c];
        for (int i = 0; i < 3; ++i) {
          const int nb = t.nb[i];
          if (nb >= 0 && in_cavity[nb]) continue;
          const int a = t.v[(i + 1) % 3], b = t.v[(i + 2) % 3];
          if (orient(pts_[a], pts_[b], p) <= 0 && c != start) {
            in_cavity[c] = 0;
            changed = true;
            break;
          }
          boundary.push_back({a, b, nb});
        }
        if (changed) break;
      }
    }

    std::vector<int> created;
    created.reserve(boundary.size());
    for (const auto& e : boundary) {
      Tri nt{{e.a, e.b, id}, {-1, -1, e.outside}, true};
      int slot;
      if (!free_.empty()) {
        slot = free_.back();
        free_.pop_back();
        tris_[slot] = nt;
      } else {
        slot = static_cast<int>(tris_.size());
        tris_.push_back(nt);
      }
      created.push_back(slot);
      if (e.outside >= 0) {
        Tri& o = tris_[e.outside];
        for (int i = 0; i < 3; ++i) {
          const int oa = o.v[(i + 1) % 3], ob = o.v[(i + 2) % 3];
          if (oa == e.b && ob == e.a) o.nb[i] = slot;
        }
      }
    }
    for (int c : cavity) {
      if (in_cavity[c]) {
        tris_[c].alive = false;
        free_.push_back(c);
      }
    }
    // new triangle (a,b,p): nb[0] is across (b,p), nb[1] is across (p,a)
    for (int s : created) {
      Tri& t = tris_[s];
      for (int o : created) {
        if (o == s) continue;
        if (tris_[o].v[0] == t.v[1]) t.nb[0] = o;
        if (tris_[o].v[1] == t.v[0]) t.nb[1] = o;
      }
      for (int k = 0; k < 3; ++k) vert_tri_[t.v[k]] = s;
    }
    last_ = created.empty() ? -1 : created.front();
  }

  // Triangle and local index i such that tri.v[(i+1)%3]==a, v[(i+2)%3]==b, or -1.
  std::pair<int, int> find_edge(int a, int b) const {
    const int start = vert_tri_[a];
    if (start < 0) return {-1, -1};
    int t = start;
    for (std::size_t guard = 0; guard < tris_.size() + 1; ++guard) {
      const Tri& tri = tris_[t];
      int ia = -1;
      for (int k = 0; k < 3; ++k) {
        if (tri.v[k] == a) ia = k;
      }
      if (ia < 0) break;
      const int next_v = tri.v[(ia + 1) % 3];
      if (next_v == b) return {t, (ia + 2) % 3};
      const int prev_v = tri.v[(ia + 2) % 3];
      if (prev_v == b) return {t, (ia + 1) % 3};
      // rotate ccw around a: cross the edge (a, prev_v), opposite next_v
      t = tri.nb[(ia + 1) % 3];
      if (t < 0 || t == start) break;
    }
    return {-1, -1};
  }

  bool in_diametral_circle(const Segment& s, const Point2D& p) const {
    const Point2D& a = pts_[s.a];
    const Point2D& b = pts_[s.b];
    const Point2D m{0.5 * (a.x + b.x), 0.5 * (a.y + b.y)};
    const double r = 0.5 * dist(a, b);
    return dist(m, p) < r * (1.0 - 1e-12);
  }

  bool encroached(const Segment& s) const {
    const auto [t, i] = find_edge(s.a, s.b);
    if (t < 0) return true;
    const Tri& tri = tris_[t];
    if (in_diametral_circle(s, pts_[tri.v[i]])) return true;
    const int other = tri.nb[i];
    if (other >= 0) {
      for (int k = 0; k < 3; ++k) {
        const int v = tris_[other].v[k];
        if (v != s.a && v != s.b && in_diametral_circle(s, pts_[v])) return true;
      }
    }
    return false;
  }

  void split_segment(int index) {
    const Segment s = segs_[index];
    const Point2D m{0.5 * (pts_[s.a].x + pts_[s.b].x), 0.5 * (pts_[s.a].y + pts_[s.b].y)};
    const int id = insert(m);
    segs_[index] = {s.a, id, s.outer};
    segs_.push_back({id, s.b, s.outer});
  }

  void split_encroached_segments() {
    for (bool any = true; any;) {
      any = false;
      for (std::size_t s = 0; s < segs_.size(); ++s) {
        if (encroached(segs_[s])) {
          split_segment(static_cast<int>(s));
          any = true;
          check_size();
        }
      }
    }
  }

  int find_bad_triangle() const {
    for (std::size_t i = 0; i < tris_.size(); ++i) {
      const Tri& t = tris_[i];
      if (!t.alive || !in_domain(t)) continue;
      const Point2D& a = pts_[t.v[0]];
      const Point2D& b = pts_[t.v[1]];
      const Point2D& c = pts_[t.v[2]];
      const Point2D centroid{(a.x + b.x + c.x) / 3.0, (a.y + b.y + c.y) / 3.0};
      const double limit =
          inside_convex(inner_, centroid, 0.0) ? opt_.max_edge_inner : opt_.max_edge_outer;
      const double longest = std::max({dist(a, b), dist(b, c), dist(a, c)});
      const bool bad = longest > limit || min_angle_deg(a, b, c) < opt_.min_angle_deg - 1e-9;
      if (!bad) continue;
      if (std::find(skipped_.begin(), skipped_.end(), canonical(t.v)) != skipped_.end()) continue;
      return static_cast<int>(i);
    }
    return -1;
  }

  std::vector<Point2D> pts_;
  std::vector<Tri> tris_;
  std::vector<int> free_;
  std::vector<int> vert_tri_;
  std::vector<Segment> segs_;
  std::vector<std::array<int, 3>> skipped_;
  std::vector<Point2D> inner_;
  std::vector<Point2D> outer_;
  MeshOptions opt_;
  double scale_ = 1.0;
  int last_ = 0;
};

std::vector<Point2D> subdivide(const std::vector<Point2D>& poly, double max_edge) {
  std::vector<Point2D> out;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const auto& a = poly[i];
    const auto& b = poly[(i + 1) % poly.size()];
    const int pieces = std::max(1, static_cast<int>(std::ceil(dist(a, b) / max_edge)));
    for (int k = 0; k < pieces; ++k) {
      const double s = static_cast<double>(k) / pieces;
      out.push_back({a.x + s * (b.x - a.x), a.y + s * (b.y - a.y)});
    }
  }
  return out;
}

}  // namespace

TriangulatedMesh build_mesh(std::span<const Point2D> points, const MeshOptions& options) {
  if (!(options.max_edge_inner > 0) || !(options.max_edge_outer > 0) ||
      !(options.extension_margin > 0)) {
    throw InvalidArgument("build_mesh: edge lengths and extension margin must be positive");
  }
  if (!(options.min_angle_deg >= 0) || options.min_angle_deg > 33.0) {
    throw InvalidArgument("build_mesh: minimum angle must lie in [0, 33] degrees");
  }
  if (points.size() < 3) throw DataError("build_mesh: need at least 3 points");
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!std::isfinite(points[i].x) || !std::isfinite(points[i].y)) {
      throw DataError("build_mesh: point " + std::to_string(i) + " is not finite");
    }
  }
  std::vector<std::size_t> order(points.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return points[a].x < points[b].x || (points[a].x == points[b].x && points[a].y < points[b].y);
  });
  for (std::size_t k = 1; k < order.size(); ++k) {
    for (std::size_t j = k; j-- > 0;) {
      if (points[order[k]].x - points[order[j]].x > 1e-9) break;
      if (dist(points[order[k]], points[order[j]]) <= 1e-9) {
        throw DataError("build_mesh: duplicate points " + std::to_string(order[j]) + " and " +
                        std::to_string(order[k]));
      }
    }
  }
  const std::vector<Point2D> pts(points.begin(), points.end());
  const auto hull = convex_hull(pts);
  double extent = 0.0;
  for (const auto& p : pts) extent = std::max(extent, dist(p, pts[0]));
  double area2 = 0.0;
  for (std::size_t i = 0; i + 2 < hull.size() + 1 && hull.size() >= 3; ++i) {
    area2 += orient(hull[0], hull[i], hull[(i + 1) % hull.size()]);
  }
  if (hull.size() < 3 || std::abs(area2) <= 1e-12 * extent * extent) {
    throw DataError("build_mesh: points are collinear");
  }

  const double buffer = options.buffer > 0 ? options.buffer : 0.25 * options.max_edge_inner;
  const auto inner_poly = dilate(hull, buffer);
  const double inner_reach = buffer / std::cos(std::numbers::pi / 8);
  const auto outer_poly = dilate(hull, inner_reach + options.extension_margin);

  const auto inner_pts = subdivide(inner_poly, options.max_edge_inner);
  const auto outer_pts = subdivide(outer_poly, options.max_edge_outer);

  std::vector<Point2D> seed(pts);
  Refiner refiner(seed, inner_poly, outer_poly, options);
  std::vector<int> inner_ids, outer_ids;
  for (const auto& p : inner_pts) inner_ids.push_back(refiner.insert(p));
  for (const auto& p : outer_pts) outer_ids.push_back(refiner.insert(p));
  refiner.add_polygon_segments(inner_ids, false);
  refiner.add_polygon_segments(outer_ids, true);
  refiner.refine();
  return refiner.extract();
}

void validate_mesh(const TriangulatedMesh& mesh) {
  const auto nv = static_cast<int>(mesh.vertices.size());
  if (mesh.inner_flag.size() != mesh.vertices.size()) {
    throw DataError("mesh: inner_flag size does not match vertex count");
  }
  std::map<std::pair<int, int>, int> edge_count;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& tri = mesh.triangles[t];
    for (int i : tri) {
      if (i < 0 || i >= nv) throw DataError("mesh: triangle " + std::to_string(t) + " index out of range");
    }
    if (!(signed_area(mesh.vertices[tri[0]], mesh.vertices[tri[1]], mesh.vertices[tri[2]]) > 0)) {
      throw DataError("mesh: triangle " + std::to_string(t) + " is not positively oriented");
    }
    for (int k = 0; k < 3; ++k) {
      const int a = tri[k], b = tri[(k + 1) % 3];
      // a directed edge may appear once; its reverse at most once
      if (++edge_count[{a, b}] > 1) {
        throw DataError("mesh: non-conforming edge in triangle " + std::to_string(t));
      }
    }
  }
}

MeshStats mesh_stats(const TriangulatedMesh& mesh) {
  MeshStats s;
  s.n_vertices = mesh.vertices.size();
  s.n_triangles = mesh.triangles.size();
  s.min_angle = mesh.triangles.empty() ? 0.0 : 180.0;
  for (const auto& t : mesh.triangles) {
    const auto& a = mesh.vertices[t[0]];
    const auto& b = mesh.vertices[t[1]];
    const auto& c = mesh.vertices[t[2]];
    s.min_angle = std::min(s.min_angle, min_angle_deg(a, b, c));
    s.max_edge = std::max({s.max_edge, dist(a, b), dist(b, c), dist(a, c)});
  }
  return s;
}

TriangleLocator::TriangleLocator(const TriangulatedMesh& mesh) : mesh_(&mesh) {
  if (mesh.vertices.empty() || mesh.triangles.empty()) return;
  double x1 = mesh.vertices[0].x, y1 = mesh.vertices[0].y;
  x0_ = x1;
  y0_ = y1;
  for (const auto& p : mesh.vertices) {
    x0_ = std::min(x0_, p.x);
    y0_ = std::min(y0_, p.y);
    x1 = std::max(x1, p.x);
    y1 = std::max(y1, p.y);
  }
  const double w = std::max(x1 - x0_, 1e-12), h = std::max(y1 - y0_, 1e-12);
  const double target = std::sqrt(static_cast<double>(mesh.triangles.size()));
  cell_ = std::max(w, h) / std::max(1.0, target);
  nx_ = std::max(1, static_cast<int>(std::ceil(w / cell_)));
  ny_ = std::max(1, static_cast<int>(std::ceil(h / cell_)));
  buckets_.assign(static_cast<std::size_t>(nx_) * ny_, {});
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    double bx0 = 1e300, by0 = 1e300, bx1 = -1e300, by1 = -1e300;
    for (int v : mesh.triangles[t]) {
      bx0 = std::min(bx0, mesh.vertices[v].x);
      by0 = std::min(by0, mesh.vertices[v].y);
      bx1 = std::max(bx1, mesh.vertices[v].x);
      by1 = std::max(by1, mesh.vertices[v].y);
    }
    const double pad = 1e-9 * cell_;
    const int i0 = std::clamp(static_cast<int>(std::floor((bx0 - pad - x0_) / cell_)), 0, nx_ - 1);
    const int i1 = std::clamp(static_cast<int>(std::floor((bx1 + pad - x0_) / cell_)), 0, nx_ - 1);
    const int j0 = std::clamp(static_cast<int>(std::floor((by0 - pad - y0_) / cell_)), 0, ny_ - 1);
    const int j1 = std::clamp(static_cast<int>(std::floor((by1 + pad - y0_) / cell_)), 0, ny_ - 1);
    for (int j = j0; j <= j1; ++j) {
      for (int i = i0; i <= i1; ++i) buckets_[static_cast<std::size_t>(j) * nx_ + i].push_back(static_cast<int>(t));
    }
  }
}

std::optional<BarycentricHit> TriangleLocator::locate(const Point2D& p) const {
  if (buckets_.empty() || !std::isfinite(p.x) || !std::isfinite(p.y)) return std::nullopt;
  const double fx = (p.x - x0_) / cell_, fy = (p.y - y0_) / cell_;
  if (fx < -1e-9 || fy < -1e-9 || fx > nx_ + 1e-9 || fy > ny_ + 1e-9) return std::nullopt;
  const int i = std::clamp(static_cast<int>(std::floor(fx)), 0, nx_ - 1);
  const int j = std::clamp(static_cast<int>(std::floor(fy)), 0, ny_ - 1);
  constexpr double kTol = 1e-12;
  for (int t : buckets_[static_cast<std::size_t>(j) * nx_ + i]) {
    const auto& tri = mesh_->triangles[t];
    const auto& a = mesh_->vertices[tri[0]];
    const auto& b = mesh_->vertices[tri[1]];
    const auto& c = mesh_->vertices[tri[2]];
    const double area = signed_area(a, b, c);
    std::array<double, 3> w{signed_area(p, b, c) / area, signed_area(a, p, c) / area,
                            signed_area(a, b, p) / area};
    if (w[0] < -kTol || w[1] < -kTol || w[2] < -kTol) continue;
    for (auto& x : w) x = std::clamp(x, 0.0, 1.0);
    const double sum = w[0] + w[1] + w[2];
    for (auto& x : w) x /= sum;
    // exact vertex hits get a pure unit weight
    for (int k = 0; k < 3; ++k) {
      if (mesh_->vertices[tri[k]] == p) {
        w = {0.0, 0.0, 0.0};
        w[k] = 1.0;
      }
    }
    return BarycentricHit{static_cast<std::size_t>(t), w};
  }
  return std::nullopt;
}

Projector barycentric_projector(const TriangulatedMesh& mesh, std::span<const Point2D> points) {
  TriangleLocator locator(mesh);
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(points.size() * 3);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto hit = locator.locate(points[i]);
    if (!hit) throw PointOutsideMesh(i);
    const auto& tri = mesh.triangles[hit->triangle];
    for (int k = 0; k < 3; ++k) {
      if (hit->weights[k] != 0.0) {
        trips.emplace_back(static_cast<int>(i), tri[k], hit->weights[k]);
      }
    }
  }
  Projector proj;
  proj.weights.resize(static_cast<Eigen::Index>(points.size()),
                      static_cast<Eigen::Index>(mesh.vertices.size()));
  proj.weights.setFromTriplets(trips.begin(), trips.end());
  return proj;
}

void write_mesh(std::ostream& out, const TriangulatedMesh& mesh) {
  out << "vertices " << mesh.vertices.size() << " triangles " << mesh.triangles.size() << '\n';
  out << std::setprecision(17);
  for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
    out << mesh.vertices[v].x << ' ' << mesh.vertices[v].y << ' ' << (mesh.inner_flag[v] ? 1 : 0)
        << '\n';
  }
  for (const auto& t : mesh.triangles) out << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
}

TriangulatedMesh read_mesh(std::istream& in) {
  while (in.peek() == '#') in.ignore(std::numeric_limits<std::streamsize>::max(), '\n');
  std::string w1, w2;
  std::size_t nv = 0, nt = 0;
  if (!(in >> w1 >> nv >> w2 >> nt) || w1 != "vertices" || w2 != "triangles") {
    throw DataError("mesh file: expected header 'vertices N triangles M'");
  }
  TriangulatedMesh mesh;
  mesh.vertices.resize(nv);
  mesh.inner_flag.resize(nv);
  for (std::size_t v = 0; v < nv; ++v) {
    int flag = 0;
    if (!(in >> mesh.vertices[v].x >> mesh.vertices[v].y >> flag) || (flag != 0 && flag != 1)) {
      throw DataError("mesh file: bad vertex line " + std::to_string(v));
    }
    mesh.inner_flag[v] = flag == 1;
  }
  mesh.triangles.resize(nt);
  for (std::size_t t = 0; t < nt; ++t) {
    auto& tri = mesh.triangles[t];
    if (!(in >> tri[0] >> tri[1] >> tri[2])) {
      throw DataError("mesh file: bad triangle line " + std::to_string(t));
    }
  }
  validate_mesh(mesh);
  return mesh;
}

}  // namespace stsm
