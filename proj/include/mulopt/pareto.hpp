#pragma once

#include <algorithm>
#include <memory>
#include <string>
#include <vector>

#include "mulopt/design.hpp"
#include "mulopt/error.hpp"

namespace mulopt {

struct ParetoPoint {
  double area = 0.0;
  double delay = 0.0;
  std::shared_ptr<const DesignDoc> design;  // may be null for imported points
  std::string label;                        // identifies the source (design hash, run name)
};

// a dominates b under minimization of both coordinates.
inline bool dominates(const ParetoPoint& a, const ParetoPoint& b) {
  return a.area <= b.area && a.delay <= b.delay && (a.area < b.area || a.delay < b.delay);
}

// Nondominated (area, delay) points. Coordinate ties between different sources
// are kept; re-inserting the same source at the same coordinates is a no-op.
class ParetoSet {
 public:
  // Returns true when the point was added.
  bool insert(ParetoPoint point) {
    for (const auto& p : points_) {
      if (dominates(p, point)) return false;
      if (p.area == point.area && p.delay == point.delay && p.label == point.label) return false;
    }
    std::erase_if(points_, [&](const ParetoPoint& p) { return dominates(point, p); });
    points_.push_back(std::move(point));
    return true;
  }

  bool insert(double area, double delay, std::shared_ptr<const DesignDoc> design = nullptr,
              std::string label = {}) {
    return insert(ParetoPoint{area, delay, std::move(design), std::move(label)});
  }

  void merge(const ParetoSet& other) {
    for (const auto& p : other.points_) insert(p);
  }

  // Points ordered by area, then delay, then label.
  std::vector<ParetoPoint> sorted() const {
    auto out = points_;
    std::sort(out.begin(), out.end(), [](const ParetoPoint& a, const ParetoPoint& b) {
      if (a.area != b.area) return a.area < b.area;
      if (a.delay != b.delay) return a.delay < b.delay;
      return a.label < b.label;
    });
    return out;
  }

  const std::vector<ParetoPoint>& points() const { return points_; }
  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }

 private:
  std::vector<ParetoPoint> points_;
};

struct RefPoint {
  double area = 0.0;
  double delay = 0.0;
};

// Exact 2-D hypervolume by a staircase sweep in area order.
inline double hypervolume(const std::vector<ParetoPoint>& points, RefPoint ref) {
  for (const auto& p : points)
    if (!(p.area < ref.area && p.delay < ref.delay))
      throw RefDominated("point (" + std::to_string(p.area) + ", " + std::to_string(p.delay) +
                         ") does not dominate the reference point");
  std::vector<std::pair<double, double>> pts;
  pts.reserve(points.size());
  for (const auto& p : points) pts.emplace_back(p.area, p.delay);
  std::sort(pts.begin(), pts.end());
  double volume = 0.0;
  double ceiling = ref.delay;
  for (const auto& [area, delay] : pts) {
    if (delay >= ceiling) continue;
    volume += (ref.area - area) * (ceiling - delay);
    ceiling = delay;
  }
  return volume;
}

inline double hypervolume(const ParetoSet& set, RefPoint ref) {
  return hypervolume(set.points(), ref);
}

}  // namespace mulopt
