#include "keysg/hierseg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <queue>

#include "keysg/errors.hpp"

namespace keysg {

bool Grid2D::cell_of(double x, double y, int& i, int& j) const {
    i = static_cast<int>(std::floor((x - origin.x()) / cell_size));
    j = static_cast<int>(std::floor((y - origin.y()) / cell_size));
    return i >= 0 && j >= 0 && i < width && j < height;
}

double RoomRegion::area() const { return polygon_area(polygon); }

// --- floors ---

std::vector<FloorSlab> detect_floors(const PointCloud& cloud, const FloorParams& params) {
    if (cloud.empty()) throw Error(ErrorCode::EmptyScene, "detect_floors on empty cloud");
    if (params.bin <= 0) throw Error(ErrorCode::InvalidArgument, "bin must be > 0");

    double z_min = std::numeric_limits<double>::infinity();
    double z_max = -std::numeric_limits<double>::infinity();
    for (const auto& p : cloud.points) {
        z_min = std::min(z_min, static_cast<double>(p.z()));
        z_max = std::max(z_max, static_cast<double>(p.z()));
    }
    const int n_bins = static_cast<int>(std::floor((z_max - z_min) / params.bin)) + 1;
    std::vector<size_t> hist(static_cast<size_t>(n_bins), 0);
    for (const auto& p : cloud.points) {
        int b = static_cast<int>(std::floor((p.z() - z_min) / params.bin));
        b = std::clamp(b, 0, n_bins - 1);
        ++hist[static_cast<size_t>(b)];
    }

    const size_t global_max = *std::max_element(hist.begin(), hist.end());
    const double floor_count = params.peak_frac * static_cast<double>(global_max);

    // Local maxima at or above the threshold; plateaus keep their first bin.
    std::vector<int> candidates;
    for (int b = 0; b < n_bins; ++b) {
        const size_t h = hist[static_cast<size_t>(b)];
        if (static_cast<double>(h) < floor_count) continue;
        const size_t prev = b > 0 ? hist[static_cast<size_t>(b - 1)] : 0;
        const size_t next = b + 1 < n_bins ? hist[static_cast<size_t>(b + 1)] : 0;
        if (h > prev && h >= next) candidates.push_back(b);
    }
    // Greedy thinning in ascending z.
    std::vector<double> peaks;
    for (int b : candidates) {
        const double z = z_min + (b + 0.5) * params.bin;
        if (peaks.empty() || z - peaks.back() >= params.min_floor_height) peaks.push_back(z);
    }
    if (peaks.empty()) peaks.push_back(z_min + 0.5 * params.bin);

    std::vector<double> bounds;
    bounds.push_back(std::min(z_min, peaks.front() - params.bin));
    for (size_t i = 1; i < peaks.size(); ++i) bounds.push_back(peaks[i] - params.bin);
    bounds.push_back(std::nextafter(z_max, std::numeric_limits<double>::infinity()) + 1e-9);

    std::vector<FloorSlab> slabs(peaks.size());
    for (size_t i = 0; i < peaks.size(); ++i) {
        slabs[i].index = static_cast<int>(i);
        slabs[i].z_min = bounds[i];
        slabs[i].z_max = bounds[i + 1];
    }
    for (const auto& p : cloud.points) {
        const double z = p.z();
        size_t slot = slabs.size() - 1;
        for (size_t i = 0; i < slabs.size(); ++i)
            if (z >= bounds[i] && z < bounds[i + 1]) {
                slot = i;
                break;
            }
        slabs[slot].cloud.points.push_back(p);
    }
    return slabs;
}

// --- BEV histogram ---

Grid2D bev_histogram(const FloorSlab& floor, double cell) {
    if (floor.cloud.empty()) throw Error(ErrorCode::EmptyScene, "bev_histogram on empty floor");
    if (cell <= 0) throw Error(ErrorCode::InvalidArgument, "cell must be > 0");
    Grid2D grid;
    grid.cell_size = cell;
    Eigen::Vector2d lo(std::numeric_limits<double>::infinity(),
                       std::numeric_limits<double>::infinity());
    Eigen::Vector2d hi = -lo;
    for (const auto& p : floor.cloud.points) {
        lo.x() = std::min(lo.x(), static_cast<double>(p.x()));
        lo.y() = std::min(lo.y(), static_cast<double>(p.y()));
        hi.x() = std::max(hi.x(), static_cast<double>(p.x()));
        hi.y() = std::max(hi.y(), static_cast<double>(p.y()));
    }
    grid.origin = lo;
    grid.width = static_cast<int>(std::floor((hi.x() - lo.x()) / cell)) + 1;
    grid.height = static_cast<int>(std::floor((hi.y() - lo.y()) / cell)) + 1;
    grid.values.assign(static_cast<size_t>(grid.width) * grid.height, 0);
    for (const auto& p : floor.cloud.points) {
        int i, j;
        if (grid.cell_of(p.x(), p.y(), i, j)) ++grid.at(i, j);
    }
    return grid;
}

// --- watershed rooms ---

namespace {

// Felzenszwalb-Huttenlocher 1D squared distance transform.
void dt_1d(const std::vector<double>& f, std::vector<double>& d, int n) {
    static thread_local std::vector<int> v;
    static thread_local std::vector<double> z;
    v.assign(static_cast<size_t>(n), 0);
    z.assign(static_cast<size_t>(n) + 1, 0.0);
    int k = 0;
    v[0] = 0;
    z[0] = -std::numeric_limits<double>::infinity();
    z[1] = std::numeric_limits<double>::infinity();
    for (int q = 1; q < n; ++q) {
        double s;
        for (;;) {
            const int p = v[static_cast<size_t>(k)];
            s = ((f[static_cast<size_t>(q)] + q * q) - (f[static_cast<size_t>(p)] + p * p)) /
                (2.0 * q - 2.0 * p);
            if (s <= z[static_cast<size_t>(k)]) {
                --k;
            } else {
                break;
            }
        }
        ++k;
        v[static_cast<size_t>(k)] = q;
        z[static_cast<size_t>(k)] = s;
        z[static_cast<size_t>(k) + 1] = std::numeric_limits<double>::infinity();
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[static_cast<size_t>(k) + 1] < q) ++k;
        const int p = v[static_cast<size_t>(k)];
        d[static_cast<size_t>(q)] = (q - p) * (q - p) + f[static_cast<size_t>(p)];
    }
}

std::vector<double> squared_edt(const std::vector<uint8_t>& free, int w, int h) {
    const double inf = 1e18;
    std::vector<double> dist(static_cast<size_t>(w) * h);
    for (size_t i = 0; i < dist.size(); ++i) dist[i] = free[i] ? inf : 0.0;
    std::vector<double> f(static_cast<size_t>(std::max(w, h)));
    std::vector<double> d(static_cast<size_t>(std::max(w, h)));
    for (int x = 0; x < w; ++x) {
        for (int y = 0; y < h; ++y) f[static_cast<size_t>(y)] = dist[static_cast<size_t>(y) * w + x];
        dt_1d(f, d, h);
        for (int y = 0; y < h; ++y) dist[static_cast<size_t>(y) * w + x] = d[static_cast<size_t>(y)];
    }
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) f[static_cast<size_t>(x)] = dist[static_cast<size_t>(y) * w + x];
        dt_1d(f, d, w);
        for (int x = 0; x < w; ++x) dist[static_cast<size_t>(y) * w + x] = d[static_cast<size_t>(x)];
    }
    return dist;
}

std::vector<double> gaussian_smooth(const std::vector<double>& src, int w, int h, double sigma) {
    if (sigma <= 0.0) return src;
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> kernel(static_cast<size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int k = -radius; k <= radius; ++k) {
        kernel[static_cast<size_t>(k + radius)] = std::exp(-0.5 * k * k / (sigma * sigma));
        sum += kernel[static_cast<size_t>(k + radius)];
    }
    for (auto& v : kernel) v /= sum;

    std::vector<double> tmp(src.size(), 0.0), out(src.size(), 0.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int k = -radius; k <= radius; ++k) {
                const int xx = x + k;
                if (xx < 0 || xx >= w) continue;
                acc += kernel[static_cast<size_t>(k + radius)] * src[static_cast<size_t>(y) * w + xx];
            }
            tmp[static_cast<size_t>(y) * w + x] = acc;
        }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int k = -radius; k <= radius; ++k) {
                const int yy = y + k;
                if (yy < 0 || yy >= h) continue;
                acc += kernel[static_cast<size_t>(k + radius)] * tmp[static_cast<size_t>(yy) * w + x];
            }
            out[static_cast<size_t>(y) * w + x] = acc;
        }
    return out;
}

std::vector<Eigen::Vector2d> convex_hull(std::vector<Eigen::Vector2d> pts) {
    std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
        return a.x() != b.x() ? a.x() < b.x() : a.y() < b.y();
    });
    pts.erase(std::unique(pts.begin(), pts.end(),
                          [](const auto& a, const auto& b) { return a == b; }),
              pts.end());
    if (pts.size() < 3) return pts;
    auto cross = [](const Eigen::Vector2d& o, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
        return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
    };
    std::vector<Eigen::Vector2d> hull(2 * pts.size());
    size_t k = 0;
    for (const auto& p : pts) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
        hull[k++] = p;
    }
    const size_t lower = k + 1;
    for (auto it = pts.rbegin(); it != pts.rend(); ++it) {
        while (k >= lower && cross(hull[k - 2], hull[k - 1], *it) <= 0) --k;
        hull[k++] = *it;
    }
    hull.resize(k - 1);
    return hull;
}

bool inside_convex(const Eigen::Vector2d& p, const std::vector<Eigen::Vector2d>& hull) {
    if (hull.size() < 3) return false;
    for (size_t i = 0; i < hull.size(); ++i) {
        const Eigen::Vector2d& a = hull[i];
        const Eigen::Vector2d& b = hull[(i + 1) % hull.size()];
        const double cross = (b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x());
        if (cross < -1e-9) return false;
    }
    return true;
}

// Outer-boundary trace of a binary mask, following cell edges with the region
// kept on the left. Vertices are corner-lattice coordinates.
std::vector<Eigen::Vector2i> trace_outer_boundary(const std::vector<uint8_t>& mask, int w, int h) {
    auto inside = [&](int i, int j) {
        return i >= 0 && j >= 0 && i < w && j < h && mask[static_cast<size_t>(j) * w + i] != 0;
    };
    std::map<std::pair<int, int>, std::vector<std::pair<int, int>>> edges;
    for (int j = 0; j < h; ++j)
        for (int i = 0; i < w; ++i) {
            if (!inside(i, j)) continue;
            if (!inside(i, j - 1)) edges[{i, j}].push_back({i + 1, j});
            if (!inside(i + 1, j)) edges[{i + 1, j}].push_back({i + 1, j + 1});
            if (!inside(i, j + 1)) edges[{i + 1, j + 1}].push_back({i, j + 1});
            if (!inside(i - 1, j)) edges[{i, j + 1}].push_back({i, j});
        }
    if (edges.empty()) return {};
    const std::pair<int, int> start = edges.begin()->first;
    std::vector<Eigen::Vector2i> poly;
    std::pair<int, int> cur = start;
    std::pair<int, int> dir_in = {0, 0};
    size_t guard = 0;
    const size_t max_steps = edges.size() * 4 + 8;
    do {
        poly.emplace_back(cur.first, cur.second);
        auto it = edges.find(cur);
        if (it == edges.end() || it->second.empty()) break;
        // Prefer the leftmost turn relative to the incoming direction so pinch
        // points keep the walk on the outer contour.
        std::pair<int, int> chosen = it->second.front();
        if (it->second.size() > 1 && (dir_in.first != 0 || dir_in.second != 0)) {
            auto turn_score = [&](const std::pair<int, int>& to) {
                const int dx = to.first - cur.first, dy = to.second - cur.second;
                const int cross = dir_in.first * dy - dir_in.second * dx;
                const int dot = dir_in.first * dx + dir_in.second * dy;
                if (cross > 0) return 0;  // left turn
                if (cross == 0 && dot > 0) return 1;
                if (cross < 0) return 2;
                return 3;  // U-turn
            };
            for (const auto& cand : it->second)
                if (turn_score(cand) < turn_score(chosen)) chosen = cand;
        }
        auto& vec = it->second;
        vec.erase(std::find(vec.begin(), vec.end(), chosen));
        dir_in = {chosen.first - cur.first, chosen.second - cur.second};
        cur = chosen;
    } while (cur != start && ++guard < max_steps);
    return poly;
}

}  // namespace

std::vector<RoomRegion> segment_rooms(const Grid2D& grid, const FloorSlab& floor,
                                      const RoomParams& params) {
    const int w = grid.width, h = grid.height;
    if (w <= 0 || h <= 0) throw Error(ErrorCode::InvalidArgument, "empty grid");
    const size_t n = static_cast<size_t>(w) * h;

    // Wall threshold from the occupied-count distribution (95th percentile,
    // nearest-rank). Zero cells are unobserved, not evidence of free space.
    std::vector<uint32_t> occupied;
    occupied.reserve(n);
    for (uint32_t v : grid.values)
        if (v > 0) occupied.push_back(v);
    if (occupied.empty()) throw Error(ErrorCode::NoFreeSpace, "grid has no occupied cells");
    std::sort(occupied.begin(), occupied.end());
    const size_t rank = static_cast<size_t>(
        std::ceil(0.95 * static_cast<double>(occupied.size())));
    const uint32_t p95 = occupied[std::min(occupied.size() - 1, rank == 0 ? 0 : rank - 1)];
    const double wall_threshold = params.wall_frac * static_cast<double>(p95);

    std::vector<Eigen::Vector2d> occupied_centers;
    for (int j = 0; j < h; ++j)
        for (int i = 0; i < w; ++i)
            if (grid.at(i, j) > 0) occupied_centers.emplace_back(i + 0.5, j + 0.5);
    const std::vector<Eigen::Vector2d> hull = convex_hull(std::move(occupied_centers));

    std::vector<uint8_t> free(n, 0);
    size_t free_count = 0;
    for (int j = 0; j < h; ++j)
        for (int i = 0; i < w; ++i) {
            if (static_cast<double>(grid.at(i, j)) >= wall_threshold && wall_threshold > 0)
                continue;
            if (!inside_convex({i + 0.5, j + 0.5}, hull)) continue;
            free[static_cast<size_t>(j) * w + i] = 1;
            ++free_count;
        }
    if (free_count == 0) throw Error(ErrorCode::NoFreeSpace, "all cells wall-like");

    std::vector<double> sq = squared_edt(free, w, h);
    std::vector<double> dist(n);
    for (size_t i = 0; i < n; ++i) dist[i] = std::sqrt(sq[i]);
    const std::vector<double> smooth = gaussian_smooth(dist, w, h, params.smooth_sigma);

    // Markers: connected components of local maxima of the smoothed map.
    std::vector<uint8_t> is_max(n, 0);
    for (int j = 0; j < h; ++j)
        for (int i = 0; i < w; ++i) {
            const size_t idx = static_cast<size_t>(j) * w + i;
            if (!free[idx] || smooth[idx] <= 0.0) continue;
            bool ok = true;
            for (int dj = -1; dj <= 1 && ok; ++dj)
                for (int di = -1; di <= 1 && ok; ++di) {
                    if (di == 0 && dj == 0) continue;
                    const int ii = i + di, jj = j + dj;
                    if (ii < 0 || jj < 0 || ii >= w || jj >= h) continue;
                    if (smooth[static_cast<size_t>(jj) * w + ii] > smooth[idx]) ok = false;
                }
            if (ok) is_max[idx] = 1;
        }

    std::vector<int> label(n, -1);
    struct Marker {
        double depth;
        size_t seed;
        std::vector<size_t> cells;
    };
    std::vector<Marker> markers;
    {
        std::vector<uint8_t> seen(n, 0);
        for (size_t idx = 0; idx < n; ++idx) {
            if (!is_max[idx] || seen[idx]) continue;
            Marker m;
            m.seed = idx;
            m.depth = smooth[idx];
            std::vector<size_t> stack{idx};
            seen[idx] = 1;
            while (!stack.empty()) {
                const size_t cur = stack.back();
                stack.pop_back();
                m.cells.push_back(cur);
                const int ci = static_cast<int>(cur % static_cast<size_t>(w));
                const int cj = static_cast<int>(cur / static_cast<size_t>(w));
                for (int dj = -1; dj <= 1; ++dj)
                    for (int di = -1; di <= 1; ++di) {
                        const int ii = ci + di, jj = cj + dj;
                        if (ii < 0 || jj < 0 || ii >= w || jj >= h) continue;
                        const size_t nidx = static_cast<size_t>(jj) * w + ii;
                        if (is_max[nidx] && !seen[nidx]) {
                            seen[nidx] = 1;
                            stack.push_back(nidx);
                        }
                    }
            }
            std::sort(m.cells.begin(), m.cells.end());
            m.seed = m.cells.front();
            markers.push_back(std::move(m));
        }
    }
    std::sort(markers.begin(), markers.end(), [](const Marker& a, const Marker& b) {
        if (a.depth != b.depth) return a.depth > b.depth;
        return a.seed < b.seed;
    });

    // Priority flood of the negative (smoothed) distance map from the markers.
    using QItem = std::pair<double, size_t>;  // (depth, cell); deeper first, then row-major
    auto cmp = [](const QItem& a, const QItem& b) {
        if (a.first != b.first) return a.first < b.first;
        return a.second > b.second;
    };
    std::priority_queue<QItem, std::vector<QItem>, decltype(cmp)> queue(cmp);
    for (size_t m = 0; m < markers.size(); ++m)
        for (size_t cell : markers[m].cells) {
            label[cell] = static_cast<int>(m);
            queue.emplace(smooth[cell], cell);
        }
    const int di4[4] = {1, -1, 0, 0};
    const int dj4[4] = {0, 0, 1, -1};
    while (!queue.empty()) {
        const auto [depth, idx] = queue.top();
        queue.pop();
        const int ci = static_cast<int>(idx % static_cast<size_t>(w));
        const int cj = static_cast<int>(idx / static_cast<size_t>(w));
        for (int d = 0; d < 4; ++d) {
            const int ii = ci + di4[d], jj = cj + dj4[d];
            if (ii < 0 || jj < 0 || ii >= w || jj >= h) continue;
            const size_t nidx = static_cast<size_t>(jj) * w + ii;
            if (!free[nidx] || label[nidx] >= 0) continue;
            label[nidx] = label[idx];
            queue.emplace(smooth[nidx], nidx);
        }
    }

    // Merge regions below the minimum area into the neighbor sharing the
    // longest boundary, smallest region first.
    const double cell_area = grid.cell_size * grid.cell_size;
    auto region_sizes = [&]() {
        std::map<int, size_t> sizes;
        for (size_t i = 0; i < n; ++i)
            if (label[i] >= 0) ++sizes[label[i]];
        return sizes;
    };
    for (;;) {
        auto sizes = region_sizes();
        if (sizes.size() <= 1) break;
        int victim = -1;
        size_t victim_size = 0;
        for (const auto& [id, size] : sizes) {
            if (static_cast<double>(size) * cell_area >= params.min_room_area) continue;
            if (victim < 0 || size < victim_size) {
                victim = id;
                victim_size = size;
            }
        }
        if (victim < 0) break;
        std::map<int, size_t> boundary;
        for (int j = 0; j < h; ++j)
            for (int i = 0; i < w; ++i) {
                const size_t idx = static_cast<size_t>(j) * w + i;
                if (label[idx] != victim) continue;
                for (int d = 0; d < 4; ++d) {
                    const int ii = i + di4[d], jj = j + dj4[d];
                    if (ii < 0 || jj < 0 || ii >= w || jj >= h) continue;
                    const int other = label[static_cast<size_t>(jj) * w + ii];
                    if (other >= 0 && other != victim) ++boundary[other];
                }
            }
        if (boundary.empty()) break;  // isolated pocket; keep it
        int target = boundary.begin()->first;
        size_t best = boundary.begin()->second;
        for (const auto& [id, len] : boundary)
            if (len > best) {
                target = id;
                best = len;
            }
        for (size_t i = 0; i < n; ++i)
            if (label[i] == victim) label[i] = target;
    }

    // Relabel by first row-major cell for stable output ordering.
    std::map<int, int> remap;
    for (size_t i = 0; i < n; ++i)
        if (label[i] >= 0 && !remap.count(label[i])) {
            const int next_id = static_cast<int>(remap.size());
            remap[label[i]] = next_id;
        }

    std::vector<RoomRegion> rooms(remap.size());
    for (auto [old_id, new_id] : remap) {
        RoomRegion& room = rooms[static_cast<size_t>(new_id)];
        room.index = new_id;
        room.floor_index = floor.index;
        room.cell_size = grid.cell_size;
        room.grid_origin = grid.origin;
        room.grid_width = w;
        room.grid_height = h;
        room.mask.assign(n, 0);
    }
    for (size_t i = 0; i < n; ++i)
        if (label[i] >= 0) rooms[static_cast<size_t>(remap[label[i]])].mask[i] = 1;

    for (auto& room : rooms) {
        // The polygon is the room's volumetric boundary, so it must reach the
        // wall surfaces: free space ends one wall thickness short of them.
        // Trace the boundary of the mask dilated by two cells.
        std::vector<uint8_t> dilated(n, 0);
        for (int j = 0; j < h; ++j)
            for (int i = 0; i < w; ++i) {
                if (!room.mask[static_cast<size_t>(j) * w + i]) continue;
                for (int dj = -2; dj <= 2; ++dj)
                    for (int di = -2; di <= 2; ++di) {
                        const int ii = std::clamp(i + di, 0, w - 1);
                        const int jj = std::clamp(j + dj, 0, h - 1);
                        dilated[static_cast<size_t>(jj) * w + ii] = 1;
                    }
            }
        const auto trace = trace_outer_boundary(dilated, w, h);
        room.polygon.reserve(trace.size());
        for (const auto& v : trace)
            room.polygon.emplace_back(grid.origin.x() + grid.cell_size * v.x(),
                                      grid.origin.y() + grid.cell_size * v.y());
    }
    for (const auto& p : floor.cloud.points) {
        int i, j;
        if (!grid.cell_of(p.x(), p.y(), i, j)) continue;
        const size_t idx = static_cast<size_t>(j) * w + i;
        if (label[idx] < 0) continue;
        rooms[static_cast<size_t>(remap[label[idx]])].cloud.points.push_back(p);
    }
    return rooms;
}

// --- polygon predicates ---

double polygon_area(const std::vector<Eigen::Vector2d>& polygon) {
    double acc = 0.0;
    const size_t n = polygon.size();
    for (size_t i = 0; i < n; ++i) {
        const auto& a = polygon[i];
        const auto& b = polygon[(i + 1) % n];
        acc += a.x() * b.y() - b.x() * a.y();
    }
    return std::abs(acc) * 0.5;
}

bool point_in_polygon(const Eigen::Vector2d& p, const std::vector<Eigen::Vector2d>& polygon) {
    const size_t n = polygon.size();
    if (n < 3) return false;
    bool inside = false;
    for (size_t i = 0; i < n; ++i) {
        const Eigen::Vector2d& a = polygon[i];
        const Eigen::Vector2d& b = polygon[(i + 1) % n];
        // Boundary counts as inside.
        const double cross =
            (b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x());
        if (std::abs(cross) < 1e-12 && p.x() >= std::min(a.x(), b.x()) - 1e-12 &&
            p.x() <= std::max(a.x(), b.x()) + 1e-12 && p.y() >= std::min(a.y(), b.y()) - 1e-12 &&
            p.y() <= std::max(a.y(), b.y()) + 1e-12)
            return true;
        if ((a.y() > p.y()) != (b.y() > p.y())) {
            const double x_int = a.x() + (p.y() - a.y()) / (b.y() - a.y()) * (b.x() - a.x());
            if (p.x() < x_int) inside = !inside;
        }
    }
    return inside;
}

bool room_volume_test(const Eigen::Vector3d& point, const RoomRegion& room,
                      const FloorSlab& floor) {
    if (point.z() < floor.z_min || point.z() >= floor.z_max) return false;
    return point_in_polygon({point.x(), point.y()}, room.polygon);
}

}  // namespace keysg
