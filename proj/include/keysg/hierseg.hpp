#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "keysg/pointcloud.hpp"

namespace keysg {

// One story of the building: a z-interval of the fused cloud.
struct FloorSlab {
    int index = 0;
    double z_min = 0.0;
    double z_max = 0.0;
    PointCloud cloud;
};

// Bird's-eye-view histogram over a floor slab.
struct Grid2D {
    double cell_size = 0.0;
    Eigen::Vector2d origin = Eigen::Vector2d::Zero();  // min corner
    int width = 0, height = 0;
    std::vector<uint32_t> values;  // width*height, row-major (y major)

    uint32_t at(int i, int j) const { return values[static_cast<size_t>(j) * width + i]; }
    uint32_t& at(int i, int j) { return values[static_cast<size_t>(j) * width + i]; }
    // Cell containing a world (x,y); returns false when outside the grid.
    bool cell_of(double x, double y, int& i, int& j) const;
};

struct RoomRegion {
    int index = 0;
    int floor_index = 0;
    // Binary mask over the floor's BEV grid (same dims/origin as the Grid2D).
    std::vector<uint8_t> mask;
    double cell_size = 0.0;
    Eigen::Vector2d grid_origin = Eigen::Vector2d::Zero();
    int grid_width = 0, grid_height = 0;
    std::vector<Eigen::Vector2d> polygon;  // outer boundary, meters
    PointCloud cloud;

    bool mask_at(int i, int j) const {
        if (i < 0 || j < 0 || i >= grid_width || j >= grid_height) return false;
        return mask[static_cast<size_t>(j) * grid_width + i] != 0;
    }
    double area() const;  // shoelace over the polygon
};

struct FloorParams {
    double bin = 0.10;              // meters
    double peak_frac = 0.3;         // of the global histogram max
    double min_floor_height = 2.0;  // meters between kept peaks
};

struct RoomParams {
    double cell = 0.05;          // meters
    double wall_frac = 0.4;      // of the 95th-percentile occupied-cell count
    double min_room_area = 2.0;  // m^2
    double smooth_sigma = 2.0;   // cells
};

// Height-histogram peak selection. Slab i spans [peak_i - bin, peak_{i+1} - bin),
// the first slab reaching down to z_min and the last up to z_max; every point is
// assigned to exactly one slab.
std::vector<FloorSlab> detect_floors(const PointCloud& cloud, const FloorParams& params);

Grid2D bev_histogram(const FloorSlab& floor, double cell);

// Watershed over the distance transform of free space. Free space is every
// in-hull cell whose count is below wall_frac times the 95th percentile of
// occupied-cell counts. Deterministic: markers are ordered by (depth desc,
// row-major), undersized regions merge into the neighbor with the longest
// shared boundary.
std::vector<RoomRegion> segment_rooms(const Grid2D& grid, const FloorSlab& floor,
                                      const RoomParams& params);

// Even-odd test, boundary counts as inside.
bool point_in_polygon(const Eigen::Vector2d& p, const std::vector<Eigen::Vector2d>& polygon);

// z within the floor slab and (x,y) inside the room polygon.
bool room_volume_test(const Eigen::Vector3d& point, const RoomRegion& room,
                      const FloorSlab& floor);

double polygon_area(const std::vector<Eigen::Vector2d>& polygon);

}  // namespace keysg
