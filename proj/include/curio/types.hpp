#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include "curio/common.hpp"

namespace curio {

/// Object feature vector [s_x, s_y, d, t]: extents in meters, t in {0,1}
/// (0 = solid, 1 = hollow).
struct ObjectSpec {
    double s_x = 0.0;
    double s_y = 0.0;
    double d = 0.0;
    int type = 0;

    std::array<double, 4> features() const {
        return {s_x, s_y, d, static_cast<double>(type)};
    }
};

/// Object center in the world frame, meters.
struct Pose {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
};

inline constexpr std::size_t kActionDim = 12;
inline constexpr std::size_t kWaypoints = 3;

/// Trajectory parameters: three waypoints [x, y, z, g], positions relative to
/// the target object's center at action start. Gripper open iff g >= 0.5.
struct ActionParams {
    std::array<double, kActionDim> v{};

    double x(std::size_t wp) const { return v[wp * 4 + 0]; }
    double y(std::size_t wp) const { return v[wp * 4 + 1]; }
    double z(std::size_t wp) const { return v[wp * 4 + 2]; }
    double g(std::size_t wp) const { return v[wp * 4 + 3]; }

    bool finite() const {
        for (double c : v)
            if (!std::isfinite(c)) return false;
        return true;
    }
};

/// Displacement of the target object's absolute position, meters.
struct Effect {
    double dx = 0.0;
    double dy = 0.0;
    double dz = 0.0;
};

struct WorldState {
    struct Entry {
        ObjectSpec spec;
        Pose pose;
    };
    std::vector<Entry> objects;
    std::size_t target_index = 0;

    const Entry& target() const {
        if (target_index >= objects.size()) throw InputError("WorldState: target_index out of range");
        return objects[target_index];
    }
};

/// One (object, action, effect) interaction record; the unit of training data.
struct Transition {
    std::array<double, 4> object{};
    std::array<double, kActionDim> action{};
    std::array<double, 3> effect{};
};

using Dataset = std::vector<Transition>;

}  // namespace curio
