#pragma once

#include <array>
#include <span>
#include <vector>

#include "nrs/types.hpp"

namespace nrs {

// SE(3) rigid transform, rotation stored explicitly.
struct Pose {
    Mat3 rotation = Mat3::identity();
    Vec3 translation{};

    Vec3 apply(const Vec3 &p) const { return rotation * p + translation; }
};

// 6-DoF parameterization: translation (x,y,z) plus intrinsic X-Y-Z Euler
// angles (roll about x, then pitch about the rotated y, then yaw about the
// rotated z), so R = Rx(roll) * Ry(pitch) * Rz(yaw).
struct PoseParams {
    Vec3 translation{};
    Vec3 euler{}; // (roll, pitch, yaw) in radians
};

Pose euler_to_pose(const PoseParams &params);

// Partial derivatives of the rotation matrix w.r.t. each Euler angle.
std::array<Mat3, 3> euler_rotation_jacobian(const Vec3 &euler);

std::vector<Vec3> transform_points(const Pose &pose, std::span<const Vec3> points);

Pose pose_inverse(const Pose &pose);
Pose pose_compose(const Pose &a, const Pose &b);

// Max deviation from orthonormality / unit determinant; used by invariants.
double pose_orthonormality_error(const Pose &pose);

} // namespace nrs
