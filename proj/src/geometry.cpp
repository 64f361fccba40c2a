#include "nrs/geometry.hpp"

#include <cmath>

namespace nrs {

namespace {

Mat3 rot_x(double a) {
    Mat3 r = Mat3::identity();
    r(1, 1) = std::cos(a);
    r(1, 2) = -std::sin(a);
    r(2, 1) = std::sin(a);
    r(2, 2) = std::cos(a);
    return r;
}

Mat3 rot_y(double a) {
    Mat3 r = Mat3::identity();
    r(0, 0) = std::cos(a);
    r(0, 2) = std::sin(a);
    r(2, 0) = -std::sin(a);
    r(2, 2) = std::cos(a);
    return r;
}

Mat3 rot_z(double a) {
    Mat3 r = Mat3::identity();
    r(0, 0) = std::cos(a);
    r(0, 1) = -std::sin(a);
    r(1, 0) = std::sin(a);
    r(1, 1) = std::cos(a);
    return r;
}

Mat3 drot_x(double a) {
    Mat3 r{};
    r(1, 1) = -std::sin(a);
    r(1, 2) = -std::cos(a);
    r(2, 1) = std::cos(a);
    r(2, 2) = -std::sin(a);
    return r;
}

Mat3 drot_y(double a) {
    Mat3 r{};
    r(0, 0) = -std::sin(a);
    r(0, 2) = std::cos(a);
    r(2, 0) = -std::cos(a);
    r(2, 2) = -std::sin(a);
    return r;
}

Mat3 drot_z(double a) {
    Mat3 r{};
    r(0, 0) = -std::sin(a);
    r(0, 1) = -std::cos(a);
    r(1, 0) = std::cos(a);
    r(1, 1) = -std::sin(a);
    return r;
}

} // namespace

Pose euler_to_pose(const PoseParams &params) {
    Pose p;
    p.rotation = rot_x(params.euler.x) * rot_y(params.euler.y) * rot_z(params.euler.z);
    p.translation = params.translation;
    return p;
}

std::array<Mat3, 3> euler_rotation_jacobian(const Vec3 &euler) {
    const Mat3 rx = rot_x(euler.x), ry = rot_y(euler.y), rz = rot_z(euler.z);
    return {drot_x(euler.x) * ry * rz, rx * drot_y(euler.y) * rz, rx * ry * drot_z(euler.z)};
}

std::vector<Vec3> transform_points(const Pose &pose, std::span<const Vec3> points) {
    std::vector<Vec3> out;
    out.reserve(points.size());
    for (const Vec3 &p : points) out.push_back(pose.apply(p));
    return out;
}

Pose pose_inverse(const Pose &pose) {
    Pose inv;
    inv.rotation = pose.rotation.transposed();
    inv.translation = -(inv.rotation * pose.translation);
    return inv;
}

Pose pose_compose(const Pose &a, const Pose &b) {
    Pose out;
    out.rotation = a.rotation * b.rotation;
    out.translation = a.rotation * b.translation + a.translation;
    return out;
}

double pose_orthonormality_error(const Pose &pose) {
    const Mat3 gram = pose.rotation.transposed() * pose.rotation;
    double err = 0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            err = std::max(err, std::abs(gram(i, j) - (i == j ? 1.0 : 0.0)));
    const Mat3 &r = pose.rotation;
    const double det = r(0, 0) * (r(1, 1) * r(2, 2) - r(1, 2) * r(2, 1)) -
                       r(0, 1) * (r(1, 0) * r(2, 2) - r(1, 2) * r(2, 0)) +
                       r(0, 2) * (r(1, 0) * r(2, 1) - r(1, 1) * r(2, 0));
    return std::max(err, std::abs(det - 1.0));
}

} // namespace nrs
