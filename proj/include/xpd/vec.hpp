#pragma once

#include <array>
#include <cmath>

namespace xpd {

/// Fixed 3-component vector. 2-D problems keep z = 0.
struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    constexpr double& operator[](int k) { return k == 0 ? x : (k == 1 ? y : z); }
    constexpr double operator[](int k) const { return k == 0 ? x : (k == 1 ? y : z); }

    constexpr Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
    constexpr Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
    constexpr Vec3& operator*=(double s) { x *= s; y *= s; z *= s; return *this; }

    friend constexpr Vec3 operator+(Vec3 a, const Vec3& b) { return a += b; }
    friend constexpr Vec3 operator-(Vec3 a, const Vec3& b) { return a -= b; }
    friend constexpr Vec3 operator-(const Vec3& a) { return {-a.x, -a.y, -a.z}; }
    friend constexpr Vec3 operator*(Vec3 a, double s) { return a *= s; }
    friend constexpr Vec3 operator*(double s, Vec3 a) { return a *= s; }
    friend constexpr bool operator==(const Vec3&, const Vec3&) = default;
};

constexpr double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

constexpr Vec3 cross(const Vec3& a, const Vec3& b)
{
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

/// Symmetric 3x3 tensor stored row-major; used for imposed strains in tests and tools.
using Tensor3 = std::array<std::array<double, 3>, 3>;

inline Vec3 apply(const Tensor3& t, const Vec3& v)
{
    return {t[0][0] * v.x + t[0][1] * v.y + t[0][2] * v.z,
            t[1][0] * v.x + t[1][1] * v.y + t[1][2] * v.z,
            t[2][0] * v.x + t[2][1] * v.y + t[2][2] * v.z};
}

} // namespace xpd
