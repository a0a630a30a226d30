#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace risloc {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using cd = std::complex<double>;

inline constexpr double kPi = std::numbers::pi;

/// Azimuth/elevation pair in radians. az in (-pi, pi], el in [0, pi].
struct Angles {
    double az = 0.0;
    double el = 0.0;
    /// Set when the defining geometry was on-axis (sin el == 0) and az
    /// was forced to 0 by convention.
    bool degenerate_azimuth = false;
};

/// Rotation from global to array coordinates; rows are the array axes
/// v1, v2, v3 expressed in global coordinates.
inline void validate_rotation(const Mat3& rot, double tol = 1e-12) {
    if (((rot.transpose() * rot) - Mat3::Identity()).cwiseAbs().maxCoeff() > tol * 10)
        throw std::invalid_argument("rotation matrix is not orthonormal");
    if (std::abs(rot.determinant() - 1.0) > tol * 10)
        throw std::invalid_argument("rotation matrix determinant is not +1");
}

/// Uniform planar array in its own coordinate system: m_rows x m_cols
/// elements in the x-z plane with spacing d, centered on the origin.
struct RisGeometry {
    int m_rows = 1;  // M_r, row index runs fastest
    int m_cols = 1;  // M_c
    double spacing = 0.005;
    Mat3 rotation = Mat3::Identity();  // R, global -> array
    Vec3 origin = Vec3::Zero();        // p_r in global coordinates

    int element_count() const { return m_rows * m_cols; }

    void validate() const {
        if (m_rows < 1 || m_cols < 1) throw std::invalid_argument("RIS dimensions must be >= 1");
        if (!(spacing > 0.0)) throw std::invalid_argument("RIS element spacing must be > 0");
        validate_rotation(rotation);
    }
};

inline constexpr double kCoincidentEps = 1e-9;  // meters

/// Wavenumber vector of a plane wave departing at angle psi:
/// -(2pi/lambda) [sin el cos az, sin el sin az, cos el].
inline Vec3 wavenumber(const Angles& psi, double lambda) {
    if (!(lambda > 0.0)) throw std::invalid_argument("wavelength must be > 0");
    const double se = std::sin(psi.el), ce = std::cos(psi.el);
    return -(2.0 * kPi / lambda) * Vec3(se * std::cos(psi.az), se * std::sin(psi.az), ce);
}

/// AOD from the array origin to point p, in array coordinates.
/// On-axis points (sin el == 0) get az = 0 with the degeneracy flagged.
inline Angles aod_from_position(const Vec3& p, const RisGeometry& ris) {
    const Vec3 diff = p - ris.origin;
    const double dist = diff.norm();
    if (dist < kCoincidentEps)
        throw std::invalid_argument("point coincides with the RIS origin");
    const Vec3 s = ris.rotation * diff;
    Angles out;
    out.el = std::acos(std::clamp(s.z() / dist, -1.0, 1.0));
    const double s12 = std::hypot(s.x(), s.y());
    if (s12 < kCoincidentEps) {
        out.az = 0.0;
        out.degenerate_azimuth = true;
    } else {
        out.az = std::atan2(s.y(), s.x());
    }
    return out;
}

/// Element positions in array coordinates, column-major (row index
/// fastest): index = l + m * m_rows. The layout is centered, so the
/// mean position is zero.
inline std::vector<Vec3> element_positions(const RisGeometry& ris) {
    ris.validate();
    std::vector<Vec3> q;
    q.reserve(static_cast<size_t>(ris.element_count()));
    const double d = ris.spacing;
    const double off_r = d * (ris.m_rows - 1) / 2.0;
    const double off_c = d * (ris.m_cols - 1) / 2.0;
    for (int m = 0; m < ris.m_cols; ++m)
        for (int l = 0; l < ris.m_rows; ++l)
            q.emplace_back(d * l - off_r, 0.0, d * m - off_c);
    return q;
}

/// Per-row steering factor a_r(psi): exp(-j k1 d l) with the centering
/// phase beta_r = k1 (M_r - 1) d / 2 folded in.
inline Eigen::VectorXcd steering_row_factor(const Angles& psi, const RisGeometry& ris,
                                            double lambda) {
    const double k1 = wavenumber(psi, lambda).x();
    const double beta_r = k1 * (ris.m_rows - 1) * ris.spacing / 2.0;
    Eigen::VectorXcd a(ris.m_rows);
    for (int l = 0; l < ris.m_rows; ++l)
        a(l) = std::polar(1.0, beta_r - k1 * ris.spacing * l);
    return a;
}

/// Per-column steering factor a_c(psi), same structure along k3.
inline Eigen::VectorXcd steering_col_factor(const Angles& psi, const RisGeometry& ris,
                                            double lambda) {
    const double k3 = wavenumber(psi, lambda).z();
    const double beta_c = k3 * (ris.m_cols - 1) * ris.spacing / 2.0;
    Eigen::VectorXcd a(ris.m_cols);
    for (int m = 0; m < ris.m_cols; ++m)
        a(m) = std::polar(1.0, beta_c - k3 * ris.spacing * m);
    return a;
}

/// Full response vector a(psi) = a_c(psi) kron a_r(psi); entry for
/// element (l, m) is exp(-j k(psi) . q_{l,m}) with centered q, ordering
/// matching element_positions.
inline Eigen::VectorXcd steering_vector(const Angles& psi, const RisGeometry& ris,
                                        double lambda) {
    const Eigen::VectorXcd ar = steering_row_factor(psi, ris, lambda);
    const Eigen::VectorXcd ac = steering_col_factor(psi, ris, lambda);
    Eigen::VectorXcd a(ris.element_count());
    for (int m = 0; m < ris.m_cols; ++m)
        a.segment(static_cast<Eigen::Index>(m) * ris.m_rows, ris.m_rows) = ac(m) * ar;
    return a;
}

}  // namespace risloc
