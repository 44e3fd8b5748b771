#include "boxfit/types.hpp"

#include <cmath>

#include "boxfit/errors.hpp"

namespace boxfit {

bool Pose::valid(double tol) const {
    const Mat3 gram = rotation.transpose() * rotation;
    if ((gram - Mat3::Identity()).cwiseAbs().maxCoeff() > tol) return false;
    if (std::abs(rotation.determinant() - 1.0) > tol) return false;
    return translation.allFinite();
}

Pose compose(const Pose& a, const Pose& b) {
    Pose out;
    out.rotation = a.rotation * b.rotation;
    out.translation = a.rotation * b.translation + a.translation;
    return out;
}

bool ScaleVec::valid() const {
    return sx > 0.0 && sy > 0.0 && sz > 0.0 && std::isfinite(sx) &&
           std::isfinite(sy) && std::isfinite(sz);
}

BoxDims scaled_template(const ScaleVec& s) {
    if (!s.valid()) throw InvalidArgument("scaled_template: non-positive scale");
    return BoxDims{s.sx, s.sy, s.sz};
}

ScaleVec scale_of(const BoxDims& d) { return ScaleVec{d.dx, d.dy, d.dz}; }

size_t InstanceMask::count(int instance) const {
    size_t n = 0;
    for (std::uint8_t v : data) {
        if (instance == 0 ? v != 0 : v == instance) ++n;
    }
    return n;
}

}  // namespace boxfit
