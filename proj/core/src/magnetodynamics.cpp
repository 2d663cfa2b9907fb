#include "spinpat/magnetodynamics.hpp"

#include <cmath>
#include <numbers>

#include "spinpat/errors.hpp"
#include "spinpat/trace.hpp"

namespace spinpat {

void MagnetGeometry::validate() const {
    if (!(length > 0.0) || !(width > 0.0) || !(height > 0.0)) {
        throw Error(ErrorKind::InvalidParameter, "magnet dimensions must be positive");
    }
}

void MagnetMaterial::validate() const {
    if (!(damping > 0.0) || !(gyromagnetic_ratio > 0.0) || !(saturation_magnetization > 0.0) ||
        !(spin_count > 0.0) || !(anisotropy_density > 0.0)) {
        throw Error(ErrorKind::InvalidParameter, "magnet material parameters must be positive");
    }
    if (!(torque_efficiency > 0.0)) {
        throw Error(ErrorKind::InvalidParameter, "torque efficiency must be positive");
    }
}

double barrier_energy(const MagnetMaterial& material, const MagnetGeometry& geometry) {
    return material.anisotropy_density * geometry.volume();
}

ThermalEnvironment make_thermal_environment(const MagnetMaterial& material,
                                            const MagnetGeometry& geometry, double temperature,
                                            const PhysicalConstants& constants,
                                            std::uint64_t seed) {
    return {temperature, constants.boltzmann, barrier_energy(material, geometry), seed};
}

double thermal_cone_angle(const ThermalEnvironment& env) {
    if (!(env.barrier_energy > 0.0)) {
        throw Error(ErrorKind::InvalidParameter, "barrier energy must be positive");
    }
    if (env.temperature < 0.0) {
        throw Error(ErrorKind::InvalidParameter, "temperature must be non-negative");
    }
    return std::sqrt(env.boltzmann * env.temperature / env.barrier_energy);
}

double analytic_switching_delay(const SwitchingModel& model) {
    if (!(model.overdrive > 1.0)) {
        throw Error(ErrorKind::NoSwitching, "overdrive must exceed 1");
    }
    if (!(model.theta0 > 0.0) || !(model.theta0 <= std::numbers::pi)) {
        throw Error(ErrorKind::InvalidParameter, "theta0 must lie in (0, pi]");
    }
    return model.tau0 * std::log(std::numbers::pi / model.theta0) / (model.overdrive - 1.0);
}

Vec3 tilted_state(int easy_sign, double angle, double azimuth) {
    const double s = easy_sign >= 0 ? 1.0 : -1.0;
    return {s * std::cos(angle), std::sin(angle) * std::cos(azimuth),
            std::sin(angle) * std::sin(azimuth)};
}

Vec3 sample_initial_tilt(int easy_sign, double theta0, Rng& rng) {
    const double azimuth = rng.uniform() < 0.5 ? 0.0 : std::numbers::pi;
    if (theta0 <= 0.0) return tilted_state(easy_sign, 0.0, azimuth);
    double angle = 0.0;
    do {
        angle = std::abs(theta0 * rng.normal());
    } while (!(angle > 0.0) || angle >= 0.5 * std::numbers::pi);
    return tilted_state(easy_sign, angle, azimuth);
}

double anisotropy_field(const MagnetMaterial& material, const PhysicalConstants& constants) {
    return 2.0 * material.anisotropy_density /
           (constants.vacuum_permeability * material.saturation_magnetization);
}

double critical_spin_current(const MagnetMaterial& material, const MagnetGeometry& /*geometry*/,
                             const PhysicalConstants& constants) {
    const Vec3 n = material.demag_factors;
    const double hk = anisotropy_field(material, constants);
    const double stiffness =
        hk + 0.5 * material.saturation_magnetization * (n.y + n.z - 2.0 * n.x);
    return constants.elementary_charge * material.spin_count * material.damping *
           material.gyromagnetic_ratio * constants.vacuum_permeability * stiffness /
           material.torque_efficiency;
}

MagnetModel::MagnetModel(const MagnetMaterial& material, const MagnetGeometry& geometry,
                         const PhysicalConstants& constants)
    : material_(material), geometry_(geometry), constants_(constants) {
    material_.validate();
    geometry_.validate();
    mu0_hk_ = constants.vacuum_permeability * anisotropy_field(material, constants);
    mu0_ms_ = constants.vacuum_permeability * material.saturation_magnetization;
    torque_scale_ =
        material.torque_efficiency / (constants.elementary_charge * material.spin_count);
    precession_scale_ = 1.0 / (1.0 + material.damping * material.damping);
}

Vec3 MagnetModel::effective_field(const Vec3& m) const {
    const Vec3& n = material_.demag_factors;
    return {mu0_hk_ * m.x - mu0_ms_ * n.x * m.x, -mu0_ms_ * n.y * m.y, -mu0_ms_ * n.z * m.z};
}

Vec3 MagnetModel::rhs(const Vec3& m, const Vec3& thermal_field, const Vec3& spin_current) const {
    const double alpha = material_.damping;
    const double gamma = material_.gyromagnetic_ratio;
    const Vec3 b = effective_field(m) + thermal_field;
    const Vec3 mxb = cross(m, b);
    const Vec3 torque = cross(m, cross(spin_current, m)) * torque_scale_;
    const Vec3 d = mxb * (-gamma) - cross(m, mxb) * (alpha * gamma) + torque +
                   cross(m, torque) * alpha;
    return d * precession_scale_;
}

double MagnetModel::thermal_sigma(double temperature, double dt) const {
    if (temperature <= 0.0) return 0.0;
    return std::sqrt(2.0 * material_.damping * constants_.boltzmann * temperature *
                     constants_.vacuum_permeability /
                     (material_.gyromagnetic_ratio * material_.saturation_magnetization *
                      geometry_.volume() * dt));
}

Vec3 llg_step(const Vec3& m, const MagnetModel& model, const Vec3& spin_current, double dt,
              const Vec3& thermal_field, double dt_max) {
    if (!(dt > 0.0)) throw Error(ErrorKind::InvalidParameter, "dt must be positive");
    if (dt > dt_max * (1.0 + 1e-12)) {
        throw Error(ErrorKind::InvalidParameter, "dt exceeds dt_max");
    }
    if (!is_finite(spin_current)) {
        throw Error(ErrorKind::InvalidInput, "spin current has non-finite components");
    }
    const Vec3 f0 = model.rhs(m, thermal_field, spin_current);
    const Vec3 predicted = normalized(m + f0 * dt);
    const Vec3 f1 = model.rhs(predicted, thermal_field, spin_current);
    return normalized(m + (f0 + f1) * (0.5 * dt));
}

Vec3 llg_step(const Vec3& m, const MagnetMaterial& material, const MagnetGeometry& geometry,
              const ThermalEnvironment& env, const Vec3& spin_current, double dt, Rng& rng,
              const PhysicalConstants& constants, double dt_max) {
    const MagnetModel model(material, geometry, constants);
    Vec3 field{};
    if (env.temperature > 0.0 && dt > 0.0) {
        const double sigma = model.thermal_sigma(env.temperature, dt);
        field = {sigma * rng.normal(), sigma * rng.normal(), sigma * rng.normal()};
    }
    return llg_step(m, model, spin_current, dt, field, dt_max);
}

std::optional<double> detect_switching(const SimulationTrace& trace, const std::string& magnet_id,
                                       double settle) {
    const auto& series = trace.series_of(magnet_id);
    const auto& times = trace.times;
    int initial = 0;
    int sign = 0;
    std::size_t last_nonzero = 0;
    std::optional<double> candidate;
    int candidate_sign = 0;
    for (std::size_t i = 0; i < series.size(); ++i) {
        const double x = series[i].x;
        const int s = x > 0.0 ? 1 : (x < 0.0 ? -1 : 0);
        if (s == 0) continue;
        if (initial == 0) initial = s;
        if (sign != 0 && s != sign) {
            if (s == initial) {
                candidate.reset();
            } else {
                const double x0 = series[last_nonzero].x;
                const double t0 = times[last_nonzero];
                const double frac = x0 / (x0 - x);
                candidate = t0 + frac * (times[i] - t0);
                candidate_sign = s;
            }
        }
        sign = s;
        last_nonzero = i;
        if (candidate && s == candidate_sign && std::abs(x) >= settle) return candidate;
    }
    return std::nullopt;
}

}  // namespace spinpat
