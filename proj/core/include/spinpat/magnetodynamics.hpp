#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "spinpat/rng.hpp"
#include "spinpat/vec3.hpp"

namespace spinpat {

struct SimulationTrace;

struct PhysicalConstants {
    double elementary_charge{1.602176634e-19};  // C
    double vacuum_permeability{1.25663706212e-6};  // T*m/A
    double boltzmann{1.380649e-23};  // J/K
};

struct MagnetGeometry {
    double length{75e-9};  // along the easy axis X
    double width{25e-9};
    double height{3e-9};

    double volume() const { return length * width * height; }
    double footprint() const { return length * width; }
    void validate() const;
};

struct MagnetMaterial {
    double damping{0.0021};
    double gyromagnetic_ratio{1.76e11};  // 1/(s*T)
    double saturation_magnetization{1.45e6};  // A/m
    double spin_count{1.34e6};
    double anisotropy_density{0.5e5};  // J/m^3
    // Thin-film demagnetizing factors; the default is a pure easy-plane penalty.
    Vec3 demag_factors{0.0, 0.0, 1.0};
    // Multiplies the spin-transfer torque; calibrated against the reference delay.
    double torque_efficiency{1.0};

    void validate() const;
};

using MagnetizationState = Vec3;

struct ThermalEnvironment {
    double temperature{300.0};
    double boltzmann{1.380649e-23};
    double barrier_energy{0.0};
    std::uint64_t seed{0};
};

struct SwitchingModel {
    double tau0{0.0};
    double theta0{0.0};
    double overdrive{0.0};
};

double barrier_energy(const MagnetMaterial& material, const MagnetGeometry& geometry);

ThermalEnvironment make_thermal_environment(const MagnetMaterial& material,
                                            const MagnetGeometry& geometry, double temperature,
                                            const PhysicalConstants& constants,
                                            std::uint64_t seed = 0);

double thermal_cone_angle(const ThermalEnvironment& env);

double analytic_switching_delay(const SwitchingModel& model);

// Polar angle |N(0, theta0^2)| truncated to (0, pi/2), tilted toward +Y or -Y with equal odds.
// Out-of-plane tilts are left out: with the thin-film demagnetizing field they would start the
// magnet above the in-plane barrier.
Vec3 sample_initial_tilt(int easy_sign, double theta0, Rng& rng);

// Deterministic tilt of `angle` about +/-X at the given azimuth.
Vec3 tilted_state(int easy_sign, double angle, double azimuth);

// Anisotropy field Hk in A/m.
double anisotropy_field(const MagnetMaterial& material, const PhysicalConstants& constants);

// Spin current magnitude (A) at which anti-damping cancels damping about the easy axis.
double critical_spin_current(const MagnetMaterial& material, const MagnetGeometry& geometry,
                             const PhysicalConstants& constants);

class MagnetModel {
public:
    MagnetModel() = default;
    MagnetModel(const MagnetMaterial& material, const MagnetGeometry& geometry,
                const PhysicalConstants& constants = {});

    const MagnetMaterial& material() const { return material_; }
    const MagnetGeometry& geometry() const { return geometry_; }
    const PhysicalConstants& constants() const { return constants_; }

    // Anisotropy plus demagnetizing field in tesla.
    Vec3 effective_field(const Vec3& m) const;

    // dm/dt for a given thermal field (T) and spin current delivered to the magnet (A).
    Vec3 rhs(const Vec3& m, const Vec3& thermal_field, const Vec3& spin_current) const;

    // Standard deviation (T) of each thermal-field component for a step of length dt.
    double thermal_sigma(double temperature, double dt) const;

    double barrier() const { return barrier_energy(material_, geometry_); }

private:
    MagnetMaterial material_{};
    MagnetGeometry geometry_{};
    PhysicalConstants constants_{};
    double mu0_hk_{0.0};
    double mu0_ms_{0.0};
    double torque_scale_{0.0};
    double precession_scale_{0.0};
};

inline constexpr double kDefaultDtMax = 0.1e-12;

// One Heun step with the spin current held fixed; the thermal field is held over the step.
Vec3 llg_step(const Vec3& m, const MagnetModel& model, const Vec3& spin_current, double dt,
              const Vec3& thermal_field = {}, double dt_max = kDefaultDtMax);

Vec3 llg_step(const Vec3& m, const MagnetMaterial& material, const MagnetGeometry& geometry,
              const ThermalEnvironment& env, const Vec3& spin_current, double dt, Rng& rng,
              const PhysicalConstants& constants = {}, double dt_max = kDefaultDtMax);

std::optional<double> detect_switching(const SimulationTrace& trace, const std::string& magnet_id,
                                       double settle = 0.9);

}  // namespace spinpat
