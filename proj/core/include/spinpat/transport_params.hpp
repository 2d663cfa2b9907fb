#pragma once

namespace spinpat {

struct ChannelParams {
    double length{212.5e-9};
    double width{50e-9};
    double thickness{100e-9};
    double aspect_ratio{2.0};
    double dx{10e-9};
    double conductivity{41.549e6};  // S/m
    double diffusion{0.014};  // m^2/s
    double mobility{0.003};  // m^2/(V*s)
    double spin_relaxation{10.939e-12};  // s

    double area() const { return width * thickness; }
    void validate() const;
};

struct InterfaceParams {
    double g_up{0.375};  // S
    double g_down{0.125};  // S
    double re_mix{3.4375};  // S
    double im_mix{9.37e-3};  // S

    double total() const { return g_up + g_down; }
    double polarization() const { return (g_up - g_down) / (g_up + g_down); }
    void validate() const;
};

struct SizeEffectParams {
    double specularity{0.0};
    double reflectivity{0.2};
    double grain_size{50e-9};
    double mean_free_path{39e-9};  // bulk Cu

    void validate() const;
};

}  // namespace spinpat
