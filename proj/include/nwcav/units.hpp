#pragma once

namespace nwcav {

// SI base constants (CODATA exact values where defined).
inline constexpr double c0      = 2.99792458e8;        // vacuum speed of light, m/s
inline constexpr double mu0     = 1.25663706212e-6;    // vacuum permeability, H/m
inline constexpr double eps0    = 8.8541878128e-12;    // vacuum permittivity, F/m
inline constexpr double eta0    = 376.730313668;       // vacuum impedance, ohm
inline constexpr double pi      = 3.14159265358979323846;

inline constexpr double nm      = 1e-9;                // metre per nanometre
inline constexpr double THz     = 1e12;

// Angular frequency of a vacuum wavelength given in metres.
inline constexpr double omega_of_wavelength(double lambda_m) {
    return 2.0 * pi * c0 / lambda_m;
}

inline constexpr double wavelength_of_omega(double omega) {
    return 2.0 * pi * c0 / omega;
}

} // namespace nwcav
