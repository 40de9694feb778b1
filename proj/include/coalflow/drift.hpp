// Drift coefficients a : R -> R, restricted to a registry of closed-form
// families so that sup-norm and Lipschitz constants are exact, not estimated.
#pragma once

#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace coalflow {

enum class DriftFamily { zero, constant, tanh_wave, sine };

struct DriftSpec {
    DriftFamily family = DriftFamily::zero;
    double amplitude = 0.0; // A
    double scale = 1.0;     // tanh slope scale
    double frequency = 1.0; // sine angular frequency
    double phase = 0.0;     // sine phase shift

    double operator()(double x) const {
        switch (family) {
        case DriftFamily::zero: return 0.0;
        case DriftFamily::constant: return amplitude;
        case DriftFamily::tanh_wave: return amplitude * std::tanh(x / scale);
        case DriftFamily::sine: return amplitude * std::sin(frequency * x + phase);
        }
        return 0.0;
    }

    // exact sup |a|
    double sup_norm() const {
        switch (family) {
        case DriftFamily::zero: return 0.0;
        default: return std::abs(amplitude);
        }
    }

    // exact Lipschitz constant
    double lipschitz() const {
        switch (family) {
        case DriftFamily::zero: return 0.0;
        case DriftFamily::constant: return 0.0;
        case DriftFamily::tanh_wave: return std::abs(amplitude) / scale;
        case DriftFamily::sine: return std::abs(amplitude * frequency);
        }
        return 0.0;
    }

    bool is_zero() const { return family == DriftFamily::zero || amplitude == 0.0; }

    std::string name() const {
        switch (family) {
        case DriftFamily::zero: return "zero";
        case DriftFamily::constant: return "constant";
        case DriftFamily::tanh_wave: return "tanh";
        case DriftFamily::sine: return "sine";
        }
        return "zero";
    }

    static DriftSpec zero() { return {}; }

    static DriftSpec constant(double level) {
        DriftSpec d;
        d.family = DriftFamily::constant;
        d.amplitude = level;
        return d;
    }

    static DriftSpec tanh_wave(double amplitude, double scale = 1.0) {
        if (!(scale > 0.0))
            throw std::invalid_argument("DriftSpec::tanh_wave: scale must be positive");
        DriftSpec d;
        d.family = DriftFamily::tanh_wave;
        d.amplitude = amplitude;
        d.scale = scale;
        return d;
    }

    static DriftSpec sine(double amplitude, double frequency = 1.0, double phase = 0.0) {
        DriftSpec d;
        d.family = DriftFamily::sine;
        d.amplitude = amplitude;
        d.frequency = frequency;
        d.phase = phase;
        return d;
    }

    // parse "zero" | "constant:c" | "tanh:A[,scale]" | "sine:A[,freq[,phase]]"
    static DriftSpec parse(const std::string& text);
};

} // namespace coalflow
