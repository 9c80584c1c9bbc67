#pragma once

#include "ionreadout/readout_sim.hpp"

#include <cstddef>
#include <cstdint>
#include <stdexcept>

namespace ionreadout::sim {

struct SingleIonFidelity {
    double bright = 0.0;   // p(measured 1 | prepared 1)
    double dark = 0.0;     // p(measured 0 | prepared 0)
    double average = 0.0;
    int threshold = 0;
};

/// Simulates `shots_per_state` single-ion shots per state, fits a fixed
/// threshold on them and reports the resulting fidelities.
SingleIonFidelity single_ion_threshold_fidelity(const EmissionModel& model, std::size_t shots_per_state,
                                                std::uint64_t seed);

struct CalibrationOptions {
    double lower_multiplier = 0.0;
    double upper_multiplier = 20.0;
    int max_iterations = 60;
    /// Accept once |fidelity - target| is at most this.
    double tolerance = 2.5e-4;
    std::size_t shots_per_state = 100000;
    std::uint64_t seed = 1;
    bool scale_bright_to_dark = true;
    bool scale_dark_to_bright = true;
};

struct CalibrationResult {
    EmissionModel model;
    double multiplier = 1.0;
    SingleIonFidelity fidelity;
    int iterations = 0;
};

class CalibrationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bisects one multiplier applied to the selected pump rates of `base` until
/// the single-ion fixed-threshold average fidelity hits `target`. The ratio
/// between the pump rates stays fixed. Every evaluation reuses the same seed.
/// Throws CalibrationError if the target is outside the search bracket or the
/// iteration cap is reached.
CalibrationResult calibrate_to_fidelity(double target, const EmissionModel& base,
                                        const CalibrationOptions& options = {});

}  // namespace ionreadout::sim
