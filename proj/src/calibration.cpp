#include "ionreadout/calibration.hpp"

#include "ionreadout/eval.hpp"
#include "ionreadout/features.hpp"
#include "ionreadout/threshold.hpp"

#include <cmath>
#include <string>

namespace ionreadout::sim {

SingleIonFidelity single_ion_threshold_fidelity(const EmissionModel& model, std::size_t shots_per_state,
                                                std::uint64_t seed)
{
    const auto geometry = DetectorGeometry::single_ion();
    const Dataset data = generate_dataset(geometry, model, shots_per_state, seed);
    std::vector<threshold::CountVector> counts;
    std::vector<std::size_t> labels;
    counts.reserve(data.samples.size());
    for (const auto& s : data.samples) {
        counts.push_back(features::ion_totals(s, geometry));
        labels.push_back(s.label == "1" ? 1 : 0);
    }
    const auto fixed = threshold::fit_fixed(counts, labels, 1);
    eval::ConfusionMatrix matrix(1);
    for (std::size_t k = 0; k < counts.size(); ++k) {
        matrix.add(labels[k], threshold::classify_fixed_index(fixed, counts[k]));
    }
    const auto report = eval::fidelity(matrix);
    return {report.state_fidelity[1], report.state_fidelity[0], report.average, fixed.thresholds[0]};
}

CalibrationResult calibrate_to_fidelity(double target, const EmissionModel& base, const CalibrationOptions& options)
{
    if (!(target > 0.0 && target <= 1.0)) {
        throw std::invalid_argument("calibration: target fidelity must lie in (0, 1]");
    }
    if (!(options.lower_multiplier >= 0.0 && options.upper_multiplier > options.lower_multiplier)) {
        throw std::invalid_argument("calibration: need 0 <= lower multiplier < upper multiplier");
    }
    base.validate();

    auto scaled = [&](double multiplier) {
        EmissionModel m = base;
        if (options.scale_bright_to_dark) {
            m.pump_bright_to_dark_rate *= multiplier;
        }
        if (options.scale_dark_to_bright) {
            m.pump_dark_to_bright_rate *= multiplier;
        }
        return m;
    };
    int evaluations = 0;
    auto evaluate = [&](double multiplier) {
        ++evaluations;
        return single_ion_threshold_fidelity(scaled(multiplier), options.shots_per_state, options.seed);
    };
    auto done = [&](const SingleIonFidelity& f) { return std::abs(f.average - target) <= options.tolerance; };

    double lo = options.lower_multiplier;
    double hi = options.upper_multiplier;
    const SingleIonFidelity at_lo = evaluate(lo);
    if (done(at_lo)) {
        return {scaled(lo), lo, at_lo, evaluations};
    }
    const SingleIonFidelity at_hi = evaluate(hi);
    if (done(at_hi)) {
        return {scaled(hi), hi, at_hi, evaluations};
    }
    // Fidelity falls as the pump rates grow.
    if (target > at_lo.average || target < at_hi.average) {
        throw CalibrationError("calibration: target " + std::to_string(target) + " outside the bracket [" +
                               std::to_string(at_hi.average) + ", " + std::to_string(at_lo.average) + "]");
    }
    while (evaluations < options.max_iterations) {
        const double mid = 0.5 * (lo + hi);
        const SingleIonFidelity f = evaluate(mid);
        if (done(f)) {
            return {scaled(mid), mid, f, evaluations};
        }
        if (f.average > target) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    throw CalibrationError("calibration: no convergence after " + std::to_string(options.max_iterations) +
                           " evaluations (bracket [" + std::to_string(lo) + ", " + std::to_string(hi) + "])");
}

}  // namespace ionreadout::sim
