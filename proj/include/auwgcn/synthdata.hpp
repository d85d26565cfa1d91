#pragma once

#include <cstdint>

#include "auwgcn/au_prior.hpp"
#include "auwgcn/feature_io.hpp"

namespace auwgcn {

// Labeled synthetic data: Gaussian background flow with triangular motion
// bumps planted in the ROIs of each instance's AU template.
struct SynthConfig {
    int subjects = 4;
    int videos_per_subject = 2;
    double fps = 30.0;
    double video_seconds = 60.0;
    double macro_rate = 3.0;  // expected instances per video
    double micro_rate = 2.0;
    double noise_sigma = 0.1;
    double signal_amp = 0.5;  // peak planted flow magnitude
    double gap_seconds = 0.5;  // minimum spacing between planted instances
    std::uint64_t seed = 1;

    void validate() const;  // throws std::invalid_argument
};

Dataset generate_dataset(const SynthConfig& cfg);
Dataset generate_dataset(const SynthConfig& cfg, const AuRoiMap& map);

}  // namespace auwgcn
