#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "auwgcn/kind.hpp"
#include "auwgcn/tensor.hpp"

namespace auwgcn {

inline constexpr int kRoiCount = 12;
inline constexpr int kFlowChannels = 2;

// Per-frame, per-ROI mean optical-flow vectors for one video, T x 12 x 2.
struct FeatureSequence {
    std::string video_id;
    std::string subject_id;
    float fps = 0.0f;
    Tensor frames;  // T x 12 x 2

    int frame_count() const { return frames.ndim() == 3 ? frames.dim(0) : 0; }
};

// One ground-truth expression instance. Frame indices reference the feature
// sequence of the owning video; `aus` holds normalized identifiers ("AU4").
struct AnnotationInstance {
    int onset = 0;
    int apex = 0;
    int offset = 0;
    Kind kind = Kind::macro;
    std::vector<std::string> aus;  // sorted, de-duplicated
};

struct AnnotationRow {
    std::string subject_id;
    std::string video_id;
    AnnotationInstance inst;
};

struct Dataset {
    std::vector<FeatureSequence> videos;
    std::map<std::string, std::vector<AnnotationInstance>> annotations;  // video_id -> instances

    std::set<std::string> subjects() const;
    const FeatureSequence* find_video(const std::string& video_id) const;
};

enum class IoErrorKind {
    bad_magic,
    bad_version,
    truncated,
    trailing_bytes,
    non_finite,
    shape_mismatch,
    malformed,
    io_failure,
};

class IoError : public std::runtime_error {
public:
    IoError(IoErrorKind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
    IoErrorKind kind() const { return kind_; }

private:
    IoErrorKind kind_;
};

// Binary feature file, little-endian:
//   magic "AUWF", u16 version = 1, f32 fps, u32 T, u16 N = 12, u16 C = 2,
//   then T*N*C f32 values in [frame][roi][channel] order. No trailing bytes.
FeatureSequence load_features(const std::string& path);
void save_features(const FeatureSequence& seq, const std::string& path);

// "AU4", "au4 " -> "AU4"; "au12r" -> "AU12R". Throws IoError on junk.
std::string normalize_au(const std::string& raw);

// CSV with header subject_id,video_id,kind,onset,apex,offset,aus.
std::vector<AnnotationRow> load_annotations(const std::string& path);
void save_annotations(const std::vector<AnnotationRow>& rows, const std::string& path);

// Empty list iff every dataset invariant holds; violations are data, not errors.
std::vector<std::string> validate_dataset(const Dataset& ds);

// Dataset directory: videos.csv (subject_id,video_id,path), annotations.csv,
// features/<video_id>.auwf.
void save_dataset(const Dataset& ds, const std::string& dir);
Dataset load_dataset(const std::string& dir);

}  // namespace auwgcn
