#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "auwgcn/feature_io.hpp"
#include "auwgcn/tensor.hpp"

namespace auwgcn {

// AU identifier stem ("AU4") -> facial ROI indices in [0, 11]. Side-coded
// identifiers ("AU12R") fall back to the numeric stem on lookup.
struct AuRoiMap {
    std::map<std::string, std::vector<int>> entries;

    // nullptr when neither the identifier nor its stem is mapped
    const std::vector<int>* lookup(const std::string& au) const;
    void validate() const;
};

AuRoiMap default_au_roi_map();

// Config format: one `AU<k>: roi,roi,...` line per AU, `#` comments.
AuRoiMap load_au_roi_map(const std::string& path);
void save_au_roi_map(const AuRoiMap& map, const std::string& path);

// 12x12 co-occurrence counts, row-major.
using CountMatrix = std::array<std::int64_t, kRoiCount * kRoiCount>;

// For every instance and every ordered pair (U_i, U_j) of its AU set
// (including U_i = U_j), increments raw[a][b] for all a in f(U_i),
// b in f(U_j). AUs absent from the map are skipped; their identifiers are
// appended to `warnings` when given.
CountMatrix count_cooccurrence(const std::vector<AnnotationInstance>& annotations,
                               const AuRoiMap& map,
                               std::vector<std::string>* warnings = nullptr);

// Symmetric degree normalization with self-loops:
// A_hat = D^{-1/2} (raw + I) D^{-1/2}, D the degree matrix of raw + I.
Tensor normalize_adjacency(const CountMatrix& raw);

struct AdjacencyMatrix {
    CountMatrix raw{};
    Tensor normalized;  // 12 x 12
};

AdjacencyMatrix build_adjacency(const std::vector<AnnotationInstance>& annotations,
                                const AuRoiMap& map,
                                std::vector<std::string>* warnings = nullptr);

// Flat mixing baseline for the prior-vs-uniform comparison: every entry 1/12.
Tensor uniform_adjacency();

}  // namespace auwgcn
