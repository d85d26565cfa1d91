#include "auwgcn/au_prior.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace auwgcn {

static std::string au_stem(const std::string& au) {
    std::size_t end = 2;
    while (end < au.size() && std::isdigit(static_cast<unsigned char>(au[end]))) ++end;
    return au.substr(0, end);
}

const std::vector<int>* AuRoiMap::lookup(const std::string& au) const {
    auto it = entries.find(au);
    if (it == entries.end()) it = entries.find(au_stem(au));
    return it == entries.end() ? nullptr : &it->second;
}

void AuRoiMap::validate() const {
    for (const auto& [au, rois] : entries) {
        if (rois.empty()) throw std::invalid_argument(au + " maps to no ROI");
        for (int r : rois) {
            if (r < 0 || r >= kRoiCount) {
                throw std::invalid_argument(au + " maps to out-of-range ROI " + std::to_string(r));
            }
        }
    }
}

// ROI layout: 0,1 inner brows; 2,3 outer brows; 4 glabella; 5,6 cheeks;
// 7,8 lower eyelids; 9 nose root / upper-lip raiser region; 10,11 mouth corners.
AuRoiMap default_au_roi_map() {
    AuRoiMap map;
    map.entries = {
        {"AU1", {0, 1}},
        {"AU2", {2, 3}},
        {"AU4", {0, 1, 4}},
        {"AU6", {5, 6}},
        {"AU7", {7, 8}},
        {"AU9", {4, 9}},
        {"AU10", {9}},
        {"AU12", {10, 11}},
        {"AU14", {10, 11}},
        {"AU15", {10, 11}},
        {"AU17", {10, 11}},
    };
    return map;
}

AuRoiMap load_au_roi_map(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError(IoErrorKind::io_failure, "cannot open " + path);
    AuRoiMap map;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        std::string stripped;
        for (char c : line) {
            if (!std::isspace(static_cast<unsigned char>(c))) stripped.push_back(c);
        }
        if (stripped.empty()) continue;
        const auto colon = stripped.find(':');
        const std::string ctx = path + ":" + std::to_string(lineno);
        if (colon == std::string::npos) throw IoError(IoErrorKind::malformed, ctx + ": expected 'AU<k>: rois'");
        const std::string au = normalize_au(stripped.substr(0, colon));
        std::vector<int> rois;
        std::stringstream ss(stripped.substr(colon + 1));
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            if (tok.empty()) continue;
            try {
                rois.push_back(std::stoi(tok));
            } catch (const std::exception&) {
                throw IoError(IoErrorKind::malformed, ctx + ": bad ROI index '" + tok + "'");
            }
        }
        if (map.entries.count(au)) throw IoError(IoErrorKind::malformed, ctx + ": duplicate entry " + au);
        map.entries[au] = std::move(rois);
    }
    try {
        map.validate();
    } catch (const std::invalid_argument& e) {
        throw IoError(IoErrorKind::malformed, path + ": " + e.what());
    }
    return map;
}

void save_au_roi_map(const AuRoiMap& map, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError(IoErrorKind::io_failure, "cannot open " + path + " for writing");
    for (const auto& [au, rois] : map.entries) {
        out << au << ": ";
        for (std::size_t i = 0; i < rois.size(); ++i) {
            if (i) out << ',';
            out << rois[i];
        }
        out << "\n";
    }
}

CountMatrix count_cooccurrence(const std::vector<AnnotationInstance>& annotations,
                               const AuRoiMap& map,
                               std::vector<std::string>* warnings) {
    map.validate();
    CountMatrix raw{};
    std::set<std::string> unknown;
    for (const auto& inst : annotations) {
        // per-instance ROI hit counts; the pair sum factorizes into an outer product
        std::array<std::int64_t, kRoiCount> hits{};
        for (const auto& au : inst.aus) {
            const std::vector<int>* rois = map.lookup(au);
            if (!rois) {
                unknown.insert(au);
                continue;
            }
            for (int r : *rois) hits[static_cast<std::size_t>(r)] += 1;
        }
        for (int a = 0; a < kRoiCount; ++a) {
            if (hits[a] == 0) continue;
            for (int b = 0; b < kRoiCount; ++b) {
                raw[static_cast<std::size_t>(a) * kRoiCount + b] += hits[a] * hits[b];
            }
        }
    }
    if (warnings) {
        for (const auto& au : unknown) warnings->push_back("unmapped AU skipped: " + au);
    }
    return raw;
}

Tensor normalize_adjacency(const CountMatrix& raw) {
    for (int i = 0; i < kRoiCount; ++i) {
        for (int j = 0; j < kRoiCount; ++j) {
            const auto v = raw[static_cast<std::size_t>(i) * kRoiCount + j];
            if (v < 0) throw std::invalid_argument("raw adjacency counts must be nonnegative");
            if (v != raw[static_cast<std::size_t>(j) * kRoiCount + i]) {
                throw std::invalid_argument("raw adjacency counts must be symmetric");
            }
        }
    }
    std::array<double, kRoiCount> inv_sqrt_deg{};
    for (int i = 0; i < kRoiCount; ++i) {
        double deg = 1.0;  // self-loop
        for (int j = 0; j < kRoiCount; ++j) deg += static_cast<double>(raw[static_cast<std::size_t>(i) * kRoiCount + j]);
        inv_sqrt_deg[i] = 1.0 / std::sqrt(deg);
    }
    Tensor out({kRoiCount, kRoiCount});
    for (int i = 0; i < kRoiCount; ++i) {
        for (int j = i; j < kRoiCount; ++j) {
            double v = static_cast<double>(raw[static_cast<std::size_t>(i) * kRoiCount + j]);
            if (i == j) v += 1.0;
            const float nv = static_cast<float>(v * inv_sqrt_deg[i] * inv_sqrt_deg[j]);
            out(i, j) = nv;
            out(j, i) = nv;
        }
    }
    check_finite(out, "normalize_adjacency");
    return out;
}

AdjacencyMatrix build_adjacency(const std::vector<AnnotationInstance>& annotations,
                                const AuRoiMap& map,
                                std::vector<std::string>* warnings) {
    AdjacencyMatrix adj;
    adj.raw = count_cooccurrence(annotations, map, warnings);
    adj.normalized = normalize_adjacency(adj.raw);
    return adj;
}

Tensor uniform_adjacency() {
    Tensor out({kRoiCount, kRoiCount});
    out.fill(1.0f / kRoiCount);
    return out;
}

}  // namespace auwgcn
