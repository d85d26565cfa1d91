#include "auwgcn/feature_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "auwgcn/binio.hpp"

namespace auwgcn {

namespace fs = std::filesystem;
using binio::put_le;
using binio::put_f32;

static constexpr char kFeatureMagic[4] = {'A', 'U', 'W', 'F'};
static constexpr std::uint16_t kFeatureVersion = 1;

FeatureSequence load_features(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(IoErrorKind::io_failure, "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    const std::string buf = ss.str();

    binio::Reader r(buf, path);
    r.need(4);
    if (std::memcmp(buf.data(), kFeatureMagic, 4) != 0) {
        throw IoError(IoErrorKind::bad_magic, path + ": bad magic");
    }
    r.skip(4);
    const auto version = r.get_le<std::uint16_t>();
    if (version != kFeatureVersion) {
        throw IoError(IoErrorKind::bad_version, path + ": unsupported version " + std::to_string(version));
    }
    const float fps = r.get_f32();
    const auto T = r.get_le<std::uint32_t>();
    const auto N = r.get_le<std::uint16_t>();
    const auto C = r.get_le<std::uint16_t>();
    if (N != kRoiCount || C != kFlowChannels || T < 1) {
        throw IoError(IoErrorKind::shape_mismatch,
                      path + ": shape (" + std::to_string(T) + "," + std::to_string(N) + "," +
                          std::to_string(C) + ") does not match (T>=1,12,2)");
    }
    if (!(fps > 0.0f) || !std::isfinite(fps)) {
        throw IoError(IoErrorKind::malformed, path + ": fps must be positive");
    }
    const std::size_t count = static_cast<std::size_t>(T) * N * C;
    r.need(count * 4);

    FeatureSequence seq;
    seq.fps = fps;
    seq.frames = Tensor({static_cast<int>(T), kRoiCount, kFlowChannels});
    for (std::size_t i = 0; i < count; ++i) {
        const float v = r.get_f32();
        if (!std::isfinite(v)) {
            throw IoError(IoErrorKind::non_finite, path + ": non-finite feature value at index " + std::to_string(i));
        }
        seq.frames.data[i] = v;
    }
    if (r.remaining() != 0) {
        throw IoError(IoErrorKind::trailing_bytes,
                      path + ": " + std::to_string(r.remaining()) + " trailing bytes");
    }
    return seq;
}

void save_features(const FeatureSequence& seq, const std::string& path) {
    if (seq.frames.ndim() != 3 || seq.frames.dim(1) != kRoiCount || seq.frames.dim(2) != kFlowChannels) {
        throw IoError(IoErrorKind::shape_mismatch, "feature tensor must be T x 12 x 2");
    }
    if (!(seq.fps > 0.0f)) throw IoError(IoErrorKind::malformed, "fps must be positive");
    for (float v : seq.frames.data) {
        if (!std::isfinite(v)) throw IoError(IoErrorKind::non_finite, "non-finite feature value");
    }
    std::string buf;
    buf.reserve(18 + seq.frames.numel() * 4);
    buf.append(kFeatureMagic, 4);
    put_le(buf, kFeatureVersion);
    put_f32(buf, seq.fps);
    put_le(buf, static_cast<std::uint32_t>(seq.frames.dim(0)));
    put_le(buf, static_cast<std::uint16_t>(kRoiCount));
    put_le(buf, static_cast<std::uint16_t>(kFlowChannels));
    for (float v : seq.frames.data) put_f32(buf, v);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(IoErrorKind::io_failure, "cannot open " + path + " for writing");
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw IoError(IoErrorKind::io_failure, "write failed for " + path);
}

std::string normalize_au(const std::string& raw) {
    std::string s;
    for (char c : raw) {
        if (!std::isspace(static_cast<unsigned char>(c))) s.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    }
    // expected form: AU<digits><optional letter suffix, e.g. L/R>
    bool ok = s.size() > 2 && s[0] == 'A' && s[1] == 'U';
    std::size_t i = 2;
    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
    ok = ok && i > 2;
    while (ok && i < s.size()) {
        if (!std::isalpha(static_cast<unsigned char>(s[i]))) ok = false;
        ++i;
    }
    if (!ok) throw IoError(IoErrorKind::malformed, "malformed AU identifier: '" + raw + "'");
    return s;
}

static std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

static std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

static int parse_frame_index(const std::string& s, const std::string& ctx) {
    const std::string t = trim(s);
    if (t.empty() || !std::all_of(t.begin(), t.end(), [](unsigned char c) { return std::isdigit(c); })) {
        throw IoError(IoErrorKind::malformed, ctx + ": bad frame index '" + s + "'");
    }
    try {
        return std::stoi(t);
    } catch (const std::exception&) {
        throw IoError(IoErrorKind::malformed, ctx + ": frame index out of range '" + s + "'");
    }
}

static const char* kAnnotationHeader = "subject_id,video_id,kind,onset,apex,offset,aus";

std::vector<AnnotationRow> load_annotations(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError(IoErrorKind::io_failure, "cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw IoError(IoErrorKind::malformed, path + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line) != kAnnotationHeader) {
        throw IoError(IoErrorKind::malformed, path + ": bad header '" + line + "'");
    }
    std::vector<AnnotationRow> rows;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        const std::string ctx = path + ":" + std::to_string(lineno);
        const auto cols = split(line, ',');
        if (cols.size() != 7) {
            throw IoError(IoErrorKind::malformed, ctx + ": expected 7 columns, got " + std::to_string(cols.size()));
        }
        AnnotationRow row;
        row.subject_id = trim(cols[0]);
        row.video_id = trim(cols[1]);
        if (row.subject_id.empty() || row.video_id.empty()) {
            throw IoError(IoErrorKind::malformed, ctx + ": empty subject or video id");
        }
        try {
            row.inst.kind = kind_from_string(trim(cols[2]));
        } catch (const std::invalid_argument& e) {
            throw IoError(IoErrorKind::malformed, ctx + ": " + e.what());
        }
        row.inst.onset = parse_frame_index(cols[3], ctx);
        row.inst.apex = parse_frame_index(cols[4], ctx);
        row.inst.offset = parse_frame_index(cols[5], ctx);
        if (!(row.inst.onset <= row.inst.apex && row.inst.apex <= row.inst.offset)) {
            throw IoError(IoErrorKind::malformed, ctx + ": requires onset <= apex <= offset");
        }
        const std::string aus = trim(cols[6]);
        if (!aus.empty()) {
            for (const std::string& a : split(aus, ';')) {
                if (trim(a).empty()) continue;
                row.inst.aus.push_back(normalize_au(a));
            }
            std::sort(row.inst.aus.begin(), row.inst.aus.end());
            row.inst.aus.erase(std::unique(row.inst.aus.begin(), row.inst.aus.end()), row.inst.aus.end());
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

void save_annotations(const std::vector<AnnotationRow>& rows, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError(IoErrorKind::io_failure, "cannot open " + path + " for writing");
    out << kAnnotationHeader << "\n";
    for (const auto& row : rows) {
        out << row.subject_id << ',' << row.video_id << ',' << to_string(row.inst.kind) << ','
            << row.inst.onset << ',' << row.inst.apex << ',' << row.inst.offset << ',';
        for (std::size_t i = 0; i < row.inst.aus.size(); ++i) {
            if (i) out << ';';
            out << row.inst.aus[i];
        }
        out << "\n";
    }
    if (!out) throw IoError(IoErrorKind::io_failure, "write failed for " + path);
}

std::set<std::string> Dataset::subjects() const {
    std::set<std::string> out;
    for (const auto& v : videos) out.insert(v.subject_id);
    return out;
}

const FeatureSequence* Dataset::find_video(const std::string& video_id) const {
    for (const auto& v : videos) {
        if (v.video_id == video_id) return &v;
    }
    return nullptr;
}

std::vector<std::string> validate_dataset(const Dataset& ds) {
    std::vector<std::string> out;
    std::map<std::string, const FeatureSequence*> by_id;
    for (const auto& v : ds.videos) {
        if (by_id.count(v.video_id)) out.push_back("duplicate video_id '" + v.video_id + "'");
        by_id[v.video_id] = &v;
        if (v.subject_id.empty()) out.push_back("video '" + v.video_id + "' has empty subject_id");
        if (v.frame_count() < 1) out.push_back("video '" + v.video_id + "' has no frames");
        if (!(v.fps > 0.0f)) out.push_back("video '" + v.video_id + "' has non-positive fps");
    }
    for (const auto& [vid, instances] : ds.annotations) {
        const auto it = by_id.find(vid);
        if (it == by_id.end()) {
            out.push_back("annotation references missing video '" + vid + "'");
            continue;
        }
        const int T = it->second->frame_count();
        for (const auto& a : instances) {
            if (!(0 <= a.onset && a.onset <= a.apex && a.apex <= a.offset)) {
                out.push_back("video '" + vid + "': instance violates onset <= apex <= offset");
            }
            if (a.offset >= T) {
                out.push_back("video '" + vid + "': instance offset " + std::to_string(a.offset) +
                              " out of range (T=" + std::to_string(T) + ")");
            }
        }
        // same-kind instances must not overlap; label encoding relies on it
        for (Kind kind : {Kind::macro, Kind::micro}) {
            std::vector<std::pair<int, int>> spans;
            for (const auto& a : instances) {
                if (a.kind == kind) spans.emplace_back(a.onset, a.offset);
            }
            std::sort(spans.begin(), spans.end());
            for (std::size_t i = 1; i < spans.size(); ++i) {
                if (spans[i].first <= spans[i - 1].second) {
                    out.push_back("video '" + vid + "': overlapping " + std::string(to_string(kind)) +
                                  " instances");
                }
            }
        }
    }
    return out;
}

void save_dataset(const Dataset& ds, const std::string& dir) {
    std::error_code ec;
    fs::create_directories(fs::path(dir) / "features", ec);
    if (ec) throw IoError(IoErrorKind::io_failure, "cannot create " + dir);

    std::ofstream vcsv(fs::path(dir) / "videos.csv", std::ios::trunc);
    if (!vcsv) throw IoError(IoErrorKind::io_failure, "cannot write videos.csv in " + dir);
    vcsv << "subject_id,video_id,path\n";
    for (const auto& v : ds.videos) {
        const std::string rel = "features/" + v.video_id + ".auwf";
        save_features(v, (fs::path(dir) / rel).string());
        vcsv << v.subject_id << ',' << v.video_id << ',' << rel << "\n";
    }
    vcsv.close();

    std::vector<AnnotationRow> rows;
    for (const auto& v : ds.videos) {
        const auto it = ds.annotations.find(v.video_id);
        if (it == ds.annotations.end()) continue;
        for (const auto& inst : it->second) rows.push_back({v.subject_id, v.video_id, inst});
    }
    save_annotations(rows, (fs::path(dir) / "annotations.csv").string());
}

Dataset load_dataset(const std::string& dir) {
    std::ifstream vcsv(fs::path(dir) / "videos.csv");
    if (!vcsv) throw IoError(IoErrorKind::io_failure, "cannot open videos.csv in " + dir);
    std::string line;
    if (!std::getline(vcsv, line)) throw IoError(IoErrorKind::malformed, dir + "/videos.csv: empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line) != "subject_id,video_id,path") {
        throw IoError(IoErrorKind::malformed, dir + "/videos.csv: bad header");
    }
    Dataset ds;
    while (std::getline(vcsv, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        const auto cols = split(line, ',');
        if (cols.size() != 3) throw IoError(IoErrorKind::malformed, dir + "/videos.csv: expected 3 columns");
        FeatureSequence seq = load_features((fs::path(dir) / trim(cols[2])).string());
        seq.subject_id = trim(cols[0]);
        seq.video_id = trim(cols[1]);
        ds.videos.push_back(std::move(seq));
    }
    const auto apath = fs::path(dir) / "annotations.csv";
    if (fs::exists(apath)) {
        for (auto& row : load_annotations(apath.string())) {
            ds.annotations[row.video_id].push_back(std::move(row.inst));
        }
    }
    return ds;
}

}  // namespace auwgcn
