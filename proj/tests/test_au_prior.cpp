#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "auwgcn/au_prior.hpp"
#include "auwgcn/reference.hpp"
#include "auwgcn/rng.hpp"

using namespace auwgcn;

namespace {

AnnotationInstance inst(std::vector<std::string> aus, Kind kind = Kind::macro) {
    AnnotationInstance a;
    a.onset = 0;
    a.apex = 1;
    a.offset = 2;
    a.kind = kind;
    a.aus = std::move(aus);
    std::sort(a.aus.begin(), a.aus.end());
    return a;
}

std::int64_t raw_at(const CountMatrix& m, int i, int j) {
    return m[static_cast<std::size_t>(i) * kRoiCount + j];
}

}  // namespace

TEST_SUITE("au_prior") {

TEST_CASE("empty annotation list gives an all-zero matrix") {
    const CountMatrix raw = count_cooccurrence({}, default_au_roi_map());
    for (auto v : raw) CHECK(v == 0);
}

TEST_CASE("one instance with a two-ROI AU fills the 2x2 block") {
    AuRoiMap map;
    map.entries["AU99"] = {3, 4};
    const CountMatrix raw = count_cooccurrence({inst({"AU99"})}, map);
    for (int i = 0; i < kRoiCount; ++i) {
        for (int j = 0; j < kRoiCount; ++j) {
            const bool hit = (i == 3 || i == 4) && (j == 3 || j == 4);
            CHECK(raw_at(raw, i, j) == (hit ? 1 : 0));
        }
    }
}

TEST_CASE("counts match the triple-loop oracle on random instances") {
    for (int trial = 0; trial < 30; ++trial) {
        Rng rng(900 + trial);
        AuRoiMap map;
        const int n_aus = static_cast<int>(rng.uniform_int(2, 7));
        std::vector<std::string> names;
        for (int i = 0; i < n_aus; ++i) {
            const std::string au = "AU" + std::to_string(i + 1);
            std::vector<int> rois;
            for (int j = 0; j < rng.uniform_int(1, 3); ++j) {
                rois.push_back(static_cast<int>(rng.uniform_int(0, kRoiCount - 1)));
            }
            std::sort(rois.begin(), rois.end());
            rois.erase(std::unique(rois.begin(), rois.end()), rois.end());
            map.entries[au] = rois;
            names.push_back(au);
        }
        std::vector<AnnotationInstance> anns;
        for (int i = 0; i < 50; ++i) {
            std::vector<std::string> aus;
            for (const auto& au : names) {
                if (rng.uniform() < 0.4) aus.push_back(au);
            }
            anns.push_back(inst(std::move(aus)));
        }
        CHECK(count_cooccurrence(anns, map) == reference::cooccurrence_naive(anns, map));
    }
}

TEST_CASE("counts are invariant under annotation order and monotone in instances") {
    Rng rng(77);
    const AuRoiMap map = default_au_roi_map();
    std::vector<AnnotationInstance> anns = {
        inst({"AU4"}), inst({"AU6", "AU12"}), inst({"AU1", "AU2"}), inst({"AU12", "AU15"})};
    const CountMatrix base = count_cooccurrence(anns, map);

    std::vector<AnnotationInstance> shuffled = anns;
    rng.shuffle(shuffled);
    CHECK(count_cooccurrence(shuffled, map) == base);

    shuffled.push_back(inst({"AU4", "AU7"}));
    const CountMatrix more = count_cooccurrence(shuffled, map);
    for (std::size_t i = 0; i < more.size(); ++i) CHECK(more[i] >= base[i]);
}

TEST_CASE("unknown AUs are warnings, not failures") {
    AuRoiMap map;
    map.entries["AU1"] = {0};
    std::vector<std::string> warnings;
    const CountMatrix raw = count_cooccurrence({inst({"AU1", "AU77"})}, map, &warnings);
    CHECK(raw_at(raw, 0, 0) == 1);
    REQUIRE(warnings.size() == 1);
    CHECK(warnings[0].find("AU77") != std::string::npos);
}

TEST_CASE("side-coded AUs fall back to the numeric stem") {
    AuRoiMap map;
    map.entries["AU12"] = {10, 11};
    const CountMatrix raw = count_cooccurrence({inst({"AU12R"})}, map);
    CHECK(raw_at(raw, 10, 10) == 1);
    CHECK(raw_at(raw, 10, 11) == 1);
    CHECK(raw_at(raw, 11, 10) == 1);
    CHECK(raw_at(raw, 11, 11) == 1);
}

TEST_CASE("zero counts normalize to the identity") {
    const Tensor norm = normalize_adjacency(CountMatrix{});
    for (int i = 0; i < kRoiCount; ++i) {
        for (int j = 0; j < kRoiCount; ++j) {
            CHECK(norm(i, j) == doctest::Approx(i == j ? 1.0 : 0.0));
        }
    }
}

TEST_CASE("all-ones counts normalize to 1/13 off-diagonal, 2/13 diagonal") {
    CountMatrix raw;
    raw.fill(1);
    const Tensor norm = normalize_adjacency(raw);
    for (int i = 0; i < kRoiCount; ++i) {
        for (int j = 0; j < kRoiCount; ++j) {
            CHECK(norm(i, j) == doctest::Approx(i == j ? 2.0 / 13.0 : 1.0 / 13.0).epsilon(1e-6));
        }
    }
}

TEST_CASE("normalized matrices are symmetric with spectral radius at most 1") {
    for (int trial = 0; trial < 20; ++trial) {
        Rng rng(500 + trial);
        CountMatrix raw{};
        for (int i = 0; i < kRoiCount; ++i) {
            for (int j = i; j < kRoiCount; ++j) {
                const auto v = rng.uniform() < 0.4 ? rng.uniform_int(0, 40) : 0;
                raw[static_cast<std::size_t>(i) * kRoiCount + j] = v;
                raw[static_cast<std::size_t>(j) * kRoiCount + i] = v;
            }
        }
        const Tensor norm = normalize_adjacency(raw);
        for (int i = 0; i < kRoiCount; ++i) {
            for (int j = 0; j < kRoiCount; ++j) CHECK(norm(i, j) == norm(j, i));
        }
        CHECK(reference::spectral_radius(norm) <= 1.0 + 1e-6);
    }
}

TEST_CASE("normalize rejects asymmetric or negative counts") {
    CountMatrix raw{};
    raw[1] = 3;  // (0,1) without (1,0)
    CHECK_THROWS_AS(normalize_adjacency(raw), std::invalid_argument);
    CountMatrix neg{};
    neg[0] = -1;
    CHECK_THROWS_AS(normalize_adjacency(neg), std::invalid_argument);
}

TEST_CASE("default map covers brow and mouth AUs with the right face regions") {
    const AuRoiMap map = default_au_roi_map();
    for (const auto& [au, rois] : map.entries) CHECK(!rois.empty());
    // brows live in ROIs 0..4, mouth in 10..11
    for (const auto& au : {"AU1", "AU2", "AU4"}) {
        for (int r : map.entries.at(au)) CHECK(r <= 4);
    }
    for (const auto& au : {"AU12", "AU14", "AU15"}) {
        for (int r : map.entries.at(au)) {
            CHECK(r >= 10);
            CHECK(r <= 11);
        }
    }
}

TEST_CASE("the map round-trips through its config file form") {
    const auto dir = std::filesystem::temp_directory_path() /
                     ("auwgcn_map_" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir);
    const std::string path = (dir / "map.conf").string();
    const AuRoiMap map = default_au_roi_map();
    save_au_roi_map(map, path);
    const AuRoiMap back = load_au_roi_map(path);
    CHECK(back.entries == map.entries);
}

TEST_CASE("map config files support comments and reject junk") {
    const auto dir = std::filesystem::temp_directory_path() /
                     ("auwgcn_map2_" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir);
    const std::string path = (dir / "map.conf").string();
    std::ofstream(path) << "# layout\nAU1: 0,1  # inner brows\n\nAU12: 10,11\n";
    const AuRoiMap map = load_au_roi_map(path);
    CHECK(map.entries.at("AU1") == std::vector<int>{0, 1});
    CHECK(map.entries.at("AU12") == std::vector<int>{10, 11});

    std::ofstream(path) << "AU1: 0,99\n";  // ROI out of range
    CHECK_THROWS_AS(load_au_roi_map(path), IoError);
}

TEST_CASE("build_adjacency wires counting and normalization together") {
    const AuRoiMap map = default_au_roi_map();
    const AdjacencyMatrix adj = build_adjacency({inst({"AU6", "AU12"})}, map);
    CHECK(raw_at(adj.raw, 5, 10) == 1);   // cheek x mouth corner
    CHECK(adj.normalized.dim(0) == kRoiCount);
    CHECK(reference::spectral_radius(adj.normalized) <= 1.0 + 1e-6);
}

TEST_CASE("uniform adjacency is flat 1/12") {
    const Tensor u = uniform_adjacency();
    for (float v : u.data) CHECK(v == doctest::Approx(1.0 / 12.0));
}

}  // TEST_SUITE
