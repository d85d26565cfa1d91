#include "doctest.h"

#include <cmath>
#include <set>

#include "auwgcn/fdcheck.hpp"
#include "auwgcn/reference.hpp"
#include "auwgcn/rng.hpp"
#include "auwgcn/synthdata.hpp"
#include "auwgcn/training.hpp"

using namespace auwgcn;

namespace {

FeatureSequence noise_video(const std::string& subject, const std::string& vid, int T,
                            std::uint64_t seed) {
    Rng rng(seed);
    FeatureSequence seq;
    seq.subject_id = subject;
    seq.video_id = vid;
    seq.fps = 30.0f;
    seq.frames = Tensor({T, kRoiCount, kFlowChannels});
    for (auto& v : seq.frames.data) v = static_cast<float>(rng.uniform(-0.2, 0.2));
    return seq;
}

TrainConfig fast_cfg() {
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.window_seconds = 64.0 / 30.0;  // l_w = 64 at 30 fps
    cfg.boundary_radius_seconds = 0.0;
    return cfg;
}

bool params_equal(const ModelParams& a, const ModelParams& b) {
    const auto pa = a.all(), pb = b.all();
    if (pa.size() != pb.size()) return false;
    for (std::size_t i = 0; i < pa.size(); ++i) {
        if (!(pa[i]->value == pb[i]->value)) return false;
    }
    return true;
}

}  // namespace

TEST_SUITE("training") {

TEST_CASE("window length is derived from seconds and must cover the receptive field") {
    TrainConfig cfg;
    cfg.window_seconds = 2.2;
    CHECK(window_length(30.0, cfg) == 66);
    CHECK(window_length(200.0, cfg) == 440);
    cfg.window_seconds = 0.2;  // 6 frames at 30 fps
    CHECK_THROWS_AS(window_length(30.0, cfg), std::invalid_argument);
}

TEST_CASE("a video exactly one window long yields a single unpadded window") {
    TrainConfig cfg = fast_cfg();
    const FeatureSequence video = noise_video("s1", "v1", 64, 1);
    const auto windows = make_windows(video, cfg);
    REQUIRE(windows.size() == 1);
    CHECK(windows[0].window_start == 0);
    CHECK(windows[0].valid == 64);
}

TEST_CASE("stride and padding follow the stated rule") {
    TrainConfig cfg = fast_cfg();  // l_w 64, stride 32
    const FeatureSequence video = noise_video("s1", "v1", 100, 2);
    const auto windows = make_windows(video, cfg);
    REQUIRE(windows.size() == 3);
    CHECK(windows[0].window_start == 0);
    CHECK(windows[1].window_start == 32);
    CHECK(windows[2].window_start == 64);
    CHECK(windows[2].valid == 36);  // padded by 28
    // padding is zero
    for (int t = 36; t < 64; ++t) {
        for (int r = 0; r < kRoiCount; ++r) {
            CHECK(windows[2].feats(t, r, 0) == 0.0f);
            CHECK(windows[2].feats(t, r, 1) == 0.0f);
        }
    }
}

TEST_CASE("every frame is covered by at least one window") {
    TrainConfig cfg = fast_cfg();
    for (int T : {1, 5, 64, 65, 100, 321}) {
        const FeatureSequence video = noise_video("s1", "v1", T, 3);
        const auto windows = make_windows(video, cfg);
        std::vector<bool> covered(static_cast<std::size_t>(T), false);
        for (const auto& w : windows) {
            for (int t = 0; t < w.valid; ++t) covered[static_cast<std::size_t>(w.window_start + t)] = true;
        }
        for (bool c : covered) CHECK(c);
    }
}

TEST_CASE("label encoding marks boundaries and expression spans") {
    TrainConfig cfg = fast_cfg();
    const FeatureSequence video = noise_video("s1", "v1", 64, 4);
    auto windows = make_windows(video, cfg);
    REQUIRE(windows.size() == 1);
    std::vector<AnnotationInstance> anns = {{10, 14, 19, Kind::micro, {}}};
    encode_labels(anns, video.fps, cfg, windows[0]);
    const KindTargets& micro = windows[0].micro;
    for (int t = 0; t < 64; ++t) {
        CHECK(micro.exp[static_cast<std::size_t>(t)] == ((t >= 10 && t <= 19) ? 1 : 0));
        std::uint8_t want = kClassBackground;
        if (t == 10) want = kClassOnset;
        if (t == 14) want = kClassApex;
        if (t == 19) want = kClassOffset;
        CHECK(micro.cls[static_cast<std::size_t>(t)] == want);
    }
    // the other kind stays background
    for (int t = 0; t < 64; ++t) {
        CHECK(windows[0].macro.exp[static_cast<std::size_t>(t)] == 0);
        CHECK(windows[0].macro.cls[static_cast<std::size_t>(t)] == kClassBackground);
    }
}

TEST_CASE("an instance fully outside the window leaves it background") {
    TrainConfig cfg = fast_cfg();
    const FeatureSequence video = noise_video("s1", "v1", 200, 5);
    auto windows = make_windows(video, cfg);
    std::vector<AnnotationInstance> anns = {{150, 160, 170, Kind::macro, {}}};
    encode_labels(anns, video.fps, cfg, windows[0]);  // covers 0..63
    for (int t = 0; t < 64; ++t) {
        CHECK(windows[0].macro.exp[static_cast<std::size_t>(t)] == 0);
        CHECK(windows[0].macro.cls[static_cast<std::size_t>(t)] == kClassBackground);
    }
}

TEST_CASE("boundary radius expands labels and apex wins ties") {
    TrainConfig cfg = fast_cfg();
    cfg.boundary_radius_seconds = 2.0 / 30.0;  // radius 2 at 30 fps
    const FeatureSequence video = noise_video("s1", "v1", 64, 6);
    auto windows = make_windows(video, cfg);
    std::vector<AnnotationInstance> anns = {{20, 22, 30, Kind::macro, {}}};
    encode_labels(anns, video.fps, cfg, windows[0]);
    const auto& cls = windows[0].macro.cls;
    CHECK(cls[18] == kClassOnset);
    CHECK(cls[19] == kClassOnset);
    // |t-onset| <= 2 and |t-apex| <= 2 overlap at 20..22; apex takes priority
    CHECK(cls[20] == kClassApex);
    CHECK(cls[21] == kClassApex);
    CHECK(cls[24] == kClassApex);
    CHECK(cls[25] == kClassBackground);
    CHECK(cls[28] == kClassOffset);
    CHECK(cls[32] == kClassOffset);
    CHECK(cls[33] == kClassBackground);
}

TEST_CASE("every ground-truth frame is labeled in at least one window") {
    SynthConfig scfg;
    scfg.subjects = 1;
    scfg.videos_per_subject = 1;
    scfg.video_seconds = 20.0;
    scfg.seed = 9;
    const Dataset ds = generate_dataset(scfg);
    TrainConfig cfg = fast_cfg();
    const auto windows = build_training_windows(ds, "no-such-subject-held-out", cfg);
    for (const auto& [vid, anns] : ds.annotations) {
        const int T = ds.find_video(vid)->frame_count();
        for (const auto& a : anns) {
            for (int g = a.onset; g <= a.offset && g < T; ++g) {
                bool labeled = false;
                for (const auto& w : windows) {
                    if (w.video_id != vid) continue;
                    const int t = g - w.window_start;
                    if (t < 0 || t >= w.valid) continue;
                    const auto& tg = a.kind == Kind::macro ? w.macro : w.micro;
                    labeled = labeled || tg.exp[static_cast<std::size_t>(t)] == 1;
                }
                CHECK(labeled);
            }
        }
    }
}

TEST_CASE("focal loss with gamma 0 and alpha one-half is half the binary cross-entropy") {
    Rng rng(12);
    const int l_w = 16;
    WindowSample w;
    w.feats = Tensor({l_w, kRoiCount, kFlowChannels});
    w.valid = l_w;
    for (KindTargets* tg : {&w.macro, &w.micro}) {
        tg->exp.resize(l_w);
        tg->cls.assign(l_w, kClassBackground);
        for (auto& e : tg->exp) e = static_cast<std::uint8_t>(rng.uniform_int(0, 1));
    }
    Tensor logits({10, l_w});
    for (auto& v : logits.data) v = static_cast<float>(rng.uniform(-2.0, 2.0));
    // silence the 4-way task so only the binary part contributes: a huge
    // logit on the target class drives its focal term to ~0
    for (int t = 0; t < l_w; ++t) {
        logits(1 + kClassBackground, t) = 60.0f;
        logits(6 + kClassBackground, t) = 60.0f;
    }
    const ProbabilityMaps maps = decode_probabilities(logits);

    TrainConfig cfg;
    cfg.gamma = 0.0;
    cfg.alpha = 0.5;
    const FocalResult fr = focal_loss(maps, w, cfg);

    double bce = 0.0;
    for (int half = 0; half < 2; ++half) {
        const KindMaps& km = half == 0 ? maps.macro : maps.micro;
        const KindTargets& tg = half == 0 ? w.macro : w.micro;
        for (int t = 0; t < l_w; ++t) {
            const double p = km.exp[static_cast<std::size_t>(t)];
            bce += tg.exp[static_cast<std::size_t>(t)] ? -std::log(p) : -std::log(1.0 - p);
        }
    }
    CHECK(fr.loss == doctest::Approx(0.5 * bce / l_w).epsilon(1e-6));
}

TEST_CASE("focal loss vanishes at a perfect prediction") {
    const int l_w = 8;
    WindowSample w;
    w.feats = Tensor({l_w, kRoiCount, kFlowChannels});
    w.valid = l_w;
    for (KindTargets* tg : {&w.macro, &w.micro}) {
        tg->exp.assign(l_w, 1);
        tg->cls.assign(l_w, kClassApex);
    }
    Tensor logits({10, l_w});
    for (int t = 0; t < l_w; ++t) {
        logits(0, t) = 60.0f;   // macro exp -> 1
        logits(2, t) = 60.0f;   // macro apex
        logits(5, t) = 60.0f;   // micro exp
        logits(7, t) = 60.0f;   // micro apex
    }
    const FocalResult fr = focal_loss(decode_probabilities(logits), w, TrainConfig{});
    CHECK(fr.loss <= 1e-5);
}

TEST_CASE("focal loss with gamma 0 equals alpha times the 4-way cross-entropy") {
    Rng rng(13);
    const int l_w = 10;
    WindowSample w;
    w.feats = Tensor({l_w, kRoiCount, kFlowChannels});
    w.valid = l_w;
    for (KindTargets* tg : {&w.macro, &w.micro}) {
        tg->exp.assign(l_w, 0);
        tg->cls.resize(l_w);
        for (auto& c : tg->cls) c = static_cast<std::uint8_t>(rng.uniform_int(0, 3));
    }
    Tensor logits({10, l_w});
    for (auto& v : logits.data) v = static_cast<float>(rng.uniform(-2.0, 2.0));
    // silence the binary task: strong negative logit and negative target
    for (int t = 0; t < l_w; ++t) {
        logits(0, t) = -60.0f;
        logits(5, t) = -60.0f;
    }
    const ProbabilityMaps maps = decode_probabilities(logits);
    TrainConfig cfg;
    cfg.gamma = 0.0;
    cfg.alpha = 0.75;
    const FocalResult fr = focal_loss(maps, w, cfg);

    double ce = 0.0;
    for (int half = 0; half < 2; ++half) {
        const KindMaps& km = half == 0 ? maps.macro : maps.micro;
        const KindTargets& tg = half == 0 ? w.macro : w.micro;
        for (int t = 0; t < l_w; ++t) {
            const double p4[4] = {km.s[static_cast<std::size_t>(t)], km.ap[static_cast<std::size_t>(t)],
                                  km.e[static_cast<std::size_t>(t)], km.bg[static_cast<std::size_t>(t)]};
            ce += -std::log(p4[tg.cls[static_cast<std::size_t>(t)]]);
        }
    }
    CHECK(fr.loss == doctest::Approx(cfg.alpha * ce / l_w).epsilon(1e-6));
}

TEST_CASE("focal loss is nonnegative and decreasing in the target probability") {
    TrainConfig cfg;
    WindowSample w;
    w.feats = Tensor({1, kRoiCount, kFlowChannels});
    w.valid = 1;
    for (KindTargets* tg : {&w.macro, &w.micro}) {
        tg->exp.assign(1, 1);
        tg->cls.assign(1, kClassBackground);
    }
    double prev = 1e9;
    for (double z = -4.0; z <= 4.0; z += 0.25) {
        Tensor logits({10, 1});
        logits(0, 0) = static_cast<float>(z);  // macro exp logit; target positive
        const FocalResult fr = focal_loss(decode_probabilities(logits), w, cfg);
        CHECK(fr.loss >= 0.0);
        CHECK(fr.loss < prev);
        prev = fr.loss;
    }
}

TEST_CASE("focal gradients match finite differences and respect the mask") {
    double max_err = 0.0;
    for (int seed = 0; seed < 20; ++seed) {
        Rng rng(700 + seed);
        const int l_w = 8;
        WindowSample w;
        w.feats = Tensor({l_w, kRoiCount, kFlowChannels});
        w.valid = l_w - 2;
        for (KindTargets* tg : {&w.macro, &w.micro}) {
            tg->exp.resize(l_w);
            tg->cls.resize(l_w);
            for (int t = 0; t < l_w; ++t) {
                tg->exp[static_cast<std::size_t>(t)] = static_cast<std::uint8_t>(rng.uniform_int(0, 1));
                tg->cls[static_cast<std::size_t>(t)] = static_cast<std::uint8_t>(rng.uniform_int(0, 3));
            }
        }
        Parameter logits(Tensor({10, l_w}));
        for (auto& v : logits.value.data) v = static_cast<float>(rng.uniform(-3.0, 3.0));
        TrainConfig cfg;
        const FocalResult fr = focal_loss(decode_probabilities(logits.value), w, cfg);
        // gradient zero at masked frames
        for (int t = w.valid; t < l_w; ++t) {
            for (int c = 0; c < 10; ++c) CHECK(fr.dlogits(c, t) == 0.0f);
        }
        for (std::size_t i = 0; i < fr.dlogits.numel(); ++i) logits.grad.data[i] += fr.dlogits.data[i];
        std::vector<Parameter*> params{&logits};
        const double err = finite_diff_check(
            [&] { return reference::focal_loss_f64(logits.value, w, cfg); }, params, {1e-3, -1, 0});
        max_err = std::max(max_err, err);
    }
    CHECK(max_err <= 1e-3);
}

TEST_CASE("train_fold is deterministic and never sees the held-out subject") {
    SynthConfig scfg;
    scfg.subjects = 2;
    scfg.videos_per_subject = 1;
    scfg.video_seconds = 8.0;
    scfg.macro_rate = 1.0;
    scfg.micro_rate = 1.0;
    scfg.seed = 21;
    const Dataset ds = generate_dataset(scfg);
    TrainConfig cfg = fast_cfg();
    cfg.epochs = 2;
    const ModelConfig mcfg;
    const AuRoiMap map = default_au_roi_map();

    const auto windows = build_training_windows(ds, "s1", cfg);
    for (const auto& w : windows) CHECK(w.video_id.rfind("s1v", 0) != 0);

    const FoldResult a = train_fold(ds, "s1", cfg, mcfg, map);
    const FoldResult b = train_fold(ds, "s1", cfg, mcfg, map);
    CHECK(params_equal(a.params, b.params));
    CHECK(a.final_loss == b.final_loss);
    CHECK(a.steps == b.steps);

    CHECK_THROWS_AS(train_fold(ds, "nobody", cfg, mcfg, map), std::invalid_argument);
}

TEST_CASE("training on a strong planted signal reduces the loss") {
    SynthConfig scfg;
    scfg.subjects = 2;
    scfg.videos_per_subject = 1;
    scfg.video_seconds = 12.0;
    scfg.macro_rate = 1.0;
    scfg.micro_rate = 1.0;
    scfg.signal_amp = 0.5;
    scfg.noise_sigma = 0.1;
    scfg.seed = 31;
    const Dataset ds = generate_dataset(scfg);
    TrainConfig cfg = fast_cfg();
    cfg.epochs = 1;
    const FoldResult first = train_fold(ds, "s2", cfg, ModelConfig{}, default_au_roi_map());
    cfg.epochs = 10;
    const FoldResult last = train_fold(ds, "s2", cfg, ModelConfig{}, default_au_roi_map());
    CHECK(last.final_loss < first.final_loss);
}

TEST_CASE("loso trains one fold per subject and needs at least two") {
    SynthConfig scfg;
    scfg.subjects = 3;
    scfg.videos_per_subject = 1;
    scfg.video_seconds = 8.0;
    scfg.macro_rate = 1.0;
    scfg.micro_rate = 1.0;
    scfg.seed = 41;
    const Dataset ds = generate_dataset(scfg);
    TrainConfig cfg = fast_cfg();
    cfg.epochs = 1;
    const auto folds = loso(ds, cfg, ModelConfig{}, default_au_roi_map());
    CHECK(folds.size() == 3);
    for (const auto& s : {"s1", "s2", "s3"}) CHECK(folds.count(s) == 1);

    Dataset one;
    one.videos.push_back(noise_video("only", "v", 64, 1));
    CHECK_THROWS_AS(loso(one, cfg, ModelConfig{}, default_au_roi_map()), std::invalid_argument);
}

TEST_CASE("loso with worker threads matches the sequential result") {
    SynthConfig scfg;
    scfg.subjects = 3;
    scfg.videos_per_subject = 1;
    scfg.video_seconds = 8.0;
    scfg.macro_rate = 1.0;
    scfg.micro_rate = 1.0;
    scfg.seed = 51;
    const Dataset ds = generate_dataset(scfg);
    TrainConfig cfg = fast_cfg();
    cfg.epochs = 1;
    const auto seq = loso(ds, cfg, ModelConfig{}, default_au_roi_map(), 1);
    const auto par = loso(ds, cfg, ModelConfig{}, default_au_roi_map(), 3);
    REQUIRE(seq.size() == par.size());
    for (const auto& [subject, fold] : seq) {
        CHECK(params_equal(fold.params, par.at(subject).params));
    }
}

TEST_CASE("per-fold adjacency reflects only the training subjects") {
    // one subject carries every AU12 instance; the fold holding it out must
    // lose the mouth-corner co-occurrence mass
    Dataset ds;
    ds.videos.push_back(noise_video("s1", "s1v1", 80, 1));
    ds.videos.push_back(noise_video("s2", "s2v1", 80, 2));
    ds.annotations["s1v1"].push_back({5, 10, 20, Kind::macro, {"AU12"}});
    ds.annotations["s2v1"].push_back({5, 10, 20, Kind::macro, {"AU4"}});
    TrainConfig cfg = fast_cfg();
    cfg.epochs = 1;
    const AuRoiMap map = default_au_roi_map();
    const FoldResult without_s1 = train_fold(ds, "s1", cfg, ModelConfig{}, map);
    const FoldResult without_s2 = train_fold(ds, "s2", cfg, ModelConfig{}, map);
    // ROI 10/11 coupling comes only from AU12, owned by s1
    CHECK(without_s1.adjacency(10, 11) == doctest::Approx(0.0));
    CHECK(without_s2.adjacency(10, 11) > 0.0f);
}

}  // TEST_SUITE
