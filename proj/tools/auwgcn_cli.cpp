// Command-line front end: gen-synth, train, spot, eval, verify.
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "auwgcn/au_prior.hpp"
#include "auwgcn/config.hpp"
#include "auwgcn/evaluation.hpp"
#include "auwgcn/feature_io.hpp"
#include "auwgcn/model.hpp"
#include "auwgcn/spotting.hpp"
#include "auwgcn/synthdata.hpp"
#include "auwgcn/training.hpp"
#include "auwgcn/verify.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "1.0.0";

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

double elapsed_seconds(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

auwgcn::AuRoiMap resolve_au_map(const std::string& flag_path, const std::string& data_dir) {
    if (!flag_path.empty()) return auwgcn::load_au_roi_map(flag_path);
    const fs::path bundled = fs::path(data_dir) / "au_roi_map.conf";
    if (!data_dir.empty() && fs::exists(bundled)) return auwgcn::load_au_roi_map(bundled.string());
    return auwgcn::default_au_roi_map();
}

auwgcn::PipelineConfig config_from_kv(const json& kv) {
    std::ostringstream text;
    for (const auto& [key, value] : kv.items()) {
        text << key << " = " << value.get<std::string>() << "\n";
    }
    return auwgcn::parse_config_text(text.str(), "<manifest config>");
}

auwgcn::Dataset load_validated_dataset(const std::string& dir) {
    auwgcn::Dataset ds = auwgcn::load_dataset(dir);
    const auto violations = auwgcn::validate_dataset(ds);
    if (!violations.empty()) {
        std::ostringstream msg;
        msg << "dataset " << dir << " fails validation:";
        for (const auto& v : violations) msg << "\n  " << v;
        throw std::runtime_error(msg.str());
    }
    return ds;
}

int cmd_gen_synth(const auwgcn::SynthConfig& cfg, const std::string& out_dir, const std::string& au_map_path) {
    const auwgcn::AuRoiMap map = au_map_path.empty() ? auwgcn::default_au_roi_map()
                                                     : auwgcn::load_au_roi_map(au_map_path);
    const auwgcn::Dataset ds = auwgcn::generate_dataset(cfg, map);
    auwgcn::save_dataset(ds, out_dir);
    auwgcn::save_au_roi_map(map, (fs::path(out_dir) / "au_roi_map.conf").string());

    json manifest;
    manifest["tool"] = "auwgcn";
    manifest["version"] = kVersion;
    manifest["kind"] = "synth-dataset";
    manifest["seed"] = cfg.seed;
    manifest["generator"] = {
        {"subjects", cfg.subjects},
        {"videos_per_subject", cfg.videos_per_subject},
        {"fps", cfg.fps},
        {"video_seconds", cfg.video_seconds},
        {"macro_rate", cfg.macro_rate},
        {"micro_rate", cfg.micro_rate},
        {"noise_sigma", cfg.noise_sigma},
        {"signal_amp", cfg.signal_amp},
        {"seed", cfg.seed},
    };
    json videos = json::array();
    std::size_t instances = 0;
    for (const auto& v : ds.videos) {
        videos.push_back({{"video_id", v.video_id}, {"subject_id", v.subject_id}, {"frames", v.frame_count()}});
        const auto it = ds.annotations.find(v.video_id);
        if (it != ds.annotations.end()) instances += it->second.size();
    }
    manifest["videos"] = std::move(videos);
    std::ofstream mf(fs::path(out_dir) / "manifest.json", std::ios::trunc);
    mf << manifest.dump(2) << "\n";
    if (!mf) throw std::runtime_error("cannot write manifest in " + out_dir);

    std::cout << "wrote " << ds.videos.size() << " videos, " << instances << " instances to " << out_dir
              << "\n";
    return kExitOk;
}

int cmd_train(const std::string& data_dir, const std::string& config_path, const std::string& out_dir,
              const std::string& subject, const std::string& au_map_path, int workers) {
    const auto t0 = std::chrono::steady_clock::now();
    auwgcn::PipelineConfig cfg =
        config_path.empty() ? auwgcn::PipelineConfig{} : auwgcn::load_config_file(config_path);
    cfg.validate();

    const auwgcn::Dataset ds = load_validated_dataset(data_dir);
    const auwgcn::AuRoiMap map = resolve_au_map(au_map_path, data_dir);

    std::map<std::string, auwgcn::FoldResult> folds;
    if (!subject.empty()) {
        folds[subject] = auwgcn::train_fold(ds, subject, cfg.train, cfg.model, map);
    } else {
        folds = auwgcn::loso(ds, cfg.train, cfg.model, map, workers);
    }

    fs::create_directories(out_dir);
    json fold_list = json::array();
    for (const auto& [held_out, fold] : folds) {
        const std::string ckpt = "fold_" + held_out + ".auwc";
        auwgcn::save_checkpoint(fold.params, (fs::path(out_dir) / ckpt).string());
        json entry;
        entry["subject"] = held_out;
        entry["checkpoint"] = ckpt;
        entry["final_loss"] = fold.final_loss;
        entry["steps"] = fold.steps;
        entry["adjacency"] = fold.adjacency.data;
        fold_list.push_back(std::move(entry));
        std::cout << "fold " << held_out << ": " << fold.steps << " steps, final loss " << fold.final_loss
                  << "\n";
    }

    json manifest;
    manifest["tool"] = "auwgcn";
    manifest["version"] = kVersion;
    manifest["kind"] = "train-run";
    manifest["data_dir"] = data_dir;
    manifest["seed"] = cfg.train.seed;
    json config_kv;
    for (const auto& [k, v] : auwgcn::config_to_kv(cfg)) config_kv[k] = v;
    manifest["config"] = std::move(config_kv);
    manifest["workers"] = workers;
    manifest["folds"] = std::move(fold_list);
    manifest["total_seconds"] = elapsed_seconds(t0);
    std::ofstream mf(fs::path(out_dir) / "manifest.json", std::ios::trunc);
    mf << manifest.dump(2) << "\n";
    if (!mf) throw std::runtime_error("cannot write manifest in " + out_dir);

    std::cout << "wrote " << folds.size() << " checkpoint(s) to " << out_dir << "\n";
    return kExitOk;
}

int cmd_spot(const std::string& data_dir, const std::string& checkpoints_dir, const std::string& out_path,
             const std::string& config_path) {
    const fs::path manifest_path = fs::path(checkpoints_dir) / "manifest.json";
    std::ifstream mf(manifest_path);
    if (!mf) throw std::runtime_error("cannot open " + manifest_path.string());
    json manifest = json::parse(mf, nullptr, true);

    auwgcn::PipelineConfig cfg = config_path.empty() ? config_from_kv(manifest.at("config"))
                                                     : auwgcn::load_config_file(config_path);
    cfg.validate();

    struct Fold {
        std::string checkpoint;
        auwgcn::Tensor adjacency;
    };
    std::map<std::string, Fold> folds;
    for (const auto& entry : manifest.at("folds")) {
        Fold f;
        f.checkpoint = (fs::path(checkpoints_dir) / entry.at("checkpoint").get<std::string>()).string();
        const auto adj = entry.at("adjacency").get<std::vector<float>>();
        if (adj.size() != static_cast<std::size_t>(auwgcn::kRoiCount * auwgcn::kRoiCount)) {
            throw std::runtime_error("manifest adjacency for subject " + entry.at("subject").get<std::string>() +
                                     " has wrong size");
        }
        f.adjacency = auwgcn::Tensor({auwgcn::kRoiCount, auwgcn::kRoiCount});
        f.adjacency.data = adj;
        folds[entry.at("subject").get<std::string>()] = std::move(f);
    }

    const auwgcn::Dataset ds = load_validated_dataset(data_dir);
    std::vector<auwgcn::Proposal> all;
    for (const auto& video : ds.videos) {
        const auto it = folds.find(video.subject_id);
        if (it == folds.end()) {
            throw std::runtime_error("no fold checkpoint for subject '" + video.subject_id + "'");
        }
        const auwgcn::ModelParams params = auwgcn::load_checkpoint(it->second.checkpoint);
        auto props = auwgcn::spot_video(params, it->second.adjacency, video, cfg.train, cfg.spot);
        all.insert(all.end(), props.begin(), props.end());
    }
    std::sort(all.begin(), all.end(), [](const auwgcn::Proposal& a, const auwgcn::Proposal& b) {
        if (a.video_id != b.video_id) return a.video_id < b.video_id;
        if (a.kind != b.kind) return a.kind == auwgcn::Kind::macro;
        if (a.start != b.start) return a.start < b.start;
        return a.end < b.end;
    });
    auwgcn::save_proposals(all, out_path);
    std::cout << "wrote " << all.size() << " proposals to " << out_path << "\n";
    return kExitOk;
}

int cmd_eval(const std::string& proposals_path, const std::string& annotations_path,
             const std::string& out_path, double k_iou) {
    const auto proposals = auwgcn::load_proposals(proposals_path);
    const auto rows = auwgcn::load_annotations(annotations_path);

    std::map<std::string, std::vector<auwgcn::Proposal>> props_by_video;
    for (const auto& p : proposals) props_by_video[p.video_id].push_back(p);
    std::map<std::string, std::vector<auwgcn::AnnotationInstance>> gts_by_video;
    for (const auto& row : rows) gts_by_video[row.video_id].push_back(row.inst);

    std::set<std::string> video_ids;
    for (const auto& [vid, unused] : props_by_video) video_ids.insert(vid);
    for (const auto& [vid, unused] : gts_by_video) video_ids.insert(vid);

    static const std::vector<auwgcn::Proposal> no_props;
    static const std::vector<auwgcn::AnnotationInstance> no_gts;
    std::vector<auwgcn::MatchReport> reports;
    for (const auto& vid : video_ids) {
        const auto pit = props_by_video.find(vid);
        const auto git = gts_by_video.find(vid);
        const auto& props = pit == props_by_video.end() ? no_props : pit->second;
        const auto& gts = git == gts_by_video.end() ? no_gts : git->second;
        for (auwgcn::Kind kind : {auwgcn::Kind::macro, auwgcn::Kind::micro}) {
            reports.push_back(auwgcn::match(props, gts, kind, k_iou));
        }
    }
    const auwgcn::ScoreSummary summary = auwgcn::summarize(reports);
    if (!out_path.empty()) auwgcn::save_scores(summary, out_path);
    std::cout << auwgcn::format_scores(summary);
    return kExitOk;
}

int cmd_verify(int seeds, int instances, const std::string& inject_bug) {
    auwgcn::VerifyOptions opts;
    opts.grad_seeds = seeds;
    opts.oracle_instances = instances;
    opts.inject_bug = inject_bug;
    const auto results = auwgcn::run_verification(opts);
    for (const auto& r : results) {
        std::cout << (r.pass ? "[PASS] " : "[FAIL] ") << r.name << ": " << r.detail << "\n";
    }
    const bool ok = auwgcn::all_passed(results);
    std::cout << (ok ? "verification passed" : "verification FAILED") << "\n";
    return ok ? kExitOk : kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"macro- and micro-expression spotting over facial ROI motion features"};
    app.require_subcommand(1);
    app.set_version_flag("--app-version", kVersion);

    // gen-synth
    auto* gen = app.add_subcommand("gen-synth", "generate a labeled synthetic dataset");
    auwgcn::SynthConfig synth_cfg;
    std::string gen_out;
    std::string gen_au_map;
    gen->add_option("--out", gen_out, "output dataset directory")->required();
    gen->add_option("--subjects", synth_cfg.subjects, "number of subjects");
    gen->add_option("--videos-per-subject", synth_cfg.videos_per_subject, "videos per subject");
    gen->add_option("--fps", synth_cfg.fps, "frames per second");
    gen->add_option("--seconds", synth_cfg.video_seconds, "video duration in seconds");
    gen->add_option("--macro-rate", synth_cfg.macro_rate, "expected macro instances per video");
    gen->add_option("--micro-rate", synth_cfg.micro_rate, "expected micro instances per video");
    gen->add_option("--noise-sigma", synth_cfg.noise_sigma, "background flow noise std");
    gen->add_option("--signal-amp", synth_cfg.signal_amp, "peak planted flow magnitude");
    gen->add_option("--seed", synth_cfg.seed, "RNG seed");
    gen->add_option("--au-map", gen_au_map, "AU-to-ROI map config file");

    // train
    auto* train = app.add_subcommand("train", "train LOSO folds");
    std::string train_data, train_config, train_out, train_subject, train_au_map;
    int train_workers = 1;
    train->add_option("--data", train_data, "dataset directory")->required();
    train->add_option("--config", train_config, "pipeline config file (key = value)");
    train->add_option("--out", train_out, "output directory for checkpoints + manifest")->required();
    train->add_option("--subject", train_subject, "train a single fold holding out this subject");
    train->add_option("--au-map", train_au_map, "AU-to-ROI map config file");
    train->add_option("--workers", train_workers, "concurrent folds")->check(CLI::PositiveNumber);

    // spot
    auto* spot = app.add_subcommand("spot", "spot expression intervals with LOSO-matched checkpoints");
    std::string spot_data, spot_ckpts, spot_out, spot_config;
    spot->add_option("--data", spot_data, "dataset directory")->required();
    spot->add_option("--checkpoints", spot_ckpts, "train output directory")->required();
    spot->add_option("--out", spot_out, "proposals CSV path")->required();
    spot->add_option("--config", spot_config, "override the manifest config");

    // eval
    auto* eval = app.add_subcommand("eval", "score proposals against annotations");
    std::string eval_props, eval_anns, eval_out;
    double eval_k_iou = 0.5;
    eval->add_option("--proposals", eval_props, "proposals CSV")->required();
    eval->add_option("--annotations", eval_anns, "annotations CSV")->required();
    eval->add_option("--out", eval_out, "score table output path (key=value)");
    eval->add_option("--k-iou", eval_k_iou, "IoU threshold for a true positive");

    // verify
    auto* verify = app.add_subcommand("verify", "run gradient checks and oracle suites");
    int verify_seeds = 100;
    int verify_instances = 200;
    std::string verify_inject;
    verify->add_option("--seeds", verify_seeds, "random instances per gradient check")
        ->check(CLI::PositiveNumber);
    verify->add_option("--instances", verify_instances, "random instances per oracle comparison")
        ->check(CLI::PositiveNumber);
    verify->add_option("--inject-bug", verify_inject, "corrupt the named gradient check (harness test)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help / --app-version
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (gen->parsed()) return cmd_gen_synth(synth_cfg, gen_out, gen_au_map);
        if (train->parsed()) {
            return cmd_train(train_data, train_config, train_out, train_subject, train_au_map, train_workers);
        }
        if (spot->parsed()) return cmd_spot(spot_data, spot_ckpts, spot_out, spot_config);
        if (eval->parsed()) return cmd_eval(eval_props, eval_anns, eval_out, eval_k_iou);
        if (verify->parsed()) return cmd_verify(verify_seeds, verify_instances, verify_inject);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}
