#include "predinv/runner.hpp"

#include "predinv/attacks/attacks.hpp"
#include "predinv/config.hpp"
#include "predinv/data/dataset.hpp"
#include "predinv/errors.hpp"
#include "predinv/eval/metrics.hpp"
#include "predinv/io/png.hpp"
#include "predinv/models/models.hpp"
#include "predinv/oracle/server.hpp"
#include "predinv/rng.hpp"
#include "predinv/train/train.hpp"
#include "predinv/trunc.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>

namespace predinv::runner {

namespace fs = std::filesystem;

namespace {

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << text;
}

std::optional<std::string> read_text(const std::string& path) {
    std::ifstream in(path);
    if (!in) return std::nullopt;
    std::string s((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return s;
}

void write_json(const std::string& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

struct Context {
    json cfg;  // resolved
    std::string out;

    std::optional<data::Dataset> full_, train_, test_;
    std::optional<models::Classifier> classifier_;
    std::optional<models::Classifier> joint_classifier_;
    std::optional<models::InversionModel> joint_inversion_;

    explicit Context(json resolved) : cfg(std::move(resolved)) {
        out = cfg["output_dir"].get<std::string>();
        fs::create_directories(out);
        fs::create_directories(out + "/grids");
    }

    int k() const { return cfg["classifier"]["num_classes"].get<int>(); }
    std::uint64_t seed() const { return cfg["seed"].get<std::uint64_t>(); }

    void ensure_data() {
        if (full_) return;
        const json& d = cfg["data"];
        const auto res = d["resolution"].get<std::vector<int>>();
        data::Dataset full = data::load_dataset(d["dataset"].get<std::string>(), res[0], res[1],
                                                d["cache_dir"].get<std::string>());
        const int subset = d["class_subset"].get<int>();
        if (subset > 0) full = data::select_class_subset(full, subset, seed());
        auto [train, test] = data::make_splits(full, d["train_fraction"].get<double>(), seed());
        full_ = std::move(full);
        train_ = std::move(train);
        test_ = std::move(test);
    }

    const data::Dataset& split(const std::string& name) {
        ensure_data();
        if (name == "train") return *train_;
        if (name == "test") return *test_;
        throw ValidationError("unknown split '" + name + "'");
    }

    data::Dataset compose_aux(const json& arm) {
        ensure_data();
        data::AuxiliarySpec spec;
        const json& aux = arm["aux"];
        spec.kind = aux["kind"].get<std::string>();
        spec.source = aux["source"].get<std::string>();
        spec.fraction = aux["fraction"].get<double>();
        for (const auto& c : aux["excluded_classes"]) spec.excluded_classes.insert(c.get<std::string>());

        if (spec.kind == "victim-train") {
            // the developer's control: the classifier's own training data, unlabeled
            data::Dataset out;
            out.height = train_->height;
            out.width = train_->width;
            out.samples = train_->samples;
            for (auto& s : out.samples) s.label.reset();
            return out;
        }

        std::set<std::string> victim_classes(train_->class_names.begin(), train_->class_names.end());
        std::unordered_set<std::string> victim_ids;
        for (const auto& s : train_->samples) victim_ids.insert(s.source_id);

        if (spec.kind == "same") {
            if (spec.source != cfg["data"]["dataset"].get<std::string>()) {
                throw ValidationError("auxiliary kind=same must draw from the victim's dataset");
            }
            return data::compose_auxiliary(*full_, spec, victim_classes, victim_ids);
        }
        if (spec.kind == "generic" && spec.excluded_classes.empty()) {
            spec.excluded_classes = victim_classes;  // class disjointness against the victim
        }
        const json& d = cfg["data"];
        const auto res = d["resolution"].get<std::vector<int>>();
        data::Dataset source = data::load_dataset(spec.source, res[0], res[1],
                                                  d["cache_dir"].get<std::string>());
        return data::compose_auxiliary(source, spec, victim_classes, victim_ids);
    }

    models::Classifier& classifier() {
        if (!classifier_) {
            const std::string path = out + "/classifier.ckpt";
            if (!fs::exists(path)) throw TrainingError("missing classifier checkpoint; run 'train classifier' first");
            classifier_ = models::load_classifier(path);
        }
        return *classifier_;
    }

    models::Classifier& joint_classifier() {
        if (!joint_classifier_) {
            const std::string path = out + "/joint_classifier.ckpt";
            if (!fs::exists(path)) throw TrainingError("missing joint checkpoint; run 'train joint' first");
            joint_classifier_ = models::load_classifier(path);
        }
        return *joint_classifier_;
    }

    models::InversionModel& joint_inversion() {
        if (!joint_inversion_) {
            const std::string path = out + "/joint_inversion.ckpt";
            if (!fs::exists(path)) throw TrainingError("missing joint checkpoint; run 'train joint' first");
            joint_inversion_ = models::load_inversion(path);
        }
        return *joint_inversion_;
    }

    models::InversionModel arm_inversion(const std::string& name) {
        const std::string path = out + "/arm_" + name + ".ckpt";
        if (!fs::exists(path)) throw TrainingError("missing inversion checkpoint for arm '" + name + "'");
        return models::load_inversion(path);
    }

    const json* find_arm(const std::string& name) const {
        if (!cfg.contains("inversion_arms")) return nullptr;
        for (const auto& arm : cfg["inversion_arms"]) {
            if (arm["name"] == name) return &arm;
        }
        return nullptr;
    }
};

// stage bookkeeping: artifact list + fingerprint sidecar
bool stage_current(Context& ctx, const std::string& stage, const std::vector<std::string>& artifacts,
                   const std::string& fp) {
    for (const auto& a : artifacts) {
        if (!fs::exists(a)) return false;
    }
    const auto stored = read_text(ctx.out + "/." + stage + ".fp");
    return stored && *stored == fp;
}

void mark_stage(Context& ctx, const std::string& stage, const std::string& fp) {
    write_text(ctx.out + "/." + stage + ".fp", fp);
}

std::string data_fp(const Context& ctx) {
    return config::fingerprint(json{{"data", ctx.cfg["data"]}, {"seed", ctx.cfg["seed"]}});
}

std::string classifier_fp(const Context& ctx) {
    return config::fingerprint(json{{"up", data_fp(ctx)},
                                    {"classifier", ctx.cfg["classifier"]},
                                    {"train", ctx.cfg.value("train_classifier", json::object())}});
}

std::string arm_fp(const Context& ctx, const json& arm) {
    return config::fingerprint(json{{"up", classifier_fp(ctx)},
                                    {"inversion", ctx.cfg.value("inversion", json::object())},
                                    {"arm", arm}});
}

std::string joint_fp(const Context& ctx) {
    return config::fingerprint(json{{"up", data_fp(ctx)},
                                    {"classifier", ctx.cfg["classifier"]},
                                    {"inversion", ctx.cfg.value("inversion", json::object())},
                                    {"joint", ctx.cfg.value("joint", json::object())}});
}

train::TrainConfig train_cfg_of(const json& j, int threads) {
    auto tc = train::TrainConfig::from_json(j);
    if (tc.threads == 0) tc.threads = threads;
    return tc;
}

// ------------------------------------------------------------------ stages

void stage_data(Context& ctx, RunSummary& sum) {
    const std::string fp = data_fp(ctx);
    const std::string summary = ctx.out + "/data_summary.json";
    if (stage_current(ctx, "data", {summary}, fp)) {
        sum.stages.push_back({"data", true});
        return;
    }
    ctx.ensure_data();
    json j{{"dataset", ctx.cfg["data"]["dataset"]},
           {"classes", ctx.full_->class_names},
           {"total", ctx.full_->size()},
           {"train", ctx.train_->size()},
           {"test", ctx.test_->size()},
           {"resolution", {ctx.full_->height, ctx.full_->width}}};
    if (ctx.cfg["data"].value("save_containers", false)) {
        data::save_container(*ctx.train_, ctx.out + "/train.invd1");
        data::save_container(*ctx.test_, ctx.out + "/test.invd1");
        j["containers"] = {ctx.out + "/train.invd1", ctx.out + "/test.invd1"};
    }
    write_json(summary, j);
    mark_stage(ctx, "data", fp);
    sum.stages.push_back({"data", false});
}

void stage_classifier(Context& ctx, RunSummary& sum) {
    if (!ctx.cfg.contains("train_classifier")) return;
    const std::string fp = classifier_fp(ctx);
    const std::string ckpt = ctx.out + "/classifier.ckpt";
    const std::string report = ctx.out + "/classifier_report.json";
    if (stage_current(ctx, "classifier", {ckpt, report}, fp)) {
        sum.stages.push_back({"classifier", true});
        return;
    }
    ctx.ensure_data();
    auto spec = models::ClassifierSpec::from_json(ctx.cfg["classifier"]);
    auto tc = train_cfg_of(ctx.cfg["train_classifier"], ctx.cfg["threads"].get<int>());
    auto [model, rep] = train::train_classifier(spec, *ctx.train_, *ctx.test_, tc);
    models::save_classifier(model, ckpt);
    write_json(report, rep.to_json());
    ctx.classifier_ = std::move(model);
    mark_stage(ctx, "classifier", fp);
    sum.stages.push_back({"classifier", false});
}

void stage_inversion_arm(Context& ctx, const json& arm, RunSummary& sum) {
    const std::string name = arm["name"].get<std::string>();
    const std::string stage = "inversion:" + name;
    const std::string fp = arm_fp(ctx, arm);
    const std::string ckpt = ctx.out + "/arm_" + name + ".ckpt";
    const std::string report = ctx.out + "/arm_" + name + "_report.json";
    if (stage_current(ctx, stage, {ckpt, report}, fp)) {
        sum.stages.push_back({stage, true});
        return;
    }
    ctx.ensure_data();
    auto inv_spec = models::InversionSpec::from_json(ctx.cfg["inversion"]);
    auto tc = train_cfg_of(arm["train"], ctx.cfg["threads"].get<int>());
    data::Dataset aux = ctx.compose_aux(arm);

    std::unique_ptr<oracle::PredictionOracle> orc;
    if (arm.contains("endpoint")) {
        orc = oracle::connect_oracle(arm["endpoint"].get<std::string>());
    } else {
        oracle::OracleConfig ocfg;
        ocfg.server_m = arm.value("server_m", 0);
        orc = oracle::make_local_oracle(ctx.classifier(), ocfg);
    }
    auto [model, rep] = train::train_inversion_blackbox(inv_spec, *orc, aux, tc);
    models::save_inversion(model, ckpt);
    json repj = rep.to_json();
    repj["aux_size"] = aux.size();
    repj["arm"] = name;
    write_json(report, repj);
    mark_stage(ctx, stage, fp);
    sum.stages.push_back({stage, false});
}

void stage_joint(Context& ctx, RunSummary& sum) {
    if (!ctx.cfg.contains("joint") || !ctx.cfg["joint"].value("enabled", true)) return;
    const std::string fp = joint_fp(ctx);
    const std::string c_ckpt = ctx.out + "/joint_classifier.ckpt";
    const std::string i_ckpt = ctx.out + "/joint_inversion.ckpt";
    const std::string report = ctx.out + "/joint_report.json";
    if (stage_current(ctx, "joint", {c_ckpt, i_ckpt, report}, fp)) {
        sum.stages.push_back({"joint", true});
        return;
    }
    ctx.ensure_data();
    auto cls_spec = models::ClassifierSpec::from_json(ctx.cfg["classifier"]);
    auto inv_spec = models::InversionSpec::from_json(ctx.cfg["inversion"]);
    auto tc = train_cfg_of(ctx.cfg["joint"]["train"], ctx.cfg["threads"].get<int>());
    auto result = train::train_joint(cls_spec, inv_spec, *ctx.train_, *ctx.test_, tc);
    models::save_classifier(result.classifier, c_ckpt);
    models::save_inversion(result.inversion, i_ckpt);
    write_json(report, result.report.to_json());
    ctx.joint_classifier_ = std::move(result.classifier);
    ctx.joint_inversion_ = std::move(result.inversion);
    mark_stage(ctx, "joint", fp);
    sum.stages.push_back({"joint", false});
}

// full-split reconstruction error of one model reference at eval-time truncation m
json reconstruction_metrics(Context& ctx, const std::string& model_ref, const std::string& split_name,
                            int eval_m) {
    const data::Dataset& split = ctx.split(split_name);
    models::Classifier* fw = nullptr;
    std::optional<models::InversionModel> arm_model;
    models::InversionModel* g = nullptr;
    if (model_ref == "joint") {
        fw = &ctx.joint_classifier();
        g = &ctx.joint_inversion();
    } else if (model_ref.rfind("arm:", 0) == 0) {
        fw = &ctx.classifier();
        arm_model = ctx.arm_inversion(model_ref.substr(4));
        g = &*arm_model;
    } else {
        throw ValidationError("reconstruction metrics need arm:<name> or joint, got '" + model_ref + "'");
    }
    const int k = fw->spec().num_classes;
    const int m = eval_m == 0 ? k : eval_m;

    oracle::OracleConfig ocfg;
    ocfg.server_m = m;
    oracle::LocalOracle orc(*fw, ocfg);

    const int n = static_cast<int>(split.size());
    const int bs = 256;
    double sum_pp = 0.0;
    for (int start = 0; start < n; start += bs) {
        std::vector<int> idx;
        for (int i = start; i < std::min(start + bs, n); ++i) idx.push_back(i);
        Tensor truth = split.batch(idx);
        Mat observed = orc.query(truth);
        attacks::AttackResult recon = attacks::reconstruct(*g, observed);
        sum_pp += eval::reconstruction_mse(truth, recon.images, "per-pixel-mean") *
                  static_cast<double>(idx.size());
    }
    const double per_pixel = sum_pp / n;
    const double per_image = per_pixel * split.height * split.width;
    return json{{"recon_mse_per_pixel_mean", per_pixel},
                {"recon_mse_per_image_sum", per_image},
                {"m", m},
                {"samples", n}};
}

void stage_attack_reconstruct(Context& ctx, RunSummary& sum) {
    if (!ctx.cfg.contains("attacks") || !ctx.cfg["attacks"].contains("reconstruct")) return;
    const json& rc = ctx.cfg["attacks"]["reconstruct"];
    const std::string fp = config::fingerprint(json{{"up", classifier_fp(ctx)}, {"rc", rc}, {"joint", joint_fp(ctx)}});
    const std::string outjson = ctx.out + "/attack_reconstruct.json";
    if (stage_current(ctx, "attack:reconstruct", {outjson}, fp)) {
        sum.stages.push_back({"attack:reconstruct", true});
        return;
    }
    ctx.ensure_data();
    const std::string split_name = rc.value("split", "test");
    const data::Dataset& split = ctx.split(split_name);
    const int count = std::min<int>(rc.value("count", 8), static_cast<int>(split.size()));
    std::vector<int> sample_idx;
    for (int j = 0; j < count; ++j) {
        sample_idx.push_back(static_cast<int>(static_cast<std::int64_t>(j) * split.size() / count));
    }
    Tensor truth = split.batch(sample_idx);

    const auto arms = rc.value("arms", std::vector<std::string>{});
    auto eval_ms = rc.value("eval_m", std::vector<int>{0});
    json results = json::array();
    for (int m_raw : eval_ms) {
        std::vector<Tensor> rows{truth};
        json grid_rows = json::array();
        grid_rows.push_back("truth");
        for (const auto& arm_name : arms) {
            models::Classifier* fw = nullptr;
            std::optional<models::InversionModel> arm_model;
            models::InversionModel* g = nullptr;
            if (arm_name == "joint") {
                fw = &ctx.joint_classifier();
                g = &ctx.joint_inversion();
            } else {
                fw = &ctx.classifier();
                arm_model = ctx.arm_inversion(arm_name);
                g = &*arm_model;
            }
            const int k = fw->spec().num_classes;
            const int m = m_raw == 0 ? k : m_raw;
            oracle::OracleConfig ocfg;
            ocfg.server_m = m;
            oracle::LocalOracle orc(*fw, ocfg);
            Mat observed = orc.query(truth);
            auto recon = attacks::reconstruct(*g, observed);
            rows.push_back(recon.images);
            grid_rows.push_back(arm_name);

            json per_sample = json::array();
            for (int i = 0; i < truth.n; ++i) {
                Tensor t(1, 1, truth.h, truth.w), r(1, 1, truth.h, truth.w);
                std::copy(truth.sample(i), truth.sample(i) + truth.per_sample(), t.data());
                std::copy(recon.images.sample(i), recon.images.sample(i) + r.per_sample(), r.data());
                per_sample.push_back(eval::reconstruction_mse(t, r, "per-pixel-mean"));
            }
            results.push_back(json{{"arm", arm_name},
                                   {"m", m},
                                   {"split", split_name},
                                   {"per_sample_mse", per_sample},
                                   {"sample_indices", sample_idx}});
        }
        const std::string png = ctx.out + "/grids/reconstruct_" + split_name + "_m" +
                                std::to_string(m_raw == 0 ? ctx.k() : m_raw) + ".png";
        io::write_grid_png(png, rows);
        results.push_back(json{{"grid", png}, {"rows", grid_rows}, {"m", m_raw == 0 ? ctx.k() : m_raw}});
    }
    write_json(outjson, results);
    mark_stage(ctx, "attack:reconstruct", fp);
    sum.stages.push_back({"attack:reconstruct", false});
}

void stage_attack_classinfer(Context& ctx, RunSummary& sum) {
    if (!ctx.cfg.contains("attacks") || !ctx.cfg["attacks"].contains("classinfer")) return;
    const json& ci = ctx.cfg["attacks"]["classinfer"];
    const std::string fp = config::fingerprint(json{{"up", classifier_fp(ctx)}, {"ci", ci}});
    const std::string outjson = ctx.out + "/attack_classinfer.json";
    if (stage_current(ctx, "attack:classinfer", {outjson}, fp)) {
        sum.stages.push_back({"attack:classinfer", true});
        return;
    }
    auto inv = ctx.arm_inversion(ci.value("arm", "m1"));
    const float conf = ci.value("confidence", 1.0f);
    auto result = attacks::infer_classes(inv, ctx.k(), conf);
    const double asr = eval::attack_success_rate(ctx.classifier(), result);
    const std::string png = ctx.out + "/grids/classinfer.png";
    io::write_grid_png(png, {result.images});
    json j{{"attack_success_rate", asr},
           {"confidence", conf},
           {"k", ctx.k()},
           {"grid", png},
           {"meta", result.meta}};
    write_json(outjson, j);
    mark_stage(ctx, "attack:classinfer", fp);
    sum.stages.push_back({"attack:classinfer", false});
}

void stage_attack_mia(Context& ctx, RunSummary& sum) {
    if (!ctx.cfg.contains("attacks") || !ctx.cfg["attacks"].contains("mia")) return;
    const json& mj = ctx.cfg["attacks"]["mia"];
    const std::string fp = config::fingerprint(json{{"up", classifier_fp(ctx)}, {"mia", mj}});
    const std::string outjson = ctx.out + "/attack_mia.json";
    if (stage_current(ctx, "attack:mia", {outjson}, fp)) {
        sum.stages.push_back({"attack:mia", true});
        return;
    }
    auto prior = attacks::MiaPriorConfig::from_json(mj);
    std::vector<int> targets;
    if (!mj.contains("targets") || mj["targets"] == "all") {
        for (int c = 0; c < ctx.k(); ++c) targets.push_back(c);
    } else {
        targets = mj["targets"].get<std::vector<int>>();
    }
    auto& fw = ctx.classifier();
    Tensor grid_row(static_cast<int>(targets.size()), 1, fw.spec().height, fw.spec().width);
    json per_target = json::array();
    attacks::AttackResult all;
    all.images = grid_row;
    for (std::size_t t = 0; t < targets.size(); ++t) {
        auto res = attacks::mia_invert(fw, targets[t], prior, ctx.seed() + targets[t]);
        std::copy(res.images.data(), res.images.data() + res.images.size(), all.images.sample(static_cast<int>(t)));
        all.target_classes.push_back(targets[t]);
        per_target.push_back(json{{"target", targets[t]},
                                  {"confidence", res.meta["confidence"]},
                                  {"loss_initial", res.meta["loss_initial"]},
                                  {"loss_final", res.meta["loss_final"]}});
    }
    const double asr = eval::attack_success_rate(fw, all);
    const std::string png = ctx.out + "/grids/mia.png";
    io::write_grid_png(png, {all.images});
    write_json(outjson, json{{"attack_success_rate", asr},
                             {"per_target", per_target},
                             {"grid", png},
                             {"prior", prior.to_json()}});
    mark_stage(ctx, "attack:mia", fp);
    sum.stages.push_back({"attack:mia", false});
}

void stage_report(Context& ctx, RunSummary& sum) {
    const std::string fp = config::fingerprint(json{{"cfg", ctx.cfg}, {"c", classifier_fp(ctx)}, {"j", joint_fp(ctx)}});
    const std::string metrics_path = ctx.out + "/metrics.json";
    if (stage_current(ctx, "report", {metrics_path, ctx.out + "/report.md"}, fp)) {
        sum.stages.push_back({"report", true});
        return;
    }
    std::vector<eval::MetricsReport> reports;
    const std::string experiment = ctx.cfg["experiment"].get<std::string>();
    const std::string cfg_fp = config::fingerprint(ctx.cfg);

    if (ctx.cfg.contains("eval")) {
        const json& ev = ctx.cfg["eval"];
        if (ev.contains("accuracy")) {
            for (const auto& item : ev["accuracy"]) {
                const std::string model = item.value("model", "classifier");
                const std::string split = item.value("split", "test");
                auto& fw = model == "joint" ? ctx.joint_classifier() : ctx.classifier();
                eval::MetricsReport r;
                r.experiment = experiment;
                r.split = split;
                r.seed = ctx.seed();
                r.config_fingerprint = cfg_fp;
                r.values = {{"accuracy", eval::accuracy(fw, ctx.split(split))}};
                r.conditions = {{"metric", "accuracy"}, {"model", model}};
                reports.push_back(std::move(r));
            }
        }
        if (ev.contains("reconstruction")) {
            for (const auto& item : ev["reconstruction"]) {
                const std::string model = item.value("model", "joint");
                const std::string split = item.value("split", "test");
                const int m = item.value("m", 0);
                eval::MetricsReport r;
                r.experiment = experiment;
                r.split = split;
                r.seed = ctx.seed();
                r.config_fingerprint = cfg_fp;
                r.values = reconstruction_metrics(ctx, model, split, m);
                r.conditions = {{"metric", "reconstruction"}, {"model", model}};
                reports.push_back(std::move(r));
            }
        }
    }
    // fold in attack artifacts when they exist
    for (const auto& [name, file] : std::vector<std::pair<std::string, std::string>>{
             {"reconstruct", "attack_reconstruct.json"},
             {"classinfer", "attack_classinfer.json"},
             {"mia", "attack_mia.json"}}) {
        const std::string path = ctx.out + "/" + file;
        if (auto text = read_text(path)) {
            eval::MetricsReport r;
            r.experiment = experiment;
            r.split = "attack";
            r.seed = ctx.seed();
            r.config_fingerprint = cfg_fp;
            r.values = json{{"artifact", path}};
            json parsed = json::parse(*text);
            if (parsed.is_object() && parsed.contains("attack_success_rate")) {
                r.values["attack_success_rate"] = parsed["attack_success_rate"];
            }
            r.conditions = {{"metric", "attack"}, {"attack", name}};
            reports.push_back(std::move(r));
        }
    }
    if (reports.empty()) {
        eval::MetricsReport r;
        r.experiment = experiment;
        r.split = "none";
        r.seed = ctx.seed();
        r.config_fingerprint = cfg_fp;
        r.values = json::object();
        r.conditions = {{"metric", "none"}};
        reports.push_back(std::move(r));
    }
    eval::emit_report(reports, ctx.out, "table");
    {
        json arr = json::array();
        for (const auto& r : reports) arr.push_back(r.to_json());
        write_json(metrics_path, arr);
    }
    mark_stage(ctx, "report", fp);
    sum.stages.push_back({"report", false});
}

bool wanted(const std::vector<std::string>& only, const std::string& stage) {
    if (only.empty()) return true;
    for (const auto& o : only) {
        if (o == stage) return true;
        if (o == "inversion" && stage.rfind("inversion:", 0) == 0) return true;
    }
    return false;
}

}  // namespace

bool RunSummary::ran(const std::string& name) const {
    for (const auto& s : stages) {
        if (s.name == name) return !s.skipped;
    }
    return false;
}

RunSummary run(const json& cfg_raw, const std::vector<std::string>& only) {
    json resolved = config::resolve(cfg_raw);
    Context ctx(std::move(resolved));
    RunSummary sum;
    sum.output_dir = ctx.out;
    write_json(ctx.out + "/resolved_config.json", ctx.cfg);
    nn::set_threads(ctx.cfg["threads"].get<int>());

    if (wanted(only, "data")) stage_data(ctx, sum);
    if (wanted(only, "classifier")) stage_classifier(ctx, sum);
    if (ctx.cfg.contains("inversion_arms")) {
        for (const auto& arm : ctx.cfg["inversion_arms"]) {
            const std::string stage = "inversion:" + arm["name"].get<std::string>();
            if (wanted(only, stage)) stage_inversion_arm(ctx, arm, sum);
        }
    }
    if (wanted(only, "joint")) stage_joint(ctx, sum);
    if (wanted(only, "attack:reconstruct")) stage_attack_reconstruct(ctx, sum);
    if (wanted(only, "attack:classinfer")) stage_attack_classinfer(ctx, sum);
    if (wanted(only, "attack:mia")) stage_attack_mia(ctx, sum);
    if (wanted(only, "report")) stage_report(ctx, sum);
    return sum;
}

}  // namespace predinv::runner
