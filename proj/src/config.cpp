#include "predinv/config.hpp"

#include "predinv/attacks/attacks.hpp"
#include "predinv/data/dataset.hpp"
#include "predinv/errors.hpp"
#include "predinv/models/models.hpp"
#include "predinv/rng.hpp"
#include "predinv/train/train.hpp"

#include <fstream>
#include <sstream>

namespace predinv::config {

json load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        // map the byte offset to line:column
        std::size_t line = 1, col = 1;
        for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        throw ValidationError(path + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " +
                              e.what());
    }
}

namespace {

void need(std::vector<Diagnostic>& diags, const json& j, const std::string& path, const char* key,
          const char* kind) {
    if (!j.contains(key)) diags.push_back({path + key, std::string("missing required ") + kind});
}

bool is_known_dataset(const std::string& name) {
    return name == "mnist" || name == "cifar10" || name == "facescrub" || name == "celeba";
}

struct Shape {
    int k = 0, height = 0, width = 0;
};

void check_train_cfg(std::vector<Diagnostic>& diags, const json& j, const std::string& path, int k) {
    try {
        auto cfg = train::TrainConfig::from_json(j);
        if (cfg.m > k) diags.push_back({path + ".m", "m exceeds the prediction dimension k"});
    } catch (const Error& e) {
        diags.push_back({path, e.what()});
    }
}

void check_aux(std::vector<Diagnostic>& diags, const json& j, const std::string& path) {
    const std::string kind = j.value("kind", "");
    // victim-train is the developer's control arm: the classifier's own training
    // split, used unlabeled (the blackbox column of the joint-vs-blackbox table)
    if (kind != "same" && kind != "generic" && kind != "distinct" && kind != "victim-train") {
        diags.push_back({path + ".kind", "must be same, generic, distinct or victim-train"});
    }
    if (kind != "victim-train" &&
        (!j.contains("source") || !j["source"].is_string() || !is_known_dataset(j["source"]))) {
        diags.push_back({path + ".source", "must name a registered dataset"});
    }
    const double f = j.value("fraction", 1.0);
    if (!(f > 0.0 && f <= 1.0)) diags.push_back({path + ".fraction", "must be in (0,1]"});
}

}  // namespace

std::vector<Diagnostic> validate(const json& cfg) {
    std::vector<Diagnostic> diags;
    if (!cfg.is_object()) {
        diags.push_back({"", "config root must be a JSON object"});
        return diags;
    }
    need(diags, cfg, "", "experiment", "string");
    need(diags, cfg, "", "output_dir", "string");
    need(diags, cfg, "", "data", "object");
    need(diags, cfg, "", "classifier", "object");
    if (!diags.empty()) return diags;

    const json& data = cfg["data"];
    const std::string dataset = data.value("dataset", "");
    if (!is_known_dataset(dataset)) diags.push_back({"data.dataset", "unknown dataset id '" + dataset + "'"});
    const auto res = data.value("resolution", std::vector<int>{32, 32});
    if (res.size() != 2 || !((res[0] == 32 && res[1] == 32) || (res[0] == 64 && res[1] == 64))) {
        diags.push_back({"data.resolution", "must be [32,32] or [64,64]"});
    }
    const double tf = data.value("train_fraction", 0.5);
    if (!(tf > 0.0 && tf < 1.0)) diags.push_back({"data.train_fraction", "must be in (0,1)"});
    const int subset = data.value("class_subset", 0);
    if (subset < 0) diags.push_back({"data.class_subset", "must be >= 0"});

    Shape shape;
    try {
        auto spec = models::ClassifierSpec::from_json(cfg["classifier"]);
        shape.k = spec.num_classes;
        shape.height = spec.height;
        shape.width = spec.width;
        if (res.size() == 2 && (spec.height != res[0] || spec.width != res[1])) {
            diags.push_back({"classifier", "resolution disagrees with data.resolution"});
        }
        if (subset > 0 && spec.num_classes != subset) {
            diags.push_back({"classifier.num_classes", "must equal data.class_subset when a subset is used"});
        }
    } catch (const Error& e) {
        diags.push_back({"classifier", e.what()});
    }

    if (cfg.contains("inversion")) {
        try {
            auto inv = models::InversionSpec::from_json(cfg["inversion"]);
            if (shape.k && inv.input_dim != shape.k) {
                diags.push_back({"inversion.input_dim", "must equal classifier.num_classes"});
            }
            if (shape.k && (inv.height != shape.height || inv.width != shape.width)) {
                diags.push_back({"inversion", "resolution disagrees with the classifier"});
            }
        } catch (const Error& e) {
            diags.push_back({"inversion", e.what()});
        }
    }

    if (cfg.contains("train_classifier")) {
        check_train_cfg(diags, cfg["train_classifier"], "train_classifier", shape.k);
    }

    if (cfg.contains("oracle")) {
        const int sm = cfg["oracle"].value("server_m", 0);
        if (sm < 0 || (shape.k && sm > shape.k)) diags.push_back({"oracle.server_m", "must be in [0, k]"});
        if (cfg["oracle"].value("max_batch", 256) < 1) diags.push_back({"oracle.max_batch", "must be >= 1"});
    }

    std::vector<std::string> arm_names;
    if (cfg.contains("inversion_arms")) {
        if (!cfg["inversion_arms"].is_array()) {
            diags.push_back({"inversion_arms", "must be an array"});
        } else {
            int i = 0;
            for (const auto& arm : cfg["inversion_arms"]) {
                const std::string path = "inversion_arms[" + std::to_string(i) + "]";
                const std::string name = arm.value("name", "");
                if (name.empty()) {
                    diags.push_back({path + ".name", "missing arm name"});
                } else if (std::find(arm_names.begin(), arm_names.end(), name) != arm_names.end()) {
                    diags.push_back({path + ".name", "duplicate arm name '" + name + "'"});
                } else {
                    arm_names.push_back(name);
                }
                if (!arm.contains("aux")) {
                    diags.push_back({path + ".aux", "missing auxiliary spec"});
                } else {
                    check_aux(diags, arm["aux"], path + ".aux");
                }
                if (arm.contains("train")) check_train_cfg(diags, arm["train"], path + ".train", shape.k);
                const int sm = arm.value("server_m", 0);
                if (sm < 0 || (shape.k && sm > shape.k)) diags.push_back({path + ".server_m", "must be in [0, k]"});
                ++i;
            }
        }
    }

    if (cfg.contains("joint") && cfg["joint"].value("enabled", true) && cfg["joint"].contains("train")) {
        check_train_cfg(diags, cfg["joint"]["train"], "joint.train", shape.k);
    }

    auto check_model_ref = [&](const std::string& ref, const std::string& path) {
        if (ref == "classifier" || ref == "joint") return;
        if (ref.rfind("arm:", 0) == 0) {
            const std::string name = ref.substr(4);
            if (std::find(arm_names.begin(), arm_names.end(), name) == arm_names.end()) {
                diags.push_back({path, "references unknown arm '" + name + "'"});
            }
            return;
        }
        diags.push_back({path, "must be classifier, joint or arm:<name>"});
    };

    if (cfg.contains("eval")) {
        const json& ev = cfg["eval"];
        if (ev.contains("accuracy")) {
            int i = 0;
            for (const auto& item : ev["accuracy"]) {
                const std::string path = "eval.accuracy[" + std::to_string(i++) + "]";
                const std::string model = item.value("model", "classifier");
                if (model != "classifier" && model != "joint") {
                    diags.push_back({path + ".model", "must be classifier or joint"});
                }
            }
        }
        if (ev.contains("reconstruction")) {
            int i = 0;
            for (const auto& item : ev["reconstruction"]) {
                const std::string path = "eval.reconstruction[" + std::to_string(i++) + "]";
                check_model_ref(item.value("model", ""), path + ".model");
                const int m = item.value("m", 0);
                if (m < 0 || (shape.k && m > shape.k)) diags.push_back({path + ".m", "must be in [0, k]"});
            }
        }
    }

    if (cfg.contains("attacks")) {
        const json& at = cfg["attacks"];
        if (at.contains("reconstruct")) {
            const json& rc = at["reconstruct"];
            for (const auto& arm : rc.value("arms", std::vector<std::string>{})) {
                check_model_ref(arm.rfind("arm:", 0) == 0 || arm == "joint" ? arm : "arm:" + arm,
                                "attacks.reconstruct.arms");
            }
            for (int m : rc.value("eval_m", std::vector<int>{})) {
                if (m < 0 || (shape.k && m > shape.k)) {
                    diags.push_back({"attacks.reconstruct.eval_m", "values must be in [0, k]"});
                }
            }
            const std::string split = rc.value("split", "test");
            if (split != "train" && split != "test") {
                diags.push_back({"attacks.reconstruct.split", "must be train or test"});
            }
        }
        if (at.contains("classinfer")) {
            const std::string arm = at["classinfer"].value("arm", "");
            if (!arm.empty()) check_model_ref("arm:" + arm, "attacks.classinfer.arm");
            const double c = at["classinfer"].value("confidence", 1.0);
            if (!(c > 0.0 && c <= 1.0)) diags.push_back({"attacks.classinfer.confidence", "must be in (0,1]"});
        }
        if (at.contains("mia")) {
            try {
                attacks::MiaPriorConfig::from_json(at["mia"]);
            } catch (const Error& e) {
                diags.push_back({"attacks.mia", e.what()});
            }
        }
    }
    return diags;
}

json resolve(const json& cfg) {
    auto diags = validate(cfg);
    if (!diags.empty()) {
        std::string msg = "config validation failed:";
        for (const auto& d : diags) msg += "\n  " + d.path + ": " + d.message;
        throw ValidationError(msg);
    }
    json r = cfg;
    r["seed"] = r.value("seed", 0);
    r["threads"] = r.value("threads", 0);

    json& data = r["data"];
    if (data.value("cache_dir", "").empty()) data["cache_dir"] = data::default_data_dir();
    if (!data.contains("resolution")) data["resolution"] = {32, 32};
    if (!data.contains("train_fraction")) data["train_fraction"] = 0.5;
    if (!data.contains("class_subset")) data["class_subset"] = 0;
    if (!data.contains("save_containers")) data["save_containers"] = false;

    r["classifier"] = models::ClassifierSpec::from_json(r["classifier"]).to_json();
    if (r.contains("inversion")) {
        r["inversion"] = models::InversionSpec::from_json(r["inversion"]).to_json();
    }

    const std::uint64_t seed = r["seed"].get<std::uint64_t>();
    auto fill_train = [&](json& t, const std::string& role) {
        auto tc = train::TrainConfig::from_json(t);
        if (!t.contains("seed")) tc.seed = fnv1a(role, seed);
        json out = tc.to_json();
        out["quiet"] = t.value("quiet", false);
        t = out;
    };
    if (r.contains("train_classifier")) fill_train(r["train_classifier"], "train-classifier");
    if (r.contains("inversion_arms")) {
        for (auto& arm : r["inversion_arms"]) {
            if (!arm.contains("train")) arm["train"] = json::object();
            fill_train(arm["train"], "arm-" + arm["name"].get<std::string>());
            if (!arm.contains("server_m")) arm["server_m"] = 0;
            json& aux = arm["aux"];
            if (!aux.contains("source")) aux["source"] = "";
            if (!aux.contains("fraction")) aux["fraction"] = 1.0;
            if (!aux.contains("excluded_classes")) aux["excluded_classes"] = json::array();
        }
    }
    if (r.contains("joint")) {
        if (!r["joint"].contains("enabled")) r["joint"]["enabled"] = true;
        if (!r["joint"].contains("train")) r["joint"]["train"] = json::object();
        fill_train(r["joint"]["train"], "joint");
    }
    if (r.contains("attacks") && r["attacks"].contains("mia")) {
        r["attacks"]["mia"] = attacks::MiaPriorConfig::from_json(r["attacks"]["mia"]).to_json();
    }
    if (r.contains("oracle")) {
        if (!r["oracle"].contains("server_m")) r["oracle"]["server_m"] = 0;
        if (!r["oracle"].contains("max_batch")) r["oracle"]["max_batch"] = 256;
    }
    return r;
}

std::string fingerprint(const json& j) {
    const std::uint64_t h = fnv1a(j.dump());
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace predinv::config
