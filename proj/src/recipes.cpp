#include "predinv/recipes.hpp"

#include "predinv/errors.hpp"

namespace predinv::recipes {

using nlohmann::json;

namespace {

// Joint-vs-blackbox comparison (the quantitative table): one classifier on a
// 50/50 split, a blackbox decoder trained on the classifier's own training
// data, and a jointly trained pair under the identical protocol.
const char* kTableII = R"({
  "experiment": "tableII-mnist",
  "seed": 7,
  "output_dir": "runs/tableII-mnist",
  "data": {"dataset": "mnist", "resolution": [32, 32], "train_fraction": 0.5},
  "classifier": {"blocks": 3, "num_classes": 10, "channels": [16, 32, 64], "fc_dims": [128, 10]},
  "inversion": {"blocks": 4, "input_dim": 10, "channels": [64, 32, 16, 1]},
  "train_classifier": {"epochs": 4, "batch_size": 128, "learning_rate": 1e-3},
  "inversion_arms": [
    {"name": "blackbox", "aux": {"kind": "victim-train"},
     "train": {"epochs": 6, "batch_size": 128, "learning_rate": 1e-3, "m": 0}}
  ],
  "joint": {"enabled": true,
            "train": {"epochs": 6, "batch_size": 128, "learning_rate": 1e-3, "m": 0, "joint_weight": 1.0}},
  "eval": {
    "accuracy": [{"model": "classifier", "split": "test"}, {"model": "joint", "split": "test"}],
    "reconstruction": [{"model": "arm:blackbox", "split": "test", "m": 0},
                        {"model": "joint", "split": "test", "m": 0}]
  },
  "attacks": {"reconstruct": {"arms": ["blackbox", "joint"], "split": "test", "eval_m": [0], "count": 10}}
})";

// Truncation study: decoders trained with and without truncation, inverted
// against victim predictions truncated to m in {3,5,10}.
const char* kFig7 = R"({
  "experiment": "fig7-truncation-mnist",
  "seed": 7,
  "output_dir": "runs/fig7-truncation-mnist",
  "data": {"dataset": "mnist", "resolution": [32, 32], "train_fraction": 0.5},
  "classifier": {"blocks": 3, "num_classes": 10, "channels": [16, 32, 64], "fc_dims": [128, 10]},
  "inversion": {"blocks": 4, "input_dim": 10, "channels": [64, 32, 16, 1]},
  "train_classifier": {"epochs": 4, "batch_size": 128, "learning_rate": 1e-3},
  "inversion_arms": [
    {"name": "trunc-m3", "aux": {"kind": "same", "source": "mnist"},
     "train": {"epochs": 6, "batch_size": 128, "learning_rate": 1e-3, "m": 3}},
    {"name": "notrunc", "aux": {"kind": "same", "source": "mnist"},
     "train": {"epochs": 6, "batch_size": 128, "learning_rate": 1e-3, "m": 0}}
  ],
  "eval": {
    "accuracy": [{"model": "classifier", "split": "test"}],
    "reconstruction": [{"model": "arm:trunc-m3", "split": "test", "m": 3},
                        {"model": "arm:notrunc", "split": "test", "m": 3}]
  },
  "attacks": {"reconstruct": {"arms": ["trunc-m3", "notrunc"], "split": "test",
                               "eval_m": [3, 5, 10], "count": 10}}
})";

// Auxiliary-distribution study on a five-class classifier: same vs generic
// (the other five digits) vs distinct (grayscale CIFAR-10) training sets for
// the decoder, evaluated on the classifier's training data.
const char* kFig45 = R"({
  "experiment": "fig45-auxiliary-mnist",
  "seed": 7,
  "output_dir": "runs/fig45-auxiliary-mnist",
  "data": {"dataset": "mnist", "resolution": [32, 32], "train_fraction": 0.8, "class_subset": 5},
  "classifier": {"blocks": 3, "num_classes": 5, "channels": [16, 32, 64], "fc_dims": [128, 5]},
  "inversion": {"blocks": 4, "input_dim": 5, "channels": [64, 32, 16, 1]},
  "train_classifier": {"epochs": 3, "batch_size": 128, "learning_rate": 1e-3},
  "inversion_arms": [
    {"name": "same", "aux": {"kind": "same", "source": "mnist"},
     "train": {"epochs": 6, "batch_size": 128, "learning_rate": 1e-3, "m": 0}},
    {"name": "generic", "aux": {"kind": "generic", "source": "mnist"},
     "train": {"epochs": 6, "batch_size": 128, "learning_rate": 1e-3, "m": 0}},
    {"name": "distinct", "aux": {"kind": "distinct", "source": "cifar10", "fraction": 0.5},
     "train": {"epochs": 6, "batch_size": 128, "learning_rate": 1e-3, "m": 0}}
  ],
  "eval": {
    "accuracy": [{"model": "classifier", "split": "test"}],
    "reconstruction": [{"model": "arm:same", "split": "train", "m": 0},
                        {"model": "arm:generic", "split": "train", "m": 0},
                        {"model": "arm:distinct", "split": "train", "m": 0}]
  },
  "attacks": {"reconstruct": {"arms": ["same", "generic", "distinct"], "split": "train",
                               "eval_m": [0], "count": 10}}
})";

// Training-class inference: decoder trained in the m=1 regime, driven by
// one-hot vectors at attack time.
const char* kClassInfer = R"({
  "experiment": "classinfer-mnist",
  "seed": 7,
  "output_dir": "runs/classinfer-mnist",
  "data": {"dataset": "mnist", "resolution": [32, 32], "train_fraction": 0.5},
  "classifier": {"blocks": 3, "num_classes": 10, "channels": [16, 32, 64], "fc_dims": [128, 10]},
  "inversion": {"blocks": 4, "input_dim": 10, "channels": [64, 32, 16, 1]},
  "train_classifier": {"epochs": 4, "batch_size": 128, "learning_rate": 1e-3},
  "inversion_arms": [
    {"name": "m1", "aux": {"kind": "same", "source": "mnist"},
     "train": {"epochs": 6, "batch_size": 128, "learning_rate": 1e-3, "m": 1}}
  ],
  "eval": {"accuracy": [{"model": "classifier", "split": "test"}]},
  "attacks": {"classinfer": {"arm": "m1", "confidence": 1.0}}
})";

// Optimization-based baseline under image priors.
const char* kMia = R"({
  "experiment": "mia-mnist",
  "seed": 7,
  "output_dir": "runs/mia-mnist",
  "data": {"dataset": "mnist", "resolution": [32, 32], "train_fraction": 0.8},
  "classifier": {"blocks": 3, "num_classes": 10, "channels": [16, 32, 64], "fc_dims": [128, 10]},
  "train_classifier": {"epochs": 4, "batch_size": 128, "learning_rate": 1e-3},
  "eval": {"accuracy": [{"model": "classifier", "split": "test"}]},
  "attacks": {"mia": {"targets": "all", "steps": 1000, "step_size": 0.1,
                       "alpha": 6.0, "alpha_weight": 1e-5, "tv_beta": 2.0, "tv_weight": 1e-4}}
})";

// Minutes-scale end-to-end exercise of every stage; also the reproducibility
// probe (rerun it into two directories and diff metrics.json).
const char* kSmoke = R"({
  "experiment": "smoke-mnist",
  "seed": 11,
  "output_dir": "runs/smoke-mnist",
  "data": {"dataset": "mnist", "resolution": [32, 32], "train_fraction": 0.5, "class_subset": 3},
  "classifier": {"blocks": 3, "num_classes": 3, "channels": [8, 16, 32], "fc_dims": [64, 3]},
  "inversion": {"blocks": 4, "input_dim": 3, "channels": [32, 16, 8, 1]},
  "train_classifier": {"epochs": 1, "batch_size": 128, "learning_rate": 1e-3},
  "inversion_arms": [
    {"name": "blackbox", "aux": {"kind": "same", "source": "mnist", "fraction": 0.2},
     "train": {"epochs": 1, "batch_size": 128, "learning_rate": 1e-3, "m": 2}}
  ],
  "eval": {
    "accuracy": [{"model": "classifier", "split": "test"}],
    "reconstruction": [{"model": "arm:blackbox", "split": "test", "m": 2}]
  },
  "attacks": {
    "reconstruct": {"arms": ["blackbox"], "split": "test", "eval_m": [2], "count": 6},
    "mia": {"targets": [0], "steps": 50, "step_size": 0.1}
  }
})";

}  // namespace

std::vector<std::string> names() {
    return {"tableII-mnist", "fig7-truncation-mnist", "fig45-auxiliary-mnist",
            "classinfer-mnist", "mia-mnist", "smoke-mnist"};
}

json get(const std::string& name) {
    if (name == "tableII-mnist") return json::parse(kTableII);
    if (name == "fig7-truncation-mnist") return json::parse(kFig7);
    if (name == "fig45-auxiliary-mnist") return json::parse(kFig45);
    if (name == "classinfer-mnist") return json::parse(kClassInfer);
    if (name == "mia-mnist") return json::parse(kMia);
    if (name == "smoke-mnist") return json::parse(kSmoke);
    throw ValidationError("unknown recipe '" + name + "'; known: tableII-mnist, fig7-truncation-mnist, "
                          "fig45-auxiliary-mnist, classinfer-mnist, mia-mnist, smoke-mnist");
}

}  // namespace predinv::recipes
