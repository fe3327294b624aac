#include "predinv/train/train.hpp"

#include "predinv/errors.hpp"
#include "predinv/eval/metrics.hpp"
#include "predinv/nn/optim.hpp"
#include "predinv/rng.hpp"
#include "predinv/trunc.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace predinv::train {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::vector<std::vector<int>> make_batches(std::size_t n, int batch_size, Rng& rng) {
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    std::vector<std::vector<int>> batches;
    for (std::size_t start = 0; start < n; start += batch_size) {
        const std::size_t end = std::min(n, start + batch_size);
        if (end - start < 2) break;  // batch statistics need at least two samples
        batches.emplace_back(order.begin() + start, order.begin() + end);
    }
    return batches;
}

double weight_penalty(const std::vector<nn::ParamView>& params) {
    double sq = 0.0;
    for (const auto& p : params) {
        if (p.name.size() < 2 || p.name.substr(p.name.size() - 2) != ".W") continue;
        for (std::size_t j = 0; j < p.size; ++j) sq += static_cast<double>(p.w[j]) * p.w[j];
    }
    return sq;
}

void add_weight_penalty_grad(std::vector<nn::ParamView>& params, float lambda) {
    if (lambda == 0.0f) return;
    for (auto& p : params) {
        if (p.name.size() < 2 || p.name.substr(p.name.size() - 2) != ".W") continue;
        for (std::size_t j = 0; j < p.size; ++j) p.g[j] += 2.0f * lambda * p.w[j];
    }
}

void require_finite(double loss, const char* regime, int epoch, std::size_t batch) {
    if (!std::isfinite(loss)) {
        throw TrainingError(std::string(regime) + ": non-finite loss at epoch " + std::to_string(epoch) +
                            ", batch " + std::to_string(batch) + " (diverged; lower the learning rate)");
    }
}

void check_descent(const std::vector<double>& losses, const char* regime) {
    if (losses.size() < 3) return;
    for (int e = 0; e < 2; ++e) {
        if (losses[e + 1] > losses[e] * 1.001 + 1e-9) {
            throw TrainingError(std::string(regime) + ": training loss rose over the first epochs (" +
                                std::to_string(losses[e]) + " -> " + std::to_string(losses[e + 1]) +
                                " at epoch " + std::to_string(e + 2) + "); aborting");
        }
    }
}

void progress_line(const TrainConfig& cfg, const char* regime, int epoch, double cls, double rec,
                   double acc, double secs) {
    if (cfg.quiet) return;
    json j{{"regime", regime}, {"epoch", epoch}, {"seconds", secs}};
    if (cls == cls) j["cls_loss"] = cls;
    if (rec >= 0.0) j["recon_loss"] = rec;
    if (acc >= 0.0) j["test_accuracy"] = acc;
    std::puts(j.dump().c_str());
    std::fflush(stdout);
}

}  // namespace

void TrainConfig::validate() const {
    if (epochs < 1) throw ValidationError("train: epochs must be >= 1");
    if (batch_size < 1) throw ValidationError("train: batch_size must be >= 1");
    if (!(learning_rate > 0.0f)) throw ValidationError("train: learning_rate must be > 0");
    if (weight_decay < 0.0f) throw ValidationError("train: weight_decay must be >= 0");
    if (joint_weight < 0.0f) throw ValidationError("train: joint_weight must be >= 0");
    if (m < 0) throw ValidationError("train: m must be >= 1 (or 0 for full vectors)");
    if (optimizer != "adam" && optimizer != "sgd") throw ValidationError("train: optimizer must be adam or sgd");
    if (recon_reduction != "per-pixel-mean" && recon_reduction != "per-image-sum") {
        throw ValidationError("train: recon_reduction must be per-pixel-mean or per-image-sum");
    }
}

json TrainConfig::to_json() const {
    return json{{"epochs", epochs},
                {"batch_size", batch_size},
                {"learning_rate", learning_rate},
                {"weight_decay", weight_decay},
                {"seed", seed},
                {"m", m},
                {"joint_weight", joint_weight},
                {"optimizer", optimizer},
                {"rescale_inputs", rescale_inputs},
                {"recon_reduction", recon_reduction},
                {"check_descent", check_descent},
                {"threads", threads}};
}

TrainConfig TrainConfig::from_json(const json& j) {
    TrainConfig c;
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.seed = j.value("seed", c.seed);
    c.m = j.value("m", c.m);
    c.joint_weight = j.value("joint_weight", c.joint_weight);
    c.optimizer = j.value("optimizer", c.optimizer);
    c.rescale_inputs = j.value("rescale_inputs", c.rescale_inputs);
    c.recon_reduction = j.value("recon_reduction", c.recon_reduction);
    c.check_descent = j.value("check_descent", c.check_descent);
    c.quiet = j.value("quiet", c.quiet);
    c.threads = j.value("threads", c.threads);
    c.validate();
    return c;
}

json TrainReport::to_json() const {
    return json{{"cls_loss", cls_loss},
                {"recon_loss", recon_loss},
                {"test_accuracy", test_accuracy},
                {"wall_seconds", wall_seconds},
                {"final_metrics", final_metrics}};
}

double classifier_loss(models::Classifier& model, const Tensor& images, const std::vector<int>& labels,
                       float weight_decay, bool backward) {
    models::TrainCtx ctx;
    Mat logits = model.forward(images, ctx, true);  // batch statistics either way
    Mat dlogits;
    double loss = nn::cross_entropy(logits, labels, backward ? &dlogits : nullptr);
    auto params = model.params();
    if (weight_decay > 0.0f) loss += weight_decay * weight_penalty(params);
    if (backward) {
        model.backward(dlogits, ctx);
        add_weight_penalty_grad(params, weight_decay);
    }
    return loss;
}

std::pair<models::Classifier, TrainReport> train_classifier(const models::ClassifierSpec& spec_in,
                                                            const data::Dataset& train_set,
                                                            const data::Dataset& test_set,
                                                            const TrainConfig& cfg) {
    cfg.validate();
    models::ClassifierSpec spec = spec_in;
    spec.normalize();
    spec.validate();
    if (train_set.num_classes() != spec.num_classes) {
        throw ValidationError("train_classifier: dataset class count does not match the spec");
    }
    const auto labels = train_set.labels();  // throws when labels are missing
    nn::set_threads(cfg.threads);

    const auto t0 = Clock::now();
    models::Classifier model(spec, cfg.seed);
    auto params = model.params();
    auto opt = nn::make_optimizer(cfg.optimizer, cfg.learning_rate);

    TrainReport rep;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        Rng shuffle_rng = derive_rng(cfg.seed, "classifier-shuffle", static_cast<std::uint64_t>(epoch));
        auto batches = make_batches(train_set.size(), cfg.batch_size, shuffle_rng);
        double loss_sum = 0.0;
        std::size_t seen = 0;
        for (std::size_t bi = 0; bi < batches.size(); ++bi) {
            const auto& idx = batches[bi];
            Tensor x = train_set.batch(idx);
            std::vector<int> y;
            y.reserve(idx.size());
            for (int i : idx) y.push_back(labels[i]);
            nn::Optimizer::zero_grad(params);
            const double loss = classifier_loss(model, x, y, cfg.weight_decay, true);
            require_finite(loss, "train_classifier", epoch, bi);
            opt->step(params);
            loss_sum += loss * static_cast<double>(idx.size());
            seen += idx.size();
        }
        const double epoch_loss = loss_sum / static_cast<double>(seen);
        const double acc = eval::accuracy(model, test_set);
        rep.cls_loss.push_back(epoch_loss);
        rep.recon_loss.push_back(0.0);
        rep.test_accuracy.push_back(acc);
        model.epochs_seen = epoch;
        progress_line(cfg, "classifier", epoch, epoch_loss, -1.0, acc, seconds_since(t0));
        if (cfg.check_descent && epoch == 3) check_descent(rep.cls_loss, "train_classifier");
    }
    rep.wall_seconds = seconds_since(t0);
    rep.final_metrics = {{"test_accuracy", rep.test_accuracy.back()}, {"train_loss", rep.cls_loss.back()}};
    return {std::move(model), std::move(rep)};
}

double inversion_loss(models::InversionModel& model, const Mat& predictions, const Tensor& targets,
                      int m, bool rescale, const std::string& reduction, bool backward) {
    const int k = model.spec().input_dim;
    if (predictions.cols() != k) throw ValidationError("inversion_loss: prediction dimension mismatch");
    Mat pt = (m >= 1 && m < k) ? trunc::truncate_m(predictions, m) : predictions;
    Mat u = rescale ? trunc::rescale_to_logits(pt, model.rescale_state()) : pt;

    models::TrainCtx ctx;
    Tensor recon = model.forward(u, ctx, true);  // batch statistics either way
    Tensor drecon;
    const double loss = nn::mse_loss(recon, targets, reduction, backward ? &drecon : nullptr);
    if (backward) {
        Mat dvec = model.backward(drecon, ctx);
        if (rescale) model.rescale_c_grad() += dvec.sum();
    }
    return loss;
}

std::pair<models::InversionModel, TrainReport> train_inversion_blackbox(
    const models::InversionSpec& spec_in, oracle::PredictionOracle& oracle,
    const data::Dataset& aux, const TrainConfig& cfg) {
    cfg.validate();
    models::InversionSpec spec = spec_in;
    spec.normalize();
    spec.validate();
    const int k = oracle.output_dim();
    if (k != spec.input_dim) {
        throw ValidationError("train_inversion_blackbox: oracle output dimension " + std::to_string(k) +
                              " does not match the inversion input " + std::to_string(spec.input_dim));
    }
    if (aux.size() == 0) throw ValidationError("train_inversion_blackbox: empty auxiliary set");
    if (aux.height != spec.height || aux.width != spec.width) {
        throw ValidationError("train_inversion_blackbox: auxiliary resolution does not match the spec");
    }
    const int m = cfg.m == 0 ? k : cfg.m;
    if (m < 1 || m > k) throw ValidationError("train_inversion_blackbox: m out of range");
    nn::set_threads(cfg.threads);

    const auto t0 = Clock::now();
    models::InversionModel model(spec, cfg.seed);
    model.trained_m = m;
    model.rescaled_inputs = cfg.rescale_inputs;
    auto params = model.params();
    auto opt = nn::make_optimizer(cfg.optimizer, cfg.learning_rate);

    TrainReport rep;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        Rng shuffle_rng = derive_rng(cfg.seed, "inversion-shuffle", static_cast<std::uint64_t>(epoch));
        auto batches = make_batches(aux.size(), cfg.batch_size, shuffle_rng);
        double loss_sum = 0.0;
        std::size_t seen = 0;
        for (std::size_t bi = 0; bi < batches.size(); ++bi) {
            Tensor a = aux.batch(batches[bi]);
            Mat p = oracle.query(a);
            nn::Optimizer::zero_grad(params);
            const double loss = inversion_loss(model, p, a, m, cfg.rescale_inputs, cfg.recon_reduction, true);
            require_finite(loss, "train_inversion_blackbox", epoch, bi);
            opt->step(params);
            loss_sum += loss * static_cast<double>(batches[bi].size());
            seen += batches[bi].size();
        }
        const double epoch_loss = loss_sum / static_cast<double>(seen);
        rep.cls_loss.push_back(0.0);
        rep.recon_loss.push_back(epoch_loss);
        rep.test_accuracy.push_back(0.0);
        model.epochs_seen = epoch;
        progress_line(cfg, "inversion-blackbox", epoch, NAN, epoch_loss, -1.0, seconds_since(t0));
        if (cfg.check_descent && epoch == 3) check_descent(rep.recon_loss, "train_inversion_blackbox");
    }
    rep.wall_seconds = seconds_since(t0);
    rep.final_metrics = {{"recon_loss", rep.recon_loss.back()},
                         {"m", m},
                         {"oracle_queries", oracle.query_count()}};
    return {std::move(model), std::move(rep)};
}

JointResult train_joint(const models::ClassifierSpec& cls_spec_in, const models::InversionSpec& inv_spec_in,
                        const data::Dataset& train_set, const data::Dataset& test_set,
                        const TrainConfig& cfg) {
    cfg.validate();
    models::ClassifierSpec cls_spec = cls_spec_in;
    cls_spec.normalize();
    cls_spec.validate();
    models::InversionSpec inv_spec = inv_spec_in;
    inv_spec.normalize();
    inv_spec.validate();
    if (cls_spec.num_classes != inv_spec.input_dim) {
        throw ValidationError("train_joint: classifier output and inversion input dimensions differ");
    }
    if (cls_spec.height != inv_spec.height || cls_spec.width != inv_spec.width) {
        throw ValidationError("train_joint: specs disagree on resolution");
    }
    const auto labels = train_set.labels();
    if (train_set.num_classes() != cls_spec.num_classes) {
        throw ValidationError("train_joint: dataset class count does not match the spec");
    }
    const int k = cls_spec.num_classes;
    const int m = cfg.m == 0 ? k : cfg.m;
    if (m < 1 || m > k) throw ValidationError("train_joint: m out of range");
    nn::set_threads(cfg.threads);

    const auto t0 = Clock::now();
    models::Classifier f(cls_spec, cfg.seed);
    models::InversionModel g(inv_spec, cfg.seed);
    g.trained_m = m;
    g.rescaled_inputs = cfg.rescale_inputs;
    auto params = f.params();
    {
        auto gp = g.params();
        params.insert(params.end(), gp.begin(), gp.end());
    }
    auto opt = nn::make_optimizer(cfg.optimizer, cfg.learning_rate);
    const float eps = g.rescale_state().eps;

    TrainReport rep;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        Rng shuffle_rng = derive_rng(cfg.seed, "joint-shuffle", static_cast<std::uint64_t>(epoch));
        auto batches = make_batches(train_set.size(), cfg.batch_size, shuffle_rng);
        double cls_sum = 0.0, rec_sum = 0.0;
        std::size_t seen = 0;
        for (std::size_t bi = 0; bi < batches.size(); ++bi) {
            const auto& idx = batches[bi];
            Tensor x = train_set.batch(idx);
            std::vector<int> y;
            y.reserve(idx.size());
            for (int i : idx) y.push_back(labels[i]);
            const int n = static_cast<int>(idx.size());

            models::TrainCtx fctx, gctx;
            Mat z = f.forward(x, fctx, true);
            Mat dz;
            const double cls_loss_v = nn::cross_entropy(z, y, &dz);

            Mat p = nn::softmax(z);
            // top-m mask, treated as a constant during backprop
            std::vector<std::uint8_t> mask(static_cast<std::size_t>(n) * k);
            Mat pt = Mat::Zero(n, k);
            for (int i = 0; i < n; ++i) {
                auto row_mask = trunc::top_m_mask(p.row(i).data(), k, m);
                for (int j = 0; j < k; ++j) {
                    mask[static_cast<std::size_t>(i) * k + j] = row_mask[j];
                    if (row_mask[j]) pt(i, j) = p(i, j);
                }
            }
            Mat u = cfg.rescale_inputs ? trunc::rescale_to_logits(pt, g.rescale_state()) : pt;

            Tensor r = g.forward(u, gctx, true);
            Tensor dr;
            const double rec_loss_v = nn::mse_loss(r, x, cfg.recon_reduction, &dr);
            const double total = cls_loss_v + cfg.joint_weight * rec_loss_v;
            require_finite(total, "train_joint", epoch, bi);

            nn::Optimizer::zero_grad(params);
            for (float& d : dr.v) d *= cfg.joint_weight;
            Mat dvec = g.backward(dr, gctx);
            if (cfg.rescale_inputs) g.rescale_c_grad() += dvec.sum();

            // through the rescale and the constant mask into the prediction
            Mat dp = Mat::Zero(n, k);
            for (int i = 0; i < n; ++i) {
                for (int j = 0; j < k; ++j) {
                    if (!mask[static_cast<std::size_t>(i) * k + j]) continue;
                    if (cfg.rescale_inputs) {
                        if (pt(i, j) > eps) dp(i, j) = dvec(i, j) / pt(i, j);
                    } else {
                        dp(i, j) = dvec(i, j);
                    }
                }
            }
            // softmax jacobian: dz_i = p_i * (dp_i - sum_j dp_j p_j)
            for (int i = 0; i < n; ++i) {
                const float dot = dp.row(i).dot(p.row(i));
                for (int j = 0; j < k; ++j) dz(i, j) += p(i, j) * (dp(i, j) - dot);
            }
            f.backward(dz, fctx);
            add_weight_penalty_grad(params, cfg.weight_decay);
            opt->step(params);

            cls_sum += cls_loss_v * n;
            rec_sum += rec_loss_v * n;
            seen += idx.size();
        }
        const double cls_epoch = cls_sum / static_cast<double>(seen);
        const double rec_epoch = rec_sum / static_cast<double>(seen);
        const double acc = eval::accuracy(f, test_set);
        rep.cls_loss.push_back(cls_epoch);
        rep.recon_loss.push_back(rec_epoch);
        rep.test_accuracy.push_back(acc);
        f.epochs_seen = epoch;
        g.epochs_seen = epoch;
        progress_line(cfg, "joint", epoch, cls_epoch, rec_epoch, acc, seconds_since(t0));
        if (cfg.check_descent && epoch == 3) {
            std::vector<double> total(rep.cls_loss.size());
            for (std::size_t e = 0; e < total.size(); ++e) {
                total[e] = rep.cls_loss[e] + cfg.joint_weight * rep.recon_loss[e];
            }
            check_descent(total, "train_joint");
        }
    }
    rep.wall_seconds = seconds_since(t0);
    rep.final_metrics = {{"test_accuracy", rep.test_accuracy.back()},
                         {"recon_loss", rep.recon_loss.back()},
                         {"m", m},
                         {"joint_weight", cfg.joint_weight}};
    return {std::move(f), std::move(g), std::move(rep)};
}

}  // namespace predinv::train
