#include "predinv/models/models.hpp"

#include "predinv/errors.hpp"
#include "predinv/rng.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace predinv::models {

// ---------------------------------------------------------------- specs

void ClassifierSpec::normalize() {
    if (channels.empty()) {
        int c = 32;
        for (int b = 0; b < blocks; ++b, c *= 2) channels.push_back(c);
    }
    if (fc_dims.empty()) fc_dims = {256, num_classes};
}

void ClassifierSpec::validate() const {
    if (height != width) throw ValidationError("classifier: height must equal width");
    if (blocks != 3 && blocks != 4) throw ValidationError("classifier: blocks must be 3 or 4");
    if (num_classes < 1) throw ValidationError("classifier: num_classes must be >= 1");
    if (static_cast<int>(channels.size()) != blocks) {
        throw ValidationError("classifier: channels must list one width per block");
    }
    for (int c : channels) {
        if (c < 1) throw ValidationError("classifier: channel widths must be positive");
    }
    if (fc_dims.size() != 2) throw ValidationError("classifier: fc_dims must list two widths");
    if (fc_dims[1] != num_classes) {
        throw ValidationError("classifier: output dimension must equal num_classes");
    }
    if (fc_dims[0] < 1) throw ValidationError("classifier: hidden fc width must be positive");
    int side = height;
    for (int b = 0; b < blocks; ++b) {
        if (side < 2) throw ValidationError("classifier: pooling collapses spatial dims below 1");
        side /= 2;
    }
    if (side < 1) throw ValidationError("classifier: pooling collapses spatial dims below 1");
}

json ClassifierSpec::to_json() const {
    return json{{"height", height},   {"width", width},       {"num_classes", num_classes},
                {"blocks", blocks},   {"channels", channels}, {"fc_dims", fc_dims}};
}

ClassifierSpec ClassifierSpec::from_json(const json& j) {
    ClassifierSpec s;
    s.height = j.value("height", 32);
    s.width = j.value("width", 32);
    s.num_classes = j.value("num_classes", 10);
    s.blocks = j.value("blocks", 3);
    s.channels = j.value("channels", std::vector<int>{});
    s.fc_dims = j.value("fc_dims", std::vector<int>{});
    s.normalize();
    s.validate();
    return s;
}

void InversionSpec::normalize() {
    if (channels.empty()) {
        // mirror of the classifier progression, narrowing toward one output plane
        int c = 32;
        for (int b = 1; b < blocks; ++b) c *= 2;
        for (int b = 0; b < blocks - 1; ++b, c /= 2) channels.push_back(c / 2);
        channels.push_back(1);
    }
}

void InversionSpec::validate() const {
    if (height != width) throw ValidationError("inversion: height must equal width");
    if (blocks < 2 || blocks > 6) throw ValidationError("inversion: blocks must be in [2,6]");
    if (input_dim < 1) throw ValidationError("inversion: input_dim must be >= 1");
    if (static_cast<int>(channels.size()) != blocks) {
        throw ValidationError("inversion: channels must list one width per block");
    }
    if (channels.back() != 1) throw ValidationError("inversion: final block must emit one plane");
    int side = 4;
    for (int b = 1; b < blocks; ++b) side *= 2;
    if (side != height) {
        throw ValidationError("inversion: " + std::to_string(blocks) + " blocks produce " +
                              std::to_string(side) + "x" + std::to_string(side) + ", not the spec resolution");
    }
}

json InversionSpec::to_json() const {
    return json{{"input_dim", input_dim}, {"blocks", blocks}, {"height", height},
                {"width", width},         {"channels", channels}};
}

InversionSpec InversionSpec::from_json(const json& j) {
    InversionSpec s;
    s.input_dim = j.value("input_dim", 10);
    s.blocks = j.value("blocks", 4);
    s.height = j.value("height", 32);
    s.width = j.value("width", 32);
    s.channels = j.value("channels", std::vector<int>{});
    s.normalize();
    s.validate();
    return s;
}

// ----------------------------------------------------------- Classifier

Classifier::Classifier(ClassifierSpec spec, std::uint64_t seed_) : spec_(std::move(spec)) {
    spec_.normalize();
    spec_.validate();
    seed = seed_;
    Rng rng = derive_rng(seed_, "classifier-init");
    int cin = 1;
    for (int b = 0; b < spec_.blocks; ++b) {
        convs_.emplace_back(cin, spec_.channels[b], 3, 1, 1);
        convs_.back().init(rng);
        bns_.emplace_back(spec_.channels[b]);
        cin = spec_.channels[b];
    }
    const int side = spec_.height >> spec_.blocks;
    const int flat = spec_.channels.back() * side * side;
    fc1_ = nn::Linear(flat, spec_.fc_dims[0]);
    fc1_.init(rng);
    fc2_ = nn::Linear(spec_.fc_dims[0], spec_.fc_dims[1]);
    fc2_.init(rng);
}

Mat Classifier::forward_impl(const Tensor& images, TrainCtx* ctx, bool training) const {
    if (images.h != spec_.height || images.w != spec_.width || images.c != 1) {
        throw ValidationError("classifier: input resolution mismatch");
    }
    if (training && !ctx) throw ValidationError("classifier: training forward needs a context");
    if (ctx) ctx->caches.assign(spec_.blocks * 4, nn::Cache{});

    Tensor t = images;
    for (int b = 0; b < spec_.blocks; ++b) {
        nn::Cache* c0 = ctx ? &ctx->caches[b * 4 + 0] : nullptr;
        nn::Cache* c1 = ctx ? &ctx->caches[b * 4 + 1] : nullptr;
        nn::Cache* c2 = ctx ? &ctx->caches[b * 4 + 2] : nullptr;
        nn::Cache* c3 = ctx ? &ctx->caches[b * 4 + 3] : nullptr;
        t = convs_[b].forward(t, c0);
        if (training) {
            t = const_cast<nn::BatchNorm2d&>(bns_[b]).forward_train(t, *c1);
        } else {
            t = bns_[b].forward_eval(t, c1);
        }
        t = pool_.forward(t, c2);
        t = relu_.forward(t, c3);
    }
    ConstMatMap flat(t.data(), t.n, t.per_sample());
    Mat h = fc1_.forward(flat, ctx ? &ctx->fc1_in : nullptr);
    if (ctx) {
        ctx->fc_relu_mask.resize(h.size());
        for (Eigen::Index j = 0; j < h.size(); ++j) ctx->fc_relu_mask[j] = h.data()[j] > 0.0f;
    }
    h = h.cwiseMax(0.0f);
    return fc2_.forward(h, ctx ? &ctx->fc2_in : nullptr);
}

Mat Classifier::logits(const Tensor& images) const { return forward_impl(images, nullptr, false); }

Mat Classifier::predict(const Tensor& images) const { return nn::softmax(logits(images)); }

Mat Classifier::forward(const Tensor& images, TrainCtx& ctx, bool training) {
    return forward_impl(images, &ctx, training);
}

Tensor Classifier::backward_impl(const Mat& dlogits, TrainCtx& ctx, bool need_dx) {
    Mat dh = fc2_.backward(dlogits, ctx.fc2_in);
    for (Eigen::Index j = 0; j < dh.size(); ++j) {
        if (!ctx.fc_relu_mask[j]) dh.data()[j] = 0.0f;
    }
    Mat dflat = fc1_.backward(dh, ctx.fc1_in);

    const int side = spec_.height >> spec_.blocks;
    Tensor dt(static_cast<int>(dflat.rows()), spec_.channels.back(), side, side);
    std::memcpy(dt.data(), dflat.data(), dt.size() * sizeof(float));

    for (int b = spec_.blocks - 1; b >= 0; --b) {
        dt = relu_.backward(dt, ctx.caches[b * 4 + 3]);
        dt = pool_.backward(dt, ctx.caches[b * 4 + 2]);
        dt = bns_[b].backward(dt, ctx.caches[b * 4 + 1]);
        dt = convs_[b].backward(dt, ctx.caches[b * 4 + 0]);
    }
    return need_dx ? dt : Tensor{};
}

void Classifier::backward(const Mat& dlogits, TrainCtx& ctx) { backward_impl(dlogits, ctx, false); }

Tensor Classifier::backward_to_input(const Mat& dlogits, TrainCtx& ctx) {
    return backward_impl(dlogits, ctx, true);
}

std::vector<nn::ParamView> Classifier::params() {
    std::vector<nn::ParamView> out;
    for (int b = 0; b < spec_.blocks; ++b) {
        convs_[b].collect("block" + std::to_string(b) + ".conv", out);
        bns_[b].collect("block" + std::to_string(b) + ".bn", out);
    }
    fc1_.collect("fc1", out);
    fc2_.collect("fc2", out);
    return out;
}

std::vector<nn::BufView> Classifier::buffers() {
    std::vector<nn::BufView> out;
    for (int b = 0; b < spec_.blocks; ++b) {
        bns_[b].collect_buffers("block" + std::to_string(b) + ".bn", out);
    }
    return out;
}

// -------------------------------------------------------- InversionModel

InversionModel::InversionModel(InversionSpec spec, std::uint64_t seed_) : spec_(std::move(spec)) {
    spec_.normalize();
    spec_.validate();
    seed = seed_;
    Rng rng = derive_rng(seed_, "inversion-init");
    int cin = spec_.input_dim;
    for (int b = 0; b < spec_.blocks; ++b) {
        const bool first = b == 0;
        tconvs_.emplace_back(cin, spec_.channels[b], 4, first ? 1 : 2, first ? 0 : 1);
        tconvs_.back().init(rng);
        if (b + 1 < spec_.blocks) bns_.emplace_back(spec_.channels[b]);
        cin = spec_.channels[b];
    }
}

Tensor InversionModel::forward_impl(const Mat& vecs, TrainCtx* ctx, bool training) const {
    if (vecs.cols() != spec_.input_dim) throw ValidationError("inversion: input dimension mismatch");
    if (training && !ctx) throw ValidationError("inversion: training forward needs a context");
    if (ctx) {
        ctx->caches.assign(spec_.blocks * 3, nn::Cache{});
        ctx->vec_in = vecs;
    }
    Tensor t(static_cast<int>(vecs.rows()), spec_.input_dim, 1, 1);
    std::memcpy(t.data(), vecs.data(), t.size() * sizeof(float));

    for (int b = 0; b < spec_.blocks; ++b) {
        nn::Cache* c0 = ctx ? &ctx->caches[b * 3 + 0] : nullptr;
        nn::Cache* c1 = ctx ? &ctx->caches[b * 3 + 1] : nullptr;
        nn::Cache* c2 = ctx ? &ctx->caches[b * 3 + 2] : nullptr;
        t = tconvs_[b].forward(t, c0);
        if (b + 1 < spec_.blocks) {
            if (training) {
                t = const_cast<nn::BatchNorm2d&>(bns_[b]).forward_train(t, *c1);
            } else {
                t = bns_[b].forward_eval(t, c1);
            }
            t = tanh_.forward(t, c2);
        } else {
            t = sigmoid_.forward(t, c2);
        }
    }
    return t;
}

Tensor InversionModel::decode(const Mat& vecs) const { return forward_impl(vecs, nullptr, false); }

Tensor InversionModel::forward(const Mat& vecs, TrainCtx& ctx, bool training) {
    return forward_impl(vecs, &ctx, training);
}

Mat InversionModel::backward(const Tensor& drecon, TrainCtx& ctx) {
    Tensor dt = drecon;
    for (int b = spec_.blocks - 1; b >= 0; --b) {
        if (b + 1 < spec_.blocks) {
            dt = tanh_.backward(dt, ctx.caches[b * 3 + 2]);
            dt = bns_[b].backward(dt, ctx.caches[b * 3 + 1]);
        } else {
            dt = sigmoid_.backward(dt, ctx.caches[b * 3 + 2]);
        }
        dt = tconvs_[b].backward(dt, ctx.caches[b * 3 + 0]);
    }
    Mat dvecs(dt.n, spec_.input_dim);
    std::memcpy(dvecs.data(), dt.data(), dt.size() * sizeof(float));
    return dvecs;
}

std::vector<nn::ParamView> InversionModel::params() {
    std::vector<nn::ParamView> out;
    for (int b = 0; b < spec_.blocks; ++b) {
        tconvs_[b].collect("block" + std::to_string(b) + ".tconv", out);
        if (b + 1 < spec_.blocks) bns_[b].collect("block" + std::to_string(b) + ".bn", out);
    }
    out.push_back({"rescale.c", &c_, &gc_, 1});
    return out;
}

std::vector<nn::BufView> InversionModel::buffers() {
    std::vector<nn::BufView> out;
    for (std::size_t b = 0; b < bns_.size(); ++b) {
        bns_[b].collect_buffers("block" + std::to_string(b) + ".bn", out);
    }
    return out;
}

// ------------------------------------------------------------ checkpoint

namespace {

constexpr char kMagic[6] = {'I', 'N', 'V', 'M', '1', '\0'};

void write_checkpoint(const std::string& path, const json& header,
                      std::vector<nn::ParamView>& params, std::vector<nn::BufView>& buffers) {
    json h = header;
    h["tensors"] = json::array();
    for (const auto& p : params) h["tensors"].push_back({{"name", p.name}, {"size", p.size}});
    for (const auto& b : buffers) h["tensors"].push_back({{"name", b.name}, {"size", b.size}});
    const std::string hs = h.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint '" + path + "'");
    out.write(kMagic, 6);
    const std::uint32_t len = static_cast<std::uint32_t>(hs.size());
    out.write(reinterpret_cast<const char*>(&len), 4);
    out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    for (const auto& p : params) {
        out.write(reinterpret_cast<const char*>(p.w), static_cast<std::streamsize>(p.size * sizeof(float)));
    }
    for (const auto& b : buffers) {
        out.write(reinterpret_cast<const char*>(b.p), static_cast<std::streamsize>(b.size * sizeof(float)));
    }
    if (!out) throw DataError("write failed for checkpoint '" + path + "'");
}

json read_checkpoint(const std::string& path, const std::string& expect_type, std::ifstream& in) {
    in.open(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint '" + path + "'");
    char magic[6];
    in.read(magic, 6);
    if (!in || std::memcmp(magic, kMagic, 6) != 0) throw DataError("bad checkpoint magic in '" + path + "'");
    std::uint32_t len = 0;
    in.read(reinterpret_cast<char*>(&len), 4);
    std::string hs(len, '\0');
    in.read(hs.data(), len);
    if (!in) throw DataError("truncated checkpoint header in '" + path + "'");
    json h = json::parse(hs);
    if (h.value("type", "") != expect_type) {
        throw DataError("checkpoint '" + path + "' holds a " + h.value("type", "?") + ", expected " + expect_type);
    }
    return h;
}

void read_blobs(std::ifstream& in, const json& header, const std::string& path,
                std::vector<nn::ParamView>& params, std::vector<nn::BufView>& buffers) {
    std::size_t ti = 0;
    const auto& tensors = header.at("tensors");
    auto next = [&](const std::string& name, std::size_t size) {
        if (ti >= tensors.size()) throw DataError("checkpoint '" + path + "' is missing tensor " + name);
        const auto& t = tensors[ti++];
        if (t.at("name") != name || t.at("size") != size) {
            throw DataError("checkpoint '" + path + "' tensor mismatch at " + name +
                            " (spec and stored shapes disagree)");
        }
    };
    for (auto& p : params) {
        next(p.name, p.size);
        in.read(reinterpret_cast<char*>(p.w), static_cast<std::streamsize>(p.size * sizeof(float)));
    }
    for (auto& b : buffers) {
        next(b.name, b.size);
        in.read(reinterpret_cast<char*>(b.p), static_cast<std::streamsize>(b.size * sizeof(float)));
    }
    if (!in) throw DataError("truncated checkpoint blobs in '" + path + "'");
}

}  // namespace

void save_classifier(Classifier& model, const std::string& path) {
    json h{{"type", "classifier"},
           {"spec", model.spec().to_json()},
           {"metadata", {{"seed", model.seed}, {"epochs_seen", model.epochs_seen}}}};
    auto params = model.params();
    auto buffers = model.buffers();
    write_checkpoint(path, h, params, buffers);
}

Classifier load_classifier(const std::string& path) {
    std::ifstream in;
    json h = read_checkpoint(path, "classifier", in);
    Classifier model(ClassifierSpec::from_json(h.at("spec")), h.at("metadata").value("seed", 0ull));
    model.epochs_seen = h.at("metadata").value("epochs_seen", 0);
    auto params = model.params();
    auto buffers = model.buffers();
    read_blobs(in, h, path, params, buffers);
    return model;
}

void save_inversion(InversionModel& model, const std::string& path) {
    json h{{"type", "inversion"},
           {"spec", model.spec().to_json()},
           {"metadata",
            {{"seed", model.seed},
             {"epochs_seen", model.epochs_seen},
             {"trained_m", model.trained_m},
             {"rescaled_inputs", model.rescaled_inputs}}}};
    auto params = model.params();
    auto buffers = model.buffers();
    write_checkpoint(path, h, params, buffers);
}

InversionModel load_inversion(const std::string& path) {
    std::ifstream in;
    json h = read_checkpoint(path, "inversion", in);
    InversionModel model(InversionSpec::from_json(h.at("spec")), h.at("metadata").value("seed", 0ull));
    model.epochs_seen = h.at("metadata").value("epochs_seen", 0);
    model.trained_m = h.at("metadata").value("trained_m", -1);
    model.rescaled_inputs = h.at("metadata").value("rescaled_inputs", true);
    auto params = model.params();
    auto buffers = model.buffers();
    read_blobs(in, h, path, params, buffers);
    return model;
}

}  // namespace predinv::models
