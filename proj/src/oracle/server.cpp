#include "predinv/oracle/server.hpp"

#include "predinv/errors.hpp"

#include <httplib.h>
#include <json.hpp>

#include <thread>

namespace predinv::oracle {

using nlohmann::json;

namespace {

json error_body(const std::string& code, const std::string& message) {
    return json{{"error", message}, {"code", code}};
}

json predictions_to_json(const Mat& p) {
    json rows = json::array();
    for (int i = 0; i < p.rows(); ++i) {
        json row = json::array();
        for (int j = 0; j < p.cols(); ++j) row.push_back(static_cast<double>(p(i, j)));
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace

struct OracleServer::Impl {
    LocalOracle oracle;
    OracleConfig cfg;
    httplib::Server svr;
    std::thread worker;
    int bound_port = 0;

    Impl(models::Classifier classifier, OracleConfig cfg_in)
        : oracle(std::move(classifier), cfg_in), cfg(std::move(cfg_in)) {
        const auto& spec = oracle.classifier().spec();
        const int k = spec.num_classes;

        svr.Get("/metadata", [this, k, &spec = oracle.classifier().spec()](const httplib::Request&,
                                                                           httplib::Response& res) {
            json j{{"k", k},
                   {"m", oracle.server_m()},
                   {"height", spec.height},
                   {"width", spec.width},
                   {"class_names", cfg.class_names}};
            res.set_content(j.dump(), "application/json");
        });

        svr.Post("/predict", [this, k](const httplib::Request& req, httplib::Response& res) {
            json body;
            try {
                body = json::parse(req.body);
            } catch (const json::exception& e) {
                res.status = 400;
                res.set_content(error_body("bad_request", e.what()).dump(), "application/json");
                return;
            }
            const auto& spec = oracle.classifier().spec();
            try {
                if (!body.contains("images") || !body["images"].is_array()) {
                    throw ValidationError("missing 'images' array");
                }
                const int h = body.value("height", 0);
                const int w = body.value("width", 0);
                if (h != spec.height || w != spec.width) {
                    res.status = 400;
                    res.set_content(error_body("bad_resolution",
                                               "expected " + std::to_string(spec.height) + "x" +
                                                   std::to_string(spec.width))
                                        .dump(),
                                    "application/json");
                    return;
                }
                const auto& images = body["images"];
                const int n = static_cast<int>(images.size());
                if (n == 0) throw ValidationError("empty batch");
                if (n > cfg.max_batch) {
                    res.status = 400;
                    res.set_content(error_body("batch_too_large",
                                               "max batch is " + std::to_string(cfg.max_batch))
                                        .dump(),
                                    "application/json");
                    return;
                }
                Tensor batch(n, 1, h, w);
                const std::size_t plane = static_cast<std::size_t>(h) * w;
                for (int i = 0; i < n; ++i) {
                    const auto& row = images[i];
                    if (!row.is_array() || row.size() != plane) {
                        throw ValidationError("image " + std::to_string(i) + " has wrong pixel count");
                    }
                    float* dst = batch.sample(i);
                    for (std::size_t j = 0; j < plane; ++j) dst[j] = row[j].get<float>();
                }
                Mat p = oracle.query(batch);
                json out{{"predictions", predictions_to_json(p)}, {"k", k}, {"m", oracle.server_m()}};
                res.set_content(out.dump(), "application/json");
            } catch (const std::exception& e) {
                res.status = 400;
                res.set_content(error_body("bad_request", e.what()).dump(), "application/json");
            }
        });
    }
};

OracleServer::OracleServer(models::Classifier classifier, OracleConfig cfg)
    : impl_(std::make_unique<Impl>(std::move(classifier), std::move(cfg))) {}

OracleServer::~OracleServer() { stop(); }

int OracleServer::start() {
    auto& s = *impl_;
    if (s.cfg.port == 0) {
        s.bound_port = s.svr.bind_to_any_port(s.cfg.host);
        if (s.bound_port <= 0) throw OracleError("oracle server: bind failed on " + s.cfg.host);
    } else {
        if (!s.svr.bind_to_port(s.cfg.host, s.cfg.port)) {
            throw OracleError("oracle server: bind failed on " + s.cfg.host + ":" +
                              std::to_string(s.cfg.port));
        }
        s.bound_port = s.cfg.port;
    }
    s.worker = std::thread([&s] { s.svr.listen_after_bind(); });
    s.svr.wait_until_ready();
    return s.bound_port;
}

void OracleServer::wait() {
    if (impl_->worker.joinable()) impl_->worker.join();
}

void OracleServer::stop() {
    impl_->svr.stop();
    if (impl_->worker.joinable()) impl_->worker.join();
}

int OracleServer::port() const { return impl_->bound_port; }

std::uint64_t OracleServer::query_count() const { return impl_->oracle.query_count(); }

void serve_oracle(models::Classifier classifier, const OracleConfig& cfg) {
    OracleServer server(std::move(classifier), cfg);
    const int port = server.start();
    std::fprintf(stderr, "oracle serving on %s:%d (m=%d)\n", cfg.host.c_str(), port,
                 cfg.server_m);
    server.wait();
}

// ------------------------------------------------------------- HttpOracle

namespace {

class HttpOracle : public PredictionOracle {
public:
    explicit HttpOracle(const std::string& endpoint) {
        std::string ep = endpoint;
        if (ep.rfind("http://", 0) == 0) ep = ep.substr(7);
        const auto colon = ep.rfind(':');
        if (colon == std::string::npos) throw OracleError("connect_oracle: endpoint must be host:port");
        host_ = ep.substr(0, colon);
        port_ = std::stoi(ep.substr(colon + 1));
        cli_ = std::make_unique<httplib::Client>(host_, port_);
        cli_->set_connection_timeout(10, 0);
        cli_->set_read_timeout(120, 0);

        auto res = cli_->Get("/metadata");
        if (!res) throw OracleError("connect_oracle: cannot reach " + endpoint);
        json meta;
        try {
            meta = json::parse(res->body);
            k_ = meta.at("k").get<int>();
            height_ = meta.at("height").get<int>();
            width_ = meta.at("width").get<int>();
        } catch (const json::exception& e) {
            throw OracleError(std::string("connect_oracle: dimension negotiation failed: ") + e.what());
        }
        if (k_ < 1) throw OracleError("connect_oracle: server reports k < 1");
    }

    Mat query(const Tensor& images) override {
        json body{{"height", images.h}, {"width", images.w}};
        json arr = json::array();
        const std::size_t plane = static_cast<std::size_t>(images.h) * images.w;
        for (int i = 0; i < images.n; ++i) {
            json row = json::array();
            const float* src = images.sample(i);
            for (std::size_t j = 0; j < plane; ++j) row.push_back(static_cast<double>(src[j]));
            arr.push_back(std::move(row));
        }
        body["images"] = std::move(arr);
        auto res = cli_->Post("/predict", body.dump(), "application/json");
        if (!res) throw OracleError("oracle query: transport failure");
        json out;
        try {
            out = json::parse(res->body);
        } catch (const json::exception& e) {
            throw OracleError(std::string("oracle query: malformed response: ") + e.what());
        }
        if (res->status != 200 || out.contains("error")) {
            throw OracleError("oracle query rejected [" + out.value("code", "unknown") + "]: " +
                              out.value("error", "unspecified"));
        }
        const auto& rows = out.at("predictions");
        Mat p(static_cast<int>(rows.size()), k_);
        for (int i = 0; i < p.rows(); ++i) {
            const auto& row = rows[i];
            if (static_cast<int>(row.size()) != k_) throw OracleError("oracle query: row width mismatch");
            for (int j = 0; j < k_; ++j) p(i, j) = row[j].get<float>();
        }
        account(images.n);
        return p;
    }

    int output_dim() const override { return k_; }

private:
    std::string host_;
    int port_ = 0, k_ = 0, height_ = 0, width_ = 0;
    std::unique_ptr<httplib::Client> cli_;
};

}  // namespace

std::unique_ptr<PredictionOracle> connect_oracle(const std::string& endpoint) {
    return std::make_unique<HttpOracle>(endpoint);
}

}  // namespace predinv::oracle
