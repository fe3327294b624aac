#pragma once

#include "predinv/oracle/oracle.hpp"

#include <memory>
#include <string>

namespace predinv::oracle {

// Wire protocol, HTTP POST transport:
//   POST /predict  {"images": [[row-major floats]], "height": H, "width": W}
//     -> {"predictions": [[k floats]], "k": k, "m": server_m}
//     -> {"error": string, "code": string} on protocol errors (connection stays usable)
//   GET /metadata  -> {"k", "m", "height", "width", "class_names"}
class OracleServer {
public:
    OracleServer(models::Classifier classifier, OracleConfig cfg);
    ~OracleServer();

    OracleServer(const OracleServer&) = delete;
    OracleServer& operator=(const OracleServer&) = delete;

    int start();  // binds (port 0 picks a free one), serves in the background; returns the port
    void wait();  // blocks until stop()
    void stop();
    int port() const;
    std::uint64_t query_count() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// Blocking variant for the CLI `serve` subcommand.
void serve_oracle(models::Classifier classifier, const OracleConfig& cfg);

// PredictionOracle proxy over the wire. Negotiates dimensions via /metadata.
std::unique_ptr<PredictionOracle> connect_oracle(const std::string& endpoint);

}  // namespace predinv::oracle
