// Copyright 2026 The taylorcv Authors
// SPDX-License-Identifier: Apache-2.0

#include "tcv/scorenet/checkpoint.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "tcv/ndcore/errors.hpp"

namespace tcv {

namespace {

std::string format17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double parse_double(const std::string& s) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0') {
        throw ValidationError("checkpoint: malformed number '" + s + "'");
    }
    return v;
}

} // namespace

std::string checkpoint_to_json(const ScoreNetwork& network) {
    const auto& c = network.config();
    nlohmann::json doc;
    doc["config"] = {{"input_dim", c.input_dim},
                     {"hidden_widths", c.hidden_widths},
                     {"activation", c.activation.name()},
                     {"spectral_norm", c.spectral_norm}};
    auto theta = nlohmann::json::array();
    for (double v : network.theta()) {
        theta.push_back(format17(v));
    }
    doc["theta"] = std::move(theta);
    return doc.dump();
}

ScoreNetwork checkpoint_from_json(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("checkpoint: ") + e.what());
    }
    if (!doc.contains("config") || !doc.contains("theta") || !doc["theta"].is_array()) {
        throw ValidationError("checkpoint: expected {\"config\", \"theta\"}");
    }
    MlpConfig c;
    std::vector<double> theta;
    try {
        const auto& jc = doc["config"];
        c.input_dim = jc.at("input_dim").get<std::size_t>();
        c.hidden_widths = jc.at("hidden_widths").get<std::vector<std::size_t>>();
        c.activation = ActivationFamily::parse(jc.value("activation", std::string("tanh")));
        c.spectral_norm = jc.value("spectral_norm", false);
        theta.reserve(doc["theta"].size());
        for (const auto& v : doc["theta"]) {
            theta.push_back(v.is_string() ? parse_double(v.get<std::string>()) : v.get<double>());
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("checkpoint: ") + e.what());
    }
    return ScoreNetwork(std::move(c), std::move(theta));
}

void save_checkpoint(const ScoreNetwork& network, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw ValidationError("cannot write checkpoint " + path.string());
    }
    out << checkpoint_to_json(network) << '\n';
}

ScoreNetwork load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("cannot read checkpoint " + path.string());
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return checkpoint_from_json(ss.str());
}

} // namespace tcv
