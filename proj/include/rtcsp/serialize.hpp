#pragma once

// JSON (de)serialization of alignment maps and trained transfer
// models. Matrices are emitted as nested row-major arrays; documents
// carry a schema tag so future layout changes stay detectable.

#include <json.hpp>

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "rtcsp/alignment.hpp"
#include "rtcsp/errors.hpp"
#include "rtcsp/transfer.hpp"

namespace rtcsp {

inline nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
    if (!j.is_array() || j.empty() || !j[0].is_array())
        throw FormatError("matrix_from_json: expected a non-empty array of arrays");
    const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
    const Eigen::Index cols = static_cast<Eigen::Index>(j[0].size());
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        if (static_cast<Eigen::Index>(j[i].size()) != cols)
            throw FormatError("matrix_from_json: ragged rows");
        for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = j[i][k].get<double>();
    }
    return m;
}

inline nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
    nlohmann::json out = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
    return out;
}

inline Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = j[i].get<double>();
    return v;
}

inline nlohmann::json to_json(const AlignmentMap& map) {
    return {{"class_id", map.class_id},
            {"M_S", matrix_to_json(map.M_S.mat())},
            {"M_T", matrix_to_json(map.M_T.mat())},
            {"P_S", matrix_to_json(map.P_S)},
            {"P_T", matrix_to_json(map.P_T)},
            {"L_S", matrix_to_json(map.L_S)},
            {"L_T", matrix_to_json(map.L_T)}};
}

inline nlohmann::json to_json(const SpatialFilter& f) {
    return {{"W", matrix_to_json(f.W)},
            {"eigenvalues", vector_to_json(f.eigenvalues)},
            {"n_pairs", f.n_pairs}};
}

inline SpatialFilter spatial_filter_from_json(const nlohmann::json& j) {
    SpatialFilter f;
    f.W = matrix_from_json(j.at("W"));
    f.eigenvalues = vector_from_json(j.at("eigenvalues"));
    f.n_pairs = j.at("n_pairs").get<int>();
    return f;
}

inline nlohmann::json to_json(const LdaModel& m) {
    return {{"weights", vector_to_json(m.weights)},
            {"bias", m.bias},
            {"class_means", matrix_to_json(m.class_means)},
            {"shared_cov", matrix_to_json(m.shared_cov)},
            {"priors", std::vector<double>{m.priors[0], m.priors[1]}},
            {"n_train", m.n_train}};
}

inline LdaModel lda_from_json(const nlohmann::json& j) {
    LdaModel m;
    m.weights = vector_from_json(j.at("weights"));
    m.bias = j.at("bias").get<double>();
    m.class_means = matrix_from_json(j.at("class_means"));
    m.shared_cov = matrix_from_json(j.at("shared_cov"));
    m.priors = Eigen::Vector2d(j.at("priors")[0].get<double>(),
                               j.at("priors")[1].get<double>());
    m.n_train = j.at("n_train").get<int>();
    return m;
}

inline Strategy strategy_from_name(const std::string& name) {
    for (Strategy s : {Strategy::CspBaseline, Strategy::Ssf, Strategy::Combine,
                       Strategy::Ensemble, Strategy::CompositeCsp})
        if (name == strategy_name(s)) return s;
    throw FormatError("unknown strategy name '" + name + "'");
}

inline nlohmann::json to_json(const TransferModel& model) {
    nlohmann::json members = nlohmann::json::array();
    for (const MemberModel& member : model.members) {
        nlohmann::json tasks = nlohmann::json::array();
        for (const TaskHead& head : member.tasks)
            tasks.push_back({{"positive_class", head.positive_class},
                             {"filter", to_json(head.filter)},
                             {"lda", to_json(head.lda)}});
        members.push_back({{"tasks", std::move(tasks)}});
    }
    return {{"schema", "rtcsp-model/1"},
            {"strategy", strategy_name(model.strategy)},
            {"class_alphabet", model.class_alphabet},
            {"n_pairs", model.n_pairs},
            {"cov_features", model.cov_features},
            {"members", std::move(members)}};
}

inline TransferModel transfer_model_from_json(const nlohmann::json& j) {
    if (j.value("schema", "") != "rtcsp-model/1")
        throw FormatError("transfer_model_from_json: unsupported schema '"
                          + j.value("schema", "") + "'");
    TransferModel model;
    model.strategy = strategy_from_name(j.at("strategy").get<std::string>());
    model.class_alphabet = j.at("class_alphabet").get<std::vector<Label>>();
    model.n_pairs = j.at("n_pairs").get<int>();
    model.cov_features = j.at("cov_features").get<bool>();
    for (const auto& jm : j.at("members")) {
        MemberModel member;
        for (const auto& jt : jm.at("tasks"))
            member.tasks.push_back(TaskHead{jt.at("positive_class").get<Label>(),
                                            spatial_filter_from_json(jt.at("filter")),
                                            lda_from_json(jt.at("lda"))});
        model.members.push_back(std::move(member));
    }
    return model;
}

} // namespace rtcsp
