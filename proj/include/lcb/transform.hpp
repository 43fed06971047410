#pragma once

// Block embeddings between arm-independent features (per-arm parameters) and
// arm-dependent features (one shared parameter). Losses are preserved
// exactly; only the representation grows.

#include "lcb/model.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <vector>

namespace lcb {

/// Context features phi~(x) (column x of phi_tilde, d~ rows) and per-arm
/// parameters; theta_tilde[t] is a K~ x d~ matrix whose row a is theta~_{a,t}.
struct IndepInstance {
    int S = 0;
    int K = 0;
    int d = 0;
    std::vector<double> g;
    double L = 1.0;
    Matrix phi_tilde;
    std::vector<Matrix> theta_tilde;
    double loss_margin = 0.0;

    double loss(int arm, int x, std::size_t t) const {
        return theta_tilde[t].row(arm).dot(phi_tilde.col(x));
    }
};

inline void check_indep(const IndepInstance& inst) {
    if (inst.S < 1 || inst.K < 1 || inst.d < 1) throw ContractViolation("IndepInstance: S, K, d must be positive");
    if (static_cast<int>(inst.g.size()) != inst.S) throw ContractViolation("IndepInstance: g must have length S");
    if (inst.phi_tilde.rows() != inst.d || inst.phi_tilde.cols() != inst.S)
        throw ContractViolation("IndepInstance: phi_tilde must be d x S");
    for (const Matrix& th : inst.theta_tilde) {
        if (th.rows() != inst.K || th.cols() != inst.d)
            throw ContractViolation("IndepInstance: each theta_tilde entry must be K x d");
        for (int a = 0; a < inst.K; ++a)
            for (int x = 0; x < inst.S; ++x)
                if (std::abs(th.row(a).dot(inst.phi_tilde.col(x))) > 1.0 - inst.loss_margin + 1e-12)
                    throw ContractViolation("IndepInstance: bounded loss violated");
    }
}

struct DepInstance {
    FiniteContextModel model;
    ParameterSet params;
};

/// phi(a, x) = (0, ..., phi~(x) in block a, ..., 0), theta_t = stacked theta~_{a,t}.
inline DepInstance indep_to_dep(const IndepInstance& inst) {
    check_indep(inst);
    const int D = inst.d * inst.K;
    Matrix features = Matrix::Zero(D, static_cast<Eigen::Index>(inst.S) * inst.K);
    for (int x = 0; x < inst.S; ++x)
        for (int a = 0; a < inst.K; ++a)
            features.block(static_cast<Eigen::Index>(a) * inst.d, static_cast<Eigen::Index>(x) * inst.K + a,
                           inst.d, 1) = inst.phi_tilde.col(x);
    ParameterSet params;
    params.loss_margin = inst.loss_margin;
    for (const Matrix& th : inst.theta_tilde) {
        Vector stacked(D);
        for (int a = 0; a < inst.K; ++a) stacked.segment(static_cast<Eigen::Index>(a) * inst.d, inst.d) = th.row(a).transpose();
        params.thetas.push_back(std::move(stacked));
    }
    return DepInstance{FiniteContextModel(inst.S, inst.K, D, inst.g, inst.L, std::move(features), inst.loss_margin),
                       std::move(params)};
}

/// phi~(x) = (phi(1, x); ...; phi(K, x)), theta~_{a,t} = theta_t in block a.
inline IndepInstance dep_to_indep(const FiniteContextModel& m, const ParameterSet& params) {
    IndepInstance out;
    out.S = m.S();
    out.K = m.K();
    out.d = m.d() * m.K();
    out.g = m.g();
    out.L = m.L();
    out.loss_margin = params.loss_margin;
    out.phi_tilde.resize(out.d, out.S);
    for (int x = 0; x < m.S(); ++x)
        for (int a = 0; a < m.K(); ++a)
            out.phi_tilde.block(static_cast<Eigen::Index>(a) * m.d(), x, m.d(), 1) = m.feature(a, x);
    for (const Vector& theta : params.thetas) {
        if (theta.size() != m.d()) throw ContractViolation("dep_to_indep: theta dimension mismatch");
        Matrix th = Matrix::Zero(out.K, out.d);
        for (int a = 0; a < m.K(); ++a)
            th.block(a, static_cast<Eigen::Index>(a) * m.d(), 1, m.d()) = theta.transpose();
        out.theta_tilde.push_back(std::move(th));
    }
    return out;
}

struct LossMismatch {
    int arm = 0;
    int x = 0;
    std::size_t t = 0;
    double dep = 0.0;
    double indep = 0.0;
};

/// Sweeps every (a, x, t) and lists the triples where the two representations
/// disagree by more than tol.
inline std::vector<LossMismatch> loss_equality_certificate(const IndepInstance& indep, const DepInstance& dep,
                                                           double tol = 1e-12) {
    std::vector<LossMismatch> out;
    if (dep.params.thetas.size() != indep.theta_tilde.size() || dep.model.S() != indep.S || dep.model.K() != indep.K)
        throw ContractViolation("loss_equality_certificate: instances do not correspond");
    for (std::size_t t = 0; t < indep.theta_tilde.size(); ++t)
        for (int x = 0; x < indep.S; ++x)
            for (int a = 0; a < indep.K; ++a) {
                const double l_dep = dep.model.feature(a, x).dot(dep.params.thetas[t]);
                const double l_ind = indep.loss(a, x, t);
                if (std::abs(l_dep - l_ind) > tol) out.push_back({a, x, t, l_dep, l_ind});
            }
    return out;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json indep_to_json(const IndepInstance& inst) {
    nlohmann::json phi = nlohmann::json::array();
    for (int x = 0; x < inst.S; ++x) phi.push_back(vector_to_json(inst.phi_tilde.col(x)));
    nlohmann::json thetas = nlohmann::json::array();
    for (const Matrix& th : inst.theta_tilde) {
        nlohmann::json per_round = nlohmann::json::array();
        for (int a = 0; a < inst.K; ++a) per_round.push_back(vector_to_json(th.row(a).transpose()));
        thetas.push_back(std::move(per_round));
    }
    return {{"kind", "arm-independent"}, {"S", inst.S}, {"K", inst.K}, {"d", inst.d}, {"g", inst.g},
            {"L", inst.L}, {"phi_tilde", std::move(phi)}, {"theta_tilde", std::move(thetas)},
            {"loss_margin", inst.loss_margin}};
}

inline IndepInstance indep_from_json(const nlohmann::json& j) {
    IndepInstance inst;
    inst.S = detail::require_int(j, "S");
    inst.K = detail::require_int(j, "K");
    inst.d = detail::require_int(j, "d");
    if (inst.S < 1 || inst.K < 1 || inst.d < 1) throw std::invalid_argument("fields 'S', 'K', 'd' must be positive");
    inst.L = detail::require_number(j, "L");
    const Vector g = vector_from_json(detail::require(j, "g"), "g");
    inst.g.assign(g.data(), g.data() + g.size());
    inst.loss_margin = j.contains("loss_margin") ? detail::require_number(j, "loss_margin") : 0.0;
    const auto& phi = detail::require(j, "phi_tilde");
    if (!phi.is_array() || static_cast<int>(phi.size()) != inst.S)
        throw std::invalid_argument("field 'phi_tilde' must have S rows");
    inst.phi_tilde.resize(inst.d, inst.S);
    for (int x = 0; x < inst.S; ++x) {
        const Vector v = vector_from_json(phi[x], "phi_tilde");
        if (v.size() != inst.d) throw std::invalid_argument("field 'phi_tilde' rows must have length d");
        inst.phi_tilde.col(x) = v;
    }
    const auto& thetas = detail::require(j, "theta_tilde");
    if (!thetas.is_array()) throw std::invalid_argument("field 'theta_tilde' must be an array");
    for (const auto& per_round : thetas) {
        if (!per_round.is_array() || static_cast<int>(per_round.size()) != inst.K)
            throw std::invalid_argument("field 'theta_tilde' entries must have K rows");
        Matrix th(inst.K, inst.d);
        for (int a = 0; a < inst.K; ++a) {
            const Vector v = vector_from_json(per_round[a], "theta_tilde");
            if (v.size() != inst.d) throw std::invalid_argument("field 'theta_tilde' rows must have length d");
            th.row(a) = v.transpose();
        }
        inst.theta_tilde.push_back(std::move(th));
    }
    check_indep(inst);
    return inst;
}

}  // namespace lcb
