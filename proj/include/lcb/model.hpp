#pragma once

// Problem instance: finite context space with known probabilities, a known
// arm-dependent feature map and the loss parameters an environment uses.

#include "lcb/numerics.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstddef>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace lcb {

class FiniteContextModel {
public:
    /// features: d x (S*K), column x*K + a holds phi(a, x).
    FiniteContextModel(int num_contexts, int num_arms, int dim, std::vector<double> probs,
                       double l_bound, Matrix features, double loss_margin = 0.0)
        : S_(num_contexts), K_(num_arms), d_(dim), g_(std::move(probs)), L_(l_bound),
          features_(std::move(features)), loss_margin_(loss_margin) {
        if (S_ < 1 || K_ < 1 || d_ < 1)
            throw ContractViolation("FiniteContextModel: S, K and d must be positive");
        if (static_cast<int>(g_.size()) != S_)
            throw ContractViolation("FiniteContextModel: g must have length S");
        if (features_.rows() != d_ || features_.cols() != static_cast<Eigen::Index>(S_) * K_)
            throw ContractViolation("FiniteContextModel: feature table must be d x (S*K)");
        if (!features_.allFinite())
            throw ContractViolation("FiniteContextModel: non-finite feature entry");
        for (double p : g_)
            if (!std::isfinite(p) || p < 0.0)
                throw ContractViolation("FiniteContextModel: g entries must be finite and >= 0");
        if (!std::isfinite(L_) || L_ <= 0.0)
            throw ContractViolation("FiniteContextModel: L must be positive");
        if (!(loss_margin_ >= 0.0 && loss_margin_ < 1.0))
            throw ContractViolation("FiniteContextModel: loss_margin must lie in [0, 1)");
    }

    int S() const noexcept { return S_; }
    int K() const noexcept { return K_; }
    int d() const noexcept { return d_; }
    double L() const noexcept { return L_; }
    double loss_margin() const noexcept { return loss_margin_; }
    const std::vector<double>& g() const noexcept { return g_; }
    double g(int x) const { return g_.at(static_cast<std::size_t>(x)); }

    const Matrix& features() const noexcept { return features_; }

    auto feature(int arm, int x) const {
        check_index(arm, x);
        return features_.col(static_cast<Eigen::Index>(x) * K_ + arm);
    }

    /// d x K block of the features at context x.
    auto context_features(int x) const {
        return features_.middleCols(static_cast<Eigen::Index>(x) * K_, K_);
    }

    void check_index(int arm, int x) const {
        if (arm < 0 || arm >= K_ || x < 0 || x >= S_) {
            std::ostringstream msg;
            msg << "index out of range: arm " << arm << " (K=" << K_ << "), context " << x
                << " (S=" << S_ << ")";
            throw std::out_of_range(msg.str());
        }
    }

private:
    int S_;
    int K_;
    int d_;
    std::vector<double> g_;
    double L_;
    Matrix features_;
    double loss_margin_;
};

/// Loss parameters used by an environment plus the part of the unit loss
/// budget reserved for additive noise.
struct ParameterSet {
    std::vector<Vector> thetas;
    double loss_margin = 0.0;
};

struct HistoryRecord {
    long t = 0;
    int x_index = 0;
    int arm = 0;
    double loss = 0.0;

    HistoryRecord(long round, int context, int chosen, double realized)
        : t(round), x_index(context), arm(chosen), loss(realized) {
        if (!(realized >= -1.0 && realized <= 1.0))
            throw ContractViolation("HistoryRecord: loss outside [-1, 1]");
    }
};

inline double expected_loss(const FiniteContextModel& m, const Vector& theta, int x_index, int arm) {
    m.check_index(arm, x_index);
    if (theta.size() != m.d())
        throw ContractViolation("expected_loss: theta dimension mismatch");
    return m.feature(arm, x_index).dot(theta);
}

inline constexpr double kProbSumTol = 1e-12;

/// Lists every violated modelling assumption; an empty result means valid.
inline std::vector<std::string> validate_instance(const FiniteContextModel& m, const ParameterSet& p) {
    std::vector<std::string> out;
    double total = 0.0;
    for (double v : m.g()) total += v;
    if (std::abs(total - 1.0) > kProbSumTol) {
        std::ostringstream msg;
        msg << "g does not sum to 1 (sum = " << total << ")";
        out.push_back(msg.str());
    }
    for (int x = 0; x < m.S(); ++x) {
        if (m.g(x) < 1.0 / m.L()) {
            std::ostringstream msg;
            msg << "g(x" << x << ") = " << m.g(x) << " < 1/L = " << 1.0 / m.L();
            out.push_back(msg.str());
        }
    }
    if (m.L() < m.S()) {
        std::ostringstream msg;
        msg << "L = " << m.L() << " < S = " << m.S();
        out.push_back(msg.str());
    }
    if (!(p.loss_margin >= 0.0 && p.loss_margin < 1.0))
        out.push_back("loss_margin outside [0, 1)");
    const double bound = 1.0 - p.loss_margin;
    for (std::size_t i = 0; i < p.thetas.size(); ++i) {
        const Vector& theta = p.thetas[i];
        if (theta.size() != m.d()) {
            std::ostringstream msg;
            msg << "theta[" << i << "] has dimension " << theta.size() << ", expected " << m.d();
            out.push_back(msg.str());
            continue;
        }
        if (!theta.allFinite()) {
            std::ostringstream msg;
            msg << "theta[" << i << "] has non-finite entries";
            out.push_back(msg.str());
            continue;
        }
        for (int x = 0; x < m.S(); ++x) {
            for (int a = 0; a < m.K(); ++a) {
                const double v = m.feature(a, x).dot(theta);
                if (std::abs(v) > bound + 1e-12) {
                    std::ostringstream msg;
                    msg << "bounded loss violated: |<phi(a" << a << ", x" << x << "), theta[" << i
                        << "]>| = " << std::abs(v) << " > " << bound;
                    out.push_back(msg.str());
                }
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json vector_to_json(const Vector& v) {
    nlohmann::json arr = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
    return arr;
}

inline Vector vector_from_json(const nlohmann::json& j, const std::string& field) {
    if (!j.is_array())
        throw std::invalid_argument("field '" + field + "' must be an array of numbers");
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number())
            throw std::invalid_argument("field '" + field + "' must contain numbers only");
        v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
    }
    return v;
}

/// Instance document: {S, K, d, g, L, phi[K][S][d], loss_margin}.
inline nlohmann::json instance_to_json(const FiniteContextModel& m) {
    nlohmann::json phi = nlohmann::json::array();
    for (int a = 0; a < m.K(); ++a) {
        nlohmann::json per_arm = nlohmann::json::array();
        for (int x = 0; x < m.S(); ++x) per_arm.push_back(vector_to_json(m.feature(a, x)));
        phi.push_back(std::move(per_arm));
    }
    return nlohmann::json{{"S", m.S()},  {"K", m.K()},   {"d", m.d()},
                          {"g", m.g()},  {"L", m.L()},   {"phi", std::move(phi)},
                          {"loss_margin", m.loss_margin()}};
}

namespace detail {
inline const nlohmann::json& require(const nlohmann::json& j, const char* field) {
    if (!j.is_object() || !j.contains(field))
        throw std::invalid_argument(std::string("missing field '") + field + "'");
    return j.at(field);
}

inline int require_int(const nlohmann::json& j, const char* field) {
    const auto& v = require(j, field);
    if (!v.is_number_integer())
        throw std::invalid_argument(std::string("field '") + field + "' must be an integer");
    return v.get<int>();
}

inline double require_number(const nlohmann::json& j, const char* field) {
    const auto& v = require(j, field);
    if (!v.is_number())
        throw std::invalid_argument(std::string("field '") + field + "' must be a number");
    return v.get<double>();
}
}  // namespace detail

inline FiniteContextModel instance_from_json(const nlohmann::json& j) {
    const int S = detail::require_int(j, "S");
    const int K = detail::require_int(j, "K");
    const int d = detail::require_int(j, "d");
    if (S < 1 || K < 1 || d < 1) throw std::invalid_argument("fields 'S', 'K', 'd' must be positive");
    const double L = detail::require_number(j, "L");
    const Vector gv = vector_from_json(detail::require(j, "g"), "g");
    if (gv.size() != S) throw std::invalid_argument("field 'g' must have length S");
    const auto& phi = detail::require(j, "phi");
    if (!phi.is_array() || static_cast<int>(phi.size()) != K)
        throw std::invalid_argument("field 'phi' must be an array of K arrays");
    Matrix features(d, static_cast<Eigen::Index>(S) * K);
    for (int a = 0; a < K; ++a) {
        if (!phi[a].is_array() || static_cast<int>(phi[a].size()) != S)
            throw std::invalid_argument("field 'phi' must have shape K x S x d");
        for (int x = 0; x < S; ++x) {
            const Vector v = vector_from_json(phi[a][x], "phi");
            if (v.size() != d) throw std::invalid_argument("field 'phi' must have shape K x S x d");
            features.col(static_cast<Eigen::Index>(x) * K + a) = v;
        }
    }
    const double margin = j.contains("loss_margin") ? detail::require_number(j, "loss_margin") : 0.0;
    std::vector<double> g(gv.data(), gv.data() + gv.size());
    return FiniteContextModel(S, K, d, std::move(g), L, std::move(features), margin);
}

}  // namespace lcb
