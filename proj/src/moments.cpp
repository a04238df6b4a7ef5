#include "orthogmm/moments.hpp"

#include <string>

#include "orthogmm/errors.hpp"

namespace orthogmm {

void MomentModel::check_point(const ParameterPoint& point) const {
    if (point.beta.size() != beta_dim()) {
        throw ArgumentError("parameter point: beta has length " +
                            std::to_string(point.beta.size()) + ", model expects " +
                            std::to_string(beta_dim()));
    }
    if (point.delta.size() != delta_dim()) {
        throw ArgumentError("parameter point: delta has length " +
                            std::to_string(point.delta.size()) + ", model expects " +
                            std::to_string(delta_dim()));
    }
    if (!point.beta.allFinite() || !point.delta.allFinite()) {
        throw ArgumentError("parameter point contains non-finite entries");
    }
}

Eigen::VectorXd orthogonalize(const EtaMatrix& eta, const Eigen::VectorXd& gbar) {
    if (eta.eta.cols() != gbar.size()) {
        throw ArgumentError("orthogonalize: eta has " + std::to_string(eta.eta.cols()) +
                            " columns, gbar has length " + std::to_string(gbar.size()));
    }
    return eta.eta * gbar;
}

Eigen::MatrixXd orthogonality_residual(const EtaMatrix& eta, const Eigen::MatrixXd& jac) {
    if (eta.eta.cols() != jac.rows()) {
        throw ArgumentError("orthogonality_residual: eta has " +
                            std::to_string(eta.eta.cols()) + " columns, jacobian has " +
                            std::to_string(jac.rows()) + " rows");
    }
    return eta.eta * jac;
}

}  // namespace orthogmm
