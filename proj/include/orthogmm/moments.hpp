#pragma once

#include <Eigen/Dense>
#include <vector>

namespace orthogmm {

// Candidate parameter value (beta, delta) for a moment model.
struct ParameterPoint {
    Eigen::VectorXd beta;   // parameter of interest, length p
    Eigen::VectorXd delta;  // nuisance weights, length J

    static ParameterPoint make(double beta_scalar, const Eigen::VectorXd& delta) {
        ParameterPoint pt;
        pt.beta = Eigen::VectorXd::Constant(1, beta_scalar);
        pt.delta = delta;
        return pt;
    }
};

// Orthogonalization weights, m x Q.
struct EtaMatrix {
    Eigen::MatrixXd eta;

    static EtaMatrix row(const Eigen::VectorXd& eta_row) {
        EtaMatrix e;
        e.eta = eta_row.transpose();
        return e;
    }
};

// Contiguous run of rows in the per-period moment series. For the synthetic
// control model there are two blocks (pre- and post-treatment), whose lengths
// differ; the variance estimator rescales each block by its own length.
struct MomentBlock {
    int offset = 0;  // first row of the block in the series matrix
    int length = 0;  // number of rows
};

// Abstraction over a set of Q moment conditions in (beta, delta). Both shipped
// models (synthetic control and many-instruments IV) are linear in theta, so
// Jacobians are constant; the flag is kept so a nonlinear model could opt out.
class MomentModel {
public:
    virtual ~MomentModel() = default;

    virtual int num_moments() const = 0;      // Q
    virtual int num_orthogonal() const = 0;   // m: moments nontrivial in beta
    virtual int beta_dim() const = 0;         // p
    virtual int delta_dim() const = 0;        // J
    virtual double effective_sample_size() const = 0;

    // Row blocks of the per-period series, in order.
    virtual std::vector<MomentBlock> blocks() const = 0;

    // ghat(beta, delta), length Q: blockwise means of the per-period series.
    virtual Eigen::VectorXd sample_moments(const ParameterPoint& point) const = 0;

    // Per-period values, rows grouped by block, Q columns. Coordinates that do
    // not belong to a block are zero on that block's rows.
    virtual Eigen::MatrixXd moment_series(const ParameterPoint& point) const = 0;

    // d ghat / d delta, Q x J.
    virtual Eigen::MatrixXd delta_jacobian(const ParameterPoint& point) const = 0;

    // d ghat / d beta, Q x p.
    virtual Eigen::MatrixXd beta_jacobian(const ParameterPoint& point) const = 0;

    virtual bool constant_in_theta() const { return true; }

    void check_point(const ParameterPoint& point) const;
};

// eta * gbar: the orthogonalized sample moments, length m.
Eigen::VectorXd orthogonalize(const EtaMatrix& eta, const Eigen::VectorXd& gbar);

// eta * jac: the m x J residual whose sup-norm the eta-constraint bounds.
Eigen::MatrixXd orthogonality_residual(const EtaMatrix& eta, const Eigen::MatrixXd& jac);

}  // namespace orthogmm
