#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mpet/model.hpp"
#include "mpet/solvers.hpp"

namespace mpet {

/// Errors of one field on one mesh level against the manufactured solution.
struct ErrorRecord {
    int inv_h = 0;
    std::string field; ///< "u", "xi", "p1", "p2"
    double l2 = 0.0;
    double h1 = 0.0;      ///< full norm
    double h1_semi = 0.0; ///< seminorm
    std::optional<double> order_l2;
    std::optional<double> order_h1;
};

/// L2 and H1 errors per field via degree-6 quadrature of the analytic
/// fields (not an interpolant). Throws ArgumentError when the state time
/// does not match `expected_time`.
std::vector<ErrorRecord> error_norms(const Discretization& disc,
                                     const SystemState& state,
                                     const ManufacturedCase& mcase,
                                     double expected_time,
                                     Exec exec = Exec::parallel);

/// log2(e_coarse / e_fine) for a refinement factor of exactly 2.
double observed_order(double e_coarse, double e_fine);

// Quadrature-based norms of a VectorP2 field (independent of the
// assembled matrices; used as cross-checks).
double displacement_l2_norm(const FeSpace& space, const Eigen::VectorXd& coeffs,
                            Exec exec = Exec::parallel);
double displacement_div_norm(const FeSpace& space, const Eigen::VectorXd& coeffs,
                             Exec exec = Exec::parallel);
double displacement_strain_norm(const FeSpace& space, const Eigen::VectorXd& coeffs,
                                Exec exec = Exec::parallel);

struct ConvergenceTable {
    std::vector<int> levels; ///< 1/h per level
    /// rows[level] holds the records for fields u, xi, p1, p2.
    std::vector<std::vector<ErrorRecord>> rows;
};

struct ConvergenceStudyConfig {
    int base_n = 8;
    int levels = 3;
    double final_time = 0.01;
    SchemeConfig scheme; ///< n_steps is derived from final_time and dt
};

/// Runs the manufactured case over a chain of uniformly refined meshes and
/// tabulates errors and observed orders in the usual layout.
ConvergenceTable convergence_study(const MpetParameters& params,
                                   const ConvergenceStudyConfig& config);

/// One iterate of the decoupled scheme measured against the coupled
/// solution of the same time step.
struct ContractionPoint {
    int k = 0;
    double e_xi = 0.0;      ///< ||xi^{n,k} - xi^n||_L2
    double e_alpha_p = 0.0; ///< ||alpha^T (p^{n,k} - p^n)||_L2
    double e_p = 0.0;
    double e_u = 0.0;
    std::optional<double> ratio; ///< e_xi^k / e_xi^{k-1} above the floor
};

/// Runs a single representative time step: the coupled solve provides the
/// reference, then decoupled iterations are recorded until `floor` or
/// k_max. The k = 0 entry is the initialization error.
std::vector<ContractionPoint> contraction_series(const Discretization& disc,
                                                 double dt, int k_max,
                                                 double floor = 1e-13);

/// Discrete energy balance of the coupled scheme with time-constant loads:
/// stored[l] + dissipation[l] = stored[0] up to solver roundoff.
struct EnergyLedger {
    std::vector<double> times;
    std::vector<double> stored;      ///< J_h^n
    std::vector<double> dissipation; ///< cumulative S_h^n (0 at n = 0)

    double residual(std::size_t l) const {
        return stored[l] + dissipation[l] - stored[0];
    }
    double scale(std::size_t l) const {
        return std::abs(stored[0]) + std::abs(dissipation[l]) + 1.0;
    }
};

/// Throws ArgumentError when the trajectory is too short, non-uniform in
/// time, or the loads are not constant in time.
EnergyLedger energy_identity_residual(const std::vector<SystemState>& trajectory,
                                      const Discretization& disc);

} // namespace mpet
