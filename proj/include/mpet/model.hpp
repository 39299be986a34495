#pragma once

#include <Eigen/Dense>

#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mpet/mesh.hpp"

namespace mpet {

using ScalarTimeFn = std::function<double(Vec2, double)>;
using VectorTimeFn = std::function<Eigen::Vector2d(Vec2, double)>;
using MultiTimeFn = std::function<Eigen::VectorXd(Vec2, double)>;
/// Traction density; receives the outward unit normal of the boundary edge.
using TractionFn = std::function<Eigen::Vector2d(Vec2, double, Eigen::Vector2d)>;

/// lambda = nu E / ((1+nu)(1-2nu)), mu = E / (2(1+nu)).
std::pair<double, double> derive_lame(double E, double nu);

/// Physical coefficients of the N-network poroelastic model.
struct MpetParameters {
    int n_networks = 0;
    double E = 0.0;      ///< Young modulus (Pa)
    double nu = 0.0;     ///< Poisson ratio in [0, 0.5)
    double lambda = 0.0; ///< first Lame parameter (Pa), derived
    double mu = 0.0;     ///< shear modulus (Pa), derived
    Eigen::VectorXd alpha; ///< Biot-Willis coefficients, in (0, 1]
    Eigen::VectorXd c;     ///< storage coefficients >= 0 (1/Pa)
    Eigen::VectorXd K;     ///< hydraulic conductivities > 0 (mm^2/(Pa s))
    Eigen::MatrixXd beta;  ///< symmetric transfer coefficients >= 0, zero diagonal (1/(Pa s))

    static MpetParameters make(double E, double nu, Eigen::VectorXd alpha,
                               Eigen::VectorXd c, Eigen::VectorXd K,
                               Eigen::MatrixXd beta);
};

/// Supremal bound C* = (|alpha|^2/lambda) / (min_i c_i + |alpha|^2/lambda)
/// on the per-iteration contraction of the decoupled scheme; equals 1 in
/// the degenerate-storage limit min c_i = 0.
double contraction_factor(const MpetParameters& params);

enum class ConditionKind { dirichlet, neumann };

/// Boundary condition for the displacement on one geometric tag.
/// Dirichlet: prescribed displacement `value`. Neumann: traction density
/// `traction` appearing in the weak form; an empty traction means zero.
struct DisplacementCondition {
    ConditionKind kind = ConditionKind::dirichlet;
    VectorTimeFn value;
    TractionFn traction;
};

/// Boundary condition for one network pressure on one geometric tag.
/// Neumann with an empty `value` is a homogeneous (zero-flux) condition.
struct PressureCondition {
    ConditionKind kind = ConditionKind::neumann;
    ScalarTimeFn value;
};

/// Per-tag condition map for the displacement and each network pressure.
/// The total pressure carries no boundary conditions.
struct BoundaryProgram {
    std::map<BoundaryTag, DisplacementCondition> displacement;
    std::map<BoundaryTag, std::vector<PressureCondition>> pressure;

    const DisplacementCondition& displacement_on(BoundaryTag tag) const;
    const PressureCondition& pressure_on(BoundaryTag tag, int network) const;

    /// Every boundary edge of the mesh must resolve to exactly one
    /// condition per field; throws ArgumentError otherwise.
    void validate(const Mesh& mesh, int n_networks) const;
};

/// Homogeneous Dirichlet for u and all pressures on the given tags.
BoundaryProgram pure_dirichlet_program(std::vector<BoundaryTag> tags, int n_networks);

/// Complete time-dependent problem definition.
struct ProblemSpec {
    Mesh mesh;
    MpetParameters params;
    BoundaryProgram bc;
    VectorTimeFn body_force;          ///< f(x, t)
    MultiTimeFn source;               ///< g(x, t), length N
    VectorTimeFn initial_displacement;
    MultiTimeFn initial_pressure;
    double final_time = 0.0;
};

/// The closed-form accuracy-test case on the unit square (two networks).
/// Fields, their gradients, and the matching load terms are all analytic;
/// the load derivation is gated by a finite-difference residual oracle in
/// the test suite.
class ManufacturedCase {
public:
    explicit ManufacturedCase(MpetParameters params);

    const MpetParameters& params() const { return params_; }

    Eigen::Vector2d displacement(Vec2 p, double t) const;
    Eigen::Matrix2d displacement_gradient(Vec2 p, double t) const;
    double div_displacement(Vec2 p, double t) const;
    double total_pressure(Vec2 p, double t) const;
    Eigen::Vector2d total_pressure_gradient(Vec2 p, double t) const;
    Eigen::VectorXd pressure(Vec2 p, double t) const;
    Eigen::MatrixXd pressure_gradient(Vec2 p, double t) const; ///< N x 2

    Eigen::Vector2d body_force(Vec2 p, double t) const;
    Eigen::VectorXd source(Vec2 p, double t) const;

private:
    MpetParameters params_;
};

/// Unit-square problem driven by the manufactured case, pure homogeneous
/// Dirichlet boundary for u and p on all four sides.
ProblemSpec manufactured_problem(const MpetParameters& params, Mesh mesh,
                                 double final_time);

/// One millimeter of mercury in pascal.
inline constexpr double kPascalPerMmHg = 133.32;

/// Four-network brain parameter set and heartbeat boundary program
/// (values internally in Pa, lengths in mm, time in s).
std::pair<MpetParameters, BoundaryProgram> physiological_preset();

/// The physiological preset realized on an annulus mesh.
ProblemSpec annulus_problem(Mesh mesh, double final_time);

/// Minimal "[section]" + "key = value" config file.
class ConfigFile {
public:
    static ConfigFile load(const std::string& path);
    static ConfigFile parse(std::istream& in);

    bool has(const std::string& section, const std::string& key) const;
    std::string get(const std::string& section, const std::string& key) const;
    std::string get_or(const std::string& section, const std::string& key,
                       std::string fallback) const;
    double get_double(const std::string& section, const std::string& key) const;
    int get_int(const std::string& section, const std::string& key) const;
    std::vector<double> get_doubles(const std::string& section,
                                    const std::string& key) const;

private:
    std::map<std::string, std::map<std::string, std::string>> sections_;
};

} // namespace mpet
