#include "mpet/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace mpet {

namespace {
constexpr double kPi = std::numbers::pi;
}

std::pair<double, double> derive_lame(double E, double nu) {
    if (!(E > 0.0)) {
        throw ParameterError("derive_lame: Young modulus must be positive");
    }
    if (!(nu >= 0.0 && nu < 0.5)) {
        throw ParameterError("derive_lame: Poisson ratio must lie in [0, 0.5)");
    }
    const double lambda = nu * E / ((1.0 + nu) * (1.0 - 2.0 * nu));
    const double mu = E / (2.0 * (1.0 + nu));
    return {lambda, mu};
}

MpetParameters MpetParameters::make(double E, double nu, Eigen::VectorXd alpha,
                                    Eigen::VectorXd c, Eigen::VectorXd K,
                                    Eigen::MatrixXd beta) {
    const int n = static_cast<int>(alpha.size());
    if (n < 1) {
        throw ParameterError("MpetParameters: at least one network required");
    }
    if (c.size() != n || K.size() != n || beta.rows() != n || beta.cols() != n) {
        throw ParameterError("MpetParameters: inconsistent network counts");
    }
    for (int i = 0; i < n; ++i) {
        if (alpha[i] < 0.0 || alpha[i] > 1.0) {
            throw ParameterError("MpetParameters: alpha outside [0, 1]");
        }
        if (c[i] < 0.0) {
            throw ParameterError("MpetParameters: negative storage coefficient");
        }
        if (!(K[i] > 0.0)) {
            throw ParameterError("MpetParameters: conductivity must be positive");
        }
        if (beta(i, i) != 0.0) {
            throw ParameterError("MpetParameters: beta diagonal must be zero");
        }
        for (int j = 0; j < n; ++j) {
            if (beta(i, j) < 0.0) {
                throw ParameterError("MpetParameters: negative transfer coefficient");
            }
            if (beta(i, j) != beta(j, i)) {
                throw ParameterError("MpetParameters: beta must be symmetric");
            }
        }
    }
    MpetParameters p;
    p.n_networks = n;
    p.E = E;
    p.nu = nu;
    std::tie(p.lambda, p.mu) = derive_lame(E, nu);
    p.alpha = std::move(alpha);
    p.c = std::move(c);
    p.K = std::move(K);
    p.beta = std::move(beta);
    return p;
}

double contraction_factor(const MpetParameters& params) {
    if (!(params.lambda > 0.0)) {
        throw ParameterError("contraction_factor: requires lambda > 0");
    }
    const double coupling = params.alpha.squaredNorm() / params.lambda;
    const double delta = params.c.minCoeff();
    return coupling / (delta + coupling);
}

const DisplacementCondition& BoundaryProgram::displacement_on(BoundaryTag tag) const {
    const auto it = displacement.find(tag);
    if (it == displacement.end()) {
        throw ArgumentError("BoundaryProgram: no displacement condition on " +
                            to_string(tag));
    }
    return it->second;
}

const PressureCondition& BoundaryProgram::pressure_on(BoundaryTag tag,
                                                      int network) const {
    const auto it = pressure.find(tag);
    if (it == pressure.end()) {
        throw ArgumentError("BoundaryProgram: no pressure conditions on " +
                            to_string(tag));
    }
    if (network < 0 || network >= static_cast<int>(it->second.size())) {
        throw ArgumentError("BoundaryProgram: network index out of range");
    }
    return it->second[static_cast<std::size_t>(network)];
}

void BoundaryProgram::validate(const Mesh& mesh, int n_networks) const {
    for (const BoundaryEdge& e : mesh.boundary_edges()) {
        displacement_on(e.tag);
        const auto it = pressure.find(e.tag);
        if (it == pressure.end() ||
            static_cast<int>(it->second.size()) != n_networks) {
            throw ArgumentError("BoundaryProgram: tag " + to_string(e.tag) +
                                " must carry one condition per network");
        }
    }
}

BoundaryProgram pure_dirichlet_program(std::vector<BoundaryTag> tags, int n_networks) {
    const auto zero_vec = [](Vec2, double) { return Eigen::Vector2d::Zero().eval(); };
    const auto zero_scalar = [](Vec2, double) { return 0.0; };
    BoundaryProgram bc;
    for (BoundaryTag tag : tags) {
        bc.displacement[tag] = {ConditionKind::dirichlet, zero_vec, {}};
        bc.pressure[tag].assign(static_cast<std::size_t>(n_networks),
                                {ConditionKind::dirichlet, zero_scalar});
    }
    return bc;
}

ManufacturedCase::ManufacturedCase(MpetParameters params)
    : params_(std::move(params)) {
    if (params_.n_networks != 2) {
        throw ParameterError("ManufacturedCase: defined for exactly two networks");
    }
}

// Shorthand used below: the two network amplitudes are (1, 2), i.e.
// p_2 = 2 p_1, and kappa = 1/(mu + lambda).

Eigen::Vector2d ManufacturedCase::displacement(Vec2 p, double t) const {
    const double kappa = 1.0 / (params_.mu + params_.lambda);
    const double sxy = std::sin(kPi * p.x) * std::sin(kPi * p.y);
    const double u1 = std::sin(2 * kPi * p.y) * (-1.0 + std::cos(2 * kPi * p.x)) + kappa * sxy;
    const double u2 = std::sin(2 * kPi * p.x) * (1.0 - std::cos(2 * kPi * p.y)) + kappa * sxy;
    return std::sin(t) * Eigen::Vector2d(u1, u2);
}

Eigen::Matrix2d ManufacturedCase::displacement_gradient(Vec2 p, double t) const {
    const double kappa = 1.0 / (params_.mu + params_.lambda);
    const double sx = std::sin(kPi * p.x), cx = std::cos(kPi * p.x);
    const double sy = std::sin(kPi * p.y), cy = std::cos(kPi * p.y);
    const double s2x = std::sin(2 * kPi * p.x), c2x = std::cos(2 * kPi * p.x);
    const double s2y = std::sin(2 * kPi * p.y), c2y = std::cos(2 * kPi * p.y);
    Eigen::Matrix2d g;
    g(0, 0) = -2 * kPi * s2x * s2y + kappa * kPi * cx * sy;
    g(0, 1) = 2 * kPi * c2y * (c2x - 1.0) + kappa * kPi * sx * cy;
    g(1, 0) = 2 * kPi * c2x * (1.0 - c2y) + kappa * kPi * cx * sy;
    g(1, 1) = 2 * kPi * s2x * s2y + kappa * kPi * sx * cy;
    return std::sin(t) * g;
}

double ManufacturedCase::div_displacement(Vec2 p, double t) const {
    const double kappa = 1.0 / (params_.mu + params_.lambda);
    return kappa * kPi * std::sin(kPi * (p.x + p.y)) * std::sin(t);
}

Eigen::VectorXd ManufacturedCase::pressure(Vec2 p, double t) const {
    const double base = -std::sin(kPi * p.x) * std::sin(kPi * p.y) * std::cos(t);
    Eigen::VectorXd out(2);
    out << base, 2.0 * base;
    return out;
}

Eigen::MatrixXd ManufacturedCase::pressure_gradient(Vec2 p, double t) const {
    const double gx = -kPi * std::cos(kPi * p.x) * std::sin(kPi * p.y) * std::cos(t);
    const double gy = -kPi * std::sin(kPi * p.x) * std::cos(kPi * p.y) * std::cos(t);
    Eigen::MatrixXd g(2, 2);
    g << gx, gy, 2.0 * gx, 2.0 * gy;
    return g;
}

double ManufacturedCase::total_pressure(Vec2 p, double t) const {
    return params_.alpha.dot(pressure(p, t)) -
           params_.lambda * div_displacement(p, t);
}

Eigen::Vector2d ManufacturedCase::total_pressure_gradient(Vec2 p, double t) const {
    const double kappa = 1.0 / (params_.mu + params_.lambda);
    const Eigen::MatrixXd gp = pressure_gradient(p, t);
    const Eigen::Vector2d grad_alpha_p = gp.transpose() * params_.alpha;
    const double grad_div = params_.lambda * kappa * kPi * kPi *
                            std::cos(kPi * (p.x + p.y)) * std::sin(t);
    return grad_alpha_p - Eigen::Vector2d(grad_div, grad_div);
}

Eigen::Vector2d ManufacturedCase::body_force(Vec2 p, double t) const {
    const double mu = params_.mu;
    const double kappa = 1.0 / (params_.mu + params_.lambda);
    const double asum = params_.alpha[0] + 2.0 * params_.alpha[1];
    const double sx = std::sin(kPi * p.x), cx = std::cos(kPi * p.x);
    const double sy = std::sin(kPi * p.y), cy = std::cos(kPi * p.y);
    const double s2x = std::sin(2 * kPi * p.x), c2x = std::cos(2 * kPi * p.x);
    const double s2y = std::sin(2 * kPi * p.y), c2y = std::cos(2 * kPi * p.y);
    const double pi2 = kPi * kPi;
    const double common = 2.0 * mu * pi2 * kappa * sx * sy -
                          pi2 * std::cos(kPi * (p.x + p.y));
    const double f1 = (4.0 * mu * pi2 * s2y * (2.0 * c2x - 1.0) + common) * std::sin(t) -
                      asum * kPi * cx * sy * std::cos(t);
    const double f2 = (4.0 * mu * pi2 * s2x * (1.0 - 2.0 * c2y) + common) * std::sin(t) -
                      asum * kPi * sx * cy * std::cos(t);
    return {f1, f2};
}

Eigen::VectorXd ManufacturedCase::source(Vec2 p, double t) const {
    const double kappa = 1.0 / (params_.mu + params_.lambda);
    const double sxy = std::sin(kPi * p.x) * std::sin(kPi * p.y);
    const double div_u_dot = kappa * kPi * std::sin(kPi * (p.x + p.y)) * std::cos(t);
    const Eigen::Vector2d amp(1.0, 2.0);
    Eigen::VectorXd g(2);
    for (int i = 0; i < 2; ++i) {
        double exchange = 0.0;
        for (int j = 0; j < 2; ++j) {
            exchange -= params_.beta(i, j) * (amp[i] - amp[j]) * sxy * std::cos(t);
        }
        g[i] = params_.alpha[i] * div_u_dot + params_.c[i] * amp[i] * sxy * std::sin(t) +
               exchange - 2.0 * kPi * kPi * params_.K[i] * amp[i] * sxy * std::cos(t);
    }
    return g;
}

ProblemSpec manufactured_problem(const MpetParameters& params, Mesh mesh,
                                 double final_time) {
    ManufacturedCase mcase(params);
    ProblemSpec spec;
    spec.mesh = std::move(mesh);
    spec.params = params;
    spec.bc = pure_dirichlet_program({BoundaryTag::gamma1, BoundaryTag::gamma2,
                                      BoundaryTag::gamma3, BoundaryTag::gamma4},
                                     2);
    spec.body_force = [mcase](Vec2 p, double t) { return mcase.body_force(p, t); };
    spec.source = [mcase](Vec2 p, double t) { return mcase.source(p, t); };
    spec.initial_displacement = [mcase](Vec2 p, double t) {
        return mcase.displacement(p, t);
    };
    spec.initial_pressure = [mcase](Vec2 p, double t) { return mcase.pressure(p, t); };
    spec.final_time = final_time;
    return spec;
}

std::pair<MpetParameters, BoundaryProgram> physiological_preset() {
    Eigen::VectorXd alpha(4), c(4), K(4);
    alpha << 0.49, 0.25, 0.01, 0.25;
    c << 3.9e-4, 2.9e-4, 1.5e-5, 2.9e-4;
    K << 1.57e-5, 3.75e-6, 3.75e-6, 3.75e-6;
    Eigen::MatrixXd beta = Eigen::MatrixXd::Zero(4, 4);
    const auto link = [&beta](int i, int j, double value) {
        beta(i, j) = value;
        beta(j, i) = value;
    };
    link(0, 2, 1e-6);
    link(0, 3, 1e-6);
    link(1, 3, 1e-6);
    link(2, 3, 1e-6);
    MpetParameters params = MpetParameters::make(1500.0, 0.4999, alpha, c, K, beta);

    const double mmhg = kPascalPerMmHg;
    const auto pulse = [mmhg](double base, double amplitude) {
        return [=](Vec2, double t) {
            return mmhg * (base + amplitude * std::sin(2.0 * kPi * t));
        };
    };
    // Prescribed ventricle pressures entering the traction term s n.
    const auto ventricle_pressures = [mmhg](double t) {
        Eigen::Vector4d p;
        p << 5.0 + 2.012 * std::sin(2.0 * kPi * t),
            70.0 + 10.0 * std::sin(2.0 * kPi * t), 6.0, 38.0;
        return (mmhg * p).eval();
    };
    const Eigen::Vector4d alpha4 = alpha;
    const auto traction = [alpha4, ventricle_pressures](Vec2, double t,
                                                        Eigen::Vector2d normal) {
        const double s = -alpha4.dot(ventricle_pressures(t));
        return (s * normal).eval();
    };
    const auto zero_vec = [](Vec2, double) { return Eigen::Vector2d::Zero().eval(); };

    BoundaryProgram bc;
    bc.displacement[BoundaryTag::gamma_skull] = {ConditionKind::dirichlet, zero_vec, {}};
    bc.displacement[BoundaryTag::gamma_ventricle] = {ConditionKind::neumann, {}, traction};

    const PressureCondition zero_flux{ConditionKind::neumann, {}};
    bc.pressure[BoundaryTag::gamma_skull] = {
        {ConditionKind::dirichlet, pulse(5.0, 2.0)},
        {ConditionKind::dirichlet, pulse(70.0, 10.0)},
        {ConditionKind::dirichlet, pulse(6.0, 0.0)},
        zero_flux,
    };
    bc.pressure[BoundaryTag::gamma_ventricle] = {
        {ConditionKind::dirichlet, pulse(5.0, 2.012)},
        zero_flux,
        {ConditionKind::dirichlet, pulse(6.0, 0.0)},
        zero_flux,
    };
    return {std::move(params), std::move(bc)};
}

ProblemSpec annulus_problem(Mesh mesh, double final_time) {
    auto [params, bc] = physiological_preset();
    ProblemSpec spec;
    spec.mesh = std::move(mesh);
    spec.params = std::move(params);
    spec.bc = std::move(bc);
    spec.body_force = [](Vec2, double) { return Eigen::Vector2d::Zero().eval(); };
    spec.source = [](Vec2, double) { return Eigen::VectorXd::Zero(4).eval(); };
    spec.initial_displacement = [](Vec2, double) {
        return Eigen::Vector2d::Zero().eval();
    };
    spec.initial_pressure = [](Vec2, double) {
        Eigen::VectorXd p(4);
        p << 5.0, 70.0, 6.0, 38.0;
        return (kPascalPerMmHg * p).eval();
    };
    spec.final_time = final_time;
    return spec;
}

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) {
        return "";
    }
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

} // namespace

ConfigFile ConfigFile::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file '" + path + "'");
    }
    return parse(in);
}

ConfigFile ConfigFile::parse(std::istream& in) {
    ConfigFile cfg;
    std::string line;
    std::string section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto comment = line.find_first_of("#;");
        if (comment != std::string::npos) {
            line.erase(comment);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw ConfigError("config line " + std::to_string(line_no) +
                                  ": unterminated section header");
            }
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(line_no) +
                              ": expected 'key = value'");
        }
        cfg.sections_[section][trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return cfg;
}

bool ConfigFile::has(const std::string& section, const std::string& key) const {
    const auto it = sections_.find(section);
    return it != sections_.end() && it->second.count(key) > 0;
}

std::string ConfigFile::get(const std::string& section, const std::string& key) const {
    const auto it = sections_.find(section);
    if (it == sections_.end() || it->second.count(key) == 0) {
        throw ConfigError("config: missing key '" + key + "' in section [" +
                          section + "]");
    }
    return it->second.at(key);
}

std::string ConfigFile::get_or(const std::string& section, const std::string& key,
                               std::string fallback) const {
    return has(section, key) ? get(section, key) : std::move(fallback);
}

double ConfigFile::get_double(const std::string& section, const std::string& key) const {
    const std::string value = get(section, key);
    try {
        std::size_t used = 0;
        const double parsed = std::stod(value, &used);
        if (used != value.size()) {
            throw std::invalid_argument(value);
        }
        return parsed;
    } catch (const std::exception&) {
        throw ConfigError("config: '" + key + " = " + value + "' is not a number");
    }
}

int ConfigFile::get_int(const std::string& section, const std::string& key) const {
    const double value = get_double(section, key);
    const int rounded = static_cast<int>(std::lround(value));
    if (value != static_cast<double>(rounded)) {
        throw ConfigError("config: '" + key + "' is not an integer");
    }
    return rounded;
}

std::vector<double> ConfigFile::get_doubles(const std::string& section,
                                            const std::string& key) const {
    std::istringstream in(get(section, key));
    std::vector<double> values;
    std::string item;
    while (std::getline(in, item, ',')) {
        try {
            values.push_back(std::stod(trim(item)));
        } catch (const std::exception&) {
            throw ConfigError("config: '" + key + "' has a non-numeric entry");
        }
    }
    return values;
}

} // namespace mpet
