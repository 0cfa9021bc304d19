#include "memcore/xbar.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "memcore/error.hpp"

namespace memcore::xbar {

void CrossbarGeometry::validate() const {
    if (rows < 1 || cols < 1) {
        throw InvalidInput("xbar", "crossbar needs at least one row and one column");
    }
    if (!(wire_resistance >= 0.0) || !std::isfinite(wire_resistance)) {
        throw InvalidInput("xbar", "wire segment resistance must be >= 0");
    }
}

void SolverConfig::validate() const {
    if (!(tolerance > 0.0)) {
        throw InvalidInput("xbar", "solver tolerance must be > 0");
    }
    if (max_iterations < 1) {
        throw InvalidInput("xbar", "solver max_iterations must be >= 1");
    }
}

Crossbar::Crossbar(CrossbarGeometry geometry, device::DeviceParams params, double x_init)
    : Crossbar(geometry, params, std::vector<double>(geometry.rows * geometry.cols, x_init)) {}

Crossbar::Crossbar(CrossbarGeometry geometry, device::DeviceParams params,
                   std::vector<double> states)
    : geometry_(geometry), params_(params), states_(std::move(states)) {
    geometry_.validate();
    params_.validate();
    if (states_.size() != geometry_.rows * geometry_.cols) {
        throw InvalidInput("xbar", "state grid size does not match geometry");
    }
    for (double s : states_) {
        if (!(s >= params_.x_floor && s <= 1.0)) {
            throw InvalidInput("xbar", "memristor state outside [x_floor, 1]");
        }
    }
}

void Crossbar::set_x(std::size_t i, std::size_t j, double x) {
    if (!(x >= params_.x_floor && x <= 1.0)) {
        throw InvalidInput("xbar", "memristor state outside [x_floor, 1]");
    }
    states_[i * geometry_.cols + j] = x;
}

void Crossbar::set_wire_resistance(double rw) {
    CrossbarGeometry g = geometry_;
    g.wire_resistance = rw;
    g.validate();
    geometry_ = g;
}

Crossbar Crossbar::transposed_for_backward() const {
    const std::size_t m = rows();
    const std::size_t n = cols();
    std::vector<double> t(m * n);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < m; ++c) {
            t[r * m + c] = x(m - 1 - c, n - 1 - r);
        }
    }
    return Crossbar({n, m, geometry_.wire_resistance}, params_, std::move(t));
}

namespace {

void check_inputs(const Crossbar& xb, std::span<const double> inputs) {
    if (inputs.size() != xb.rows()) {
        throw InvalidInput("xbar", "input vector length " + std::to_string(inputs.size()) +
                                       " does not match " + std::to_string(xb.rows()) + " rows");
    }
    const double limit = xb.params().read_limit();
    for (double u : inputs) {
        if (!std::isfinite(u)) {
            throw InvalidInput("xbar", "non-finite input voltage");
        }
        if (std::abs(u) > limit) {
            throw OverdriveError("xbar", "input drive exceeds device read limit");
        }
    }
}

double device_i(const device::DeviceParams& p, ConductionMode mode, double x, double v) {
    if (mode == ConductionMode::linearized) {
        return p.unit_conductance() * x * v;
    }
    const double a = v >= 0.0 ? p.a1 : p.a2;
    return a * x * std::sinh(p.b * v);
}

// Chord conductance I(V)/V, falling back to the slope at V = 0.
double chord_conductance(const device::DeviceParams& p, ConductionMode mode, double x, double v) {
    if (mode == ConductionMode::linearized || std::abs(p.b * v) < 1e-8) {
        return p.unit_conductance() * x;
    }
    return device_i(p, mode, x, v) / v;
}

NodeSolution short_circuit_solution(const Crossbar& xb, std::span<const double> inputs,
                                    ConductionMode mode, bool record_nodes) {
    const std::size_t m = xb.rows();
    const std::size_t n = xb.cols();
    NodeSolution sol;
    sol.rows = m;
    sol.cols = n;
    sol.column_currents.assign(n, 0.0);
    const auto& p = xb.params();
    for (std::size_t i = 0; i < m; ++i) {
        const double u = inputs[i];
        if (u == 0.0) {
            continue;
        }
        const auto row = xb.states().subspan(i * n, n);
        if (mode == ConductionMode::linearized) {
            const double gu = p.unit_conductance() * u;
            for (std::size_t j = 0; j < n; ++j) {
                sol.column_currents[j] += row[j] * gu;
            }
        } else {
            for (std::size_t j = 0; j < n; ++j) {
                sol.column_currents[j] += device_i(p, mode, row[j], u);
            }
        }
    }
    if (record_nodes) {
        sol.row_node_voltages.resize(m * n);
        for (std::size_t i = 0; i < m; ++i) {
            std::fill_n(sol.row_node_voltages.begin() + static_cast<std::ptrdiff_t>(i * n), n,
                        inputs[i]);
        }
        sol.col_node_voltages.assign(m * n, 0.0);
    }
    return sol;
}

// Thomas-algorithm factors of a chain whose off-diagonals are all -gw.
struct ChainFactors {
    std::vector<double> cprime;
    std::vector<double> inv_denom;
};

// Jacobi state for one solve.  Column-wire quantities are stored transposed
// (j*M + i) so that every chain is contiguous in memory.
class JacobiSolver {
public:
    JacobiSolver(const Crossbar& xb, std::span<const double> inputs, const SolverConfig& cfg)
        : xb_(xb),
          inputs_(inputs),
          cfg_(cfg),
          m_(xb.rows()),
          n_(xb.cols()),
          gw_(1.0 / xb.geometry().wire_resistance),
          vr_(m_ * n_),
          vc_t_(m_ * n_, 0.0),
          vr_next_(m_ * n_),
          vc_t_next_(m_ * n_),
          g_(m_ * n_),
          g_t_(m_ * n_) {
        for (std::size_t i = 0; i < m_; ++i) {
            std::fill_n(vr_.begin() + static_cast<std::ptrdiff_t>(i * n_), n_, inputs_[i]);
        }
        refresh_conductances();
    }

    NodeSolution run() {
        std::size_t it = 0;
        double update = 0.0;
        while (true) {
            if (it >= cfg_.max_iterations) {
                throw ConvergenceError("xbar",
                                       "Jacobi solve did not converge in " +
                                           std::to_string(cfg_.max_iterations) +
                                           " sweeps (residual " + std::to_string(update) + " V)",
                                       update);
            }
            if (cfg_.conduction == ConductionMode::sinh && it > 0) {
                refresh_conductances();
            }
            update = cfg_.sweep == SweepKind::line ? line_sweep() : node_sweep();
            ++it;
            if (update <= cfg_.tolerance) {
                break;
            }
        }
        return finish(it, update);
    }

private:
    void refresh_conductances() {
        const auto& p = xb_.params();
        for (std::size_t i = 0; i < m_; ++i) {
            for (std::size_t j = 0; j < n_; ++j) {
                const double v = vr_[i * n_ + j] - vc_t_[j * m_ + i];
                const double g = chord_conductance(p, cfg_.conduction, xb_.x(i, j), v);
                g_[i * n_ + j] = g;
                g_t_[j * m_ + i] = g;
            }
        }
        if (cfg_.sweep == SweepKind::line) {
            factor_chains();
        }
    }

    void factor_chains() {
        row_f_.cprime.resize(m_ * n_);
        row_f_.inv_denom.resize(m_ * n_);
        col_f_.cprime.resize(m_ * n_);
        col_f_.inv_denom.resize(m_ * n_);
        // Row chain: left neighbour always (driver or node), right neighbour unless last.
        for (std::size_t i = 0; i < m_; ++i) {
            factor_chain(&g_[i * n_], n_, /*first_has_prev=*/true, /*last_has_next=*/false,
                         &row_f_.cprime[i * n_], &row_f_.inv_denom[i * n_]);
        }
        // Column chain: upper neighbour unless first, lower neighbour always (node or ground).
        for (std::size_t j = 0; j < n_; ++j) {
            factor_chain(&g_t_[j * m_], m_, /*first_has_prev=*/false, /*last_has_next=*/true,
                         &col_f_.cprime[j * m_], &col_f_.inv_denom[j * m_]);
        }
    }

    void factor_chain(const double* g, std::size_t len, bool first_has_prev, bool last_has_next,
                      double* cprime, double* inv_denom) const {
        double prev_cp = 0.0;
        for (std::size_t k = 0; k < len; ++k) {
            const bool has_prev = k > 0 || first_has_prev;
            const bool has_next = k + 1 < len || last_has_next;
            const double diag = (has_prev ? gw_ : 0.0) + (has_next ? gw_ : 0.0) + g[k];
            const double denom = diag + (k > 0 ? gw_ * prev_cp : 0.0);
            inv_denom[k] = 1.0 / denom;
            prev_cp = -gw_ * inv_denom[k];
            cprime[k] = prev_cp;
        }
    }

    // Solve one chain in place: rhs holds the right-hand side on entry and the
    // node voltages on exit.
    static void solve_chain(double* rhs, std::size_t len, double gw, const double* cprime,
                            const double* inv_denom) {
        rhs[0] *= inv_denom[0];
        for (std::size_t k = 1; k < len; ++k) {
            rhs[k] = (rhs[k] + gw * rhs[k - 1]) * inv_denom[k];
        }
        for (std::size_t k = len - 1; k-- > 0;) {
            rhs[k] -= cprime[k] * rhs[k + 1];
        }
    }

    double line_sweep() {
        for (std::size_t i = 0; i < m_; ++i) {
            double* out = &vr_next_[i * n_];
            const double* g = &g_[i * n_];
            for (std::size_t j = 0; j < n_; ++j) {
                out[j] = g[j] * vc_t_[j * m_ + i];
            }
            out[0] += gw_ * inputs_[i];
            solve_chain(out, n_, gw_, &row_f_.cprime[i * n_], &row_f_.inv_denom[i * n_]);
        }
        for (std::size_t j = 0; j < n_; ++j) {
            double* out = &vc_t_next_[j * m_];
            const double* g = &g_t_[j * m_];
            for (std::size_t i = 0; i < m_; ++i) {
                out[i] = g[i] * vr_[i * n_ + j];
            }
            solve_chain(out, m_, gw_, &col_f_.cprime[j * m_], &col_f_.inv_denom[j * m_]);
        }
        return swap_and_measure();
    }

    double node_sweep() {
        for (std::size_t i = 0; i < m_; ++i) {
            for (std::size_t j = 0; j < n_; ++j) {
                const double g = g_[i * n_ + j];
                double num = gw_ * (j == 0 ? inputs_[i] : vr_[i * n_ + j - 1]) +
                             g * vc_t_[j * m_ + i];
                double den = gw_ + g;
                if (j + 1 < n_) {
                    num += gw_ * vr_[i * n_ + j + 1];
                    den += gw_;
                }
                vr_next_[i * n_ + j] = num / den;
            }
        }
        for (std::size_t j = 0; j < n_; ++j) {
            for (std::size_t i = 0; i < m_; ++i) {
                const double g = g_t_[j * m_ + i];
                double num = g * vr_[i * n_ + j];
                double den = gw_ + g;  // lower neighbour, or the virtual ground
                if (i + 1 < m_) {
                    num += gw_ * vc_t_[j * m_ + i + 1];
                }
                if (i > 0) {
                    num += gw_ * vc_t_[j * m_ + i - 1];
                    den += gw_;
                }
                vc_t_next_[j * m_ + i] = num / den;
            }
        }
        return swap_and_measure();
    }

    double swap_and_measure() {
        double update = 0.0;
        for (std::size_t k = 0; k < vr_.size(); ++k) {
            update = std::max(update, std::abs(vr_next_[k] - vr_[k]));
            update = std::max(update, std::abs(vc_t_next_[k] - vc_t_[k]));
        }
        vr_.swap(vr_next_);
        vc_t_.swap(vc_t_next_);
        return update;
    }

    NodeSolution finish(std::size_t iterations, double residual) const {
        const auto& p = xb_.params();
        NodeSolution sol;
        sol.rows = m_;
        sol.cols = n_;
        sol.iterations = iterations;
        sol.residual = residual;
        sol.column_currents.assign(n_, 0.0);
        const double limit = p.read_limit();
        for (std::size_t i = 0; i < m_; ++i) {
            for (std::size_t j = 0; j < n_; ++j) {
                const double v = vr_[i * n_ + j] - vc_t_[j * m_ + i];
                if (std::abs(v) > limit) {
                    throw OverdriveError("xbar", "device voltage exceeds read limit");
                }
                sol.column_currents[j] += device_i(p, cfg_.conduction, xb_.x(i, j), v);
            }
        }
        if (cfg_.record_nodes) {
            sol.row_node_voltages = vr_;
            sol.col_node_voltages.resize(m_ * n_);
            for (std::size_t i = 0; i < m_; ++i) {
                for (std::size_t j = 0; j < n_; ++j) {
                    sol.col_node_voltages[i * n_ + j] = vc_t_[j * m_ + i];
                }
            }
        }
        return sol;
    }

    const Crossbar& xb_;
    std::span<const double> inputs_;
    const SolverConfig& cfg_;
    std::size_t m_;
    std::size_t n_;
    double gw_;
    std::vector<double> vr_;
    std::vector<double> vc_t_;
    std::vector<double> vr_next_;
    std::vector<double> vc_t_next_;
    std::vector<double> g_;
    std::vector<double> g_t_;
    ChainFactors row_f_;
    ChainFactors col_f_;
};

}  // namespace

NodeSolution solve_jacobi(const Crossbar& xb, std::span<const double> inputs,
                          const SolverConfig& cfg) {
    cfg.validate();
    check_inputs(xb, inputs);
    if (xb.geometry().wire_resistance == 0.0) {
        return short_circuit_solution(xb, inputs, cfg.conduction, cfg.record_nodes);
    }
    return JacobiSolver(xb, inputs, cfg).run();
}

NodeSolution solve_dense(const Crossbar& xb, std::span<const double> inputs) {
    check_inputs(xb, inputs);
    const std::size_t m = xb.rows();
    const std::size_t n = xb.cols();
    if (2 * m * n > kDenseNodeLimit) {
        throw InvalidInput("xbar", "dense solve limited to 2MN <= " +
                                       std::to_string(kDenseNodeLimit) + " nodes");
    }
    if (xb.geometry().wire_resistance == 0.0) {
        return short_circuit_solution(xb, inputs, ConductionMode::linearized, true);
    }
    const double gw = 1.0 / xb.geometry().wire_resistance;
    const auto mn = static_cast<Eigen::Index>(m * n);
    const auto r = [n](std::size_t i, std::size_t j) { return static_cast<Eigen::Index>(i * n + j); };
    const auto c = [n, mn](std::size_t i, std::size_t j) {
        return mn + static_cast<Eigen::Index>(i * n + j);
    };

    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2 * mn, 2 * mn);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(2 * mn);
    const auto couple = [&a](Eigen::Index p, Eigen::Index q, double g) {
        a(p, p) += g;
        a(q, q) += g;
        a(p, q) -= g;
        a(q, p) -= g;
    };
    for (std::size_t i = 0; i < m; ++i) {
        // Driver segment into the first row node.
        a(r(i, 0), r(i, 0)) += gw;
        rhs(r(i, 0)) += gw * inputs[i];
        for (std::size_t j = 0; j + 1 < n; ++j) {
            couple(r(i, j), r(i, j + 1), gw);
        }
    }
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i + 1 < m; ++i) {
            couple(c(i, j), c(i + 1, j), gw);
        }
        // Last segment into the virtual ground.
        a(c(m - 1, j), c(m - 1, j)) += gw;
    }
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            couple(r(i, j), c(i, j), xb.conductance(i, j));
        }
    }

    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() != Eigen::Success) {
        throw NumericalError("xbar", "nodal matrix is not positive definite");
    }
    const Eigen::VectorXd v = llt.solve(rhs);

    NodeSolution sol;
    sol.rows = m;
    sol.cols = n;
    sol.iterations = 1;
    sol.residual = 0.0;
    sol.row_node_voltages.resize(m * n);
    sol.col_node_voltages.resize(m * n);
    sol.column_currents.assign(n, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double vr = v(r(i, j));
            const double vc = v(c(i, j));
            sol.row_node_voltages[i * n + j] = vr;
            sol.col_node_voltages[i * n + j] = vc;
            sol.column_currents[j] += xb.conductance(i, j) * (vr - vc);
        }
    }
    return sol;
}

std::vector<double> ideal_forward(const Matrix& weights, std::span<const double> inputs) {
    if (inputs.size() != weights.rows()) {
        throw InvalidInput("xbar", "ideal_forward: weight rows do not match input length");
    }
    std::vector<double> out(weights.cols(), 0.0);
    for (std::size_t i = 0; i < weights.rows(); ++i) {
        const auto row = weights.row(i);
        for (std::size_t j = 0; j < out.size(); ++j) {
            out[j] += row[j] * inputs[i];
        }
    }
    return out;
}

void write_csv(const Crossbar& xb, std::ostream& os) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", xb.geometry().wire_resistance);
    os << "rows,cols,wire_resistance\n" << xb.rows() << ',' << xb.cols() << ',' << buf << '\n';
    for (std::size_t i = 0; i < xb.rows(); ++i) {
        for (std::size_t j = 0; j < xb.cols(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", xb.x(i, j));
            if (j > 0) {
                os << ',';
            }
            os << buf;
        }
        os << '\n';
    }
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        out.push_back(cell);
    }
    if (!line.empty() && line.back() == ',') {
        out.emplace_back();
    }
    return out;
}

double parse_number(const std::string& s, std::size_t line_no) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size() && s.find_first_not_of(" \t\r", used) != std::string::npos) {
            throw std::invalid_argument(s);
        }
        return v;
    } catch (const std::exception&) {
        throw FormatError("xbar", "crossbar CSV line " + std::to_string(line_no) +
                                      ": not a number '" + s + "'");
    }
}

}  // namespace

Crossbar read_csv(std::istream& is, const device::DeviceParams& params) {
    std::string line;
    std::size_t line_no = 0;
    const auto next_line = [&]() {
        if (!std::getline(is, line)) {
            throw FormatError("xbar", "crossbar CSV truncated at line " +
                                          std::to_string(line_no + 1));
        }
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
    };
    next_line();
    if (line.rfind("rows,cols,wire_resistance", 0) != 0) {
        throw FormatError("xbar", "crossbar CSV line 1: expected header rows,cols,wire_resistance");
    }
    next_line();
    const auto dims = split_csv_line(line);
    if (dims.size() != 3) {
        throw FormatError("xbar", "crossbar CSV line 2: expected three values");
    }
    const double m_d = parse_number(dims[0], line_no);
    const double n_d = parse_number(dims[1], line_no);
    if (!(m_d >= 1.0 && n_d >= 1.0) || m_d != std::floor(m_d) || n_d != std::floor(n_d)) {
        throw FormatError("xbar", "crossbar CSV line 2: bad dimensions");
    }
    CrossbarGeometry g{static_cast<std::size_t>(m_d), static_cast<std::size_t>(n_d),
                       parse_number(dims[2], line_no)};
    std::vector<double> states;
    states.reserve(g.rows * g.cols);
    for (std::size_t i = 0; i < g.rows; ++i) {
        next_line();
        const auto cells = split_csv_line(line);
        if (cells.size() != g.cols) {
            throw FormatError("xbar", "crossbar CSV line " + std::to_string(line_no) +
                                          ": expected " + std::to_string(g.cols) + " values");
        }
        for (const auto& cell : cells) {
            states.push_back(parse_number(cell, line_no));
        }
    }
    try {
        return Crossbar(g, params, std::move(states));
    } catch (const InvalidInput& e) {
        throw FormatError("xbar", std::string("crossbar CSV: ") + e.what());
    }
}

}  // namespace memcore::xbar
