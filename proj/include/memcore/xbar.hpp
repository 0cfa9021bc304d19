#pragma once

// Crossbar circuit evaluation.
//
// Wire topology: row i is a chain  driver -> r(i,0) -> ... -> r(i,N-1)  and
// column j is a chain  c(0,j) -> ... -> c(M-1,j) -> virtual ground, with one
// wire segment of resistance Rw per arrow.  Memristor (i,j) bridges r(i,j)
// and c(i,j).  The 2MN node voltages are the unknowns.

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "memcore/device.hpp"
#include "memcore/matrix.hpp"

namespace memcore::xbar {

struct CrossbarGeometry {
    std::size_t rows = 1;
    std::size_t cols = 1;
    double wire_resistance = 1.5;  // per segment [ohm]

    void validate() const;
};

class Crossbar {
public:
    Crossbar(CrossbarGeometry geometry, device::DeviceParams params, double x_init);
    Crossbar(CrossbarGeometry geometry, device::DeviceParams params, std::vector<double> states);

    [[nodiscard]] std::size_t rows() const noexcept { return geometry_.rows; }
    [[nodiscard]] std::size_t cols() const noexcept { return geometry_.cols; }
    [[nodiscard]] const CrossbarGeometry& geometry() const noexcept { return geometry_; }
    [[nodiscard]] const device::DeviceParams& params() const noexcept { return params_; }

    [[nodiscard]] double x(std::size_t i, std::size_t j) const noexcept {
        return states_[i * geometry_.cols + j];
    }
    [[nodiscard]] device::MemristorState state(std::size_t i, std::size_t j) const noexcept {
        return {x(i, j)};
    }
    /// Throws InvalidInput if x is outside [x_floor, 1].
    void set_x(std::size_t i, std::size_t j, double x);
    void set_state(std::size_t i, std::size_t j, device::MemristorState s) { set_x(i, j, s.x); }

    /// Linearized conductance a1*b*x of device (i,j).
    [[nodiscard]] double conductance(std::size_t i, std::size_t j) const noexcept {
        return params_.unit_conductance() * x(i, j);
    }

    [[nodiscard]] std::span<const double> states() const noexcept { return states_; }

    void set_wire_resistance(double rw);

    /// The same physical array seen from the column drivers: rows and columns
    /// swap and both axes reverse so that drivers sit where the column
    /// op-amps were and the row op-amps become the virtual grounds.
    [[nodiscard]] Crossbar transposed_for_backward() const;

    bool operator==(const Crossbar& other) const noexcept {
        return geometry_.rows == other.geometry_.rows && geometry_.cols == other.geometry_.cols &&
               geometry_.wire_resistance == other.geometry_.wire_resistance &&
               states_ == other.states_;
    }

private:
    CrossbarGeometry geometry_;
    device::DeviceParams params_;
    std::vector<double> states_;
};

enum class ConductionMode { linearized, sinh };

/// line: block Jacobi where each row wire and each column wire is one block,
///       solved exactly (tridiagonal) against the other direction's previous
///       sweep.  node: point Jacobi, one node at a time.
enum class SweepKind { line, node };

struct SolverConfig {
    double tolerance = 1e-9;  // max node-voltage update between sweeps [V]
    std::size_t max_iterations = 100000;
    ConductionMode conduction = ConductionMode::linearized;
    SweepKind sweep = SweepKind::line;
    bool record_nodes = true;  // keep the 2MN node voltages in the solution

    void validate() const;
};

struct NodeSolution {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> row_node_voltages;  // M*N, row-major; empty if not recorded
    std::vector<double> col_node_voltages;  // M*N, row-major; empty if not recorded
    std::vector<double> column_currents;    // N
    std::size_t iterations = 0;
    double residual = 0.0;

    [[nodiscard]] double row_v(std::size_t i, std::size_t j) const {
        return row_node_voltages.at(i * cols + j);
    }
    [[nodiscard]] double col_v(std::size_t i, std::size_t j) const {
        return col_node_voltages.at(i * cols + j);
    }
};

/// Iterative nodal solve.  Rows start at their drive voltage, columns at 0 V.
/// Throws ConvergenceError if max_iterations is exhausted and OverdriveError if
/// any device would see more than the read limit.
[[nodiscard]] NodeSolution solve_jacobi(const Crossbar& xb, std::span<const double> inputs,
                                        const SolverConfig& cfg = {});

/// Direct dense solve of the linearized 2MN nodal system (Eigen LLT).
/// Correctness oracle for solve_jacobi; limited to 2MN <= 20000.
[[nodiscard]] NodeSolution solve_dense(const Crossbar& xb, std::span<const double> inputs);

inline constexpr std::size_t kDenseNodeLimit = 20000;

/// Exact weights^T * inputs for an M x n weight matrix.
[[nodiscard]] std::vector<double> ideal_forward(const Matrix& weights,
                                                std::span<const double> inputs);

/// CSV grid: header "rows,cols,wire_resistance", one line with those values,
/// then M lines of N state values.
void write_csv(const Crossbar& xb, std::ostream& os);
[[nodiscard]] Crossbar read_csv(std::istream& is, const device::DeviceParams& params);

}  // namespace memcore::xbar
