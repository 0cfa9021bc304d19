#pragma once

// Generalized memristor model: hyperbolic-sine conduction, exponential
// threshold drive and an exponential-decay motion window on the state x.

namespace memcore::device {

struct DeviceParams {
    double vp = 1.3;     // positive switching threshold [V]
    double vn = 1.3;     // negative switching threshold magnitude [V]
    double ap = 5800.0;  // [1/s]
    double an = 5800.0;  // [1/s]
    double xp = 0.9995;
    double xn = 0.9995;
    double alpha_p = 3.0;
    double alpha_n = 3.0;
    double a1 = 0.002;   // [A]
    double a2 = 0.002;   // [A]
    double b = 0.05;     // [1/V]
    double x0 = 0.001;
    double x_floor = 0.001;  // lower state clamp; upper clamp is 1

    /// Throws InvalidInput if any constant is out of range.
    void validate() const;

    /// Largest evaluation voltage magnitude that cannot move the state.
    [[nodiscard]] double read_limit() const noexcept { return vp < vn ? vp : vn; }

    /// V->0 slope of I(V) per unit state: a1*b.
    [[nodiscard]] double unit_conductance() const noexcept { return a1 * b; }
};

struct MemristorState {
    double x = 0.001;
};

/// I(V) = a1*x*sinh(bV) for V >= 0, a2*x*sinh(bV) otherwise.
[[nodiscard]] double device_current(const DeviceParams& p, double x, double v);

/// 1 / (a1*b*x), the V->0 limit of V/I.
[[nodiscard]] double small_signal_resistance(const DeviceParams& p, double x);

/// Threshold drive g(V); zero on [-Vn, Vp].
[[nodiscard]] double threshold_drive(const DeviceParams& p, double v) noexcept;

/// Motion window f(x) for the polarity of v.
[[nodiscard]] double motion_window(const DeviceParams& p, double x, double v) noexcept;

/// dx/dt = g(V) * f(x).
[[nodiscard]] double state_derivative(const DeviceParams& p, double x, double v);

/// Clamp x into [x_floor, 1].
[[nodiscard]] double clamp_state(const DeviceParams& p, double x) noexcept;

struct PulseResult {
    MemristorState state;
    bool clamped = false;  // the integration hit x_floor or 1
};

/// Fixed-step explicit Euler integration of a constant-voltage pulse.  The last
/// step is shortened so the pulse lasts exactly `duration`.
[[nodiscard]] PulseResult apply_pulse_detailed(const DeviceParams& p, MemristorState s, double v,
                                               double duration, double dt);

[[nodiscard]] MemristorState apply_pulse(const DeviceParams& p, MemristorState s, double v,
                                         double duration, double dt);

/// apply_pulse_detailed with g(v) supplied by the caller, for loops that drive
/// many devices with the same amplitude.
[[nodiscard]] PulseResult apply_drive(const DeviceParams& p, MemristorState s, double v,
                                      double drive, double duration, double dt);

/// Time for a constant-voltage pulse to carry the state from `from` to `to`,
/// integrated with step dt.  Returns a negative value if `to` is not reached
/// within `limit` seconds.
[[nodiscard]] double switching_time(const DeviceParams& p, double from, double to, double v,
                                    double dt, double limit);

}  // namespace memcore::device
