#include "memcore/device.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "memcore/error.hpp"

namespace memcore::device {

namespace {

void require_finite(double v, const char* what) {
    if (!std::isfinite(v)) {
        throw InvalidInput("device", std::string("non-finite ") + what);
    }
}

}  // namespace

void DeviceParams::validate() const {
    const auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
    const auto unit_open = [](double v) { return std::isfinite(v) && v > 0.0 && v < 1.0; };
    if (!(positive(vp) && positive(vn) && positive(ap) && positive(an) && positive(alpha_p) &&
          positive(alpha_n) && positive(a1) && positive(a2) && positive(b))) {
        throw InvalidInput("device", "Vp, Vn, Ap, An, ap, an, a1, a2, b must be positive");
    }
    if (!(unit_open(xp) && unit_open(xn) && unit_open(x0))) {
        throw InvalidInput("device", "xp, xn, x0 must lie in (0, 1)");
    }
    if (!unit_open(x_floor)) {
        throw InvalidInput("device", "x_floor must lie in (0, 1)");
    }
}

double device_current(const DeviceParams& p, double x, double v) {
    require_finite(x, "state");
    require_finite(v, "voltage");
    const double a = v >= 0.0 ? p.a1 : p.a2;
    return a * x * std::sinh(p.b * v);
}

double small_signal_resistance(const DeviceParams& p, double x) {
    if (!(x > 0.0) || !std::isfinite(x)) {
        throw InvalidInput("device", "small-signal resistance needs x > 0");
    }
    return 1.0 / (p.a1 * p.b * x);
}

double threshold_drive(const DeviceParams& p, double v) noexcept {
    if (v > p.vp) {
        return p.ap * (std::exp(v) - std::exp(p.vp));
    }
    if (v < -p.vn) {
        return -p.an * (std::exp(-v) - std::exp(p.vn));
    }
    return 0.0;
}

double motion_window(const DeviceParams& p, double x, double v) noexcept {
    if (v > 0.0) {
        if (x < p.xp) {
            return 1.0;
        }
        return std::exp(-p.alpha_p * (x - p.xp)) * ((p.xp - x) / (1.0 - p.xp) + 1.0);
    }
    if (v < 0.0) {
        if (x > 1.0 - p.xn) {
            return 1.0;
        }
        return std::exp(p.alpha_n * (x + p.xn - 1.0)) * (x / (1.0 - p.xn));
    }
    return 0.0;
}

double state_derivative(const DeviceParams& p, double x, double v) {
    require_finite(x, "state");
    require_finite(v, "voltage");
    const double g = threshold_drive(p, v);
    if (g == 0.0) {
        return 0.0;
    }
    return g * motion_window(p, x, v);
}

double clamp_state(const DeviceParams& p, double x) noexcept {
    return std::clamp(x, p.x_floor, 1.0);
}

PulseResult apply_pulse_detailed(const DeviceParams& p, MemristorState s, double v,
                                 double duration, double dt) {
    require_finite(v, "voltage");
    require_finite(duration, "duration");
    if (duration < 0.0) {
        throw InvalidInput("device", "pulse duration must be >= 0");
    }
    PulseResult out{s, false};
    if (duration == 0.0) {
        return out;
    }
    if (!(dt > 0.0) || !std::isfinite(dt)) {
        throw InvalidInput("device", "pulse step dt must be > 0");
    }
    return apply_drive(p, s, v, threshold_drive(p, v), duration, dt);
}

PulseResult apply_drive(const DeviceParams& p, MemristorState s, double v, double drive,
                        double duration, double dt) {
    PulseResult out{s, false};
    const double g = drive;
    if (g == 0.0 || duration == 0.0) {
        return out;
    }
    double x = s.x;
    double t = 0.0;
    while (t < duration) {
        const double h = std::min(dt, duration - t);
        const double next = x + h * g * motion_window(p, x, v);
        x = clamp_state(p, next);
        if (x != next) {
            out.clamped = true;
        }
        t += h;
        // Clamped against the rail the pulse is pushing toward: nothing left to do.
        if ((g > 0.0 && x >= 1.0) || (g < 0.0 && x <= p.x_floor)) {
            break;
        }
    }
    out.state.x = x;
    return out;
}

MemristorState apply_pulse(const DeviceParams& p, MemristorState s, double v, double duration,
                           double dt) {
    return apply_pulse_detailed(p, s, v, duration, dt).state;
}

double switching_time(const DeviceParams& p, double from, double to, double v, double dt,
                      double limit) {
    if (!(dt > 0.0)) {
        throw InvalidInput("device", "switching_time needs dt > 0");
    }
    double x = clamp_state(p, from);
    const bool rising = to > from;
    double t = 0.0;
    while (t < limit) {
        if (rising ? x >= to : x <= to) {
            return t;
        }
        const double rate = state_derivative(p, x, v);
        const double next = clamp_state(p, x + dt * rate);
        // Interpolate inside the step that crosses the target.
        if (rising ? next >= to : next <= to) {
            return t + dt * (to - x) / (next - x);
        }
        if (next == x) {
            return -1.0;
        }
        x = next;
        t += dt;
    }
    return -1.0;
}

}  // namespace memcore::device
